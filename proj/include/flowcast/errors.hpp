#ifndef FLOWCAST_ERRORS_HPP
#define FLOWCAST_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace flowcast {

/** Base class for all library errors. */
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/** Incompatible matrix/vector dimensions. */
struct ShapeError : Error {
    using Error::Error;
};

/** Invalid configuration or function parameter. */
struct ParamError : Error {
    using Error::Error;
};

/** Input value outside the mathematical domain of an operation. */
struct DomainError : Error {
    using Error::Error;
};

/** Non-finite value produced where finite arithmetic was expected. */
struct NumericError : Error {
    using Error::Error;
};

/** Cache/weight pairs out of sync, or an object used in the wrong phase. */
struct StateError : Error {
    using Error::Error;
};

/** Observation window cannot be built at the requested time step. */
struct WindowError : Error {
    using Error::Error;
};

/** Regression fit failed (e.g. rank-deficient design matrix). */
struct FitError : Error {
    using Error::Error;
};

/** Malformed or missing input data. */
struct DataError : Error {
    using Error::Error;
};

/** Malformed experiment configuration. */
struct ConfigError : Error {
    using Error::Error;
};

/** Filesystem failure (missing path, failed write). */
struct IoError : Error {
    using Error::Error;
};

} // namespace flowcast

#endif // FLOWCAST_ERRORS_HPP
