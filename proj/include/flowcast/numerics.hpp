#ifndef FLOWCAST_NUMERICS_HPP
#define FLOWCAST_NUMERICS_HPP

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

namespace flowcast {

/**
 * Dense row-major matrix of doubles.
 *
 * All arithmetic in the library is 64-bit; the gradient checks against
 * finite differences need that headroom.
 */
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);

    /** Build from nested initializer lists; rows must have equal length. */
    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double* row(std::size_t i) { return data_.data() + i * cols_; }
    const double* row(std::size_t i) const { return data_.data() + i * cols_; }

    void fill(double v);
    bool all_finite() const;
    bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    bool operator==(const Matrix& other) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// --- products ---------------------------------------------------------

/** out = a * b. Throws ShapeError if a.cols != b.rows. */
Matrix matmul(const Matrix& a, const Matrix& b);

/** out (+)= a * b into a preallocated matrix; the hot path for training. */
void matmul_into(Matrix& out, const Matrix& a, const Matrix& b, bool accumulate = false);

/** out (+)= a^T * b (used for weight gradients). */
void matmul_at_b_into(Matrix& out, const Matrix& a, const Matrix& b, bool accumulate = false);

/** out (+)= a * b^T (used for input gradients). */
void matmul_a_bt_into(Matrix& out, const Matrix& a, const Matrix& b, bool accumulate = false);

// --- elementwise and broadcast helpers --------------------------------

Matrix transpose(const Matrix& m);
void add_inplace(Matrix& a, const Matrix& b);
void sub_inplace(Matrix& a, const Matrix& b);
void hadamard_inplace(Matrix& a, const Matrix& b);
void scale_inplace(Matrix& a, double s);
/** Adds a 1 x cols row vector to every row of a. */
void add_rowvec_inplace(Matrix& a, const Matrix& row);
/** Returns the 1 x cols vector of column sums. */
Matrix col_sums(const Matrix& m);

// --- activations -------------------------------------------------------

enum class Activation { Sigmoid, Tanh, Relu };

/** Elementwise sigmoid 1/(1+e^-x), tanh, or max(0,x). */
Matrix activate(Activation kind, const Matrix& m);
void activate_inplace(Activation kind, Matrix& m);
double activate_value(Activation kind, double x);

// --- seeded randomness --------------------------------------------------

/**
 * Deterministic random generator: xoshiro256++ seeded through splitmix64.
 *
 * The full algorithm is spelled out in the implementation so that a given
 * seed yields the identical draw sequence on every platform; wrapping a
 * standard-library distribution would not give that guarantee. Used for
 * weight init, dropout masks, minibatch sampling, and synthetic basins.
 */
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed);

    std::uint64_t next_u64();
    /** Uniform double in [0,1) with 53 bits of randomness. */
    double uniform();
    double uniform(double lo, double hi);
    /** Standard normal via Box-Muller (deterministic, caches the spare). */
    double normal();
    /** Uniform index in [0,n). n must be > 0. */
    std::size_t index(std::size_t n);
    /** Derived generator with an independent stream. */
    SeededRng fork(std::uint64_t stream) const;

    std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t seed_;
    std::uint64_t state_[4];
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/**
 * Inverted-dropout mask: entries are 0 with probability 1-keep_prob and
 * 1/keep_prob otherwise, so the expected value of each entry is 1 and the
 * test-time forward pass needs no rescaling.
 */
Matrix bernoulli_mask(SeededRng& rng, std::size_t rows, std::size_t cols, double keep_prob);

// --- least squares ------------------------------------------------------

/**
 * Minimizes ||a x - b||^2 via the normal equations.
 *
 * Throws FitError naming the offending column when the design matrix is
 * rank deficient (e.g. perfectly collinear regressors). Column names are
 * optional and only used for the error message.
 */
std::vector<double> solve_least_squares(const Matrix& a, const std::vector<double>& b,
                                        const std::vector<std::string>* col_names = nullptr);

} // namespace flowcast

#endif // FLOWCAST_NUMERICS_HPP
