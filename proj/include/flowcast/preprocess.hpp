#ifndef FLOWCAST_PREPROCESS_HPP
#define FLOWCAST_PREPROCESS_HPP

#include "flowcast/numerics.hpp"

#include <string>
#include <vector>

namespace flowcast {

/** Conversion factor from cubic feet per second to cubic meters per second. */
inline constexpr double kCfsToM3s = 0.0283168;

/**
 * Per-basin normalization inputs: discharge is first expressed as a depth
 * over the basin (mm/day) and then divided by the training-period mean
 * precipitation so that basins of different size and wetness share a scale.
 */
struct NormalizationContext {
    double basin_area_km2 = 0.0;
    double mean_annual_precip_mmday = 0.0; // training-period mean
    double unit_to_m3s = kCfsToM3s;        // native discharge unit -> m^3/s
};

/** Native discharge -> basin depth in mm/day. */
double discharge_to_mmday(double q_native, double area_km2, double unit_to_m3s = kCfsToM3s);

/**
 * Native discharge -> dimensionless discharge (depth over mean precip).
 * Missing entries (NaN) stay missing. Throws ParamError if the context has
 * a nonpositive area or precipitation.
 */
std::vector<double> discharge_to_dimensionless(const std::vector<double>& q,
                                               const NormalizationContext& ctx);
double discharge_to_dimensionless_value(double q_native, const NormalizationContext& ctx);

/** Inverse of the above, for reporting forecasts in native units. */
double dimensionless_to_native_value(double q_dimless, const NormalizationContext& ctx);

/**
 * Distribution squash for Gamma-shaped variables (discharge, precipitation):
 * v* = log10(sqrt(v) + 0.1). Strictly increasing; v must be >= 0 (NaN passes
 * through as missing).
 */
std::vector<double> gamma_transform(const std::vector<double>& v);
double gamma_transform_value(double v);

/** Inverse transform, clamped at zero: v = (max(10^v* - 0.1, 0))^2. */
std::vector<double> gamma_inverse(const std::vector<double>& v_star);
double gamma_inverse_value(double v_star);

/**
 * Per-variable standardization statistics. Fitted on training-period data
 * only; zero-variance variables are flagged and dropped from the output of
 * apply_scaler.
 */
struct ScalerStats {
    std::vector<std::string> names;
    std::vector<double> mean;
    std::vector<double> stddev;
    std::vector<bool> kept;
    std::string fitted_on; // period descriptor, for provenance

    std::size_t kept_count() const;
    /** Standardize a single value of variable `var`; NaN passes through. */
    double apply_one(std::size_t var, double x) const;
    /** Undo the standardization of variable `var`. */
    double unapply_one(std::size_t var, double x) const;
};

/**
 * Fit means and standard deviations per column of `samples` (one row per
 * observation). Rows containing NaN in a column are skipped for that column.
 */
ScalerStats fit_scaler(const Matrix& samples, const std::vector<std::string>& names,
                       std::string fitted_on);

/**
 * Standardize with previously fitted stats. Output has one column per kept
 * variable, in the original order. NaN entries pass through.
 */
Matrix apply_scaler(const Matrix& x, const ScalerStats& stats);

} // namespace flowcast

#endif // FLOWCAST_PREPROCESS_HPP
