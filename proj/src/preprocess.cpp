#include "flowcast/preprocess.hpp"

#include "flowcast/errors.hpp"

#include <cmath>
#include <iostream>

namespace flowcast {

namespace {
constexpr double kSecondsPerDay = 86400.0;

void check_context(const NormalizationContext& ctx) {
    if (!(ctx.basin_area_km2 > 0.0))
        throw ParamError("normalization: basin area must be positive, got " +
                         std::to_string(ctx.basin_area_km2));
    if (!(ctx.mean_annual_precip_mmday > 0.0))
        throw ParamError("normalization: mean annual precipitation must be positive, got " +
                         std::to_string(ctx.mean_annual_precip_mmday));
    if (!(ctx.unit_to_m3s > 0.0))
        throw ParamError("normalization: unit conversion must be positive");
}
} // namespace

double discharge_to_mmday(double q_native, double area_km2, double unit_to_m3s) {
    // native -> m^3/s -> m^3/day, spread over the basin area, in mm.
    const double m3_per_day = q_native * unit_to_m3s * kSecondsPerDay;
    return m3_per_day / (area_km2 * 1e6) * 1e3;
}

double discharge_to_dimensionless_value(double q_native, const NormalizationContext& ctx) {
    if (std::isnan(q_native)) return q_native;
    return discharge_to_mmday(q_native, ctx.basin_area_km2, ctx.unit_to_m3s) /
           ctx.mean_annual_precip_mmday;
}

double dimensionless_to_native_value(double q_dimless, const NormalizationContext& ctx) {
    if (std::isnan(q_dimless)) return q_dimless;
    const double mmday = q_dimless * ctx.mean_annual_precip_mmday;
    return mmday * (ctx.basin_area_km2 * 1e6) / 1e3 / kSecondsPerDay / ctx.unit_to_m3s;
}

std::vector<double> discharge_to_dimensionless(const std::vector<double>& q,
                                               const NormalizationContext& ctx) {
    check_context(ctx);
    std::vector<double> out(q.size());
    for (std::size_t i = 0; i < q.size(); ++i)
        out[i] = discharge_to_dimensionless_value(q[i], ctx);
    return out;
}

double gamma_transform_value(double v) {
    if (std::isnan(v)) return v;
    if (v < 0.0)
        throw DomainError("gamma_transform: negative value " + std::to_string(v));
    return std::log10(std::sqrt(v) + 0.1);
}

std::vector<double> gamma_transform(const std::vector<double>& v) {
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = gamma_transform_value(v[i]);
    return out;
}

double gamma_inverse_value(double v_star) {
    if (std::isnan(v_star)) return v_star;
    const double s = std::pow(10.0, v_star) - 0.1;
    const double clipped = s > 0.0 ? s : 0.0;
    return clipped * clipped;
}

std::vector<double> gamma_inverse(const std::vector<double>& v_star) {
    std::vector<double> out(v_star.size());
    for (std::size_t i = 0; i < v_star.size(); ++i) out[i] = gamma_inverse_value(v_star[i]);
    return out;
}

std::size_t ScalerStats::kept_count() const {
    std::size_t n = 0;
    for (bool k : kept)
        if (k) ++n;
    return n;
}

double ScalerStats::apply_one(std::size_t var, double x) const {
    if (std::isnan(x)) return x;
    return (x - mean[var]) / stddev[var];
}

double ScalerStats::unapply_one(std::size_t var, double x) const {
    if (std::isnan(x)) return x;
    return x * stddev[var] + mean[var];
}

ScalerStats fit_scaler(const Matrix& samples, const std::vector<std::string>& names,
                       std::string fitted_on) {
    if (names.size() != samples.cols())
        throw ShapeError("fit_scaler: " + std::to_string(names.size()) + " names for " +
                         std::to_string(samples.cols()) + " columns");
    const std::size_t n_vars = samples.cols();
    ScalerStats stats;
    stats.names = names;
    stats.fitted_on = std::move(fitted_on);
    stats.mean.resize(n_vars, 0.0);
    stats.stddev.resize(n_vars, 1.0);
    stats.kept.resize(n_vars, true);

    for (std::size_t j = 0; j < n_vars; ++j) {
        double sum = 0.0;
        std::size_t count = 0;
        for (std::size_t i = 0; i < samples.rows(); ++i) {
            const double v = samples(i, j);
            if (std::isnan(v)) continue;
            sum += v;
            ++count;
        }
        if (count == 0) {
            stats.kept[j] = false;
            std::cerr << "fit_scaler: variable '" << names[j] << "' has no data; dropped\n";
            continue;
        }
        const double mean = sum / static_cast<double>(count);
        double ss = 0.0;
        for (std::size_t i = 0; i < samples.rows(); ++i) {
            const double v = samples(i, j);
            if (std::isnan(v)) continue;
            ss += (v - mean) * (v - mean);
        }
        const double var = ss / static_cast<double>(count);
        stats.mean[j] = mean;
        if (var <= 0.0) {
            stats.kept[j] = false;
            std::cerr << "fit_scaler: variable '" << names[j] << "' has zero variance; dropped\n";
        } else {
            stats.stddev[j] = std::sqrt(var);
        }
    }
    return stats;
}

Matrix apply_scaler(const Matrix& x, const ScalerStats& stats) {
    if (x.cols() != stats.names.size())
        throw ShapeError("apply_scaler: matrix has " + std::to_string(x.cols()) +
                         " columns, scaler was fitted on " + std::to_string(stats.names.size()));
    Matrix out(x.rows(), stats.kept_count());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        std::size_t oj = 0;
        for (std::size_t j = 0; j < x.cols(); ++j) {
            if (!stats.kept[j]) continue;
            out(i, oj++) = stats.apply_one(j, x(i, j));
        }
    }
    return out;
}

} // namespace flowcast
