#include "flowcast/metrics.hpp"

#include "flowcast/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace flowcast {

namespace {

struct Pairs {
    std::vector<double> obs;
    std::vector<double> sim;
};

Pairs valid_pairs(const std::vector<double>& obs, const std::vector<double>& sim) {
    if (obs.size() != sim.size())
        throw ShapeError("metrics: series lengths differ (" + std::to_string(obs.size()) +
                         " vs " + std::to_string(sim.size()) + ")");
    Pairs p;
    for (std::size_t i = 0; i < obs.size(); ++i) {
        if (std::isnan(obs[i]) || std::isnan(sim[i])) continue;
        p.obs.push_back(obs[i]);
        p.sim.push_back(sim[i]);
    }
    return p;
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

/** Percent bias over the subset of pairs selected by `keep`. */
std::optional<double> segment_bias(const Pairs& p, const std::vector<bool>& keep) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < p.obs.size(); ++i) {
        if (!keep[i]) continue;
        num += p.sim[i] - p.obs[i];
        den += p.obs[i];
    }
    if (den == 0.0) return std::nullopt;
    return 100.0 * num / den;
}

} // namespace

std::optional<double> nse(const std::vector<double>& obs, const std::vector<double>& sim) {
    const Pairs p = valid_pairs(obs, sim);
    if (p.obs.size() < 2) return std::nullopt;
    const double mean = mean_of(p.obs);
    double ss_err = 0.0, ss_obs = 0.0;
    for (std::size_t i = 0; i < p.obs.size(); ++i) {
        ss_err += (p.sim[i] - p.obs[i]) * (p.sim[i] - p.obs[i]);
        ss_obs += (p.obs[i] - mean) * (p.obs[i] - mean);
    }
    if (ss_obs == 0.0) return std::nullopt;
    return 1.0 - ss_err / ss_obs;
}

std::optional<double> bias_pct(const std::vector<double>& obs, const std::vector<double>& sim) {
    const Pairs p = valid_pairs(obs, sim);
    if (p.obs.empty()) return std::nullopt;
    std::vector<bool> all(p.obs.size(), true);
    return segment_bias(p, all);
}

namespace {

/**
 * Rank-based flow segment: the k highest (or lowest) observed values with
 * ties at the threshold included. Selection depends on observations only.
 */
std::optional<double> tail_bias(const std::vector<double>& obs, const std::vector<double>& sim,
                                double fraction, bool top) {
    const Pairs p = valid_pairs(obs, sim);
    const std::size_t n = p.obs.size();
    if (n < 50) return std::nullopt;
    std::size_t k = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));
    if (k < 1) k = 1;
    std::vector<double> sorted = p.obs;
    std::sort(sorted.begin(), sorted.end());
    const double threshold = top ? sorted[n - k] : sorted[k - 1];
    std::vector<bool> keep(n);
    for (std::size_t i = 0; i < n; ++i)
        keep[i] = top ? p.obs[i] >= threshold : p.obs[i] <= threshold;
    return segment_bias(p, keep);
}

} // namespace

std::optional<double> fhv(const std::vector<double>& obs, const std::vector<double>& sim) {
    return tail_bias(obs, sim, 0.02, true);
}

std::optional<double> flv(const std::vector<double>& obs, const std::vector<double>& sim) {
    return tail_bias(obs, sim, 0.30, false);
}

std::optional<double> corr(const std::vector<double>& obs, const std::vector<double>& sim) {
    const Pairs p = valid_pairs(obs, sim);
    if (p.obs.size() < 2) return std::nullopt;
    const double mo = mean_of(p.obs), ms = mean_of(p.sim);
    double so = 0.0, ss = 0.0, cross = 0.0;
    for (std::size_t i = 0; i < p.obs.size(); ++i) {
        const double a = p.obs[i] - mo, b = p.sim[i] - ms;
        so += a * a;
        ss += b * b;
        cross += a * b;
    }
    if (so == 0.0 || ss == 0.0) return std::nullopt;
    return cross / std::sqrt(so * ss);
}

std::optional<double> kge(const std::vector<double>& obs, const std::vector<double>& sim) {
    const Pairs p = valid_pairs(obs, sim);
    if (p.obs.size() < 2) return std::nullopt;
    const double mo = mean_of(p.obs), ms = mean_of(p.sim);
    if (mo == 0.0) return std::nullopt;
    double so = 0.0, ss = 0.0, cross = 0.0;
    for (std::size_t i = 0; i < p.obs.size(); ++i) {
        const double a = p.obs[i] - mo, b = p.sim[i] - ms;
        so += a * a;
        ss += b * b;
        cross += a * b;
    }
    if (so == 0.0 || ss == 0.0) return std::nullopt;
    const double r = cross / std::sqrt(so * ss);
    const double alpha = std::sqrt(ss / so); // sd ratio (same n, cancels)
    const double beta = ms / mo;
    return 1.0 - std::sqrt((r - 1.0) * (r - 1.0) + (alpha - 1.0) * (alpha - 1.0) +
                           (beta - 1.0) * (beta - 1.0));
}

MetricReport evaluate_metrics(const std::vector<double>& obs, const std::vector<double>& sim) {
    MetricReport r;
    r.bias_pct = bias_pct(obs, sim);
    r.nse = nse(obs, sim);
    r.flv = flv(obs, sim);
    r.fhv = fhv(obs, sim);
    r.corr = corr(obs, sim);
    r.kge = kge(obs, sim);
    return r;
}

std::optional<double> acf1(const std::vector<double>& series) {
    std::vector<double> x;
    for (double v : series)
        if (!std::isnan(v)) x.push_back(v);
    const std::size_t n = x.size();
    if (n < 3) return std::nullopt;
    const double mean = mean_of(x);
    double var = 0.0, cov = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += (x[i] - mean) * (x[i] - mean);
    for (std::size_t i = 0; i + 1 < n; ++i) cov += (x[i] - mean) * (x[i + 1] - mean);
    if (var == 0.0) return std::nullopt;
    return cov / var;
}

namespace {

/** One Lyne-Hollick pass over q, returning the clipped baseflow. */
std::vector<double> lyne_hollick_pass(const std::vector<double>& q, double a, bool forward) {
    const std::size_t n = q.size();
    std::vector<double> base(n);
    double f = 0.0; // quickflow filter state
    const double c = (1.0 + a) / 2.0;
    if (forward) {
        base[0] = q[0];
        for (std::size_t i = 1; i < n; ++i) {
            f = a * f + c * (q[i] - q[i - 1]);
            const double fq = std::clamp(f, 0.0, q[i]);
            base[i] = q[i] - fq;
        }
    } else {
        base[n - 1] = q[n - 1];
        f = 0.0;
        for (std::size_t i = n - 1; i-- > 0;) {
            f = a * f + c * (q[i] - q[i + 1]);
            const double fq = std::clamp(f, 0.0, q[i]);
            base[i] = q[i] - fq;
        }
    }
    return base;
}

} // namespace

std::optional<double> baseflow_index(const std::vector<double>& discharge) {
    std::vector<double> q;
    for (double v : discharge) {
        if (std::isnan(v)) continue;
        if (v < 0.0)
            throw DomainError("baseflow_index: negative discharge " + std::to_string(v));
        q.push_back(v);
    }
    const std::size_t n = q.size();
    if (n < 60) return std::nullopt;
    double total = 0.0;
    for (double v : q) total += v;
    if (total == 0.0) return std::nullopt;

    // 30-sample reflected padding at both ends keeps the warm-up transient
    // of each pass out of the scored region.
    const std::size_t pad = 30;
    std::vector<double> padded;
    padded.reserve(n + 2 * pad);
    for (std::size_t i = pad; i >= 1; --i) padded.push_back(q[i]);
    padded.insert(padded.end(), q.begin(), q.end());
    for (std::size_t i = 2; i <= pad + 1; ++i) padded.push_back(q[n - i]);

    const double a = 0.925;
    std::vector<double> b = lyne_hollick_pass(padded, a, true);
    b = lyne_hollick_pass(b, a, false);
    b = lyne_hollick_pass(b, a, true);

    double base_total = 0.0;
    for (std::size_t i = 0; i < n; ++i) base_total += std::min(b[pad + i], q[i]);
    return base_total / total;
}

namespace {

struct Sinusoid {
    double mean = 0.0;
    double amplitude = 0.0; // sqrt(A^2+B^2)
    double phase = 0.0;     // omega * s, from y = mean + amp*sin(omega t - phase)
    bool ok = false;
};

Sinusoid fit_annual_sinusoid(const std::vector<double>& y) {
    const double omega = 2.0 * std::numbers::pi / 365.0;
    // Least squares on [1, sin, cos].
    double s11 = 0, s12 = 0, s13 = 0, s22 = 0, s23 = 0, s33 = 0;
    double t1 = 0, t2 = 0, t3 = 0;
    std::size_t count = 0;
    for (std::size_t t = 0; t < y.size(); ++t) {
        if (std::isnan(y[t])) continue;
        const double s = std::sin(omega * static_cast<double>(t));
        const double c = std::cos(omega * static_cast<double>(t));
        s11 += 1.0;
        s12 += s;
        s13 += c;
        s22 += s * s;
        s23 += s * c;
        s33 += c * c;
        t1 += y[t];
        t2 += y[t] * s;
        t3 += y[t] * c;
        ++count;
    }
    Sinusoid fit;
    if (count < 365) return fit;
    // 3x3 solve by elimination.
    double m[3][4] = {{s11, s12, s13, t1}, {s12, s22, s23, t2}, {s13, s23, s33, t3}};
    for (int col = 0; col < 3; ++col) {
        int piv = col;
        for (int r = col + 1; r < 3; ++r)
            if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
        if (std::abs(m[piv][col]) < 1e-12) return fit;
        std::swap(m[piv], m[col]);
        for (int r = col + 1; r < 3; ++r) {
            const double f = m[r][col] / m[col][col];
            for (int cc = col; cc < 4; ++cc) m[r][cc] -= f * m[col][cc];
        }
    }
    double x[3];
    for (int r = 3; r-- > 0;) {
        double acc = m[r][3];
        for (int cc = r + 1; cc < 3; ++cc) acc -= m[r][cc] * x[cc];
        x[r] = acc / m[r][r];
    }
    fit.mean = x[0];
    const double A = x[1], B = x[2];
    fit.amplitude = std::sqrt(A * A + B * B);
    // y = mean + amp*sin(omega(t-s)): A = amp*cos(omega s), B = -amp*sin(omega s)
    fit.phase = std::atan2(-B, A);
    fit.ok = true;
    return fit;
}

} // namespace

std::optional<double> seasonality_xi(const std::vector<double>& precip,
                                     const std::vector<double>& temperature) {
    if (precip.size() != temperature.size())
        throw ShapeError("seasonality_xi: series lengths differ");
    const Sinusoid p = fit_annual_sinusoid(precip);
    const Sinusoid t = fit_annual_sinusoid(temperature);
    if (!p.ok || !t.ok) return std::nullopt;
    if (!(p.mean > 0.0)) return 0.0;
    const double delta_p = p.amplitude / p.mean;
    if (delta_p < 1e-9) return 0.0;  // evenly distributed rainfall
    if (t.amplitude < 1e-9) return 0.0; // no thermal cycle to compare phase with
    const double xi = delta_p * std::cos(p.phase - t.phase);
    return std::clamp(xi, -1.0, 1.0);
}

std::optional<double> twsa_gamma(const std::vector<double>& monthly) {
    const std::size_t n_years = monthly.size() / 12;
    std::vector<double> annual_mean;
    std::vector<double> intra_var;
    for (std::size_t y = 0; y < n_years; ++y) {
        bool ok = true;
        double sum = 0.0;
        for (std::size_t m = 0; m < 12; ++m) {
            const double v = monthly[y * 12 + m];
            if (std::isnan(v)) {
                ok = false;
                break;
            }
            sum += v;
        }
        if (!ok) continue;
        const double mean = sum / 12.0;
        double ss = 0.0;
        for (std::size_t m = 0; m < 12; ++m) {
            const double d = monthly[y * 12 + m] - mean;
            ss += d * d;
        }
        annual_mean.push_back(mean);
        intra_var.push_back(ss / 11.0);
    }
    if (annual_mean.size() < 3) return std::nullopt;

    const double grand = mean_of(annual_mean);
    double inter = 0.0;
    for (double v : annual_mean) inter += (v - grand) * (v - grand);
    inter /= static_cast<double>(annual_mean.size() - 1);
    const double intra = mean_of(intra_var);
    if (intra == 0.0) return std::nullopt;
    return inter / intra;
}

std::optional<double> median_defined(const std::vector<std::optional<double>>& values) {
    std::vector<double> v;
    for (const auto& o : values)
        if (o) v.push_back(*o);
    if (v.empty()) return std::nullopt;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<std::pair<double, double>> cdf_table(const std::vector<std::optional<double>>& values) {
    std::vector<double> v;
    for (const auto& o : values)
        if (o) v.push_back(*o);
    std::sort(v.begin(), v.end());
    std::vector<std::pair<double, double>> table;
    const double total = static_cast<double>(values.size());
    for (std::size_t k = 0; k < v.size(); ++k)
        table.emplace_back(v[k], static_cast<double>(k + 1) / total);
    return table;
}

std::vector<AggregateStat> aggregate_reports(const std::vector<MetricReport>& reports) {
    struct Field {
        const char* name;
        std::optional<double> MetricReport::* member;
    };
    static const Field kFields[] = {
        {"bias", &MetricReport::bias_pct}, {"nse", &MetricReport::nse},
        {"flv", &MetricReport::flv},       {"fhv", &MetricReport::fhv},
        {"corr", &MetricReport::corr},     {"kge", &MetricReport::kge},
    };
    std::vector<AggregateStat> out;
    for (const Field& f : kFields) {
        AggregateStat stat;
        stat.metric = f.name;
        std::vector<std::optional<double>> column;
        for (const MetricReport& r : reports) column.push_back(r.*(f.member));
        stat.median = median_defined(column);
        for (const auto& o : column)
            o ? ++stat.defined : ++stat.undefined;
        out.push_back(std::move(stat));
    }
    return out;
}

} // namespace flowcast
