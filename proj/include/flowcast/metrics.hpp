#ifndef FLOWCAST_METRICS_HPP
#define FLOWCAST_METRICS_HPP

#include <optional>
#include <string>
#include <vector>

namespace flowcast {

/**
 * Per-basin evaluation metrics over paired observed/simulated series.
 * A metric that is mathematically undefined for the pair (zero observed
 * variance, zero-flow segment, too few points) is absent, never fabricated.
 */
struct MetricReport {
    std::optional<double> bias_pct;
    std::optional<double> nse;
    std::optional<double> flv; // percent bias, bottom 30% of observed flow
    std::optional<double> fhv; // percent bias, top 2% of observed flow
    std::optional<double> corr;
    std::optional<double> kge;
};

/** Hydrologic signatures of one basin. */
struct SignatureReport {
    std::optional<double> acf1;
    std::optional<double> baseflow_index;
    std::optional<double> xi;    // precipitation seasonality
    std::optional<double> gamma; // TWSA inter/intra-annual variability ratio
};

/** 1 - sum((sim-obs)^2) / sum((obs-mean)^2); needs >= 2 pairs and observed
 *  variance > 0. Pairs with NaN on either side are skipped. */
std::optional<double> nse(const std::vector<double>& obs, const std::vector<double>& sim);

/** 100 * sum(sim-obs) / sum(obs); undefined when sum(obs) is 0. */
std::optional<double> bias_pct(const std::vector<double>& obs, const std::vector<double>& sim);

/** bias_pct restricted to time steps whose observed flow ranks in the top
 *  2%; selection is by rank on observations only, in linear space, and
 *  needs >= 50 pairs. */
std::optional<double> fhv(const std::vector<double>& obs, const std::vector<double>& sim);

/** Same restricted to the bottom 30% of observed flow (not log space). */
std::optional<double> flv(const std::vector<double>& obs, const std::vector<double>& sim);

/** Pearson correlation; undefined when either variance is 0. */
std::optional<double> corr(const std::vector<double>& obs, const std::vector<double>& sim);

/** 1 - sqrt((r-1)^2 + (sd_sim/sd_obs-1)^2 + (mean_sim/mean_obs-1)^2). */
std::optional<double> kge(const std::vector<double>& obs, const std::vector<double>& sim);

MetricReport evaluate_metrics(const std::vector<double>& obs, const std::vector<double>& sim);

/** Lag-1 sample autocorrelation; needs >= 3 values and variance > 0. */
std::optional<double> acf1(const std::vector<double>& series);

/**
 * Baseflow index via the three-pass Lyne-Hollick digital filter
 * (a = 0.925, 30-sample reflected padding at both ends, baseflow clipped
 * to the hydrograph). Needs >= 60 nonnegative days with positive total.
 */
std::optional<double> baseflow_index(const std::vector<double>& discharge);

/**
 * Precipitation seasonality: annual sinusoids are fitted to daily precip
 * and temperature, xi = delta_p * cos(phase difference), clipped to
 * [-1,1]; 0 when precipitation (or temperature) has no annual cycle.
 * Series are daily and need >= 365 days.
 */
std::optional<double> seasonality_xi(const std::vector<double>& precip,
                                     const std::vector<double>& temperature);

/**
 * TWSA variability ratio from a monthly series (groups of 12 starting at
 * index 0; a trailing partial year is ignored): variance of annual means
 * over the mean within-year variance. Needs >= 3 complete years; undefined
 * when the intra-annual variance is 0.
 */
std::optional<double> twsa_gamma(const std::vector<double>& monthly);

// --- aggregation ------------------------------------------------------------

struct AggregateStat {
    std::string metric;
    std::optional<double> median; // over defined values
    std::size_t defined = 0;
    std::size_t undefined = 0;
};

/** Median of the defined values (absent if none are defined). */
std::optional<double> median_defined(const std::vector<std::optional<double>>& values);

/**
 * Empirical CDF: sorted (value, fraction) pairs where fraction counts
 * defined values <= value over the TOTAL count, so the last fraction is
 * defined/total (undefined entries keep the curve below 1).
 */
std::vector<std::pair<double, double>> cdf_table(const std::vector<std::optional<double>>& values);

std::vector<AggregateStat> aggregate_reports(const std::vector<MetricReport>& reports);

} // namespace flowcast

#endif // FLOWCAST_METRICS_HPP
