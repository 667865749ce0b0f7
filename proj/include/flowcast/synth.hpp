#ifndef FLOWCAST_SYNTH_HPP
#define FLOWCAST_SYNTH_HPP

#include "flowcast/dataset.hpp"
#include "flowcast/numerics.hpp"

#include <string>
#include <utility>
#include <vector>

namespace flowcast {

enum class SynthRegime { HighAcf, Flashy, Snowy };

SynthRegime parse_regime(const std::string& name);
std::string regime_name(SynthRegime regime);

/**
 * Ground-truth parameters of one toy basin. The water balance is:
 * precipitation (optionally through a degree-day snow bucket) splits into
 * a quick-runoff fraction and recharge to a linear reservoir; discharge is
 * quickflow + reservoir outflow, modulated by a slow unobserved AR(1)
 * storage factor and lognormal observation noise.
 */
struct SynthParams {
    double area_km2 = 500.0;
    double reservoir_rate = 0.05;  // fraction of storage released per day
    double quick_fraction = 0.1;   // immediate runoff share of input
    double runoff_ratio = 0.45;    // long-term share of precip becoming input
    double wet_prob = 0.4;         // base wet-day probability
    double rain_mean_mm = 8.0;     // mean rainfall on wet days
    double precip_phase = 0.0;     // radians vs the temperature cycle
    double precip_seasonality = 0.3;
    double temp_mean_c = 10.0;
    double temp_amp_c = 10.0;
    bool snow = false;
    double degree_day_factor = 3.0; // mm/degC/day melt
    double latent_ar = 0.0;         // unobserved storage factor persistence
    double latent_sigma = 0.0;
    double obs_noise_sigma = 0.0;
    double initial_storage_mm = 40.0;
};

struct SynthOptions {
    int n_basins = 20;
    SynthRegime regime = SynthRegime::HighAcf;
    int n_years = 6;
    long start_date = 0;       // 0 = default (1988-10-01)
    double noise_scale = 1.0;  // scales latent and observation noise (0 = clean)
};

/** Draw one basin's parameters for a regime. */
SynthParams draw_params(SynthRegime regime, SeededRng& rng, double noise_scale);

/**
 * Run the toy water balance over given daily precipitation (mm/day) and
 * mean temperature (degC). Deterministic when latent/observation noise
 * are zero. Returns discharge as a basin depth in mm/day.
 */
std::vector<double> simulate_discharge_mmday(const SynthParams& params,
                                             const std::vector<double>& precip_mmday,
                                             const std::vector<double>& tmean_c,
                                             SeededRng& rng);

/**
 * Generate complete basin records (forcing + discharge in native cfs +
 * attributes derived from the generator parameters). Deterministic per
 * rng seed: basin i uses the fork(i) stream.
 */
std::pair<std::vector<BasinRecord>, std::vector<SynthParams>>
synth_generate(const SynthOptions& options, SeededRng& rng);

} // namespace flowcast

#endif // FLOWCAST_SYNTH_HPP
