#include "flowcast/synth.hpp"

#include "flowcast/errors.hpp"
#include "flowcast/io_util.hpp"
#include "flowcast/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

namespace flowcast {

SynthRegime parse_regime(const std::string& name) {
    if (name == "high_acf") return SynthRegime::HighAcf;
    if (name == "flashy") return SynthRegime::Flashy;
    if (name == "snowy") return SynthRegime::Snowy;
    throw ConfigError("unknown synthetic regime '" + name +
                      "' (expected high_acf, flashy or snowy)");
}

std::string regime_name(SynthRegime regime) {
    switch (regime) {
    case SynthRegime::HighAcf: return "high_acf";
    case SynthRegime::Flashy: return "flashy";
    case SynthRegime::Snowy: return "snowy";
    }
    return "?";
}

SynthParams draw_params(SynthRegime regime, SeededRng& rng, double noise_scale) {
    SynthParams p;
    p.area_km2 = rng.uniform(150.0, 2500.0);
    p.wet_prob = rng.uniform(0.3, 0.5);
    p.rain_mean_mm = rng.uniform(6.0, 12.0);
    p.precip_phase = rng.uniform(-0.6, 0.6);
    p.precip_seasonality = rng.uniform(0.1, 0.5);
    p.temp_mean_c = rng.uniform(6.0, 16.0);
    p.temp_amp_c = rng.uniform(8.0, 14.0);
    p.runoff_ratio = rng.uniform(0.35, 0.6);

    switch (regime) {
    case SynthRegime::HighAcf:
        // Storage-dominated: slow reservoir, little direct runoff, plus a
        // persistent unobserved storage factor the forcings cannot reveal.
        p.reservoir_rate = rng.uniform(0.015, 0.04);
        p.quick_fraction = rng.uniform(0.01, 0.05);
        p.latent_ar = 0.995;
        p.latent_sigma = 0.025 * noise_scale;
        p.obs_noise_sigma = 0.02 * noise_scale;
        break;
    case SynthRegime::Flashy:
        p.reservoir_rate = rng.uniform(0.45, 0.8);
        p.quick_fraction = rng.uniform(0.5, 0.8);
        p.latent_ar = 0.9;
        p.latent_sigma = 0.05 * noise_scale;
        p.obs_noise_sigma = 0.08 * noise_scale;
        break;
    case SynthRegime::Snowy:
        p.reservoir_rate = rng.uniform(0.05, 0.12);
        p.quick_fraction = rng.uniform(0.1, 0.25);
        p.snow = true;
        p.degree_day_factor = rng.uniform(2.0, 4.0);
        p.temp_mean_c = rng.uniform(1.0, 5.0);
        p.temp_amp_c = rng.uniform(10.0, 15.0);
        p.latent_ar = 0.99;
        p.latent_sigma = 0.02 * noise_scale;
        p.obs_noise_sigma = 0.03 * noise_scale;
        break;
    }
    p.initial_storage_mm =
        p.runoff_ratio * p.wet_prob * p.rain_mean_mm / std::max(p.reservoir_rate, 1e-3);
    return p;
}

std::vector<double> simulate_discharge_mmday(const SynthParams& params,
                                             const std::vector<double>& precip_mmday,
                                             const std::vector<double>& tmean_c,
                                             SeededRng& rng) {
    if (precip_mmday.size() != tmean_c.size())
        throw ShapeError("simulate_discharge: forcing series lengths differ");
    const std::size_t n = precip_mmday.size();
    std::vector<double> q(n);
    double storage = params.initial_storage_mm;
    double snowpack = 0.0;
    double latent = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        double rain = params.runoff_ratio * precip_mmday[t];
        double melt = 0.0;
        if (params.snow) {
            if (tmean_c[t] < 0.0) {
                snowpack += rain;
                rain = 0.0;
            } else {
                melt = std::min(snowpack, params.degree_day_factor * tmean_c[t]);
                snowpack -= melt;
            }
        }
        const double input = rain + melt;
        const double quick = params.quick_fraction * input;
        storage += (1.0 - params.quick_fraction) * input;
        const double slow = params.reservoir_rate * storage;
        storage -= slow;

        latent = params.latent_ar * latent + params.latent_sigma * rng.normal();
        double flow = (quick + slow) * std::exp(latent);
        if (params.obs_noise_sigma > 0.0) flow *= std::exp(params.obs_noise_sigma * rng.normal());
        q[t] = flow;
    }
    return q;
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Forcing {
    std::vector<double> prcp, srad, tmax, tmin, vp, dayl;
};

Forcing generate_forcing(const SynthParams& p, long start_date, std::size_t n_days,
                         SeededRng& rng) {
    Forcing f;
    f.prcp.resize(n_days);
    f.srad.resize(n_days);
    f.tmax.resize(n_days);
    f.tmin.resize(n_days);
    f.vp.resize(n_days);
    f.dayl.resize(n_days);
    for (std::size_t i = 0; i < n_days; ++i) {
        int year, month, day;
        civil_from_days(start_date + static_cast<long>(i), year, month, day);
        const long doy = start_date + static_cast<long>(i) - days_from_civil(year, 1, 1);
        // Phase puts the temperature peak around late July.
        const double season = std::sin(kTwoPi * (static_cast<double>(doy) - 110.0) / 365.0);

        const double wet_p =
            std::clamp(p.wet_prob * (1.0 + p.precip_seasonality *
                                               std::sin(kTwoPi * (doy - 110.0) / 365.0 +
                                                        p.precip_phase)),
                       0.02, 0.95);
        double rain = 0.0;
        const double u_wet = rng.uniform();
        const double u_amt = rng.uniform();
        if (u_wet < wet_p) rain = -std::log(1.0 - u_amt) * p.rain_mean_mm;
        f.prcp[i] = rain;

        const double tmean = p.temp_mean_c + p.temp_amp_c * season + 1.5 * rng.normal();
        const double spread = 4.0 + 2.0 * rng.uniform();
        f.tmax[i] = tmean + spread;
        f.tmin[i] = tmean - spread;
        f.srad[i] = std::max(20.0, 180.0 + 130.0 * season + 15.0 * rng.normal());
        // Magnus-style saturation pressure at tmin, a crude daily vapor proxy.
        f.vp[i] = 610.78 * std::exp(17.269 * f.tmin[i] / (237.3 + f.tmin[i]));
        if (f.vp[i] < 50.0) f.vp[i] = 50.0;
        f.dayl[i] = 43200.0 + 14500.0 * season;
    }
    return f;
}

std::string categorical_bucket(const char* prefix, double value, double lo, double hi, int n) {
    const double x = std::clamp((value - lo) / (hi - lo), 0.0, 0.999);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s_%d", prefix, static_cast<int>(x * n));
    return buf;
}

} // namespace

std::pair<std::vector<BasinRecord>, std::vector<SynthParams>>
synth_generate(const SynthOptions& options, SeededRng& rng) {
    if (options.n_basins < 1) throw ParamError("synth_generate: need at least one basin");
    if (options.n_years < 1) throw ParamError("synth_generate: need at least one year");
    const long start =
        options.start_date != 0 ? options.start_date : days_from_civil(1988, 10, 1);
    const std::size_t n_days = static_cast<std::size_t>(options.n_years) * 365;

    std::vector<BasinRecord> records;
    std::vector<SynthParams> truth;
    for (int b = 0; b < options.n_basins; ++b) {
        SeededRng basin_rng = rng.fork(static_cast<std::uint64_t>(b));
        SynthParams params = draw_params(options.regime, basin_rng, options.noise_scale);
        const Forcing f = generate_forcing(params, start, n_days, basin_rng);

        std::vector<double> tmean(n_days);
        for (std::size_t i = 0; i < n_days; ++i) tmean[i] = 0.5 * (f.tmax[i] + f.tmin[i]);
        const std::vector<double> q_mm =
            simulate_discharge_mmday(params, f.prcp, tmean, basin_rng);

        BasinRecord rec;
        char id[16];
        std::snprintf(id, sizeof id, "synth%03d", b);
        rec.id = id;
        rec.start_date = start;
        rec.forcing = Matrix(n_days, 6);
        rec.discharge.resize(n_days);
        for (std::size_t i = 0; i < n_days; ++i) {
            rec.forcing(i, 0) = f.prcp[i];
            rec.forcing(i, 1) = f.srad[i];
            rec.forcing(i, 2) = f.tmax[i];
            rec.forcing(i, 3) = f.tmin[i];
            rec.forcing(i, 4) = f.vp[i];
            rec.forcing(i, 5) = f.dayl[i];
            // Record the "gauge reading" in native units (cfs over the basin).
            rec.discharge[i] =
                q_mm[i] * (params.area_km2 * 1e6) / 1e3 / 86400.0 / kCfsToM3s;
        }

        // Attributes derived from the generator so the static inputs carry
        // real information about each basin's response.
        rec.attributes.resize(kNumericAttributeNames.size());
        rec.attributes[0] = 200.0 + 2200.0 * basin_rng.uniform();             // elev_mean
        rec.attributes[1] = 20.0 + 2500.0 * params.reservoir_rate;            // slope_mean
        rec.attributes[2] = params.area_km2;                                  // area_gages2
        rec.attributes[3] = std::clamp(1.2 * params.runoff_ratio, 0.0, 1.0);  // frac_forest
        rec.attributes[4] = 1.0 + 8.0 * params.wet_prob;                      // lai_max
        rec.attributes[5] = 0.6 * rec.attributes[4];                          // lai_diff
        rec.attributes[6] = 0.4 + 0.5 * basin_rng.uniform();                  // dom_land_cover_frac
        rec.attributes[7] = 0.2 + 2.0 * params.quick_fraction;                // root_depth_50
        rec.attributes[8] = 0.4 + 12.0 * (0.1 - std::min(params.reservoir_rate, 0.1)); // soil_depth
        rec.attributes[9] = 0.3 + 0.2 * basin_rng.uniform();                  // soil_porosity
        rec.attributes[10] = 0.5 + 30.0 * params.reservoir_rate;              // soil_conductivity
        rec.attributes[11] = rec.attributes[8] * rec.attributes[9];           // max_water_content
        rec.attributes[12] = 0.05 + 0.3 * basin_rng.uniform();                // geol_porosity
        rec.attributes[13] = std::log10(params.reservoir_rate) - 10.0;        // geol_permeability

        rec.categorical[0] = categorical_bucket("cover", params.wet_prob, 0.3, 0.5, 3);
        rec.categorical[1] = categorical_bucket("geol", params.reservoir_rate, 0.0, 1.0, 4);
        rec.categorical[2] = params.snow ? "geol_glacial" : "geol_other";

        records.push_back(std::move(rec));
        truth.push_back(params);
    }
    return {std::move(records), std::move(truth)};
}

} // namespace flowcast
