#include "flowcast/prepare.hpp"

#include "flowcast/errors.hpp"
#include "flowcast/integrate.hpp"
#include "flowcast/io_util.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <set>

namespace flowcast {

namespace {

std::string period_label(const Period& p) {
    return format_date(p.start) + ".." + format_date(p.end);
}

/** Integer codes for categorical attributes, by sorted distinct value. */
std::array<std::map<std::string, int>, 3>
encode_categoricals(const std::vector<BasinRecord>& records) {
    std::array<std::map<std::string, int>, 3> codes;
    for (std::size_t c = 0; c < 3; ++c) {
        std::set<std::string> distinct;
        for (const auto& r : records) distinct.insert(r.categorical[c]);
        int next = 0;
        for (const auto& v : distinct) codes[c][v] = next++;
    }
    return codes;
}

} // namespace

int PreparedDataset::base_input_dim() const {
    return static_cast<int>(forcing_scaler.kept_count() + attr_scaler.kept_count());
}

double PreparedDataset::to_native(std::size_t basin, double value_std) const {
    const double v_star = target_scaler.unapply_one(0, value_std);
    const double dimless = gamma_inverse_value(v_star);
    return dimensionless_to_native_value(dimless, basins[basin].norm);
}

double PreparedDataset::to_standardized(std::size_t basin, double q_native) const {
    const double dimless = discharge_to_dimensionless_value(q_native, basins[basin].norm);
    return target_scaler.apply_one(0, gamma_transform_value(dimless));
}

PreparedDataset prepare_dataset(const std::vector<BasinRecord>& records, Period train,
                                Period test) {
    if (records.empty()) throw DataError("prepare_dataset: no basins");
    if (train.start > train.end || test.start > test.end)
        throw ConfigError("prepare_dataset: period start after end");
    if (!train.disjoint(test))
        throw ConfigError("prepare_dataset: train and test periods overlap");

    // Keep only basins that actually cover part of the training period and
    // have some observed training discharge; everything is fitted there.
    struct Usable {
        const BasinRecord* rec;
        double mean_precip; // mm/day over the training overlap
    };
    std::vector<Usable> usable;
    for (const auto& rec : records) {
        const long lo = std::max(train.start, rec.start_date);
        const long hi = std::min(train.end, rec.end_date());
        if (lo > hi) {
            std::cerr << "prepare: basin " << rec.id << " has no training overlap; skipped\n";
            continue;
        }
        double psum = 0.0;
        long pcount = 0;
        bool any_obs = false;
        for (long d = lo; d <= hi; ++d) {
            const long i = d - rec.start_date;
            const double p = rec.forcing(i, kForcingPrcp);
            if (!std::isnan(p)) {
                psum += p;
                ++pcount;
            }
            if (!std::isnan(rec.discharge[i])) any_obs = true;
        }
        if (pcount == 0 || psum <= 0.0) {
            std::cerr << "prepare: basin " << rec.id
                      << " has no positive training precipitation; skipped\n";
            continue;
        }
        if (!any_obs) {
            std::cerr << "prepare: basin " << rec.id
                      << " has no observed training discharge; skipped\n";
            continue;
        }
        if (!(rec.area_km2() > 0.0)) {
            std::cerr << "prepare: basin " << rec.id << " has nonpositive area; skipped\n";
            continue;
        }
        usable.push_back({&rec, psum / static_cast<double>(pcount)});
    }
    if (usable.empty()) throw DataError("prepare_dataset: no basin overlaps the training period");

    PreparedDataset out;
    out.train = train;
    out.test = test;

    // --- forcing scaler: training rows pooled over all basins -------------
    std::vector<std::string> forcing_names(kForcingNames.begin(), kForcingNames.end());
    {
        std::size_t n_rows = 0;
        for (const auto& u : usable)
            n_rows += static_cast<std::size_t>(
                std::min(train.end, u.rec->end_date()) -
                std::max(train.start, u.rec->start_date) + 1);
        Matrix samples(n_rows, kForcingNames.size());
        std::size_t r = 0;
        for (const auto& u : usable) {
            const long lo = std::max(train.start, u.rec->start_date);
            const long hi = std::min(train.end, u.rec->end_date());
            for (long d = lo; d <= hi; ++d, ++r) {
                const long i = d - u.rec->start_date;
                for (std::size_t c = 0; c < kForcingNames.size(); ++c) {
                    double v = u.rec->forcing(i, c);
                    // Precipitation shares the discharge distribution squash.
                    if (c == kForcingPrcp && !std::isnan(v)) v = gamma_transform_value(v);
                    samples(r, c) = v;
                }
            }
        }
        out.forcing_scaler = fit_scaler(samples, forcing_names, period_label(train));
    }

    // --- attribute scaler: one row per basin ------------------------------
    const auto cat_codes = encode_categoricals(records);
    std::vector<std::string> attr_names(kNumericAttributeNames.begin(),
                                        kNumericAttributeNames.end());
    for (const char* n : kCategoricalAttributeNames) attr_names.push_back(n);
    Matrix attr_rows(usable.size(), attr_names.size());
    for (std::size_t b = 0; b < usable.size(); ++b) {
        const BasinRecord& rec = *usable[b].rec;
        for (std::size_t c = 0; c < kNumericAttributeNames.size(); ++c)
            attr_rows(b, c) = rec.attributes[c];
        for (std::size_t c = 0; c < 3; ++c)
            attr_rows(b, kNumericAttributeNames.size() + c) =
                static_cast<double>(cat_codes[c].at(rec.categorical[c]));
    }
    out.attr_scaler = fit_scaler(attr_rows, attr_names, "static");

    // --- target scaler: squashed dimensionless discharge, training rows ---
    std::vector<std::vector<double>> v_star_all(usable.size());
    {
        std::vector<double> pool;
        for (std::size_t b = 0; b < usable.size(); ++b) {
            const BasinRecord& rec = *usable[b].rec;
            NormalizationContext ctx{rec.area_km2(), usable[b].mean_precip, kCfsToM3s};
            v_star_all[b] = gamma_transform(discharge_to_dimensionless(rec.discharge, ctx));
            const long lo = std::max(train.start, rec.start_date);
            const long hi = std::min(train.end, rec.end_date());
            for (long d = lo; d <= hi; ++d) {
                const double v = v_star_all[b][d - rec.start_date];
                if (!std::isnan(v)) pool.push_back(v);
            }
        }
        Matrix samples(pool.size(), 1);
        for (std::size_t i = 0; i < pool.size(); ++i) samples(i, 0) = pool[i];
        out.target_scaler = fit_scaler(samples, {"target"}, period_label(train));
        if (!out.target_scaler.kept[0])
            throw DataError("prepare_dataset: pooled training discharge has zero variance");
    }

    // --- per-basin arrays --------------------------------------------------
    for (std::size_t b = 0; b < usable.size(); ++b) {
        const BasinRecord& rec = *usable[b].rec;
        PreparedBasin pb;
        pb.id = rec.id;
        pb.start_date = rec.start_date;
        pb.norm = NormalizationContext{rec.area_km2(), usable[b].mean_precip, kCfsToM3s};
        pb.q_native = rec.discharge;
        pb.forcing_raw = rec.forcing;

        Matrix forcing_in = rec.forcing;
        for (std::size_t i = 0; i < forcing_in.rows(); ++i) {
            const double p = forcing_in(i, kForcingPrcp);
            if (!std::isnan(p)) forcing_in(i, kForcingPrcp) = gamma_transform_value(p);
        }
        pb.forcing_std = apply_scaler(forcing_in, out.forcing_scaler);

        pb.attr_std.resize(out.attr_scaler.kept_count());
        {
            std::size_t oj = 0;
            for (std::size_t c = 0; c < attr_names.size(); ++c) {
                if (!out.attr_scaler.kept[c]) continue;
                pb.attr_std[oj++] = out.attr_scaler.apply_one(c, attr_rows(b, c));
            }
        }

        pb.obs_std.resize(rec.n_days());
        for (std::size_t i = 0; i < rec.n_days(); ++i)
            pb.obs_std[i] = out.target_scaler.apply_one(0, v_star_all[b][i]);
        auto [filled, mask] = fill_missing(pb.obs_std);
        pb.obs_filled = std::move(filled);
        pb.obs_mask = std::move(mask);

        out.basins.push_back(std::move(pb));
    }
    return out;
}

} // namespace flowcast
