#ifndef FLOWCAST_PREPARE_HPP
#define FLOWCAST_PREPARE_HPP

#include "flowcast/dataset.hpp"
#include "flowcast/preprocess.hpp"

#include <string>
#include <vector>

namespace flowcast {

/** Inclusive range of serial days. */
struct Period {
    long start = 0;
    long end = 0;

    long length() const { return end - start + 1; }
    bool contains(long day) const { return day >= start && day <= end; }
    bool disjoint(const Period& o) const { return end < o.start || o.end < start; }
};

/**
 * One basin with the full input pipeline applied:
 *   forcing_std  - standardized forcings (precipitation squashed first)
 *   attr_std     - standardized static attributes (categoricals encoded)
 *   obs_std      - discharge -> dimensionless -> squashed -> standardized,
 *                  NaN where unobserved; this is both the training target
 *                  and the source of integrated-observation inputs
 */
struct PreparedBasin {
    std::string id;
    long start_date = 0;

    Matrix forcing_std;              // n_days x kept forcing vars
    std::vector<double> attr_std;    // kept attribute vars
    std::vector<double> obs_std;     // NaN = missing
    std::vector<double> obs_filled;  // zero-filled copy
    std::vector<double> obs_mask;    // 1 = observed
    std::vector<double> q_native;    // original units, NaN = missing
    Matrix forcing_raw;              // n_days x 6 (signatures, AR baselines)
    NormalizationContext norm;

    std::size_t n_days() const { return obs_std.size(); }
    long end_date() const { return start_date + static_cast<long>(n_days()) - 1; }
    /** Day index of a serial date within this basin's record. */
    long day_index(long serial) const { return serial - start_date; }
};

struct PreparedDataset {
    std::vector<PreparedBasin> basins;
    ScalerStats forcing_scaler; // fitted on training-period rows, all basins
    ScalerStats attr_scaler;    // fitted across basins
    ScalerStats target_scaler;  // single pooled variable
    Period train;
    Period test;

    int base_input_dim() const; // forcings + attributes (no observation channels)

    /** Standardized model space -> native discharge units for one basin. */
    double to_native(std::size_t basin, double value_std) const;
    /** Native discharge -> standardized model space for one basin. */
    double to_standardized(std::size_t basin, double q_native) const;
};

/**
 * Fit every scaler on the training period only and apply the full input
 * pipeline to each record. Basins without usable training overlap are
 * skipped with a log line; throws DataError when none remain or the
 * periods overlap.
 */
PreparedDataset prepare_dataset(const std::vector<BasinRecord>& records, Period train,
                                Period test);

} // namespace flowcast

#endif // FLOWCAST_PREPARE_HPP
