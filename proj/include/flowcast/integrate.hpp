#ifndef FLOWCAST_INTEGRATE_HPP
#define FLOWCAST_INTEGRATE_HPP

#include <string>
#include <utility>
#include <vector>

namespace flowcast {

/**
 * Which observation-integration variant to build model inputs with.
 *
 * Every variant describes how discharge observed strictly before the
 * forecast day t enters the model:
 *   Projection       - no observation inputs at all
 *   Lag(N)           - the single observation from day t-N
 *   MovingAvg(N)     - mean of the previous N days' observations
 *   RegularSnapshot(N) - one snapshot per N-day cycle, held until the next
 *   RegularAvg(N)    - mean of the last completed N-day cycle
 *   AllLags(N)       - all N previous daily observations as separate inputs
 *   CnnDi(p1, N)     - the most recent p1 days direct, the older N-p1 days
 *                      through the convolutional reduction unit
 */
struct DiScheme {
    enum class Kind {
        Projection,
        Lag,
        MovingAvg,
        RegularSnapshot,
        RegularAvg,
        AllLags,
        CnnDi,
    };

    Kind kind = Kind::Projection;
    int n = 0;  // lookback length in days
    int p1 = 0; // CnnDi only: days entering the model directly

    static DiScheme projection() { return {}; }
    static DiScheme lag(int n);
    static DiScheme moving_avg(int n);
    static DiScheme regular_snapshot(int n);
    static DiScheme regular_avg(int n);
    static DiScheme all_lags(int n);
    static DiScheme cnn_di(int p1, int n);

    /** Number of observation values fed directly to the model per step. */
    int direct_width() const;
    /** Length of the window passed through the conv unit (CnnDi only). */
    int conv_width() const;
    /** Max lookback in days; steps earlier than this need padded history. */
    int warmup_days() const { return kind == Kind::Projection ? 0 : n; }
    bool uses_observations() const { return kind != Kind::Projection; }

    /** Compact label, e.g. "projection", "di(3)-m", "cnn-di(1,100)". */
    std::string label() const;
    /** Parses the label format back into a scheme. Throws ConfigError. */
    static DiScheme parse(const std::string& text);

    bool operator==(const DiScheme&) const = default;
};

/**
 * Observation inputs for one forecast step: `direct` feeds the model input
 * vector, `conv` feeds the dimensional-reduction unit. The validity masks
 * are 1 where every contributing observation was actually present.
 */
struct ObservationWindow {
    std::vector<double> direct;
    std::vector<double> conv;
    std::vector<double> direct_valid;
    std::vector<double> conv_valid;
};

/**
 * Replace missing entries (NaN) with zero and report a presence mask
 * (1 = observed, 0 = filled). The model trains against zero-filled
 * observation inputs; gaps in the target are handled by the loss mask.
 */
std::pair<std::vector<double>, std::vector<double>> fill_missing(const std::vector<double>& obs);

/**
 * Build the observation inputs for forecast day `t` (an index into `obs`).
 * Only entries strictly before t are read. `mask` is the presence mask from
 * fill_missing and may be empty (treated as all-present).
 *
 * Preconditions: t >= warmup_days() and cycle_anchor <= t; AllLags/CnnDi
 * throw WindowError when t < n.
 */
ObservationWindow assemble(const DiScheme& scheme, const std::vector<double>& obs,
                           const std::vector<double>& mask, long t, long cycle_anchor);

} // namespace flowcast

#endif // FLOWCAST_INTEGRATE_HPP
