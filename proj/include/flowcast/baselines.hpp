#ifndef FLOWCAST_BASELINES_HPP
#define FLOWCAST_BASELINES_HPP

#include "flowcast/numerics.hpp"
#include "flowcast/prepare.hpp"
#include "flowcast/train.hpp"

#include <optional>
#include <string>
#include <vector>

namespace flowcast {

// --- autoregressive reference models -----------------------------------

/**
 * AR(p) with exogenous forcing terms, fitted by ordinary least squares:
 *   y_t = c + sum_i alpha_i y_{t-i} + sum_j beta_j x_{j,t} [+ beta_s sim_t]
 * The optional `sim` regressor carries an external hydrologic-model
 * simulation (the post-processing variant).
 */
struct ArModel {
    int order = 0;
    double intercept = 0.0;
    std::vector<double> lag_coef;     // alpha_1..alpha_p
    std::vector<double> forcing_coef; // beta_1..beta_r
    double sim_coef = 0.0;
    bool has_sim = false;
    double residual_variance = 0.0;
};

/**
 * Fit on rows t where the target, all p lags, the forcings and (when
 * given) the simulation are present; other rows are dropped. Throws
 * FitError on a rank-deficient design (naming the collinear column) and
 * DataError when too few rows remain.
 */
ArModel fit_ar(const std::vector<double>& y, const Matrix& forcings, int order,
               const std::vector<double>* sim = nullptr);

/**
 * Mean prediction (white-noise term omitted). `lags[i]` is y_{t-1-i};
 * missing lags are zero-filled, matching the integration policy.
 */
double predict_ar(const ArModel& model, const std::vector<double>& lags,
                  const double* forcings_t, double sim_t = 0.0);

/** In-sample one-step-ahead predictions; NaN where a needed input is missing. */
std::vector<double> predict_ar_series(const ArModel& model, const std::vector<double>& y,
                                      const Matrix& forcings,
                                      const std::vector<double>* sim = nullptr);

// --- feedforward reference network --------------------------------------

/** Two relu hidden layers and a linear readout (inputs match the one-day
 *  integration model: forcings, attributes, previous-day observation). */
struct AnnModel {
    std::vector<Matrix> weights; // in->h1, h1->h2, h2->out
    std::vector<Matrix> biases;
    int input_dim() const { return static_cast<int>(weights.front().rows()); }

    std::vector<Matrix*> all();
    std::vector<const Matrix*> all() const;
};

AnnModel make_ann(int input_dim, int hidden1, int hidden2, int output_dim = 1);
AnnModel init_ann(int input_dim, int hidden1, int hidden2, SeededRng& rng, int output_dim = 1);

struct AnnCache {
    Matrix input;
    std::vector<Matrix> post; // post-relu activations per hidden layer
};

/** Batched forward: x is (batch x input_dim), result (batch x output_dim). */
Matrix ann_forward(const Matrix& x, const AnnModel& model, AnnCache& cache);

/** Exact reverse-mode gradients for every weight and bias. */
AnnModel ann_backward(const AnnCache& cache, const AnnModel& model, const Matrix& d_out);

struct AnnTrainConfig {
    int hidden1 = 256;
    int hidden2 = 256;
    int batch_size = 256;
    int epochs = 30;
    int steps_per_epoch = 50;
    double adadelta_decay = 0.95;
    double adadelta_eps = 1e-6;
};

struct TrainedAnn {
    AnnModel model;
    std::uint64_t seed = 0;
    std::vector<double> loss_history;
};

/**
 * Train one pooled network over all basins on training-period rows whose
 * target and previous-day observation inputs are available (same input
 * pipeline as the one-day integration model; the previous-day channel is
 * zero-filled where unobserved).
 */
TrainedAnn train_ann(const PreparedDataset& data, const AnnTrainConfig& cfg, std::uint64_t seed);

/** Forecast over a period in native units (one value per day). */
std::vector<double> ann_forecast(const TrainedAnn& ann, const PreparedDataset& data,
                                 std::size_t basin, Period period);

} // namespace flowcast

#endif // FLOWCAST_BASELINES_HPP
