#ifndef FLOWCAST_TRAIN_HPP
#define FLOWCAST_TRAIN_HPP

#include "flowcast/convnet.hpp"
#include "flowcast/errors.hpp"
#include "flowcast/integrate.hpp"
#include "flowcast/lstm.hpp"
#include "flowcast/prepare.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace flowcast {

enum class LossSpace { Transformed, Physical };

struct TrainConfig {
    int batch_size = 100;
    int hidden_size = 256;
    int transform_dim = 0; // 0 = same width as hidden_size
    int rho = 365;         // training window length, days
    int epochs = 20;
    int steps_per_epoch = 25; // an epoch is a fixed number of minibatches
    double keep_prob = 0.5;   // dropout keep probability (1 = off)
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5, 6};
    LossSpace loss_space = LossSpace::Transformed;
    double adadelta_decay = 0.95;
    double adadelta_eps = 1e-6;
    int ensemble_threads = 1;

    void validate() const;
};

// --- loss ---------------------------------------------------------------

struct MaskedRmse {
    double value = 0.0;
    bool skipped = false; // no valid targets at all
};

/** sqrt(sum(mask*(pred-target)^2) / sum(mask)); 0 + skip flag if the mask
 *  is empty. Mask entries must be 0 or 1. */
MaskedRmse masked_rmse(const std::vector<double>& pred, const std::vector<double>& target,
                       const std::vector<double>& mask);

// --- optimizer ------------------------------------------------------------

/**
 * Adadelta (per-parameter adaptive steps, no learning rate):
 *   E[g^2]  <- rho*E[g^2] + (1-rho)*g^2
 *   dx      = -sqrt(E[dx^2]+eps)/sqrt(E[g^2]+eps) * g
 *   E[dx^2] <- rho*E[dx^2] + (1-rho)*dx^2
 */
class Adadelta {
public:
    explicit Adadelta(double decay = 0.95, double eps = 1e-6);

    /** One update over a fixed parameter list; shapes must stay identical
     *  across calls. Throws NumericError naming the parameter on a
     *  non-finite gradient. */
    void step(const std::vector<Matrix*>& params, const std::vector<const Matrix*>& grads,
              const std::vector<std::string>* names = nullptr);

    double decay() const { return decay_; }
    double epsilon() const { return eps_; }

private:
    double decay_;
    double eps_;
    std::vector<Matrix> avg_sq_grad_;
    std::vector<Matrix> avg_sq_update_;
};

// --- minibatch sampling ----------------------------------------------------

/** One rho-day training window of one basin. */
struct TrainingInstance {
    std::size_t basin = 0;
    long start = 0;      // day index into the basin record
    Matrix inputs;       // rho x input_dim (forcings, attributes, direct obs)
    Matrix conv_windows; // rho x conv_len, or empty
    std::vector<double> target; // rho, zero-filled at masked steps
    std::vector<double> mask;   // rho, 1 = step participates in the loss
};

/** Batch layout fed to the network: one matrix per time step. */
struct TrainingBatch {
    std::vector<TrainingInstance> instances;
    std::vector<Matrix> inputs;        // rho of (batch x input_dim)
    std::vector<Matrix> conv_windows;  // rho of (batch x conv_len), or empty
    Matrix targets;                    // rho x batch
    Matrix mask;                       // rho x batch
};

/**
 * Materialize one training instance starting at basin day `start`. Steps
 * whose observation lookback reaches before the record start get
 * zero-padded history (they stay in the loss when their target exists,
 * mirroring the zero-fill policy for missing observations).
 */
TrainingInstance build_instance(const PreparedDataset& data, const DiScheme& scheme,
                                std::size_t basin, long start, int rho);

/**
 * Uniformly sample (basin, window) pairs whose targets lie fully inside
 * the training period. Throws DataError when no basin can host a window.
 */
TrainingBatch sample_minibatch(const PreparedDataset& data, const DiScheme& scheme,
                               SeededRng& rng, const TrainConfig& cfg);

// --- training ----------------------------------------------------------------

struct TrainedModel {
    DiScheme scheme;
    LstmWeights weights;
    ConvWeights conv; // meaningful only when has_conv
    bool has_conv = false;
    std::uint64_t seed = 0;
    std::vector<double> loss_history; // one mean loss per epoch
};

/** Thrown when training hits a non-finite loss; carries the history. */
struct DivergenceError : NumericError {
    DivergenceError(const std::string& msg, std::vector<double> history)
        : NumericError(msg), loss_history(std::move(history)) {}
    std::vector<double> loss_history;
};

/** Network dimensions implied by a dataset/scheme/config triple. */
LstmDims model_dims(const PreparedDataset& data, const DiScheme& scheme, const TrainConfig& cfg);

TrainedModel train_model(const PreparedDataset& data, const DiScheme& scheme,
                         const TrainConfig& cfg, std::uint64_t seed);

/** One model per configured seed; members are independent and may train on
 *  parallel threads (cfg.ensemble_threads). */
std::vector<TrainedModel> train_ensemble(const PreparedDataset& data, const DiScheme& scheme,
                                         const TrainConfig& cfg);

// --- forecasting ---------------------------------------------------------------

struct ForecastOptions {
    bool closed_loop = false; // substitute model predictions for missing obs
    int warmup_days = 365;    // spin-up before the period (outputs discarded)
};

/**
 * Run one member over `period` for one basin and return the forecast in
 * native discharge units (one value per day of the period).
 */
std::vector<double> forecast_member(const TrainedModel& model, const PreparedDataset& data,
                                    std::size_t basin, Period period,
                                    const ForecastOptions& opts = {});

/** Member forecasts averaged in physical space. */
std::vector<double> ensemble_mean_forecast(const std::vector<TrainedModel>& members,
                                           const PreparedDataset& data, std::size_t basin,
                                           Period period, const ForecastOptions& opts = {});

// --- loss internals exposed for tests -------------------------------------------

struct BatchLoss {
    double value = 0.0;
    bool skipped = false;
    std::vector<Matrix> d_outputs; // per step (batch x 1)
};

/** Mean over instances of per-instance masked RMSE, with its gradient.
 *  In Physical space both sides are mapped back to dimensionless discharge
 *  (inverse standardization + inverse squash) before the RMSE. */
BatchLoss batch_loss(const std::vector<Matrix>& outputs, const TrainingBatch& batch,
                     const ScalerStats& target_scaler, LossSpace space);

} // namespace flowcast

#endif // FLOWCAST_TRAIN_HPP
