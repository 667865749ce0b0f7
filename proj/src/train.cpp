#include "flowcast/train.hpp"

#include "flowcast/io_util.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <mutex>
#include <numbers>
#include <thread>

namespace flowcast {

void TrainConfig::validate() const {
    if (batch_size < 1 || hidden_size < 1 || rho < 1 || epochs < 0 || steps_per_epoch < 1)
        throw ConfigError("train config: sizes must be positive");
    if (!(keep_prob > 0.0) || keep_prob > 1.0)
        throw ConfigError("train config: keep_prob must be in (0,1]");
    if (seeds.empty()) throw ConfigError("train config: need at least one seed");
    if (!(adadelta_decay > 0.0) || adadelta_decay >= 1.0 || !(adadelta_eps > 0.0))
        throw ConfigError("train config: bad adadelta parameters");
}

MaskedRmse masked_rmse(const std::vector<double>& pred, const std::vector<double>& target,
                       const std::vector<double>& mask) {
    if (pred.size() != target.size() || pred.size() != mask.size())
        throw ShapeError("masked_rmse: length mismatch (" + std::to_string(pred.size()) + ", " +
                         std::to_string(target.size()) + ", " + std::to_string(mask.size()) + ")");
    double ss = 0.0, count = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double m = mask[i];
        if (m == 0.0) continue;
        const double d = pred[i] - target[i];
        ss += m * d * d;
        count += m;
    }
    if (count == 0.0) return {0.0, true};
    return {std::sqrt(ss / count), false};
}

// --- Adadelta ---------------------------------------------------------------

Adadelta::Adadelta(double decay, double eps) : decay_(decay), eps_(eps) {
    if (!(decay > 0.0) || decay >= 1.0 || !(eps > 0.0))
        throw ParamError("adadelta: need 0 < decay < 1 and eps > 0");
}

void Adadelta::step(const std::vector<Matrix*>& params, const std::vector<const Matrix*>& grads,
                    const std::vector<std::string>* names) {
    if (params.size() != grads.size())
        throw ShapeError("adadelta: " + std::to_string(params.size()) + " parameters vs " +
                         std::to_string(grads.size()) + " gradients");
    if (avg_sq_grad_.empty()) {
        for (const Matrix* p : params) {
            avg_sq_grad_.emplace_back(p->rows(), p->cols());
            avg_sq_update_.emplace_back(p->rows(), p->cols());
        }
    }
    if (avg_sq_grad_.size() != params.size())
        throw StateError("adadelta: parameter list changed between steps");

    auto label = [&](std::size_t i) {
        if (names && i < names->size()) return (*names)[i];
        return "parameter " + std::to_string(i);
    };

    for (std::size_t i = 0; i < params.size(); ++i) {
        Matrix& p = *params[i];
        const Matrix& g = *grads[i];
        if (!p.same_shape(g) || !p.same_shape(avg_sq_grad_[i]))
            throw ShapeError("adadelta: shape mismatch for " + label(i));
        if (!g.all_finite())
            throw NumericError("adadelta: non-finite gradient for " + label(i));
        double* pp = p.data();
        const double* pg = g.data();
        double* eg = avg_sq_grad_[i].data();
        double* ex = avg_sq_update_[i].data();
        for (std::size_t j = 0; j < p.size(); ++j) {
            eg[j] = decay_ * eg[j] + (1.0 - decay_) * pg[j] * pg[j];
            const double dx = -std::sqrt(ex[j] + eps_) / std::sqrt(eg[j] + eps_) * pg[j];
            ex[j] = decay_ * ex[j] + (1.0 - decay_) * dx * dx;
            pp[j] += dx;
        }
    }
}

// --- instances and batches ------------------------------------------------------

TrainingInstance build_instance(const PreparedDataset& data, const DiScheme& scheme,
                                std::size_t basin, long start, int rho) {
    const PreparedBasin& pb = data.basins.at(basin);
    if (start < 0 || start + rho > static_cast<long>(pb.n_days()))
        throw ParamError("build_instance: window [" + std::to_string(start) + "," +
                         std::to_string(start + rho) + ") outside record of basin " + pb.id);

    const int n_forcing = static_cast<int>(pb.forcing_std.cols());
    const int n_attr = static_cast<int>(pb.attr_std.size());
    const int n_direct = scheme.direct_width();
    const int conv_len = scheme.conv_width();
    const int input_dim = n_forcing + n_attr + n_direct;
    const int warmup = scheme.warmup_days();

    TrainingInstance inst;
    inst.basin = basin;
    inst.start = start;
    inst.inputs = Matrix(rho, input_dim);
    if (conv_len > 0) inst.conv_windows = Matrix(rho, conv_len);
    inst.target.assign(rho, 0.0);
    inst.mask.assign(rho, 0.0);

    for (int k = 0; k < rho; ++k) {
        const long i = start + k;
        double* row = inst.inputs.row(k);
        std::memcpy(row, pb.forcing_std.row(i), n_forcing * sizeof(double));
        std::memcpy(row + n_forcing, pb.attr_std.data(), n_attr * sizeof(double));
        // Observation channels: zero-padded history while the lookback
        // would reach before the record start.
        if (scheme.uses_observations() && i >= warmup) {
            const ObservationWindow w = assemble(scheme, pb.obs_filled, pb.obs_mask, i, 0);
            std::memcpy(row + n_forcing + n_attr, w.direct.data(),
                        n_direct * sizeof(double));
            if (conv_len > 0)
                std::memcpy(inst.conv_windows.row(k), w.conv.data(), conv_len * sizeof(double));
        }
        if (pb.obs_mask[i] == 1.0) {
            inst.target[k] = pb.obs_filled[i];
            inst.mask[k] = 1.0;
        }
    }
    return inst;
}

namespace {

TrainingBatch assemble_batch(std::vector<TrainingInstance> instances, const DiScheme& scheme,
                             int rho) {
    TrainingBatch batch;
    const std::size_t b = instances.size();
    const std::size_t input_dim = instances[0].inputs.cols();
    const int conv_len = scheme.conv_width();

    batch.inputs.assign(rho, Matrix(b, input_dim));
    if (conv_len > 0) batch.conv_windows.assign(rho, Matrix(b, conv_len));
    batch.targets = Matrix(rho, b);
    batch.mask = Matrix(rho, b);

    for (std::size_t j = 0; j < b; ++j) {
        const TrainingInstance& inst = instances[j];
        for (int k = 0; k < rho; ++k) {
            std::memcpy(batch.inputs[k].row(j), inst.inputs.row(k), input_dim * sizeof(double));
            if (conv_len > 0)
                std::memcpy(batch.conv_windows[k].row(j), inst.conv_windows.row(k),
                            conv_len * sizeof(double));
            batch.targets(k, j) = inst.target[k];
            batch.mask(k, j) = inst.mask[k];
        }
    }
    batch.instances = std::move(instances);
    return batch;
}

} // namespace

TrainingBatch sample_minibatch(const PreparedDataset& data, const DiScheme& scheme,
                               SeededRng& rng, const TrainConfig& cfg) {
    const int rho = cfg.rho;
    // Valid window starts per basin: targets fully inside the training period.
    struct Range {
        std::size_t basin;
        long lo, hi; // start day index range, inclusive
    };
    std::vector<Range> ranges;
    for (std::size_t b = 0; b < data.basins.size(); ++b) {
        const PreparedBasin& pb = data.basins[b];
        const long lo = std::max<long>(0, pb.day_index(data.train.start));
        const long hi = std::min<long>(static_cast<long>(pb.n_days()) - rho,
                                       pb.day_index(data.train.end) - rho + 1);
        if (lo <= hi) ranges.push_back({b, lo, hi});
    }
    if (ranges.empty())
        throw DataError("sample_minibatch: no basin can host a " + std::to_string(rho) +
                        "-day window inside the training period");

    std::vector<TrainingInstance> instances;
    instances.reserve(cfg.batch_size);
    for (int i = 0; i < cfg.batch_size; ++i) {
        const Range& r = ranges[rng.index(ranges.size())];
        const long start = r.lo + static_cast<long>(rng.index(r.hi - r.lo + 1));
        instances.push_back(build_instance(data, scheme, r.basin, start, rho));
    }
    return assemble_batch(std::move(instances), scheme, rho);
}

// --- loss -------------------------------------------------------------------

namespace {

// d(dimensionless)/d(v*) of the inverse squash, 0 once the inverse clamps.
double gamma_inverse_slope(double v_star) {
    const double p = std::pow(10.0, v_star);
    const double s = p - 0.1;
    if (s <= 0.0) return 0.0;
    return 2.0 * s * p * std::numbers::ln10;
}

} // namespace

BatchLoss batch_loss(const std::vector<Matrix>& outputs, const TrainingBatch& batch,
                     const ScalerStats& target_scaler, LossSpace space) {
    const std::size_t steps = outputs.size();
    if (steps != batch.targets.rows())
        throw ShapeError("batch_loss: " + std::to_string(steps) + " output steps vs " +
                         std::to_string(batch.targets.rows()) + " target steps");
    const std::size_t b = batch.targets.cols();

    BatchLoss out;
    out.d_outputs.assign(steps, Matrix(b, 1));

    // Per-instance masked RMSE, averaged over instances that have targets.
    std::vector<double> ss(b, 0.0), count(b, 0.0);
    // In Physical space compare dimensionless discharge instead.
    auto to_space = [&](double v_std) {
        if (space == LossSpace::Transformed) return v_std;
        return gamma_inverse_value(target_scaler.unapply_one(0, v_std));
    };
    for (std::size_t t = 0; t < steps; ++t) {
        if (outputs[t].rows() != b || outputs[t].cols() != 1)
            throw ShapeError("batch_loss: output step has wrong shape");
        for (std::size_t j = 0; j < b; ++j) {
            const double m = batch.mask(t, j);
            if (m == 0.0) continue;
            const double d = to_space(outputs[t](j, 0)) - to_space(batch.targets(t, j));
            ss[j] += d * d;
            count[j] += 1.0;
        }
    }

    std::size_t live = 0;
    std::vector<double> rmse(b, 0.0);
    for (std::size_t j = 0; j < b; ++j) {
        if (count[j] == 0.0) continue;
        rmse[j] = std::sqrt(ss[j] / count[j]);
        out.value += rmse[j];
        ++live;
    }
    if (live == 0) {
        out.skipped = true;
        return out;
    }
    out.value /= static_cast<double>(live);

    // dL/dy = (1/live) * mask * (pred-target) / (rmse * count), with the
    // physical-space chain rule applied when requested.
    for (std::size_t t = 0; t < steps; ++t) {
        for (std::size_t j = 0; j < b; ++j) {
            const double m = batch.mask(t, j);
            if (m == 0.0 || count[j] == 0.0 || rmse[j] == 0.0) continue;
            const double y = outputs[t](j, 0);
            double diff = to_space(y) - to_space(batch.targets(t, j));
            double chain = 1.0;
            if (space == LossSpace::Physical)
                chain = gamma_inverse_slope(target_scaler.unapply_one(0, y)) *
                        target_scaler.stddev[0];
            out.d_outputs[t](j, 0) =
                diff * chain / (rmse[j] * count[j] * static_cast<double>(live));
        }
    }
    return out;
}

// --- training loop -----------------------------------------------------------

LstmDims model_dims(const PreparedDataset& data, const DiScheme& scheme, const TrainConfig& cfg) {
    LstmDims dims;
    dims.input_dim = data.base_input_dim() + scheme.direct_width();
    dims.transform_dim = cfg.transform_dim > 0 ? cfg.transform_dim : cfg.hidden_size;
    dims.hidden_dim = cfg.hidden_size;
    dims.output_dim = 1;
    if (scheme.conv_width() > 0)
        dims.conv_dim = ConvConfig::standard(scheme.conv_width()).output_width;
    return dims;
}

TrainedModel train_model(const PreparedDataset& data, const DiScheme& scheme,
                         const TrainConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    const LstmDims dims = model_dims(data, scheme, cfg);

    SeededRng rng(seed);
    TrainedModel model;
    model.scheme = scheme;
    model.seed = seed;
    model.weights = init_weights(dims, rng);
    model.has_conv = scheme.conv_width() > 0;
    if (model.has_conv) {
        model.conv = init_conv_weights(ConvConfig::standard(scheme.conv_width()), rng);
    }

    Adadelta optimizer(cfg.adadelta_decay, cfg.adadelta_eps);
    std::vector<std::string> param_names = LstmWeights::names();
    if (model.has_conv)
        for (const auto& n : model.conv.names()) param_names.push_back(n);

    const bool dropout = cfg.keep_prob < 1.0;
    LstmForwardCache cache;
    std::vector<std::vector<ConvCache>> conv_caches; // per step, per instance

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double epoch_loss = 0.0;
        int epoch_steps = 0;
        for (int step = 0; step < cfg.steps_per_epoch; ++step) {
            TrainingBatch batch = sample_minibatch(data, scheme, rng, cfg);
            DropoutMasks masks;
            if (dropout)
                masks = make_dropout_masks(rng, cfg.batch_size, cfg.hidden_size, cfg.keep_prob);

            std::vector<Matrix> conv_features;
            if (model.has_conv) {
                const std::size_t steps = batch.conv_windows.size();
                conv_features.resize(steps);
                conv_caches.assign(steps, {});
                for (std::size_t t = 0; t < steps; ++t)
                    conv_features[t] =
                        conv_forward_batch(batch.conv_windows[t], model.conv, conv_caches[t]);
            }

            std::vector<Matrix> outputs =
                lstm_forward(batch.inputs, model.has_conv ? &conv_features : nullptr,
                             model.weights, dropout ? &masks : nullptr, cache);

            BatchLoss loss = batch_loss(outputs, batch, data.target_scaler, cfg.loss_space);
            if (loss.skipped) continue;
            if (!std::isfinite(loss.value))
                throw DivergenceError("train_model: non-finite loss at epoch " +
                                          std::to_string(epoch) + " step " + std::to_string(step),
                                      model.loss_history);

            LstmGradients grads = lstm_backward(cache, model.weights,
                                                dropout ? &masks : nullptr, loss.d_outputs);

            std::vector<Matrix*> params = model.weights.all();
            std::vector<const Matrix*> grad_ptrs;
            for (Matrix* g : grads.wrt.all()) grad_ptrs.push_back(g);

            ConvGradients conv_grads;
            if (model.has_conv) {
                conv_grads = make_conv_gradients(model.conv.cfg, cfg.batch_size);
                for (std::size_t t = 0; t < conv_caches.size(); ++t)
                    conv_backward_batch(conv_caches[t], model.conv, grads.d_conv[t], conv_grads);
                for (Matrix* p : model.conv.all()) params.push_back(p);
                for (const Matrix* g :
                     static_cast<const ConvWeights&>(conv_grads.wrt).all())
                    grad_ptrs.push_back(g);
            }

            optimizer.step(params, grad_ptrs, &param_names);
            epoch_loss += loss.value;
            ++epoch_steps;
        }
        model.loss_history.push_back(epoch_steps > 0 ? epoch_loss / epoch_steps : 0.0);
    }
    return model;
}

std::vector<TrainedModel> train_ensemble(const PreparedDataset& data, const DiScheme& scheme,
                                         const TrainConfig& cfg) {
    cfg.validate();
    std::vector<TrainedModel> members(cfg.seeds.size());
    const int threads = std::max(1, cfg.ensemble_threads);
    if (threads == 1 || cfg.seeds.size() == 1) {
        for (std::size_t i = 0; i < cfg.seeds.size(); ++i)
            members[i] = train_model(data, scheme, cfg, cfg.seeds[i]);
        return members;
    }
    std::vector<std::thread> pool;
    std::size_t next = 0;
    std::mutex mu;
    std::exception_ptr first_error;
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&]() {
            while (true) {
                std::size_t i;
                {
                    std::lock_guard<std::mutex> lock(mu);
                    if (next >= cfg.seeds.size() || first_error) return;
                    i = next++;
                }
                try {
                    TrainedModel m = train_model(data, scheme, cfg, cfg.seeds[i]);
                    std::lock_guard<std::mutex> lock(mu);
                    members[i] = std::move(m);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(mu);
                    if (!first_error) first_error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
    return members;
}

// --- forecasting ---------------------------------------------------------------

std::vector<double> forecast_member(const TrainedModel& model, const PreparedDataset& data,
                                    std::size_t basin, Period period,
                                    const ForecastOptions& opts) {
    const PreparedBasin& pb = data.basins.at(basin);
    const DiScheme& scheme = model.scheme;
    if (period.start < pb.start_date || period.end > pb.end_date())
        throw DataError("forecast: period extends beyond the record of basin " + pb.id);

    const long first = std::max(pb.day_index(period.start) - static_cast<long>(opts.warmup_days),
                                static_cast<long>(0));
    const long last = pb.day_index(period.end); // inclusive record index
    const long n_steps = last - first + 1;
    const int n_forcing = static_cast<int>(pb.forcing_std.cols());
    const int n_attr = static_cast<int>(pb.attr_std.size());
    const int n_direct = scheme.direct_width();
    const int conv_len = scheme.conv_width();
    const int warmup = scheme.warmup_days();

    // Working copy of the observation series; closed-loop mode overwrites
    // missing entries with the model's own prior predictions.
    std::vector<double> obs = pb.obs_filled;
    std::vector<double> obs_mask = pb.obs_mask;

    auto build_input = [&](long i, Matrix& input, Matrix& conv_window) {
        double* row = input.row(0);
        std::memcpy(row, pb.forcing_std.row(i), n_forcing * sizeof(double));
        std::memcpy(row + n_forcing, pb.attr_std.data(), n_attr * sizeof(double));
        for (int c = 0; c < n_direct; ++c) row[n_forcing + n_attr + c] = 0.0;
        if (conv_len > 0) conv_window.fill(0.0);
        if (scheme.uses_observations() && i >= warmup) {
            const ObservationWindow w = assemble(scheme, obs, obs_mask, i, 0);
            std::memcpy(row + n_forcing + n_attr, w.direct.data(), n_direct * sizeof(double));
            if (conv_len > 0)
                std::memcpy(conv_window.row(0), w.conv.data(), conv_len * sizeof(double));
        }
    };

    std::vector<double> out;
    out.reserve(period.length());

    if (!opts.closed_loop) {
        // One long sequence; all observation inputs come from the zero-filled
        // series, mirroring the training-time policy.
        std::vector<Matrix> inputs(n_steps, Matrix(1, n_forcing + n_attr + n_direct));
        std::vector<Matrix> conv_windows;
        if (conv_len > 0) conv_windows.assign(n_steps, Matrix(1, conv_len));
        Matrix dummy(1, std::max(conv_len, 1));
        for (long k = 0; k < n_steps; ++k)
            build_input(first + k, inputs[k], conv_len > 0 ? conv_windows[k] : dummy);

        std::vector<Matrix> conv_features;
        std::vector<ConvCache> caches;
        if (conv_len > 0) {
            conv_features.resize(n_steps);
            for (long k = 0; k < n_steps; ++k)
                conv_features[k] = conv_forward_batch(conv_windows[k], model.conv, caches);
        }
        LstmForwardCache cache;
        const std::vector<Matrix> y = lstm_forward(
            inputs, conv_len > 0 ? &conv_features : nullptr, model.weights, nullptr, cache);
        for (long k = 0; k < n_steps; ++k) {
            const long i = first + k;
            if (i >= pb.day_index(period.start))
                out.push_back(data.to_native(basin, y[k](0, 0)));
        }
        return out;
    }

    // Closed loop: advance one step at a time, feeding predictions back into
    // the observation series wherever a measurement is missing.
    Matrix h(1, model.weights.dims.hidden_dim), s(1, model.weights.dims.hidden_dim);
    Matrix input(1, n_forcing + n_attr + n_direct);
    Matrix conv_window(1, std::max(conv_len, 1));
    for (long k = 0; k < n_steps; ++k) {
        const long i = first + k;
        build_input(i, input, conv_window);
        std::vector<Matrix> inputs = {input};
        std::vector<Matrix> conv_features;
        std::vector<ConvCache> caches;
        if (conv_len > 0) {
            conv_features.push_back(conv_forward_batch(conv_window, model.conv, caches));
        }
        LstmForwardCache cache;
        const std::vector<Matrix> y =
            lstm_forward(inputs, conv_len > 0 ? &conv_features : nullptr, model.weights, nullptr,
                         cache, &h, &s);
        h = cache.hidden[0];
        s = cache.cell_s[0];
        const double pred_std = y[0](0, 0);
        if (obs_mask[i] == 0.0) obs[i] = pred_std;
        if (i >= pb.day_index(period.start)) out.push_back(data.to_native(basin, pred_std));
    }
    return out;
}

std::vector<double> ensemble_mean_forecast(const std::vector<TrainedModel>& members,
                                           const PreparedDataset& data, std::size_t basin,
                                           Period period, const ForecastOptions& opts) {
    if (members.empty()) throw ParamError("ensemble_mean_forecast: no members");
    std::vector<double> mean(period.length(), 0.0);
    for (const TrainedModel& m : members) {
        const std::vector<double> f = forecast_member(m, data, basin, period, opts);
        for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += f[i];
    }
    for (double& v : mean) v /= static_cast<double>(members.size());
    return mean;
}

} // namespace flowcast
