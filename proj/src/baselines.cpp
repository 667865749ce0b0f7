#include "flowcast/baselines.hpp"

#include "flowcast/errors.hpp"

#include <cmath>
#include <cstring>

namespace flowcast {

ArModel fit_ar(const std::vector<double>& y, const Matrix& forcings, int order,
               const std::vector<double>* sim) {
    if (order < 0) throw ParamError("fit_ar: order must be >= 0");
    const std::size_t n = y.size();
    if (forcings.rows() != 0 && forcings.rows() != n)
        throw ShapeError("fit_ar: forcing rows do not match series length");
    if (sim && sim->size() != n) throw ShapeError("fit_ar: sim series length mismatch");
    const std::size_t r = forcings.rows() == 0 ? 0 : forcings.cols();
    const std::size_t n_coef = 1 + order + r + (sim ? 1 : 0);

    // Usable rows: target, every lag, forcings and sim all present.
    std::vector<std::size_t> rows;
    for (std::size_t t = order; t < n; ++t) {
        bool ok = !std::isnan(y[t]);
        for (int i = 1; ok && i <= order; ++i) ok = !std::isnan(y[t - i]);
        for (std::size_t j = 0; ok && j < r; ++j) ok = !std::isnan(forcings(t, j));
        if (ok && sim) ok = !std::isnan((*sim)[t]);
        if (ok) rows.push_back(t);
    }
    if (rows.size() <= n_coef)
        throw DataError("fit_ar: only " + std::to_string(rows.size()) +
                        " usable rows for " + std::to_string(n_coef) + " coefficients");

    Matrix design(rows.size(), n_coef);
    std::vector<double> target(rows.size());
    std::vector<std::string> names;
    names.push_back("intercept");
    for (int i = 1; i <= order; ++i) names.push_back("lag_" + std::to_string(i));
    for (std::size_t j = 0; j < r; ++j) names.push_back("forcing_" + std::to_string(j));
    if (sim) names.push_back("sim");

    for (std::size_t k = 0; k < rows.size(); ++k) {
        const std::size_t t = rows[k];
        std::size_t c = 0;
        design(k, c++) = 1.0;
        for (int i = 1; i <= order; ++i) design(k, c++) = y[t - i];
        for (std::size_t j = 0; j < r; ++j) design(k, c++) = forcings(t, j);
        if (sim) design(k, c++) = (*sim)[t];
        target[k] = y[t];
    }

    const std::vector<double> coef = solve_least_squares(design, target, &names);

    ArModel model;
    model.order = order;
    model.has_sim = sim != nullptr;
    std::size_t c = 0;
    model.intercept = coef[c++];
    for (int i = 0; i < order; ++i) model.lag_coef.push_back(coef[c++]);
    for (std::size_t j = 0; j < r; ++j) model.forcing_coef.push_back(coef[c++]);
    if (sim) model.sim_coef = coef[c++];

    double ss = 0.0;
    for (std::size_t k = 0; k < rows.size(); ++k) {
        double pred = model.intercept;
        std::size_t cc = 1;
        for (int i = 1; i <= order; ++i) pred += coef[cc++] * y[rows[k] - i];
        for (std::size_t j = 0; j < r; ++j) pred += coef[cc++] * forcings(rows[k], j);
        if (sim) pred += coef[cc++] * (*sim)[rows[k]];
        const double e = target[k] - pred;
        ss += e * e;
    }
    model.residual_variance = ss / static_cast<double>(rows.size());
    return model;
}

double predict_ar(const ArModel& model, const std::vector<double>& lags,
                  const double* forcings_t, double sim_t) {
    double pred = model.intercept;
    for (int i = 0; i < model.order; ++i) {
        const double lag =
            (static_cast<std::size_t>(i) < lags.size() && !std::isnan(lags[i])) ? lags[i] : 0.0;
        pred += model.lag_coef[i] * lag;
    }
    for (std::size_t j = 0; j < model.forcing_coef.size(); ++j) {
        const double x = forcings_t ? forcings_t[j] : 0.0;
        pred += model.forcing_coef[j] * (std::isnan(x) ? 0.0 : x);
    }
    if (model.has_sim) pred += model.sim_coef * (std::isnan(sim_t) ? 0.0 : sim_t);
    return pred;
}

std::vector<double> predict_ar_series(const ArModel& model, const std::vector<double>& y,
                                      const Matrix& forcings, const std::vector<double>* sim) {
    const std::size_t n = y.size();
    if (model.forcing_coef.size() > 0 && forcings.rows() != n)
        throw ShapeError("predict_ar_series: forcing rows do not match series");
    std::vector<double> out(n, std::nan(""));
    std::vector<double> lags(model.order, 0.0);
    for (std::size_t t = static_cast<std::size_t>(model.order); t < n; ++t) {
        for (int i = 0; i < model.order; ++i) lags[i] = y[t - 1 - i];
        const double* xr = model.forcing_coef.empty() ? nullptr : forcings.row(t);
        const double s = (sim && model.has_sim) ? (*sim)[t] : 0.0;
        out[t] = predict_ar(model, lags, xr, s);
    }
    return out;
}

// --- ANN ------------------------------------------------------------------

std::vector<Matrix*> AnnModel::all() {
    std::vector<Matrix*> out;
    for (auto& w : weights) out.push_back(&w);
    for (auto& b : biases) out.push_back(&b);
    return out;
}

std::vector<const Matrix*> AnnModel::all() const {
    std::vector<const Matrix*> out;
    for (const auto& w : weights) out.push_back(&w);
    for (const auto& b : biases) out.push_back(&b);
    return out;
}

AnnModel make_ann(int input_dim, int hidden1, int hidden2, int output_dim) {
    if (input_dim < 1 || hidden1 < 1 || hidden2 < 1 || output_dim < 1)
        throw ParamError("make_ann: dimensions must be positive");
    AnnModel m;
    m.weights = {Matrix(input_dim, hidden1), Matrix(hidden1, hidden2), Matrix(hidden2, output_dim)};
    m.biases = {Matrix(1, hidden1), Matrix(1, hidden2), Matrix(1, output_dim)};
    return m;
}

AnnModel init_ann(int input_dim, int hidden1, int hidden2, SeededRng& rng, int output_dim) {
    AnnModel m = make_ann(input_dim, hidden1, hidden2, output_dim);
    for (Matrix& w : m.weights) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(w.rows()));
        double* p = w.data();
        for (std::size_t i = 0; i < w.size(); ++i) p[i] = rng.uniform(-bound, bound);
    }
    return m;
}

Matrix ann_forward(const Matrix& x, const AnnModel& model, AnnCache& cache) {
    if (x.cols() != model.weights[0].rows())
        throw ShapeError("ann_forward: input has " + std::to_string(x.cols()) +
                         " columns, model expects " + std::to_string(model.weights[0].rows()));
    cache.input = x;
    cache.post.clear();
    Matrix act = x;
    for (std::size_t l = 0; l + 1 < model.weights.size(); ++l) {
        Matrix next = matmul(act, model.weights[l]);
        add_rowvec_inplace(next, model.biases[l]);
        activate_inplace(Activation::Relu, next);
        cache.post.push_back(next);
        act = std::move(next);
    }
    Matrix out = matmul(act, model.weights.back());
    add_rowvec_inplace(out, model.biases.back());
    return out;
}

AnnModel ann_backward(const AnnCache& cache, const AnnModel& model, const Matrix& d_out) {
    const std::size_t n_layers = model.weights.size();
    if (cache.post.size() != n_layers - 1)
        throw StateError("ann_backward: cache does not match model depth");
    AnnModel grads = make_ann(model.weights[0].rows(), model.weights[0].cols(),
                              model.weights[1].cols(), model.weights[2].cols());

    Matrix delta = d_out;
    for (std::size_t l = n_layers; l-- > 0;) {
        const Matrix& in = l == 0 ? cache.input : cache.post[l - 1];
        matmul_at_b_into(grads.weights[l], in, delta, false);
        grads.biases[l] = col_sums(delta);
        if (l == 0) break;
        Matrix d_in(delta.rows(), model.weights[l].rows());
        matmul_a_bt_into(d_in, delta, model.weights[l], false);
        // relu gate of the layer below
        const Matrix& act = cache.post[l - 1];
        double* pd = d_in.data();
        const double* pa = act.data();
        for (std::size_t i = 0; i < d_in.size(); ++i)
            if (pa[i] <= 0.0) pd[i] = 0.0;
        delta = std::move(d_in);
    }
    return grads;
}

namespace {

/** Rows usable for pooled single-step training/prediction. */
struct AnnRowSource {
    const PreparedDataset* data;
    int n_forcing;
    int n_attr;

    int input_dim() const { return n_forcing + n_attr + 1; }

    void fill_row(std::size_t basin, long i, double* row) const {
        const PreparedBasin& pb = data->basins[basin];
        std::memcpy(row, pb.forcing_std.row(i), n_forcing * sizeof(double));
        std::memcpy(row + n_forcing, pb.attr_std.data(), n_attr * sizeof(double));
        row[n_forcing + n_attr] = i >= 1 ? pb.obs_filled[i - 1] : 0.0;
    }
};

} // namespace

TrainedAnn train_ann(const PreparedDataset& data, const AnnTrainConfig& cfg, std::uint64_t seed) {
    if (data.basins.empty()) throw DataError("train_ann: empty dataset");
    AnnRowSource src{&data, static_cast<int>(data.basins[0].forcing_std.cols()),
                     static_cast<int>(data.basins[0].attr_std.size())};

    // Candidate rows: training-period days with an observed target.
    struct RowRef {
        std::size_t basin;
        long i;
    };
    std::vector<RowRef> rows;
    for (std::size_t b = 0; b < data.basins.size(); ++b) {
        const PreparedBasin& pb = data.basins[b];
        const long lo = std::max<long>(0, pb.day_index(data.train.start));
        const long hi = std::min<long>(static_cast<long>(pb.n_days()) - 1,
                                       pb.day_index(data.train.end));
        for (long i = lo; i <= hi; ++i)
            if (pb.obs_mask[i] == 1.0) rows.push_back({b, i});
    }
    if (rows.empty()) throw DataError("train_ann: no usable training rows");

    SeededRng rng(seed);
    TrainedAnn out;
    out.seed = seed;
    out.model = init_ann(src.input_dim(), cfg.hidden1, cfg.hidden2, rng);
    Adadelta optimizer(cfg.adadelta_decay, cfg.adadelta_eps);

    Matrix x(cfg.batch_size, src.input_dim());
    std::vector<double> target(cfg.batch_size), mask(cfg.batch_size, 1.0), pred(cfg.batch_size);
    AnnCache cache;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double epoch_loss = 0.0;
        int n_steps = 0;
        for (int step = 0; step < cfg.steps_per_epoch; ++step) {
            for (int j = 0; j < cfg.batch_size; ++j) {
                const RowRef& ref = rows[rng.index(rows.size())];
                src.fill_row(ref.basin, ref.i, x.row(j));
                target[j] = data.basins[ref.basin].obs_filled[ref.i];
            }
            Matrix y = ann_forward(x, out.model, cache);
            for (int j = 0; j < cfg.batch_size; ++j) pred[j] = y(j, 0);
            const MaskedRmse loss = masked_rmse(pred, target, mask);
            if (!std::isfinite(loss.value))
                throw DivergenceError("train_ann: non-finite loss", out.loss_history);
            if (loss.value == 0.0) continue;

            Matrix d_out(cfg.batch_size, 1);
            for (int j = 0; j < cfg.batch_size; ++j)
                d_out(j, 0) = (pred[j] - target[j]) /
                              (loss.value * static_cast<double>(cfg.batch_size));
            AnnModel grads = ann_backward(cache, out.model, d_out);
            std::vector<const Matrix*> grad_ptrs;
            for (const Matrix* g : static_cast<const AnnModel&>(grads).all())
                grad_ptrs.push_back(g);
            optimizer.step(out.model.all(), grad_ptrs);
            epoch_loss += loss.value;
            ++n_steps;
        }
        out.loss_history.push_back(n_steps > 0 ? epoch_loss / n_steps : 0.0);
    }
    return out;
}

std::vector<double> ann_forecast(const TrainedAnn& ann, const PreparedDataset& data,
                                 std::size_t basin, Period period) {
    const PreparedBasin& pb = data.basins.at(basin);
    if (period.start < pb.start_date || period.end > pb.end_date())
        throw DataError("ann_forecast: period extends beyond the record of basin " + pb.id);
    AnnRowSource src{&data, static_cast<int>(pb.forcing_std.cols()),
                     static_cast<int>(pb.attr_std.size())};
    const long lo = pb.day_index(period.start), hi = pb.day_index(period.end);
    Matrix x(hi - lo + 1, src.input_dim());
    for (long i = lo; i <= hi; ++i) src.fill_row(basin, i, x.row(i - lo));
    AnnCache cache;
    const Matrix y = ann_forward(x, ann.model, cache);
    std::vector<double> out(y.rows());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = data.to_native(basin, y(k, 0));
    return out;
}

} // namespace flowcast
