#include "flowcast/lstm.hpp"

#include "flowcast/errors.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace flowcast {

std::vector<Matrix*> LstmWeights::all() {
    return {&w_input, &b_input, &w_gx, &w_gh, &b_g, &w_ix, &w_ih, &b_i,
            &w_fx,    &w_fh,    &b_f,  &w_ox, &w_oh, &b_o,  &w_out, &b_out};
}

std::vector<const Matrix*> LstmWeights::all() const {
    return {&w_input, &b_input, &w_gx, &w_gh, &b_g, &w_ix, &w_ih, &b_i,
            &w_fx,    &w_fh,    &b_f,  &w_ox, &w_oh, &b_o,  &w_out, &b_out};
}

const std::vector<std::string>& LstmWeights::names() {
    static const std::vector<std::string> kNames = {
        "w_input", "b_input", "w_gx", "w_gh", "b_g", "w_ix", "w_ih", "b_i",
        "w_fx",    "w_fh",    "b_f",  "w_ox", "w_oh", "b_o", "w_out", "b_out"};
    return kNames;
}

LstmWeights make_weights(const LstmDims& dims) {
    if (dims.input_dim <= 0 || dims.transform_dim <= 0 || dims.hidden_dim <= 0 ||
        dims.output_dim <= 0 || dims.conv_dim < 0)
        throw ParamError("lstm dims must be positive");
    const std::size_t in = dims.input_dim, dx = dims.transform_dim,
                      cx = dims.cell_input_dim(), h = dims.hidden_dim, out = dims.output_dim;
    LstmWeights w;
    w.dims = dims;
    w.w_input = Matrix(in, dx);
    w.b_input = Matrix(1, dx);
    w.w_gx = Matrix(cx, h);
    w.w_gh = Matrix(h, h);
    w.b_g = Matrix(1, h);
    w.w_ix = Matrix(cx, h);
    w.w_ih = Matrix(h, h);
    w.b_i = Matrix(1, h);
    w.w_fx = Matrix(cx, h);
    w.w_fh = Matrix(h, h);
    w.b_f = Matrix(1, h);
    w.w_ox = Matrix(cx, h);
    w.w_oh = Matrix(h, h);
    w.b_o = Matrix(1, h);
    w.w_out = Matrix(h, out);
    w.b_out = Matrix(1, out);
    return w;
}

LstmWeights init_weights(const LstmDims& dims, SeededRng& rng) {
    LstmWeights w = make_weights(dims);
    const double bound = 1.0 / std::sqrt(static_cast<double>(dims.hidden_dim));
    const auto& names = LstmWeights::names();
    auto mats = w.all();
    for (std::size_t i = 0; i < mats.size(); ++i) {
        if (names[i][0] == 'b') continue; // biases stay zero
        double* p = mats[i]->data();
        for (std::size_t j = 0; j < mats[i]->size(); ++j) p[j] = rng.uniform(-bound, bound);
    }
    return w;
}

DropoutMasks make_dropout_masks(SeededRng& rng, std::size_t batch, std::size_t hidden,
                                double keep_prob) {
    DropoutMasks m;
    m.gx = bernoulli_mask(rng, batch, hidden, keep_prob);
    m.gh = bernoulli_mask(rng, batch, hidden, keep_prob);
    m.ix = bernoulli_mask(rng, batch, hidden, keep_prob);
    m.ih = bernoulli_mask(rng, batch, hidden, keep_prob);
    m.fx = bernoulli_mask(rng, batch, hidden, keep_prob);
    m.fh = bernoulli_mask(rng, batch, hidden, keep_prob);
    m.ox = bernoulli_mask(rng, batch, hidden, keep_prob);
    m.oh = bernoulli_mask(rng, batch, hidden, keep_prob);
    return m;
}

namespace {

struct GateRef {
    const Matrix* wx;
    const Matrix* wh;
    const Matrix* b;
    const Matrix* mask_x; // null when dropout off
    const Matrix* mask_h;
    Activation act;
};

void check_forward_shapes(const std::vector<Matrix>& inputs,
                          const std::vector<Matrix>* conv_features, const LstmWeights& w,
                          const DropoutMasks* masks) {
    const LstmDims& d = w.dims;
    if (inputs.empty()) throw ShapeError("lstm_forward: empty sequence");
    const std::size_t batch = inputs[0].rows();
    for (const Matrix& m : inputs)
        if (m.rows() != batch || m.cols() != static_cast<std::size_t>(d.input_dim))
            throw ShapeError("lstm_forward: input step is " + std::to_string(m.rows()) + "x" +
                             std::to_string(m.cols()) + ", expected " + std::to_string(batch) +
                             "x" + std::to_string(d.input_dim));
    if (d.conv_dim > 0) {
        if (!conv_features || conv_features->size() != inputs.size())
            throw ShapeError("lstm_forward: conv features missing or wrong step count");
        for (const Matrix& m : *conv_features)
            if (m.rows() != batch || m.cols() != static_cast<std::size_t>(d.conv_dim))
                throw ShapeError("lstm_forward: conv feature step has wrong shape");
    } else if (conv_features && !conv_features->empty()) {
        throw ShapeError("lstm_forward: conv features supplied but conv_dim is 0");
    }
    if (masks) {
        const Matrix* ms[] = {&masks->gx, &masks->gh, &masks->ix, &masks->ih,
                              &masks->fx, &masks->fh, &masks->ox, &masks->oh};
        for (const Matrix* m : ms)
            if (m->rows() != batch || m->cols() != static_cast<std::size_t>(d.hidden_dim))
                throw ShapeError("lstm_forward: dropout mask has wrong shape");
    }
}

} // namespace

std::vector<Matrix> lstm_forward(const std::vector<Matrix>& inputs,
                                 const std::vector<Matrix>* conv_features,
                                 const LstmWeights& w, const DropoutMasks* masks,
                                 LstmForwardCache& cache, const Matrix* h0, const Matrix* s0) {
    check_forward_shapes(inputs, conv_features, w, masks);
    const LstmDims& d = w.dims;
    const std::size_t steps = inputs.size();
    const std::size_t batch = inputs[0].rows();
    const std::size_t dx = d.transform_dim, cx = d.cell_input_dim(), h = d.hidden_dim;

    cache = LstmForwardCache{};
    cache.dims = d;
    cache.batch = batch;
    cache.raw_in = inputs;
    cache.x.resize(steps);
    cache.node_g.resize(steps);
    cache.gate_i.resize(steps);
    cache.gate_f.resize(steps);
    cache.gate_o.resize(steps);
    cache.cell_s.resize(steps);
    cache.tanh_s.resize(steps);
    cache.hidden.resize(steps);

    const GateRef gates[4] = {
        {&w.w_gx, &w.w_gh, &w.b_g, masks ? &masks->gx : nullptr, masks ? &masks->gh : nullptr,
         Activation::Tanh},
        {&w.w_ix, &w.w_ih, &w.b_i, masks ? &masks->ix : nullptr, masks ? &masks->ih : nullptr,
         Activation::Sigmoid},
        {&w.w_fx, &w.w_fh, &w.b_f, masks ? &masks->fx : nullptr, masks ? &masks->fh : nullptr,
         Activation::Sigmoid},
        {&w.w_ox, &w.w_oh, &w.b_o, masks ? &masks->ox : nullptr, masks ? &masks->oh : nullptr,
         Activation::Sigmoid},
    };

    std::vector<Matrix> outputs(steps);
    Matrix h_prev(batch, h), s_prev(batch, h);
    if (h0) {
        if (h0->rows() != batch || h0->cols() != h)
            throw ShapeError("lstm_forward: initial hidden state has wrong shape");
        h_prev = *h0;
    }
    if (s0) {
        if (s0->rows() != batch || s0->cols() != h)
            throw ShapeError("lstm_forward: initial cell state has wrong shape");
        s_prev = *s0;
    }
    Matrix pre(batch, dx), side(batch, h);

    for (std::size_t t = 0; t < steps; ++t) {
        // Input transformation, then optional conv features appended.
        matmul_into(pre, inputs[t], w.w_input, false);
        add_rowvec_inplace(pre, w.b_input);
        activate_inplace(Activation::Relu, pre);
        Matrix& x = cache.x[t];
        x = Matrix(batch, cx);
        for (std::size_t i = 0; i < batch; ++i) {
            std::memcpy(x.row(i), pre.row(i), dx * sizeof(double));
            if (d.conv_dim > 0)
                std::memcpy(x.row(i) + dx, (*conv_features)[t].row(i),
                            d.conv_dim * sizeof(double));
        }

        Matrix* acts[4] = {&cache.node_g[t], &cache.gate_i[t], &cache.gate_f[t],
                           &cache.gate_o[t]};
        for (int gi = 0; gi < 4; ++gi) {
            const GateRef& g = gates[gi];
            Matrix& a = *acts[gi];
            matmul_into(a, x, *g.wx, false);
            if (g.mask_x) hadamard_inplace(a, *g.mask_x);
            matmul_into(side, h_prev, *g.wh, false);
            if (g.mask_h) hadamard_inplace(side, *g.mask_h);
            add_inplace(a, side);
            add_rowvec_inplace(a, *g.b);
            activate_inplace(g.act, a);
        }

        // s^t = g .* i + s^{t-1} .* f ; h^t = tanh(s^t) .* o
        Matrix& s = cache.cell_s[t];
        s = cache.node_g[t];
        hadamard_inplace(s, cache.gate_i[t]);
        {
            Matrix carry = s_prev;
            hadamard_inplace(carry, cache.gate_f[t]);
            add_inplace(s, carry);
        }
        cache.tanh_s[t] = activate(Activation::Tanh, s);
        Matrix& hid = cache.hidden[t];
        hid = cache.tanh_s[t];
        hadamard_inplace(hid, cache.gate_o[t]);

        outputs[t] = matmul(hid, w.w_out);
        add_rowvec_inplace(outputs[t], w.b_out);

        if (!s.all_finite() || !outputs[t].all_finite())
            throw NumericError("lstm_forward: non-finite value at step " + std::to_string(t));

        h_prev = hid;
        s_prev = s;
    }
    return outputs;
}

LstmGradients lstm_backward(const LstmForwardCache& cache, const LstmWeights& w,
                            const DropoutMasks* masks, const std::vector<Matrix>& d_outputs) {
    const LstmDims& d = w.dims;
    if (cache.dims != d)
        throw StateError("lstm_backward: cache was built with different dimensions");
    const std::size_t steps = cache.steps();
    if (d_outputs.size() != steps)
        throw StateError("lstm_backward: " + std::to_string(d_outputs.size()) +
                         " output gradients for " + std::to_string(steps) + " cached steps");
    const std::size_t batch = cache.batch;
    const std::size_t dx = d.transform_dim, cx = d.cell_input_dim(), h = d.hidden_dim;

    LstmGradients grads;
    grads.wrt = make_weights(d);
    if (d.conv_dim > 0) grads.d_conv.assign(steps, Matrix(batch, d.conv_dim));

    struct GateGrad {
        const Matrix* wx;
        const Matrix* wh;
        Matrix* d_wx;
        Matrix* d_wh;
        Matrix* d_b;
        const Matrix* mask_x;
        const Matrix* mask_h;
        const std::vector<Matrix>* act;
        bool is_tanh;
    };
    const GateGrad gates[4] = {
        {&w.w_gx, &w.w_gh, &grads.wrt.w_gx, &grads.wrt.w_gh, &grads.wrt.b_g,
         masks ? &masks->gx : nullptr, masks ? &masks->gh : nullptr, &cache.node_g, true},
        {&w.w_ix, &w.w_ih, &grads.wrt.w_ix, &grads.wrt.w_ih, &grads.wrt.b_i,
         masks ? &masks->ix : nullptr, masks ? &masks->ih : nullptr, &cache.gate_i, false},
        {&w.w_fx, &w.w_fh, &grads.wrt.w_fx, &grads.wrt.w_fh, &grads.wrt.b_f,
         masks ? &masks->fx : nullptr, masks ? &masks->fh : nullptr, &cache.gate_f, false},
        {&w.w_ox, &w.w_oh, &grads.wrt.w_ox, &grads.wrt.w_oh, &grads.wrt.b_o,
         masks ? &masks->ox : nullptr, masks ? &masks->oh : nullptr, &cache.gate_o, false},
    };

    Matrix dh_carry(batch, h), ds_carry(batch, h);
    Matrix dh(batch, h), ds(batch, h), dgate(batch, h), da(batch, h), dp(batch, h);
    Matrix dx_total(batch, cx);
    const Matrix zero_state(batch, h);

    for (std::size_t t = steps; t-- > 0;) {
        const Matrix& dy = d_outputs[t];
        if (dy.rows() != batch || dy.cols() != static_cast<std::size_t>(d.output_dim))
            throw StateError("lstm_backward: output gradient shape mismatch at step " +
                             std::to_string(t));

        // Readout layer.
        matmul_at_b_into(grads.wrt.w_out, cache.hidden[t], dy, true);
        add_inplace(grads.wrt.b_out, col_sums(dy));
        matmul_a_bt_into(dh, dy, w.w_out, false);
        add_inplace(dh, dh_carry);

        // h = tanh(s) .* o
        // ds += dh .* o .* (1 - tanh(s)^2)
        ds = ds_carry;
        {
            const double* ph = dh.data();
            const double* po = cache.gate_o[t].data();
            const double* pts = cache.tanh_s[t].data();
            double* pds = ds.data();
            for (std::size_t i = 0; i < ds.size(); ++i)
                pds[i] += ph[i] * po[i] * (1.0 - pts[i] * pts[i]);
        }

        const Matrix& s_prev = t > 0 ? cache.cell_s[t - 1] : zero_state;
        const Matrix& h_prev = t > 0 ? cache.hidden[t - 1] : zero_state;

        // Carry into step t-1 via the forget gate.
        ds_carry = ds;
        hadamard_inplace(ds_carry, cache.gate_f[t]);

        dx_total.fill(0.0);
        dh_carry.fill(0.0);

        for (int gi = 0; gi < 4; ++gi) {
            const GateGrad& g = gates[gi];
            const Matrix& act = (*g.act)[t];

            // dL/d(gate output)
            switch (gi) {
            case 0: dgate = ds; hadamard_inplace(dgate, cache.gate_i[t]); break; // node g
            case 1: dgate = ds; hadamard_inplace(dgate, cache.node_g[t]); break; // gate i
            case 2: dgate = ds; hadamard_inplace(dgate, s_prev); break;          // gate f
            case 3: // gate o: dh .* tanh(s)
                dgate = dh;
                hadamard_inplace(dgate, cache.tanh_s[t]);
                break;
            }

            // Through the activation to the pre-activation sum.
            {
                const double* pa = act.data();
                const double* pg = dgate.data();
                double* pda = da.data();
                if (g.is_tanh)
                    for (std::size_t i = 0; i < da.size(); ++i)
                        pda[i] = pg[i] * (1.0 - pa[i] * pa[i]);
                else
                    for (std::size_t i = 0; i < da.size(); ++i)
                        pda[i] = pg[i] * pa[i] * (1.0 - pa[i]);
            }
            add_inplace(*g.d_b, col_sums(da));

            // x-side product (masked).
            dp = da;
            if (g.mask_x) hadamard_inplace(dp, *g.mask_x);
            matmul_at_b_into(*g.d_wx, cache.x[t], dp, true);
            matmul_a_bt_into(dx_total, dp, *g.wx, true);

            // h-side product (masked).
            dp = da;
            if (g.mask_h) hadamard_inplace(dp, *g.mask_h);
            if (t > 0) matmul_at_b_into(*g.d_wh, h_prev, dp, true);
            matmul_a_bt_into(dh_carry, dp, *g.wh, true);
        }

        // Split the cell-input gradient: transform part goes through relu,
        // conv part is handed to the reduction unit.
        Matrix dpre(batch, dx);
        for (std::size_t i = 0; i < batch; ++i) {
            const double* xrow = cache.x[t].row(i);
            const double* drow = dx_total.row(i);
            double* prow = dpre.row(i);
            for (std::size_t j = 0; j < dx; ++j) prow[j] = xrow[j] > 0.0 ? drow[j] : 0.0;
            if (d.conv_dim > 0)
                std::memcpy(grads.d_conv[t].row(i), drow + dx, d.conv_dim * sizeof(double));
        }
        matmul_at_b_into(grads.wrt.w_input, cache.raw_in[t], dpre, true);
        add_inplace(grads.wrt.b_input, col_sums(dpre));
    }
    return grads;
}

// --- checkpoint container ---------------------------------------------------
//
// Layout (little-endian):
//   "FCT1" | u32 version | u32 n_meta | {u32 klen, k, u32 vlen, v}*
//   u32 n_tensors | {u32 nlen, name, u64 rows, u64 cols, f64 payload}*

namespace {

void write_u32(std::ostream& os, std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
void write_u64(std::ostream& os, std::uint64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }
void write_str(std::ostream& os, const std::string& s) {
    write_u32(os, static_cast<std::uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}
std::uint32_t read_u32(std::istream& is) {
    std::uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 4);
    return v;
}
std::uint64_t read_u64(std::istream& is) {
    std::uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 8);
    return v;
}
std::string read_str(std::istream& is) {
    const std::uint32_t len = read_u32(is);
    if (len > (1u << 20)) throw DataError("tensor file: implausible string length");
    std::string s(len, '\0');
    is.read(s.data(), len);
    return s;
}

} // namespace

void save_tensors(const std::string& path,
                  const std::vector<std::pair<std::string, const Matrix*>>& tensors,
                  const std::vector<std::pair<std::string, std::string>>& meta) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw IoError("cannot open '" + tmp + "' for writing");
        os.write("FCT1", 4);
        write_u32(os, 1);
        write_u32(os, static_cast<std::uint32_t>(meta.size()));
        for (const auto& [k, v] : meta) {
            write_str(os, k);
            write_str(os, v);
        }
        write_u32(os, static_cast<std::uint32_t>(tensors.size()));
        for (const auto& [name, m] : tensors) {
            write_str(os, name);
            write_u64(os, m->rows());
            write_u64(os, m->cols());
            os.write(reinterpret_cast<const char*>(m->data()),
                     static_cast<std::streamsize>(m->size() * sizeof(double)));
        }
        if (!os) throw IoError("write failed for '" + tmp + "'");
    }
    std::filesystem::rename(tmp, path);
}

TensorFile load_tensors(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open '" + path + "'");
    char magic[4];
    is.read(magic, 4);
    if (std::memcmp(magic, "FCT1", 4) != 0)
        throw DataError("'" + path + "' is not a tensor checkpoint");
    const std::uint32_t version = read_u32(is);
    if (version != 1)
        throw DataError("tensor file version " + std::to_string(version) + " unsupported");
    TensorFile file;
    const std::uint32_t n_meta = read_u32(is);
    for (std::uint32_t i = 0; i < n_meta; ++i) {
        std::string k = read_str(is);
        std::string v = read_str(is);
        file.meta.emplace_back(std::move(k), std::move(v));
    }
    const std::uint32_t n_tensors = read_u32(is);
    for (std::uint32_t i = 0; i < n_tensors; ++i) {
        std::string name = read_str(is);
        const std::uint64_t rows = read_u64(is);
        const std::uint64_t cols = read_u64(is);
        if (rows * cols > (1ull << 28)) throw DataError("tensor file: implausible tensor size");
        Matrix m(rows, cols);
        is.read(reinterpret_cast<char*>(m.data()),
                static_cast<std::streamsize>(m.size() * sizeof(double)));
        if (!is) throw DataError("tensor file truncated at '" + name + "'");
        file.tensors.emplace_back(std::move(name), std::move(m));
    }
    return file;
}

const Matrix& TensorFile::find(const std::string& name) const {
    for (const auto& [n, m] : tensors)
        if (n == name) return m;
    throw DataError("tensor '" + name + "' not found in checkpoint");
}

std::string TensorFile::meta_value(const std::string& key) const {
    for (const auto& [k, v] : meta)
        if (k == key) return v;
    throw DataError("metadata key '" + key + "' not found in checkpoint");
}

void save_lstm_weights(const std::string& path, const LstmWeights& w,
                       std::vector<std::pair<std::string, std::string>> extra_meta) {
    std::vector<std::pair<std::string, std::string>> meta = {
        {"model", "lstm"},
        {"input_dim", std::to_string(w.dims.input_dim)},
        {"transform_dim", std::to_string(w.dims.transform_dim)},
        {"conv_dim", std::to_string(w.dims.conv_dim)},
        {"hidden_dim", std::to_string(w.dims.hidden_dim)},
        {"output_dim", std::to_string(w.dims.output_dim)},
    };
    for (auto& kv : extra_meta) meta.push_back(std::move(kv));
    std::vector<std::pair<std::string, const Matrix*>> tensors;
    const auto& names = LstmWeights::names();
    auto mats = w.all();
    for (std::size_t i = 0; i < mats.size(); ++i) tensors.emplace_back(names[i], mats[i]);
    save_tensors(path, tensors, meta);
}

LstmWeights load_lstm_weights(const TensorFile& file) {
    LstmDims dims;
    dims.input_dim = std::stoi(file.meta_value("input_dim"));
    dims.transform_dim = std::stoi(file.meta_value("transform_dim"));
    dims.conv_dim = std::stoi(file.meta_value("conv_dim"));
    dims.hidden_dim = std::stoi(file.meta_value("hidden_dim"));
    dims.output_dim = std::stoi(file.meta_value("output_dim"));
    LstmWeights w = make_weights(dims);
    const auto& names = LstmWeights::names();
    auto mats = w.all();
    for (std::size_t i = 0; i < mats.size(); ++i) {
        const Matrix& src = file.find(names[i]);
        if (!src.same_shape(*mats[i]))
            throw DataError("checkpoint tensor '" + names[i] + "' has unexpected shape");
        *mats[i] = src;
    }
    return w;
}

} // namespace flowcast
