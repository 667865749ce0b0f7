#include "flowcast/convnet.hpp"

#include "flowcast/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>

namespace flowcast {

ConvConfig ConvConfig::standard(int input_length) {
    ConvConfig cfg;
    cfg.input_length = input_length;
    cfg.layers = {{7, 8, 2}, {5, 8, 2}};
    const int w = static_cast<int>(std::lround(input_length / 36.0));
    cfg.output_width = std::clamp(w, 3, 10);
    cfg.validate();
    return cfg;
}

int ConvConfig::length_after(std::size_t i) const {
    int len = input_length;
    for (std::size_t l = 0; l <= i && l < layers.size(); ++l)
        len = (len - 1) / layers[l].stride + 1; // ceil(len/stride), 'same' padding
    return len;
}

void ConvConfig::validate() const {
    if (input_length < 1) throw ParamError("conv config: input_length must be >= 1");
    if (layers.empty()) throw ParamError("conv config: need at least one layer");
    if (output_width < 1) throw ParamError("conv config: output_width must be >= 1");
    for (const auto& l : layers)
        if (l.kernel < 1 || l.channels < 1 || l.stride < 1)
            throw ParamError("conv config: kernel, channels and stride must be >= 1");
    if (final_conv_length() < output_width)
        throw ParamError("conv config: " + std::to_string(final_conv_length()) +
                         " positions left before pooling, need >= " +
                         std::to_string(output_width));
}

std::string ConvConfig::serialize_layers() const {
    std::string out;
    char buf[48];
    for (const auto& l : layers) {
        std::snprintf(buf, sizeof buf, "%s%d,%d,%d", out.empty() ? "" : ";", l.kernel,
                      l.channels, l.stride);
        out += buf;
    }
    return out;
}

std::vector<ConvLayerSpec> ConvConfig::parse_layers(const std::string& text) {
    std::vector<ConvLayerSpec> layers;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find(';', pos);
        if (end == std::string::npos) end = text.size();
        ConvLayerSpec l;
        if (std::sscanf(text.substr(pos, end - pos).c_str(), "%d,%d,%d", &l.kernel, &l.channels,
                        &l.stride) != 3)
            throw ConfigError("cannot parse conv layer spec '" + text + "'");
        layers.push_back(l);
        pos = end + 1;
    }
    return layers;
}

std::vector<Matrix*> ConvWeights::all() {
    std::vector<Matrix*> out;
    for (auto& k : kernels) out.push_back(&k);
    for (auto& b : biases) out.push_back(&b);
    out.push_back(&w_linear);
    out.push_back(&b_linear);
    return out;
}

std::vector<const Matrix*> ConvWeights::all() const {
    std::vector<const Matrix*> out;
    for (const auto& k : kernels) out.push_back(&k);
    for (const auto& b : biases) out.push_back(&b);
    out.push_back(&w_linear);
    out.push_back(&b_linear);
    return out;
}

std::vector<std::string> ConvWeights::names() const {
    std::vector<std::string> out;
    for (std::size_t l = 0; l < kernels.size(); ++l) out.push_back("conv_k" + std::to_string(l));
    for (std::size_t l = 0; l < biases.size(); ++l) out.push_back("conv_b" + std::to_string(l));
    out.push_back("conv_linear_w");
    out.push_back("conv_linear_b");
    return out;
}

ConvWeights make_conv_weights(const ConvConfig& cfg) {
    cfg.validate();
    ConvWeights w;
    w.cfg = cfg;
    int c_in = 1;
    for (const auto& l : cfg.layers) {
        w.kernels.emplace_back(l.channels, c_in * l.kernel);
        w.biases.emplace_back(1, l.channels);
        c_in = l.channels;
    }
    w.w_linear = Matrix(cfg.final_channels() * cfg.output_width, cfg.output_width);
    w.b_linear = Matrix(1, cfg.output_width);
    return w;
}

ConvWeights init_conv_weights(const ConvConfig& cfg, SeededRng& rng) {
    ConvWeights w = make_conv_weights(cfg);
    for (auto& k : w.kernels) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(k.cols()));
        double* p = k.data();
        for (std::size_t i = 0; i < k.size(); ++i) p[i] = rng.uniform(-bound, bound);
    }
    {
        const double bound = 1.0 / std::sqrt(static_cast<double>(w.w_linear.rows()));
        double* p = w.w_linear.data();
        for (std::size_t i = 0; i < w.w_linear.size(); ++i) p[i] = rng.uniform(-bound, bound);
    }
    return w;
}

namespace {

// Adaptive pooling bins: bin p covers [floor(p*len/w), ceil((p+1)*len/w)).
inline int bin_lo(int p, int len, int w) { return (p * len) / w; }
inline int bin_hi(int p, int len, int w) { return ((p + 1) * len + w - 1) / w; }

void conv_layer_forward(const Matrix& in, const ConvLayerSpec& spec, const Matrix& kernel,
                        const Matrix& bias, Matrix& out) {
    const int c_in = static_cast<int>(in.rows());
    const int len_in = static_cast<int>(in.cols());
    const int len_out = (len_in - 1) / spec.stride + 1;
    const int pad = (spec.kernel - 1) / 2;
    out = Matrix(spec.channels, len_out);
    for (int co = 0; co < spec.channels; ++co) {
        const double* krow = kernel.row(co);
        for (int p = 0; p < len_out; ++p) {
            double acc = bias(0, co);
            const int base = p * spec.stride - pad;
            for (int ci = 0; ci < c_in; ++ci) {
                const double* irow = in.row(ci);
                const double* kk = krow + ci * spec.kernel;
                for (int k = 0; k < spec.kernel; ++k) {
                    const int q = base + k;
                    if (q < 0 || q >= len_in) continue;
                    acc += kk[k] * irow[q];
                }
            }
            out(co, p) = acc > 0.0 ? acc : 0.0; // relu
        }
    }
}

} // namespace

std::vector<double> conv_forward(const std::vector<double>& window, const ConvWeights& w,
                                 ConvCache& cache) {
    const ConvConfig& cfg = w.cfg;
    if (window.size() != static_cast<std::size_t>(cfg.input_length))
        throw ShapeError("conv_forward: window length " + std::to_string(window.size()) +
                         ", expected " + std::to_string(cfg.input_length));

    cache.layer_in.clear();
    cache.layer_out.clear();
    Matrix act(1, window.size());
    std::memcpy(act.data(), window.data(), window.size() * sizeof(double));

    for (std::size_t l = 0; l < cfg.layers.size(); ++l) {
        cache.layer_in.push_back(act);
        Matrix out;
        conv_layer_forward(act, cfg.layers[l], w.kernels[l], w.biases[l], out);
        cache.layer_out.push_back(out);
        act = std::move(out);
    }

    // Adaptive average pooling over the remaining length.
    const int ch = cfg.final_channels();
    const int len = static_cast<int>(act.cols());
    const int width = cfg.output_width;
    cache.pooled = Matrix(ch, width);
    for (int c = 0; c < ch; ++c)
        for (int p = 0; p < width; ++p) {
            const int lo = bin_lo(p, len, width), hi = bin_hi(p, len, width);
            double acc = 0.0;
            for (int q = lo; q < hi; ++q) acc += act(c, q);
            cache.pooled(c, p) = acc / static_cast<double>(hi - lo);
        }

    // Flatten channel-major and apply the linear readout.
    std::vector<double> features(width, 0.0);
    const double* flat = cache.pooled.data();
    for (int j = 0; j < width; ++j) {
        double acc = w.b_linear(0, j);
        for (std::size_t i = 0; i < w.w_linear.rows(); ++i) acc += flat[i] * w.w_linear(i, j);
        features[j] = acc;
    }
    return features;
}

Matrix conv_forward_batch(const Matrix& windows, const ConvWeights& w,
                          std::vector<ConvCache>& caches) {
    const std::size_t batch = windows.rows();
    caches.assign(batch, ConvCache{});
    Matrix out(batch, w.cfg.output_width);
    std::vector<double> window(windows.cols());
    for (std::size_t b = 0; b < batch; ++b) {
        std::memcpy(window.data(), windows.row(b), windows.cols() * sizeof(double));
        const auto f = conv_forward(window, w, caches[b]);
        std::memcpy(out.row(b), f.data(), f.size() * sizeof(double));
    }
    return out;
}

ConvGradients make_conv_gradients(const ConvConfig& cfg, std::size_t batch) {
    ConvGradients g;
    g.wrt = make_conv_weights(cfg);
    g.d_input = Matrix(batch, cfg.input_length);
    return g;
}

namespace {

void conv_layer_backward(const Matrix& in, const Matrix& out_postrelu, const ConvLayerSpec& spec,
                         const Matrix& kernel, const Matrix& d_out, Matrix& d_kernel,
                         Matrix& d_bias, Matrix& d_in) {
    const int c_in = static_cast<int>(in.rows());
    const int len_in = static_cast<int>(in.cols());
    const int len_out = static_cast<int>(out_postrelu.cols());
    const int pad = (spec.kernel - 1) / 2;
    d_in = Matrix(c_in, len_in);
    for (int co = 0; co < spec.channels; ++co) {
        const double* krow = kernel.row(co);
        double* dkrow = d_kernel.row(co);
        for (int p = 0; p < len_out; ++p) {
            if (out_postrelu(co, p) <= 0.0) continue; // relu gate
            const double g = d_out(co, p);
            if (g == 0.0) continue;
            d_bias(0, co) += g;
            const int base = p * spec.stride - pad;
            for (int ci = 0; ci < c_in; ++ci) {
                const double* irow = in.row(ci);
                double* drow = d_in.row(ci);
                const double* kk = krow + ci * spec.kernel;
                double* dkk = dkrow + ci * spec.kernel;
                for (int k = 0; k < spec.kernel; ++k) {
                    const int q = base + k;
                    if (q < 0 || q >= len_in) continue;
                    dkk[k] += g * irow[q];
                    drow[q] += g * kk[k];
                }
            }
        }
    }
}

} // namespace

void conv_backward_batch(const std::vector<ConvCache>& caches, const ConvWeights& w,
                         const Matrix& d_features, ConvGradients& grads) {
    const ConvConfig& cfg = w.cfg;
    const std::size_t batch = caches.size();
    if (d_features.rows() != batch ||
        d_features.cols() != static_cast<std::size_t>(cfg.output_width))
        throw StateError("conv_backward: feature gradient shape mismatch");
    if (grads.d_input.rows() != batch ||
        grads.d_input.cols() != static_cast<std::size_t>(cfg.input_length))
        throw StateError("conv_backward: gradient holder shape mismatch");

    const int ch = cfg.final_channels();
    const int width = cfg.output_width;

    for (std::size_t b = 0; b < batch; ++b) {
        const ConvCache& cache = caches[b];
        if (cache.layer_out.size() != cfg.layers.size())
            throw StateError("conv_backward: cache does not match config");

        // Linear readout.
        const double* flat = cache.pooled.data();
        Matrix d_pooled(ch, width);
        for (int j = 0; j < width; ++j) {
            const double g = d_features(b, j);
            if (g == 0.0) continue;
            grads.wrt.b_linear(0, j) += g;
            double* dflat = d_pooled.data();
            for (std::size_t i = 0; i < w.w_linear.rows(); ++i) {
                grads.wrt.w_linear(i, j) += flat[i] * g;
                dflat[i] += w.w_linear(i, j) * g;
            }
        }

        // Unpool: spread each bin's gradient uniformly over its span.
        const Matrix& last = cache.layer_out.back();
        const int len = static_cast<int>(last.cols());
        Matrix d_act(ch, len);
        for (int c = 0; c < ch; ++c)
            for (int p = 0; p < width; ++p) {
                const int lo = bin_lo(p, len, width), hi = bin_hi(p, len, width);
                const double g = d_pooled(c, p) / static_cast<double>(hi - lo);
                for (int q = lo; q < hi; ++q) d_act(c, q) += g;
            }

        // Conv stack in reverse.
        for (std::size_t l = cfg.layers.size(); l-- > 0;) {
            Matrix d_in;
            conv_layer_backward(cache.layer_in[l], cache.layer_out[l], cfg.layers[l],
                                w.kernels[l], d_act, grads.wrt.kernels[l], grads.wrt.biases[l],
                                d_in);
            d_act = std::move(d_in);
        }
        for (int q = 0; q < cfg.input_length; ++q) grads.d_input(b, q) += d_act(0, q);
    }
}

void append_conv_tensors(std::vector<std::pair<std::string, const Matrix*>>& tensors,
                         std::vector<std::pair<std::string, std::string>>& meta,
                         const ConvWeights& w) {
    meta.emplace_back("conv_input_length", std::to_string(w.cfg.input_length));
    meta.emplace_back("conv_layers", w.cfg.serialize_layers());
    meta.emplace_back("conv_output_width", std::to_string(w.cfg.output_width));
    const auto names = w.names();
    const auto mats = w.all();
    for (std::size_t i = 0; i < mats.size(); ++i) tensors.emplace_back(names[i], mats[i]);
}

void save_conv_weights(const std::string& path, const ConvWeights& w,
                       std::vector<std::pair<std::string, std::string>> extra_meta) {
    std::vector<std::pair<std::string, const Matrix*>> tensors;
    std::vector<std::pair<std::string, std::string>> meta = {{"model", "conv"}};
    for (auto& kv : extra_meta) meta.push_back(std::move(kv));
    append_conv_tensors(tensors, meta, w);
    save_tensors(path, tensors, meta);
}

ConvWeights load_conv_weights(const TensorFile& file) {
    ConvConfig cfg;
    cfg.input_length = std::stoi(file.meta_value("conv_input_length"));
    cfg.layers = ConvConfig::parse_layers(file.meta_value("conv_layers"));
    cfg.output_width = std::stoi(file.meta_value("conv_output_width"));
    ConvWeights w = make_conv_weights(cfg);
    const auto names = w.names();
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
