#ifndef FLOWCAST_CONVNET_HPP
#define FLOWCAST_CONVNET_HPP

#include "flowcast/lstm.hpp"
#include "flowcast/numerics.hpp"

#include <string>
#include <vector>

namespace flowcast {

struct ConvLayerSpec {
    int kernel = 1;
    int channels = 1;
    int stride = 1;

    bool operator==(const ConvLayerSpec&) const = default;
};

/**
 * Architecture of the 1-D reduction unit: a stack of zero-padded strided
 * convolutions with relu, adaptive average pooling over the remaining
 * length, and a linear map down to `output_width` features.
 */
struct ConvConfig {
    int input_length = 0;
    std::vector<ConvLayerSpec> layers;
    int output_width = 0;

    /**
     * Default coarsening stack: kernel 7 then 5, 8 channels, stride 2,
     * output width clamped to [3,10] at roughly input_length/36 (so 100
     * maps to 3 features and 365 to 10).
     */
    static ConvConfig standard(int input_length);

    /** Length after layer `i` ('same' zero padding: ceil(len/stride)). */
    int length_after(std::size_t i) const;
    int final_conv_length() const { return length_after(layers.size() - 1); }
    int final_channels() const { return layers.empty() ? 1 : layers.back().channels; }

    void validate() const;
    bool operator==(const ConvConfig&) const = default;

    std::string serialize_layers() const;
    static std::vector<ConvLayerSpec> parse_layers(const std::string& text);
};

struct ConvWeights {
    ConvConfig cfg;
    std::vector<Matrix> kernels; // layer l: (channels_out x channels_in*kernel)
    std::vector<Matrix> biases;  // layer l: (1 x channels_out)
    Matrix w_linear;             // (final_channels*output_width x output_width)
    Matrix b_linear;             // (1 x output_width)

    std::vector<Matrix*> all();
    std::vector<const Matrix*> all() const;
    std::vector<std::string> names() const;
};

ConvWeights make_conv_weights(const ConvConfig& cfg);
/** Uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)] per layer, biases zero. */
ConvWeights init_conv_weights(const ConvConfig& cfg, SeededRng& rng);

/** Activations retained for the backward pass, one entry per instance. */
struct ConvCache {
    std::vector<Matrix> layer_in;  // input to each conv layer (channels x length)
    std::vector<Matrix> layer_out; // post-relu output of each conv layer
    Matrix pooled;                 // (channels x output_width)
};

/**
 * Reduce one observation window (length cfg.input_length) to
 * cfg.output_width features. Throws ShapeError on a length mismatch.
 */
std::vector<double> conv_forward(const std::vector<double>& window, const ConvWeights& w,
                                 ConvCache& cache);

/** Batched convenience: windows (batch x input_length) -> (batch x width). */
Matrix conv_forward_batch(const Matrix& windows, const ConvWeights& w,
                          std::vector<ConvCache>& caches);

struct ConvGradients {
    ConvWeights wrt;       // same shapes as weights
    Matrix d_input;        // (batch x input_length)
};

/**
 * Exact reverse-mode gradients. `d_features` is (batch x output_width);
 * caches must come from the matching conv_forward_batch call. Gradients
 * accumulate into `grads` so ongoing sums over time steps are cheap.
 */
void conv_backward_batch(const std::vector<ConvCache>& caches, const ConvWeights& w,
                         const Matrix& d_features, ConvGradients& grads);

ConvGradients make_conv_gradients(const ConvConfig& cfg, std::size_t batch);

void save_conv_weights(const std::string& path, const ConvWeights& w,
                       std::vector<std::pair<std::string, std::string>> extra_meta = {});
ConvWeights load_conv_weights(const TensorFile& file);

/** Append conv tensors/meta to an existing container payload. */
void append_conv_tensors(std::vector<std::pair<std::string, const Matrix*>>& tensors,
                         std::vector<std::pair<std::string, std::string>>& meta,
                         const ConvWeights& w);

} // namespace flowcast

#endif // FLOWCAST_CONVNET_HPP
