#ifndef FLOWCAST_LSTM_HPP
#define FLOWCAST_LSTM_HPP

#include "flowcast/numerics.hpp"

#include <string>
#include <utility>
#include <vector>

namespace flowcast {

/** Layer widths of the recurrent network. */
struct LstmDims {
    int input_dim = 0;     // raw inputs per step (forcings + attributes + direct obs)
    int transform_dim = 0; // width of the linear+relu input transformation
    int conv_dim = 0;      // reduced observation features appended per step (0 = none)
    int hidden_dim = 0;
    int output_dim = 1;

    int cell_input_dim() const { return transform_dim + conv_dim; }
    bool operator==(const LstmDims&) const = default;
};

/**
 * All trainable parameters. Weight matrices are stored input-major so a
 * batch row-matrix multiplies from the left: (batch x in) * (in x out).
 */
struct LstmWeights {
    LstmDims dims;

    Matrix w_input, b_input; // input transformation
    Matrix w_gx, w_gh, b_g;  // input node
    Matrix w_ix, w_ih, b_i;  // input gate
    Matrix w_fx, w_fh, b_f;  // forget gate
    Matrix w_ox, w_oh, b_o;  // output gate
    Matrix w_out, b_out;     // hidden -> output readout

    /** Fixed-order access to every parameter matrix (for the optimizer). */
    std::vector<Matrix*> all();
    std::vector<const Matrix*> all() const;
    /** Same order as all(), with stable names (for checkpoints/diagnostics). */
    static const std::vector<std::string>& names();
};

/** Zero-initialized weights of the right shapes. */
LstmWeights make_weights(const LstmDims& dims);

/**
 * Random initialization: every weight uniform in [-1/sqrt(H), 1/sqrt(H)],
 * biases zero. Deterministic per rng seed.
 */
LstmWeights init_weights(const LstmDims& dims, SeededRng& rng);

/**
 * Constant dropout masks, one per masked product in the gate equations
 * (x-side and h-side of node g and gates i, f, o). Each is (batch x hidden)
 * and is applied identically at every step of the sequence; regenerate per
 * training instance batch.
 */
struct DropoutMasks {
    Matrix gx, gh, ix, ih, fx, fh, ox, oh;
};

DropoutMasks make_dropout_masks(SeededRng& rng, std::size_t batch, std::size_t hidden,
                                double keep_prob);

/** Per-step activations retained for backpropagation through time. */
struct LstmForwardCache {
    LstmDims dims;
    std::size_t batch = 0;
    std::vector<Matrix> raw_in;  // I^t           (batch x input_dim)
    std::vector<Matrix> x;       // cell input    (batch x cell_input_dim)
    std::vector<Matrix> node_g;  // (batch x hidden)
    std::vector<Matrix> gate_i;
    std::vector<Matrix> gate_f;
    std::vector<Matrix> gate_o;
    std::vector<Matrix> cell_s;
    std::vector<Matrix> tanh_s;
    std::vector<Matrix> hidden;

    std::size_t steps() const { return hidden.size(); }
};

/**
 * Sequence-to-sequence forward pass over `inputs` (one (batch x input_dim)
 * matrix per step). `conv_features`, when non-null, supplies one
 * (batch x conv_dim) matrix per step, concatenated after the input
 * transformation. `masks`, when non-null, applies constant dropout to the
 * eight gate products. Initial cell and hidden states are zero unless
 * `h0`/`s0` are given (both (batch x hidden); used by the stepwise
 * closed-loop forecaster).
 *
 * Returns one (batch x output_dim) matrix per step and fills `cache`.
 * Throws ShapeError on dimension mismatch and NumericError (naming the
 * step) if an intermediate becomes non-finite.
 */
std::vector<Matrix> lstm_forward(const std::vector<Matrix>& inputs,
                                 const std::vector<Matrix>* conv_features,
                                 const LstmWeights& w, const DropoutMasks* masks,
                                 LstmForwardCache& cache, const Matrix* h0 = nullptr,
                                 const Matrix* s0 = nullptr);

/** Gradients mirror the weight shapes; d_conv holds per-step gradients of
 *  the appended conv features so the reduction unit can train jointly. */
struct LstmGradients {
    LstmWeights wrt;            // same shapes as the weights
    std::vector<Matrix> d_conv; // per step (batch x conv_dim); empty if conv_dim=0
};

/**
 * Exact reverse-mode gradients of the forward map. `d_outputs` is dL/dy per
 * step, matching the forward's outputs. The cache must come from a forward
 * call with the same weights and masks, started from zero initial states
 * (the training configuration).
 */
LstmGradients lstm_backward(const LstmForwardCache& cache, const LstmWeights& w,
                            const DropoutMasks* masks, const std::vector<Matrix>& d_outputs);

// --- checkpoints ----------------------------------------------------------

/**
 * Binary tensor container used for model checkpoints: a versioned header,
 * string metadata, then named row-major float64 payloads (little-endian).
 * Round-trips bit-exactly.
 */
void save_tensors(const std::string& path,
                  const std::vector<std::pair<std::string, const Matrix*>>& tensors,
                  const std::vector<std::pair<std::string, std::string>>& meta);

struct TensorFile {
    std::vector<std::pair<std::string, Matrix>> tensors;
    std::vector<std::pair<std::string, std::string>> meta;

    const Matrix& find(const std::string& name) const;
    std::string meta_value(const std::string& key) const;
};

TensorFile load_tensors(const std::string& path);

void save_lstm_weights(const std::string& path, const LstmWeights& w,
                       std::vector<std::pair<std::string, std::string>> extra_meta = {});
LstmWeights load_lstm_weights(const TensorFile& file);

} // namespace flowcast

#endif // FLOWCAST_LSTM_HPP
