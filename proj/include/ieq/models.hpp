#ifndef IEQ_MODELS_HPP
#define IEQ_MODELS_HPP

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ieq/matrix.hpp"
#include "ieq/pipeline.hpp"

namespace ieq {

enum class Family { lstm, gru, cnn_lstm };

std::string family_name(Family family);
Family family_from_name(const std::string& name);

/**
 * Architecture description. All three families read a window of
 * `input_features`-wide steps and emit `output_size` next-step values
 * through a linear head. The hybrid prepends a valid 1-D convolution
 * (conv_filters filters, conv_kernel taps) plus ReLU to the LSTM.
 */
struct ModelSpec {
    Family family = Family::lstm;
    std::size_t input_features = kNumFeatures;
    std::size_t hidden_size = 64;
    std::size_t conv_filters = 32;  // cnn_lstm only
    std::size_t conv_kernel = 3;    // cnn_lstm only
    std::size_t output_size = kNumTargets;
    std::uint64_t seed = 0;

    bool operator==(const ModelSpec&) const = default;

    /// 4 for LSTM-based cells (i, f, g, o), 3 for GRU (z, r, h).
    std::size_t gate_count() const { return family == Family::gru ? 3 : 4; }

    /// Width of the sequence the recurrent cell consumes.
    std::size_t recurrent_inputs() const {
        return family == Family::cnn_lstm ? conv_filters : input_features;
    }

    std::size_t conv_param_count() const {
        if (family != Family::cnn_lstm) return 0;
        return conv_kernel * input_features * conv_filters + conv_filters;
    }
    std::size_t recurrent_param_count() const {
        const std::size_t r = recurrent_inputs();
        const std::size_t h = hidden_size;
        return gate_count() * (h * r + h * h + h);
    }
    std::size_t head_param_count() const { return hidden_size * output_size + output_size; }
    std::size_t param_count() const {
        return conv_param_count() + recurrent_param_count() + head_param_count();
    }
};

/**
 * All weights and biases of one architecture, stored as a single flat
 * vector with a fixed ordering so optimizers and gradient checks can treat
 * the model as one parameter vector. Layout (version 1):
 *
 *   [conv kernels K x F x filters][conv bias]      (cnn_lstm only)
 *   [W : gates*H x R][U : gates*H x H][b : gates*H]
 *   [W_out : out x H][b_out : out]
 *
 * Gate row blocks are i,f,g,o for LSTM-based cells and z,r,h for GRU.
 */
class ModelParams {
public:
    explicit ModelParams(const ModelSpec& spec);
    ModelParams(const ModelSpec& spec, std::vector<double> flat);

    const ModelSpec& spec() const { return spec_; }
    std::size_t size() const { return flat_.size(); }

    std::vector<double>& flat() { return flat_; }
    const std::vector<double>& flat() const { return flat_; }

    std::span<double> conv_kernels() { return view(0, conv_bias_off_); }
    std::span<double> conv_bias() { return view(conv_bias_off_, conv_bias_len_); }
    std::span<double> input_weights() { return view(w_off_, w_len_); }
    std::span<double> recurrent_weights() { return view(u_off_, u_len_); }
    std::span<double> gate_bias() { return view(b_off_, b_len_); }
    std::span<double> head_weights() { return view(head_w_off_, head_w_len_); }
    std::span<double> head_bias() { return view(head_b_off_, head_b_len_); }

    std::span<const double> conv_kernels() const { return cview(0, conv_bias_off_); }
    std::span<const double> conv_bias() const { return cview(conv_bias_off_, conv_bias_len_); }
    std::span<const double> input_weights() const { return cview(w_off_, w_len_); }
    std::span<const double> recurrent_weights() const { return cview(u_off_, u_len_); }
    std::span<const double> gate_bias() const { return cview(b_off_, b_len_); }
    std::span<const double> head_weights() const { return cview(head_w_off_, head_w_len_); }
    std::span<const double> head_bias() const { return cview(head_b_off_, head_b_len_); }

private:
    std::span<double> view(std::size_t off, std::size_t len) {
        return {flat_.data() + off, len};
    }
    std::span<const double> cview(std::size_t off, std::size_t len) const {
        return {flat_.data() + off, len};
    }
    void compute_offsets();

    ModelSpec spec_;
    std::vector<double> flat_;
    std::size_t conv_bias_off_ = 0, conv_bias_len_ = 0;
    std::size_t w_off_ = 0, w_len_ = 0;
    std::size_t u_off_ = 0, u_len_ = 0;
    std::size_t b_off_ = 0, b_len_ = 0;
    std::size_t head_w_off_ = 0, head_w_len_ = 0;
    std::size_t head_b_off_ = 0, head_b_len_ = 0;
};

/**
 * Seeded deterministic initialization: Glorot-uniform input, convolution
 * and head weights; recurrent weights orthogonalized per gate from a
 * Gaussian draw; biases zero except the LSTM forget gate at 1.
 */
ModelParams init_params(const ModelSpec& spec);

/// Intermediates of one forward pass, consumed by model_backward.
struct ForwardCache {
    ModelSpec spec;
    Matrix window;    // input as given [T x F]
    Matrix seq;       // sequence entering the recurrence [T' x R]
    Matrix conv_pre;  // pre-ReLU convolution output (cnn_lstm)
    // Per-step stacks [T' x H]; post-activation gate values.
    Matrix i_gate, f_gate, g_gate, o_gate, cell, cell_tanh;  // lstm / cnn_lstm
    Matrix z_gate, r_gate, candidate;                        // gru
    Matrix hidden;                                           // all families
    std::array<double, kNumTargets> prediction{};
};

// Forward passes. The window is [T x input_features] of normalized
// features; the prediction is the linear head over the final hidden state.
// Pass a cache pointer to record intermediates for backward; leave it null
// for inference. Throws std::invalid_argument on non-finite input or a
// feature-count mismatch.
std::array<double, kNumTargets> lstm_forward(const ModelParams& params, const Matrix& window,
                                             ForwardCache* cache = nullptr);
std::array<double, kNumTargets> gru_forward(const ModelParams& params, const Matrix& window,
                                            ForwardCache* cache = nullptr);
std::array<double, kNumTargets> cnn_lstm_forward(const ModelParams& params,
                                                 const Matrix& window,
                                                 ForwardCache* cache = nullptr);
std::array<double, kNumTargets> model_forward(const ModelParams& params, const Matrix& window,
                                              ForwardCache* cache = nullptr);

/**
 * Exact gradient of the prediction w.r.t. every parameter via
 * backpropagation through time, contracted with `prediction_grad`
 * (dLoss/dprediction). Accumulates into `out_grad`, which must be
 * zero-initialized by the caller and sized params.size(). Throws
 * std::invalid_argument when the cache does not match the params.
 */
void model_backward(const ModelParams& params, const ForwardCache& cache,
                    std::span<const double> prediction_grad, std::span<double> out_grad);

std::vector<double> model_backward(const ModelParams& params, const ForwardCache& cache,
                                   std::span<const double> prediction_grad);

// Single recurrence steps from an explicit hidden state; used by tests and
// oracles. h (and c for the LSTM) are updated in place.
void lstm_step(const ModelParams& params, std::span<const double> x, std::span<double> h,
               std::span<double> c);
void gru_step(const ModelParams& params, std::span<const double> x, std::span<double> h);

// Checkpoint file: text header (family, shape fields, seed, parameter
// ordering version) followed by the raw little-endian parameter vector.
// A loaded checkpoint reproduces predictions bitwise.
void save_checkpoint(const ModelParams& params, const std::string& path);
ModelParams load_checkpoint(const std::string& path);

}  // namespace ieq

#endif  // IEQ_MODELS_HPP
