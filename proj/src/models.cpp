#include "ieq/models.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "ieq/errors.hpp"
#include "ieq/kernels.hpp"
#include "ieq/rng.hpp"

namespace ieq {

std::string family_name(Family family) {
    switch (family) {
        case Family::lstm: return "lstm";
        case Family::gru: return "gru";
        case Family::cnn_lstm: return "cnn_lstm";
    }
    return "unknown";
}

Family family_from_name(const std::string& name) {
    if (name == "lstm") return Family::lstm;
    if (name == "gru") return Family::gru;
    if (name == "cnn_lstm") return Family::cnn_lstm;
    throw ConfigError("unknown model family '" + name + "'");
}

// ---------------------------------------------------------------------------
// ModelParams
// ---------------------------------------------------------------------------

void ModelParams::compute_offsets() {
    const std::size_t gates = spec_.gate_count();
    const std::size_t h = spec_.hidden_size;
    const std::size_t r = spec_.recurrent_inputs();

    std::size_t off = 0;
    if (spec_.family == Family::cnn_lstm) {
        off = spec_.conv_kernel * spec_.input_features * spec_.conv_filters;
        conv_bias_off_ = off;
        conv_bias_len_ = spec_.conv_filters;
        off += conv_bias_len_;
    } else {
        conv_bias_off_ = 0;
        conv_bias_len_ = 0;
    }
    w_off_ = off;
    w_len_ = gates * h * r;
    off += w_len_;
    u_off_ = off;
    u_len_ = gates * h * h;
    off += u_len_;
    b_off_ = off;
    b_len_ = gates * h;
    off += b_len_;
    head_w_off_ = off;
    head_w_len_ = spec_.output_size * h;
    off += head_w_len_;
    head_b_off_ = off;
    head_b_len_ = spec_.output_size;
}

ModelParams::ModelParams(const ModelSpec& spec)
    : spec_(spec), flat_(spec.param_count(), 0.0) {
    compute_offsets();
}

ModelParams::ModelParams(const ModelSpec& spec, std::vector<double> flat)
    : spec_(spec), flat_(std::move(flat)) {
    if (flat_.size() != spec.param_count()) {
        throw std::invalid_argument("ModelParams: flat vector has " +
                                    std::to_string(flat_.size()) + " entries, spec needs " +
                                    std::to_string(spec.param_count()));
    }
    compute_offsets();
}

// ---------------------------------------------------------------------------
// init_params
// ---------------------------------------------------------------------------

namespace {

void fill_glorot(std::span<double> dst, std::size_t fan_in, std::size_t fan_out,
                 CounterRng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& v : dst) v = rng.uniform(-limit, limit);
}

// Orthonormal columns via modified Gram-Schmidt over a Gaussian draw.
void fill_orthogonal(std::span<double> block, std::size_t h, CounterRng& rng) {
    Matrix a(h, h);
    for (double& v : a.data()) v = rng.normal();
    for (std::size_t j = 0; j < h; ++j) {
        for (std::size_t k = 0; k < j; ++k) {
            double dot = 0.0;
            for (std::size_t i = 0; i < h; ++i) dot += a(i, k) * a(i, j);
            for (std::size_t i = 0; i < h; ++i) a(i, j) -= dot * a(i, k);
        }
        double norm = 0.0;
        for (std::size_t i = 0; i < h; ++i) norm += a(i, j) * a(i, j);
        norm = std::sqrt(norm);
        for (std::size_t i = 0; i < h; ++i) a(i, j) /= norm;
    }
    std::copy(a.data().begin(), a.data().end(), block.begin());
}

}  // namespace

ModelParams init_params(const ModelSpec& spec) {
    if (spec.hidden_size < 1) throw ConfigError("init_params: hidden_size must be >= 1");
    if (spec.output_size != kNumTargets) {
        throw ConfigError("init_params: output_size must be " + std::to_string(kNumTargets));
    }
    ModelParams params(spec);
    CounterRng rng(spec.seed);

    const std::size_t h = spec.hidden_size;
    const std::size_t r = spec.recurrent_inputs();
    const std::size_t gates = spec.gate_count();

    if (spec.family == Family::cnn_lstm) {
        fill_glorot(params.conv_kernels(), spec.conv_kernel * spec.input_features,
                    spec.conv_filters, rng);
        // conv bias stays zero
    }
    // Input weights per gate: fan_in = R, fan_out = H.
    {
        auto w = params.input_weights();
        for (std::size_t g = 0; g < gates; ++g) {
            fill_glorot(w.subspan(g * h * r, h * r), r, h, rng);
        }
    }
    {
        auto u = params.recurrent_weights();
        for (std::size_t g = 0; g < gates; ++g) {
            fill_orthogonal(u.subspan(g * h * h, h * h), h, rng);
        }
    }
    if (spec.family != Family::gru) {
        // Forget gate bias 1 (rows [H, 2H) in the i,f,g,o block order).
        auto b = params.gate_bias();
        for (std::size_t i = h; i < 2 * h; ++i) b[i] = 1.0;
    }
    fill_glorot(params.head_weights(), h, spec.output_size, rng);
    return params;
}

// ---------------------------------------------------------------------------
// forward passes
// ---------------------------------------------------------------------------

namespace {

void check_window(const ModelSpec& spec, const Matrix& window) {
    if (window.cols() != spec.input_features) {
        throw std::invalid_argument("forward: window has " + std::to_string(window.cols()) +
                                    " features, spec expects " +
                                    std::to_string(spec.input_features));
    }
    if (window.rows() == 0) throw std::invalid_argument("forward: empty window");
    for (double v : window.data()) {
        if (!std::isfinite(v)) throw std::invalid_argument("forward: non-finite input value");
    }
}

// preact = W_block x + U_block h + b_block for all gates at once.
void gate_preactivations(std::span<const double> w, std::span<const double> u,
                         std::span<const double> b, std::span<const double> x,
                         std::span<const double> h, std::span<double> preact) {
    const std::size_t rows = preact.size();
    const std::size_t rdim = x.size();
    const std::size_t hdim = h.size();
    for (std::size_t row = 0; row < rows; ++row) {
        double acc = b[row];
        const double* wr = w.data() + row * rdim;
        for (std::size_t j = 0; j < rdim; ++j) acc += wr[j] * x[j];
        const double* ur = u.data() + row * hdim;
        for (std::size_t j = 0; j < hdim; ++j) acc += ur[j] * h[j];
        preact[row] = acc;
    }
}

void ensure_shape(Matrix& m, std::size_t rows, std::size_t cols) {
    if (m.rows() != rows || m.cols() != cols) m = Matrix(rows, cols);
}

std::array<double, kNumTargets> head_output(const ModelParams& params,
                                            std::span<const double> h) {
    const std::size_t hdim = params.spec().hidden_size;
    auto w = params.head_weights();
    auto b = params.head_bias();
    std::array<double, kNumTargets> out{};
    for (std::size_t o = 0; o < params.spec().output_size; ++o) {
        double acc = b[o];
        const double* wr = w.data() + o * hdim;
        for (std::size_t j = 0; j < hdim; ++j) acc += wr[j] * h[j];
        out[o] = acc;
    }
    return out;
}

// One LSTM step; gate values and new states are written to the spans.
void lstm_step_impl(const ModelParams& params, std::span<const double> x,
                    std::span<const double> h_prev, std::span<const double> c_prev,
                    std::span<double> ig, std::span<double> fg, std::span<double> gg,
                    std::span<double> og, std::span<double> c_new,
                    std::span<double> c_tanh, std::span<double> h_new,
                    std::vector<double>& preact_scratch) {
    const std::size_t h = params.spec().hidden_size;
    preact_scratch.resize(4 * h);
    gate_preactivations(params.input_weights(), params.recurrent_weights(),
                        params.gate_bias(), x, h_prev, preact_scratch);
    for (std::size_t j = 0; j < h; ++j) {
        const double i_v = sigmoid(preact_scratch[j]);
        const double f_v = sigmoid(preact_scratch[h + j]);
        const double g_v = std::tanh(preact_scratch[2 * h + j]);
        const double o_v = sigmoid(preact_scratch[3 * h + j]);
        const double c_v = f_v * c_prev[j] + i_v * g_v;
        const double ct = std::tanh(c_v);
        ig[j] = i_v;
        fg[j] = f_v;
        gg[j] = g_v;
        og[j] = o_v;
        c_new[j] = c_v;
        c_tanh[j] = ct;
        h_new[j] = o_v * ct;
    }
}

void gru_step_impl(const ModelParams& params, std::span<const double> x,
                   std::span<const double> h_prev, std::span<double> zg,
                   std::span<double> rg, std::span<double> cand, std::span<double> h_new,
                   std::vector<double>& preact_scratch) {
    const std::size_t h = params.spec().hidden_size;
    const std::size_t r_in = params.spec().recurrent_inputs();
    preact_scratch.resize(3 * h + h);  // z,r preacts computed in place; reuse tail for r*h
    auto w = params.input_weights();
    auto u = params.recurrent_weights();
    auto b = params.gate_bias();

    // z and r gates over (x, h_prev).
    for (std::size_t row = 0; row < 2 * h; ++row) {
        double acc = b[row];
        const double* wr = w.data() + row * r_in;
        for (std::size_t j = 0; j < r_in; ++j) acc += wr[j] * x[j];
        const double* ur = u.data() + row * h;
        for (std::size_t j = 0; j < h; ++j) acc += ur[j] * h_prev[j];
        preact_scratch[row] = acc;
    }
    double* reset_h = preact_scratch.data() + 3 * h;
    for (std::size_t j = 0; j < h; ++j) {
        zg[j] = sigmoid(preact_scratch[j]);
        rg[j] = sigmoid(preact_scratch[h + j]);
        reset_h[j] = rg[j] * h_prev[j];  // reset applied before the recurrent product
    }
    // Candidate over (x, r (.) h_prev).
    for (std::size_t row = 0; row < h; ++row) {
        double acc = b[2 * h + row];
        const double* wr = w.data() + (2 * h + row) * r_in;
        for (std::size_t j = 0; j < r_in; ++j) acc += wr[j] * x[j];
        const double* ur = u.data() + (2 * h + row) * h;
        for (std::size_t j = 0; j < h; ++j) acc += ur[j] * reset_h[j];
        cand[row] = std::tanh(acc);
    }
    for (std::size_t j = 0; j < h; ++j) {
        h_new[j] = (1.0 - zg[j]) * h_prev[j] + zg[j] * cand[j];
    }
}

// LSTM recurrence over a prepared sequence; used by both plain LSTM and the
// hybrid after its convolution front end.
std::array<double, kNumTargets> run_lstm_sequence(const ModelParams& params,
                                                  const Matrix& seq, ForwardCache* cache) {
    const std::size_t h = params.spec().hidden_size;
    const std::size_t steps = seq.rows();
    std::vector<double> h_state(h, 0.0), c_state(h, 0.0);
    std::vector<double> scratch;

    if (cache) {
        ensure_shape(cache->i_gate, steps, h);
        ensure_shape(cache->f_gate, steps, h);
        ensure_shape(cache->g_gate, steps, h);
        ensure_shape(cache->o_gate, steps, h);
        ensure_shape(cache->cell, steps, h);
        ensure_shape(cache->cell_tanh, steps, h);
        ensure_shape(cache->hidden, steps, h);
        for (std::size_t t = 0; t < steps; ++t) {
            lstm_step_impl(params, seq.row(t), h_state, c_state, cache->i_gate.row(t),
                           cache->f_gate.row(t), cache->g_gate.row(t), cache->o_gate.row(t),
                           cache->cell.row(t), cache->cell_tanh.row(t), cache->hidden.row(t),
                           scratch);
            std::copy_n(cache->hidden.row(t).data(), h, h_state.data());
            std::copy_n(cache->cell.row(t).data(), h, c_state.data());
        }
    } else {
        std::vector<double> ig(h), fg(h), gg(h), og(h), cn(h), ct(h), hn(h);
        for (std::size_t t = 0; t < steps; ++t) {
            lstm_step_impl(params, seq.row(t), h_state, c_state, ig, fg, gg, og, cn, ct, hn,
                           scratch);
            h_state.assign(hn.begin(), hn.end());
            c_state.assign(cn.begin(), cn.end());
        }
    }
    auto out = head_output(params, h_state);
    if (cache) cache->prediction = out;
    return out;
}

Conv1dKernel conv_kernel_view(const ModelParams& params) {
    const ModelSpec& spec = params.spec();
    Conv1dKernel kernel(spec.conv_kernel, spec.input_features, spec.conv_filters);
    auto src = params.conv_kernels();
    std::copy(src.begin(), src.end(), kernel.w.begin());
    return kernel;
}

}  // namespace

std::array<double, kNumTargets> lstm_forward(const ModelParams& params, const Matrix& window,
                                             ForwardCache* cache) {
    if (params.spec().family != Family::lstm) {
        throw std::invalid_argument("lstm_forward: params are not an LSTM");
    }
    check_window(params.spec(), window);
    if (cache) {
        cache->spec = params.spec();
        cache->window = window;
        cache->seq = window;
        return run_lstm_sequence(params, cache->seq, cache);
    }
    return run_lstm_sequence(params, window, nullptr);
}

std::array<double, kNumTargets> gru_forward(const ModelParams& params, const Matrix& window,
                                            ForwardCache* cache) {
    if (params.spec().family != Family::gru) {
        throw std::invalid_argument("gru_forward: params are not a GRU");
    }
    check_window(params.spec(), window);
    const std::size_t h = params.spec().hidden_size;
    const std::size_t steps = window.rows();
    std::vector<double> h_state(h, 0.0);
    std::vector<double> scratch;

    if (cache) {
        cache->spec = params.spec();
        cache->window = window;
        cache->seq = window;
        ensure_shape(cache->z_gate, steps, h);
        ensure_shape(cache->r_gate, steps, h);
        ensure_shape(cache->candidate, steps, h);
        ensure_shape(cache->hidden, steps, h);
        for (std::size_t t = 0; t < steps; ++t) {
            gru_step_impl(params, window.row(t), h_state, cache->z_gate.row(t),
                          cache->r_gate.row(t), cache->candidate.row(t), cache->hidden.row(t),
                          scratch);
            std::copy_n(cache->hidden.row(t).data(), h, h_state.data());
        }
        cache->prediction = head_output(params, h_state);
        return cache->prediction;
    }
    std::vector<double> zg(h), rg(h), cand(h), hn(h);
    for (std::size_t t = 0; t < steps; ++t) {
        gru_step_impl(params, window.row(t), h_state, zg, rg, cand, hn, scratch);
        h_state.assign(hn.begin(), hn.end());
    }
    return head_output(params, h_state);
}

std::array<double, kNumTargets> cnn_lstm_forward(const ModelParams& params,
                                                 const Matrix& window, ForwardCache* cache) {
    if (params.spec().family != Family::cnn_lstm) {
        throw std::invalid_argument("cnn_lstm_forward: params are not a CNN-LSTM");
    }
    check_window(params.spec(), window);
    const Conv1dKernel kernel = conv_kernel_view(params);
    Matrix conv_pre = conv1d_forward(window, kernel, params.conv_bias());
    Matrix seq = activation(conv_pre, Activation::relu);
    if (cache) {
        cache->spec = params.spec();
        cache->window = window;
        cache->conv_pre = std::move(conv_pre);
        cache->seq = std::move(seq);
        return run_lstm_sequence(params, cache->seq, cache);
    }
    return run_lstm_sequence(params, seq, nullptr);
}

std::array<double, kNumTargets> model_forward(const ModelParams& params, const Matrix& window,
                                              ForwardCache* cache) {
    switch (params.spec().family) {
        case Family::lstm: return lstm_forward(params, window, cache);
        case Family::gru: return gru_forward(params, window, cache);
        case Family::cnn_lstm: return cnn_lstm_forward(params, window, cache);
    }
    throw std::invalid_argument("model_forward: unknown family");
}

void lstm_step(const ModelParams& params, std::span<const double> x, std::span<double> h,
               std::span<double> c) {
    const std::size_t hdim = params.spec().hidden_size;
    std::vector<double> ig(hdim), fg(hdim), gg(hdim), og(hdim), cn(hdim), ct(hdim), hn(hdim);
    std::vector<double> scratch;
    lstm_step_impl(params, x, {h.data(), h.size()}, {c.data(), c.size()}, ig, fg, gg, og, cn,
                   ct, hn, scratch);
    std::copy(hn.begin(), hn.end(), h.begin());
    std::copy(cn.begin(), cn.end(), c.begin());
}

void gru_step(const ModelParams& params, std::span<const double> x, std::span<double> h) {
    const std::size_t hdim = params.spec().hidden_size;
    std::vector<double> zg(hdim), rg(hdim), cand(hdim), hn(hdim);
    std::vector<double> scratch;
    gru_step_impl(params, x, {h.data(), h.size()}, zg, rg, cand, hn, scratch);
    std::copy(hn.begin(), hn.end(), h.begin());
}

// ---------------------------------------------------------------------------
// backward (BPTT)
// ---------------------------------------------------------------------------

namespace {

struct GradViews {
    std::span<double> conv_k, conv_b, w, u, b, head_w, head_b;
};

GradViews grad_views(const ModelParams& params, std::span<double> grad) {
    // Mirror the parameter layout over the gradient vector.
    const double* base = params.flat().data();
    auto mirror = [&](std::span<const double> view) {
        return grad.subspan(static_cast<std::size_t>(view.data() - base), view.size());
    };
    GradViews g;
    g.conv_k = mirror(params.conv_kernels());
    g.conv_b = mirror(params.conv_bias());
    g.w = mirror(params.input_weights());
    g.u = mirror(params.recurrent_weights());
    g.b = mirror(params.gate_bias());
    g.head_w = mirror(params.head_weights());
    g.head_b = mirror(params.head_bias());
    return g;
}

// dW += da (x) x ; dx += W^T da — for one stacked weight block.
void accumulate_affine(std::span<const double> w_block, std::span<const double> da,
                       std::span<const double> x, std::span<double> dw_block,
                       std::span<double> dx) {
    const std::size_t rows = da.size();
    const std::size_t cols = x.size();
    for (std::size_t row = 0; row < rows; ++row) {
        const double d = da[row];
        double* dwr = dw_block.data() + row * cols;
        const double* wr = w_block.data() + row * cols;
        for (std::size_t j = 0; j < cols; ++j) {
            dwr[j] += d * x[j];
            dx[j] += wr[j] * d;
        }
    }
}

// BPTT through the LSTM stack; returns dL/d(seq) when requested (hybrid).
void lstm_sequence_backward(const ModelParams& params, const ForwardCache& cache,
                            std::span<const double> pred_grad, GradViews& g,
                            Matrix* seq_grad) {
    const std::size_t h = params.spec().hidden_size;
    const std::size_t r_in = params.spec().recurrent_inputs();
    const std::size_t steps = cache.seq.rows();

    // Linear head.
    std::vector<double> dh(h, 0.0);
    {
        auto w = params.head_weights();
        std::span<const double> h_last = cache.hidden.row(steps - 1);
        for (std::size_t o = 0; o < params.spec().output_size; ++o) {
            const double d = pred_grad[o];
            g.head_b[o] += d;
            double* dwr = g.head_w.data() + o * h;
            const double* wr = w.data() + o * h;
            for (std::size_t j = 0; j < h; ++j) {
                dwr[j] += d * h_last[j];
                dh[j] += wr[j] * d;
            }
        }
    }

    std::vector<double> dc(h, 0.0);
    std::vector<double> da(4 * h);
    std::vector<double> dh_prev(h), dc_prev(h);
    std::vector<double> dx_scratch(r_in);
    std::vector<double> zero_state(h, 0.0);
    auto w = params.input_weights();
    auto u = params.recurrent_weights();

    for (std::size_t t = steps; t-- > 0;) {
        std::span<const double> ig = cache.i_gate.row(t);
        std::span<const double> fg = cache.f_gate.row(t);
        std::span<const double> gg = cache.g_gate.row(t);
        std::span<const double> og = cache.o_gate.row(t);
        std::span<const double> ct = cache.cell_tanh.row(t);
        std::span<const double> c_prev =
            t > 0 ? cache.cell.row(t - 1) : std::span<const double>(zero_state);
        std::span<const double> h_prev =
            t > 0 ? cache.hidden.row(t - 1) : std::span<const double>(zero_state);

        for (std::size_t j = 0; j < h; ++j) {
            const double do_v = dh[j] * ct[j];
            const double dc_v = dc[j] + dh[j] * og[j] * (1.0 - ct[j] * ct[j]);
            const double di_v = dc_v * gg[j];
            const double df_v = dc_v * c_prev[j];
            const double dg_v = dc_v * ig[j];
            da[j] = di_v * ig[j] * (1.0 - ig[j]);
            da[h + j] = df_v * fg[j] * (1.0 - fg[j]);
            da[2 * h + j] = dg_v * (1.0 - gg[j] * gg[j]);
            da[3 * h + j] = do_v * og[j] * (1.0 - og[j]);
            dc_prev[j] = dc_v * fg[j];
        }

        std::fill(dh_prev.begin(), dh_prev.end(), 0.0);
        std::span<double> dx;
        if (seq_grad) {
            dx = seq_grad->row(t);  // rows start zeroed
        } else {
            std::fill(dx_scratch.begin(), dx_scratch.end(), 0.0);
            dx = dx_scratch;
        }
        accumulate_affine(w, da, cache.seq.row(t), g.w, dx);
        accumulate_affine(u, da, h_prev, g.u, dh_prev);
        for (std::size_t row = 0; row < 4 * h; ++row) g.b[row] += da[row];

        dh.assign(dh_prev.begin(), dh_prev.end());
        dc.assign(dc_prev.begin(), dc_prev.end());
    }
}

void gru_sequence_backward(const ModelParams& params, const ForwardCache& cache,
                           std::span<const double> pred_grad, GradViews& g) {
    const std::size_t h = params.spec().hidden_size;
    const std::size_t r_in = params.spec().recurrent_inputs();
    const std::size_t steps = cache.seq.rows();
    auto w = params.input_weights();
    auto u = params.recurrent_weights();

    std::vector<double> dh(h, 0.0);
    {
        auto head_w = params.head_weights();
        std::span<const double> h_last = cache.hidden.row(steps - 1);
        for (std::size_t o = 0; o < params.spec().output_size; ++o) {
            const double d = pred_grad[o];
            g.head_b[o] += d;
            double* dwr = g.head_w.data() + o * h;
            const double* wr = head_w.data() + o * h;
            for (std::size_t j = 0; j < h; ++j) {
                dwr[j] += d * h_last[j];
                dh[j] += wr[j] * d;
            }
        }
    }

    std::vector<double> da_z(h), da_r(h), da_c(h), dh_prev(h), reset_h(h), d_reset_h(h);
    std::vector<double> dx(r_in);
    std::vector<double> zero_state(h, 0.0);

    for (std::size_t t = steps; t-- > 0;) {
        std::span<const double> zg = cache.z_gate.row(t);
        std::span<const double> rg = cache.r_gate.row(t);
        std::span<const double> cand = cache.candidate.row(t);
        std::span<const double> h_prev =
            t > 0 ? cache.hidden.row(t - 1) : std::span<const double>(zero_state);
        std::span<const double> x = cache.seq.row(t);
        std::fill(dx.begin(), dx.end(), 0.0);  // input grads are not propagated further

        // h_t = (1-z) h_prev + z cand
        for (std::size_t j = 0; j < h; ++j) {
            const double dz = dh[j] * (cand[j] - h_prev[j]);
            const double dcand = dh[j] * zg[j];
            da_z[j] = dz * zg[j] * (1.0 - zg[j]);
            da_c[j] = dcand * (1.0 - cand[j] * cand[j]);
            dh_prev[j] = dh[j] * (1.0 - zg[j]);
            reset_h[j] = rg[j] * h_prev[j];
            d_reset_h[j] = 0.0;
        }

        // Candidate affine: inputs (x, reset_h), rows [2H, 3H).
        for (std::size_t row = 0; row < h; ++row) {
            const double d = da_c[row];
            g.b[2 * h + row] += d;
            double* dwr = g.w.data() + (2 * h + row) * r_in;
            const double* wr = w.data() + (2 * h + row) * r_in;
            for (std::size_t j = 0; j < r_in; ++j) {
                dwr[j] += d * x[j];
                dx[j] += wr[j] * d;
            }
            double* dur = g.u.data() + (2 * h + row) * h;
            const double* ur = u.data() + (2 * h + row) * h;
            for (std::size_t j = 0; j < h; ++j) {
                dur[j] += d * reset_h[j];
                d_reset_h[j] += ur[j] * d;
            }
        }
        // Through the reset product: reset_h = r (.) h_prev.
        for (std::size_t j = 0; j < h; ++j) {
            const double dr = d_reset_h[j] * h_prev[j];
            da_r[j] = dr * rg[j] * (1.0 - rg[j]);
            dh_prev[j] += d_reset_h[j] * rg[j];
        }
        // z and r affines over (x, h_prev), rows [0, 2H).
        for (std::size_t block = 0; block < 2; ++block) {
            const std::vector<double>& da = block == 0 ? da_z : da_r;
            for (std::size_t row = 0; row < h; ++row) {
                const std::size_t prow = block * h + row;
                const double d = da[row];
                g.b[prow] += d;
                double* dwr = g.w.data() + prow * r_in;
                const double* wr = w.data() + prow * r_in;
                for (std::size_t j = 0; j < r_in; ++j) {
                    dwr[j] += d * x[j];
                    dx[j] += wr[j] * d;
                }
                double* dur = g.u.data() + prow * h;
                const double* ur = u.data() + prow * h;
                for (std::size_t j = 0; j < h; ++j) {
                    dur[j] += d * h_prev[j];
                    dh_prev[j] += ur[j] * d;
                }
            }
        }
        dh.assign(dh_prev.begin(), dh_prev.end());
    }
}

}  // namespace

void model_backward(const ModelParams& params, const ForwardCache& cache,
                    std::span<const double> prediction_grad, std::span<double> out_grad) {
    if (!(cache.spec == params.spec())) {
        throw std::invalid_argument("model_backward: cache does not match params");
    }
    if (prediction_grad.size() != params.spec().output_size) {
        throw std::invalid_argument("model_backward: prediction_grad size mismatch");
    }
    if (out_grad.size() != params.size()) {
        throw std::invalid_argument("model_backward: out_grad size mismatch");
    }

    GradViews g = grad_views(params, out_grad);
    switch (params.spec().family) {
        case Family::lstm:
            lstm_sequence_backward(params, cache, prediction_grad, g, nullptr);
            break;
        case Family::gru:
            gru_sequence_backward(params, cache, prediction_grad, g);
            break;
        case Family::cnn_lstm: {
            Matrix seq_grad(cache.seq.rows(), cache.seq.cols());
            lstm_sequence_backward(params, cache, prediction_grad, g, &seq_grad);
            const Matrix relu_grad =
                activation_backward(cache.conv_pre, Activation::relu, seq_grad);
            const Conv1dKernel kernel = conv_kernel_view(params);
            Conv1dGrads conv = conv1d_backward(cache.window, kernel, relu_grad);
            for (std::size_t i = 0; i < conv.kernel_grad.w.size(); ++i) {
                g.conv_k[i] += conv.kernel_grad.w[i];
            }
            for (std::size_t i = 0; i < conv.bias_grad.size(); ++i) {
                g.conv_b[i] += conv.bias_grad[i];
            }
            break;
        }
    }
}

std::vector<double> model_backward(const ModelParams& params, const ForwardCache& cache,
                                   std::span<const double> prediction_grad) {
    std::vector<double> grad(params.size(), 0.0);
    model_backward(params, cache, prediction_grad, grad);
    return grad;
}

// ---------------------------------------------------------------------------
// checkpoints
// ---------------------------------------------------------------------------

namespace {
constexpr int kParamOrderVersion = 1;

void put_f64_le(std::ostream& out, double v) {
    const std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
    out.write(buf, 8);
}

double get_f64_le(std::istream& in) {
    unsigned char buf[8];
    in.read(reinterpret_cast<char*>(buf), 8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return std::bit_cast<double>(bits);
}
}  // namespace

void save_checkpoint(const ModelParams& params, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("save_checkpoint: cannot open " + path);
    const ModelSpec& spec = params.spec();
    out << "IEQC1\n";
    out << "family " << family_name(spec.family) << "\n";
    out << "input_features " << spec.input_features << "\n";
    out << "hidden_size " << spec.hidden_size << "\n";
    out << "conv_filters " << spec.conv_filters << "\n";
    out << "conv_kernel " << spec.conv_kernel << "\n";
    out << "output_size " << spec.output_size << "\n";
    out << "seed " << spec.seed << "\n";
    out << "param_order " << kParamOrderVersion << "\n";
    out << "param_count " << params.size() << "\n";
    out << "end_header\n";
    for (double v : params.flat()) put_f64_le(out, v);
    if (!out) throw IoError("save_checkpoint: write failed for " + path);
}

ModelParams load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("load_checkpoint: cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != "IEQC1") {
        throw DataError("load_checkpoint: " + path + " is not an IEQC1 checkpoint");
    }
    ModelSpec spec;
    std::size_t param_count = 0;
    while (std::getline(in, line)) {
        if (line == "end_header") break;
        std::istringstream row(line);
        std::string key;
        row >> key;
        if (key == "family") {
            std::string value;
            row >> value;
            spec.family = family_from_name(value);
        } else if (key == "input_features") {
            row >> spec.input_features;
        } else if (key == "hidden_size") {
            row >> spec.hidden_size;
        } else if (key == "conv_filters") {
            row >> spec.conv_filters;
        } else if (key == "conv_kernel") {
            row >> spec.conv_kernel;
        } else if (key == "output_size") {
            row >> spec.output_size;
        } else if (key == "seed") {
            row >> spec.seed;
        } else if (key == "param_order") {
            int version = 0;
            row >> version;
            if (version != kParamOrderVersion) {
                throw DataError("load_checkpoint: unsupported parameter ordering version");
            }
        } else if (key == "param_count") {
            row >> param_count;
        } else {
            throw DataError("load_checkpoint: unknown header key '" + key + "' in " + path);
        }
    }
    if (param_count != spec.param_count()) {
        throw DataError("load_checkpoint: header param_count " + std::to_string(param_count) +
                        " does not match spec (" + std::to_string(spec.param_count()) + ")");
    }
    std::vector<double> flat(param_count);
    for (double& v : flat) v = get_f64_le(in);
    if (!in) throw DataError("load_checkpoint: " + path + " is truncated");
    return ModelParams(spec, std::move(flat));
}

}  // namespace ieq
