#include "ieq/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ieq {

namespace {
int g_max_threads = 1;
}

int max_threads() { return g_max_threads; }

void set_max_threads(int n) { g_max_threads = std::max(1, n); }

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double tanh_act(double x) { return std::tanh(x); }
double relu(double x) { return x > 0.0 ? x : 0.0; }

// ---------------------------------------------------------------------------
// matmul
// ---------------------------------------------------------------------------

static void check_matmul_shapes(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw std::invalid_argument("matmul: a.cols (" + std::to_string(a.cols()) +
                                    ") != b.rows (" + std::to_string(b.rows()) + ")");
    }
}

namespace serial {

Matrix matmul(const Matrix& a, const Matrix& b) {
    check_matmul_shapes(a, b);
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) {
                acc += a(i, k) * b(k, j);
            }
            out(i, j) = acc;
        }
    }
    return out;
}

Matrix conv1d_forward(const Matrix& input, const Conv1dKernel& kernel,
                      std::span<const double> bias) {
    const std::size_t t_in = input.rows();
    const std::size_t k_taps = kernel.taps;
    const std::size_t t_out = t_in - k_taps + 1;
    Matrix out(t_out, kernel.out_channels);
    for (std::size_t t = 0; t < t_out; ++t) {
        for (std::size_t o = 0; o < kernel.out_channels; ++o) {
            double acc = bias[o];
            for (std::size_t k = 0; k < k_taps; ++k) {
                for (std::size_t c = 0; c < kernel.in_channels; ++c) {
                    acc += input(t + k, c) * kernel(k, c, o);
                }
            }
            out(t, o) = acc;
        }
    }
    return out;
}

}  // namespace serial

Matrix matmul(const Matrix& a, const Matrix& b) {
    check_matmul_shapes(a, b);
    Matrix out(a.rows(), b.cols());
    const std::size_t rows = a.rows();
    const std::size_t cols = b.cols();
    const std::size_t inner = a.cols();
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(g_max_threads) if (g_max_threads > 1 && rows > 1)
#endif
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(rows); ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < inner; ++k) {
                acc += a(i, k) * b(k, j);
            }
            out(i, j) = acc;
        }
    }
    return out;
}

void matvec(const Matrix& w, std::span<const double> x, std::span<double> y) {
    if (w.cols() != x.size() || w.rows() != y.size()) {
        throw std::invalid_argument("matvec: shape mismatch");
    }
    const double* wd = w.data().data();
    const std::size_t cols = w.cols();
    for (std::size_t i = 0; i < w.rows(); ++i) {
        const double* row = wd + i * cols;
        double acc = 0.0;
        for (std::size_t k = 0; k < cols; ++k) acc += row[k] * x[k];
        y[i] = acc;
    }
}

// ---------------------------------------------------------------------------
// activations
// ---------------------------------------------------------------------------

Matrix activation(const Matrix& x, Activation kind) {
    Matrix out(x.rows(), x.cols());
    const std::size_t n = x.size();
    const double* in = x.data().data();
    double* o = out.data().data();
    switch (kind) {
        case Activation::sigmoid:
            for (std::size_t i = 0; i < n; ++i) o[i] = sigmoid(in[i]);
            break;
        case Activation::tanh:
            for (std::size_t i = 0; i < n; ++i) o[i] = std::tanh(in[i]);
            break;
        case Activation::relu:
            for (std::size_t i = 0; i < n; ++i) o[i] = relu(in[i]);
            break;
    }
    return out;
}

Matrix activation_backward(const Matrix& x, Activation kind, const Matrix& upstream) {
    if (!x.same_shape(upstream)) {
        throw std::invalid_argument("activation_backward: shape mismatch");
    }
    Matrix out(x.rows(), x.cols());
    const std::size_t n = x.size();
    const double* in = x.data().data();
    const double* up = upstream.data().data();
    double* o = out.data().data();
    switch (kind) {
        case Activation::sigmoid:
            for (std::size_t i = 0; i < n; ++i) {
                double s = sigmoid(in[i]);
                o[i] = up[i] * s * (1.0 - s);
            }
            break;
        case Activation::tanh:
            for (std::size_t i = 0; i < n; ++i) {
                double t = std::tanh(in[i]);
                o[i] = up[i] * (1.0 - t * t);
            }
            break;
        case Activation::relu:
            for (std::size_t i = 0; i < n; ++i) o[i] = in[i] > 0.0 ? up[i] : 0.0;
            break;
    }
    return out;
}

// ---------------------------------------------------------------------------
// convolution
// ---------------------------------------------------------------------------

static void check_conv_shapes(const Matrix& input, const Conv1dKernel& kernel,
                              std::size_t bias_len) {
    if (input.cols() != kernel.in_channels) {
        throw std::invalid_argument("conv1d: input channels (" + std::to_string(input.cols()) +
                                    ") != kernel in_channels (" +
                                    std::to_string(kernel.in_channels) + ")");
    }
    if (bias_len != kernel.out_channels) {
        throw std::invalid_argument("conv1d: bias length != out_channels");
    }
    if (input.rows() < kernel.taps) {
        throw std::invalid_argument("conv1d: sequence length " + std::to_string(input.rows()) +
                                    " shorter than kernel " + std::to_string(kernel.taps));
    }
}

Matrix conv1d_forward(const Matrix& input, const Conv1dKernel& kernel,
                      std::span<const double> bias) {
    check_conv_shapes(input, kernel, bias.size());
    const std::size_t t_out = input.rows() - kernel.taps + 1;
    Matrix out(t_out, kernel.out_channels);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(g_max_threads) if (g_max_threads > 1 && t_out > 1)
#endif
    for (std::ptrdiff_t t = 0; t < static_cast<std::ptrdiff_t>(t_out); ++t) {
        for (std::size_t o = 0; o < kernel.out_channels; ++o) {
            double acc = bias[o];
            for (std::size_t k = 0; k < kernel.taps; ++k) {
                for (std::size_t c = 0; c < kernel.in_channels; ++c) {
                    acc += input(t + k, c) * kernel(k, c, o);
                }
            }
            out(t, o) = acc;
        }
    }
    return out;
}

Conv1dGrads conv1d_backward(const Matrix& input, const Conv1dKernel& kernel,
                            const Matrix& upstream) {
    check_conv_shapes(input, kernel, kernel.out_channels);
    const std::size_t t_out = input.rows() - kernel.taps + 1;
    if (upstream.rows() != t_out || upstream.cols() != kernel.out_channels) {
        throw std::invalid_argument("conv1d_backward: upstream shape mismatch");
    }

    Conv1dGrads g;
    g.input_grad = Matrix(input.rows(), input.cols());
    g.kernel_grad = Conv1dKernel(kernel.taps, kernel.in_channels, kernel.out_channels);
    g.bias_grad.assign(kernel.out_channels, 0.0);

    for (std::size_t t = 0; t < t_out; ++t) {
        for (std::size_t o = 0; o < kernel.out_channels; ++o) {
            const double up = upstream(t, o);
            g.bias_grad[o] += up;
            for (std::size_t k = 0; k < kernel.taps; ++k) {
                for (std::size_t c = 0; c < kernel.in_channels; ++c) {
                    g.kernel_grad(k, c, o) += up * input(t + k, c);
                    g.input_grad(t + k, c) += up * kernel(k, c, o);
                }
            }
        }
    }
    return g;
}

// ---------------------------------------------------------------------------
// linear layer
// ---------------------------------------------------------------------------

LinearGrads linear_backward(const Matrix& w, std::span<const double> x,
                            std::span<const double> upstream) {
    if (w.cols() != x.size() || w.rows() != upstream.size()) {
        throw std::invalid_argument("linear_backward: shape mismatch");
    }
    LinearGrads g;
    g.weight_grad = Matrix(w.rows(), w.cols());
    g.bias_grad.assign(upstream.begin(), upstream.end());
    g.input_grad = Matrix(x.size(), 1);
    for (std::size_t i = 0; i < w.rows(); ++i) {
        for (std::size_t j = 0; j < w.cols(); ++j) {
            g.weight_grad(i, j) = upstream[i] * x[j];
            g.input_grad(j, 0) += w(i, j) * upstream[i];
        }
    }
    return g;
}

}  // namespace ieq
