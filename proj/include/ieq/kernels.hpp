#ifndef IEQ_KERNELS_HPP
#define IEQ_KERNELS_HPP

#include <cstddef>
#include <span>
#include <vector>

#include "ieq/matrix.hpp"

namespace ieq {

// ---------------------------------------------------------------------------
// Threading control. Kernels parallelize over independent output elements
// (rows of a product, samples of a batch), so the per-element accumulation
// order never changes and results are bitwise identical at any thread count.
// Default is 1 thread: the strictly serial path.
// ---------------------------------------------------------------------------

int max_threads();
void set_max_threads(int n);

enum class Activation { sigmoid, tanh, relu };

/// Flat [K x C_in x C_out] convolution weights, indexed (k, c, o).
struct Conv1dKernel {
    std::size_t taps = 0;      // K
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    std::vector<double> w;     // taps * in_channels * out_channels

    Conv1dKernel() = default;
    Conv1dKernel(std::size_t k, std::size_t c_in, std::size_t c_out)
        : taps(k), in_channels(c_in), out_channels(c_out), w(k * c_in * c_out, 0.0) {}

    double& operator()(std::size_t k, std::size_t c, std::size_t o) {
        return w[(k * in_channels + c) * out_channels + o];
    }
    double operator()(std::size_t k, std::size_t c, std::size_t o) const {
        return w[(k * in_channels + c) * out_channels + o];
    }
};

// ---------------------------------------------------------------------------
// Forward kernels (OpenMP-parallel when max_threads() > 1).
// ---------------------------------------------------------------------------

/// Standard matrix product. Throws std::invalid_argument on a.cols != b.rows.
Matrix matmul(const Matrix& a, const Matrix& b);

/// Elementwise sigmoid / tanh / relu. Total on finite inputs.
Matrix activation(const Matrix& x, Activation kind);

/**
 * Valid (no padding, stride 1) 1-D convolution over a [T x C_in] sequence:
 * out[t,o] = bias[o] + sum_{k,c} input[t+k,c] * kernel(k,c,o), T' = T-K+1.
 * Throws std::invalid_argument when T < K or channel counts mismatch.
 */
Matrix conv1d_forward(const Matrix& input, const Conv1dKernel& kernel,
                      std::span<const double> bias);

/// y = W x + b for a single vector x; y has W.rows() entries.
void matvec(const Matrix& w, std::span<const double> x, std::span<double> y);

// ---------------------------------------------------------------------------
// Hand-derived backward passes. Each takes the upstream gradient dL/d(output)
// and returns dL/d(input) plus dL/d(parameters) where the layer has any.
// ---------------------------------------------------------------------------

struct LinearGrads {
    Matrix input_grad;   // dL/dx, same shape as x
    Matrix weight_grad;  // dL/dW
    std::vector<double> bias_grad;
};

/// Backward of y = W x + b (x, y column vectors stored as 1-column matrices).
LinearGrads linear_backward(const Matrix& w, std::span<const double> x,
                            std::span<const double> upstream);

/// Backward of activation(x): upstream * act'(x), elementwise over the
/// pre-activation x.
Matrix activation_backward(const Matrix& x, Activation kind, const Matrix& upstream);

struct Conv1dGrads {
    Matrix input_grad;        // [T x C_in]
    Conv1dKernel kernel_grad;
    std::vector<double> bias_grad;  // [C_out]
};

Conv1dGrads conv1d_backward(const Matrix& input, const Conv1dKernel& kernel,
                            const Matrix& upstream);

// ---------------------------------------------------------------------------
// Serial reference implementations, kept for testing and benchmarking the
// parallel kernels against. Same contracts as the functions above.
// ---------------------------------------------------------------------------

namespace serial {

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix conv1d_forward(const Matrix& input, const Conv1dKernel& kernel,
                      std::span<const double> bias);

}  // namespace serial

// Scalar activation helpers shared by the model cells.
double sigmoid(double x);
double tanh_act(double x);
double relu(double x);

}  // namespace ieq

#endif  // IEQ_KERNELS_HPP
