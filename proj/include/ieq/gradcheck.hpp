#ifndef IEQ_GRADCHECK_HPP
#define IEQ_GRADCHECK_HPP

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace ieq {

struct GradCheckReport {
    double max_relative_error = 0.0;
    std::size_t worst_parameter_index = 0;
    bool passed = false;
};

/**
 * Central-difference check of an analytic gradient. For each coordinate i
 * the numeric derivative (f(p+eps*e_i) - f(p-eps*e_i)) / (2*eps) is compared
 * against analytic_grad[i] with relative error
 * |a - n| / max(|a|, |n|, 1e-8). Throws EvaluationError if f returns a
 * non-finite value at any probe point.
 */
GradCheckReport gradient_check(const std::function<double(std::span<const double>)>& f,
                               std::span<const double> params,
                               std::span<const double> analytic_grad,
                               double eps = 1e-5, double tol = 1e-4);

}  // namespace ieq

#endif  // IEQ_GRADCHECK_HPP
