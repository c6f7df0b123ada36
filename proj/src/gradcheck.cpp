#include "ieq/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "ieq/errors.hpp"

namespace ieq {

GradCheckReport gradient_check(const std::function<double(std::span<const double>)>& f,
                               std::span<const double> params,
                               std::span<const double> analytic_grad,
                               double eps, double tol) {
    if (eps <= 0.0) throw std::invalid_argument("gradient_check: eps must be > 0");
    if (params.size() != analytic_grad.size()) {
        throw std::invalid_argument("gradient_check: params/gradient length mismatch");
    }

    std::vector<double> probe(params.begin(), params.end());
    GradCheckReport report;
    for (std::size_t i = 0; i < probe.size(); ++i) {
        const double saved = probe[i];
        probe[i] = saved + eps;
        const double f_plus = f(probe);
        probe[i] = saved - eps;
        const double f_minus = f(probe);
        probe[i] = saved;
        if (!std::isfinite(f_plus) || !std::isfinite(f_minus)) {
            throw EvaluationError("gradient_check: non-finite function value at parameter " +
                                  std::to_string(i));
        }
        const double numeric = (f_plus - f_minus) / (2.0 * eps);
        const double analytic = analytic_grad[i];
        const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
        const double rel = std::abs(analytic - numeric) / denom;
        if (rel > report.max_relative_error) {
            report.max_relative_error = rel;
            report.worst_parameter_index = i;
        }
    }
    report.passed = report.max_relative_error < tol;
    return report;
}

}  // namespace ieq
