#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "cott/errors.hpp"
#include "cott/tensor.hpp"

namespace cott {

/// Outcome of comparing an analytic gradient against a numeric one.
/// Relative error uses max(|analytic|, |numeric|, atol) in the
/// denominator so entries near zero are judged on absolute terms.
struct GradReport {
    double max_rel_err = 0.0;
    double max_abs_err = 0.0;
    double rtol = 1e-5;
    bool passed = true;
    std::string worst_label;         // which tensor held the worst entry
    std::vector<Index> worst_index;  // multi-index of the worst entry
    std::vector<std::pair<std::string, double>> per_tensor;

    void merge(const GradReport& other) {
        if (other.max_rel_err > max_rel_err) {
            max_rel_err = other.max_rel_err;
            worst_label = other.worst_label;
            worst_index = other.worst_index;
        }
        max_abs_err = std::max(max_abs_err, other.max_abs_err);
        passed = passed && other.passed;
        per_tensor.insert(per_tensor.end(), other.per_tensor.begin(), other.per_tensor.end());
    }
};

/// Central finite differences of a scalar-valued function, one probe pair
/// per entry of x. Non-finite function values abort the check.
template <typename Scalar>
Tensor<Scalar> finite_diff(const std::function<Scalar(const Tensor<Scalar>&)>& f, const Tensor<Scalar>& x,
                           Scalar step) {
    if (!(step > Scalar(0))) throw DomainError("finite_diff: step must be positive");
    Tensor<Scalar> grad(x.shape());
    Tensor<Scalar> probe = x;
    for (Index i = 0; i < x.size(); ++i) {
        const Scalar saved = probe[i];
        probe[i] = saved + step;
        const Scalar up = f(probe);
        probe[i] = saved - step;
        const Scalar down = f(probe);
        probe[i] = saved;
        if (!std::isfinite(static_cast<double>(up)) || !std::isfinite(static_cast<double>(down)))
            throw NumericError("finite_diff: function value is not finite");
        grad[i] = (up - down) / (Scalar(2) * step);
    }
    return grad;
}

template <typename Scalar>
GradReport compare(const Tensor<Scalar>& analytic, const Tensor<Scalar>& numeric, double atol = 1e-10,
                   double rtol = 1e-5, const std::string& label = "") {
    if (!same_shape(analytic, numeric)) throw ShapeError("compare: tensors must share a shape");
    GradReport report;
    report.rtol = rtol;
    report.worst_label = label;
    for (Index i = 0; i < analytic.size(); ++i) {
        const double a = static_cast<double>(analytic[i]);
        const double n = static_cast<double>(numeric[i]);
        const double abs_err = std::abs(a - n);
        const double rel = abs_err / std::max({std::abs(a), std::abs(n), atol});
        report.max_abs_err = std::max(report.max_abs_err, abs_err);
        if (rel > report.max_rel_err) {
            report.max_rel_err = rel;
            report.worst_index = unravel_index(i, analytic.shape());
        }
    }
    report.passed = report.max_rel_err <= rtol;
    report.per_tensor.emplace_back(label, report.max_rel_err);
    return report;
}

}  // namespace cott
