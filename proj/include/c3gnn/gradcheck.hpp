#pragma once

#include <functional>
#include <string>
#include <vector>

#include "c3gnn/tape.hpp"

namespace c3gnn {

struct GradCheckReport {
    double max_rel_error = 0.0;
    bool passed = false;
    std::string worst_location;
};

// Builds a scalar-valued function on a fresh tape from leaf inputs.
using TensorFunction = std::function<Var(Tape&, const std::vector<Var>&)>;

// Compares analytic gradients against central finite differences for every
// entry of every input. Reports instead of throwing so negative controls can
// assert on failure.
inline GradCheckReport grad_check(const TensorFunction& f, std::vector<Matrix> inputs,
                                  double step = 1e-6, double tol = 1e-5) {
    GradCheckReport report;

    auto eval = [&](const std::vector<Matrix>& vals, bool with_grad,
                    std::vector<Matrix>* grads_out) -> double {
        Tape tape;
        std::vector<Var> leaves;
        leaves.reserve(vals.size());
        for (const Matrix& m : vals) leaves.push_back(tape.leaf(m, with_grad));
        Var out = f(tape, leaves);
        const double v = tape.value(out).at(0, 0);
        if (with_grad) {
            tape.backward(out);
            grads_out->clear();
            for (Var l : leaves) grads_out->push_back(tape.grad(l));
        }
        return v;
    };

    std::vector<Matrix> analytic;
    eval(inputs, true, &analytic);

    for (size_t k = 0; k < inputs.size(); ++k) {
        for (size_t e = 0; e < inputs[k].size(); ++e) {
            const double orig = inputs[k][e];
            inputs[k][e] = orig + step;
            const double fp = eval(inputs, false, nullptr);
            inputs[k][e] = orig - step;
            const double fm = eval(inputs, false, nullptr);
            inputs[k][e] = orig;

            const double numeric = (fp - fm) / (2.0 * step);
            const double a = analytic[k][e];
            const double denom = std::max(std::abs(a) + std::abs(numeric), 1e-4);
            const double rel = std::abs(a - numeric) / denom;
            if (rel > report.max_rel_error) {
                report.max_rel_error = rel;
                report.worst_location =
                    "input " + std::to_string(k) + " entry " + std::to_string(e);
            }
        }
    }
    report.passed = report.max_rel_error <= tol;
    return report;
}

} // namespace c3gnn
