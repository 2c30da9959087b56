#include "phsa/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "phsa/errors.hpp"
#include "phsa/random.hpp"

namespace phsa {

namespace {

double evaluate(const ScalarFunction& f, const std::vector<Matrix>& params) {
    Tape tape;
    std::vector<Var> leaves;
    leaves.reserve(params.size());
    for (const auto& p : params) {
        leaves.push_back(tape.leaf(p, false));
    }
    double value = 0.0;
    try {
        value = f(tape, leaves).value()(0, 0);
    } catch (const std::domain_error& e) {
        throw EvaluationError(std::string("function evaluation failed: ") + e.what());
    }
    if (!std::isfinite(value)) {
        throw EvaluationError("function value is not finite");
    }
    return value;
}

}  // namespace

GradCheckReport grad_check(const ScalarFunction& f, std::vector<Matrix> params,
                           const GradCheckOptions& options) {
    if (!(options.epsilon >= 1e-7 && options.epsilon <= 1e-4)) {
        throw std::invalid_argument("grad_check: epsilon must lie in [1e-7, 1e-4]");
    }

    std::vector<Matrix> analytic;
    {
        Tape tape;
        std::vector<Var> leaves;
        for (const auto& p : params) {
            leaves.push_back(tape.leaf(p, true));
        }
        Var out;
        try {
            out = f(tape, leaves);
        } catch (const std::domain_error& e) {
            throw EvaluationError(std::string("function evaluation failed: ") + e.what());
        }
        if (!std::isfinite(out.value()(0, 0))) {
            throw EvaluationError("function value is not finite");
        }
        tape.backward(out);
        for (Var v : leaves) {
            analytic.push_back(tape.grad(v));
        }
    }

    GradCheckReport report;
    report.per_tensor.assign(params.size(), 0.0);
    Rng rng(options.seed);
    for (std::size_t t = 0; t < params.size(); ++t) {
        const std::size_t n = params[t].size();
        std::vector<std::size_t> coords(n);
        std::iota(coords.begin(), coords.end(), std::size_t{0});
        if (options.max_coords_per_tensor != 0 && n > options.max_coords_per_tensor) {
            // Partial Fisher-Yates picks a uniform subset.
            for (std::size_t i = 0; i < options.max_coords_per_tensor; ++i) {
                std::swap(coords[i], coords[i + rng.below(n - i)]);
            }
            coords.resize(options.max_coords_per_tensor);
            std::sort(coords.begin(), coords.end());
        }
        for (std::size_t idx : coords) {
            double& slot = params[t].data()[idx];
            const double original = slot;
            slot = original + options.epsilon;
            const double plus = evaluate(f, params);
            slot = original - options.epsilon;
            const double minus = evaluate(f, params);
            slot = original;
            const double numeric = (plus - minus) / (2.0 * options.epsilon);
            const double a = analytic[t].data()[idx];
            const double err = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
            report.per_tensor[t] = std::max(report.per_tensor[t], err);
            if (err > report.max_relative_error) {
                report.max_relative_error = err;
                report.worst_tensor = t;
                report.worst_coord = idx;
            }
            ++report.coords_checked;
        }
    }
    return report;
}

double grad_check(const ScalarFunction& f, std::vector<Matrix> params, double epsilon) {
    return grad_check(f, std::move(params), GradCheckOptions{.epsilon = epsilon}).max_relative_error;
}

}  // namespace phsa
