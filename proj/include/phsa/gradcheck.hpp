#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "phsa/autodiff.hpp"
#include "phsa/matrix.hpp"

namespace phsa {

/// Scalar (1×1) function of parameter leaves recorded on `tape`.
using ScalarFunction = std::function<Var(Tape& tape, std::span<const Var> params)>;

struct GradCheckOptions {
    double epsilon = 1e-6;
    /// Coordinates checked per tensor; 0 checks every coordinate.
    std::size_t max_coords_per_tensor = 0;
    std::uint64_t seed = 0;
};

struct GradCheckReport {
    double max_relative_error = 0.0;
    std::size_t worst_tensor = 0;
    std::size_t worst_coord = 0;
    std::size_t coords_checked = 0;
    /// Per-tensor maximum relative error, aligned with the parameter list.
    std::vector<double> per_tensor;
};

/// Compares reverse-mode gradients against central differences
/// (f(p+ε) − f(p−ε)) / 2ε. The error of one coordinate is
/// |analytic − numeric| / max(1, |analytic|, |numeric|). Runs in 64-bit.
/// Throws std::invalid_argument for ε outside [1e-7, 1e-4] and
/// EvaluationError when f is non-finite.
GradCheckReport grad_check(const ScalarFunction& f, std::vector<Matrix> params,
                           const GradCheckOptions& options = {});

/// Convenience wrapper returning only the maximum relative error.
double grad_check(const ScalarFunction& f, std::vector<Matrix> params, double epsilon);

}  // namespace phsa
