#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "phsa/analysis.hpp"
#include "phsa/classifier.hpp"
#include "phsa/gradcheck.hpp"

namespace phsa {

/// Outcome of one property check. `value` is the observed worst-case
/// metric and `tolerance` the bound it was compared against.
struct CheckResult {
    std::string name;
    bool passed = false;
    double value = 0.0;
    double tolerance = 0.0;
    std::string detail;
};

/// Literal double loop over (query, key) frame pairs.
Matrix par_oracle(std::span<const LabeledMap> maps, std::size_t num_classes);

/// Training loss of `model` on one utterance as a function of the leaves
/// of `params` (in ParameterSet order).
ScalarFunction model_loss(const ModelConfig& model, const ParameterSet& params, const Matrix& features,
                          std::vector<int> labels);

/// ParameterSet values in canonical order.
std::vector<Matrix> parameter_values(const ParameterSet& params);

/// Small model with every kind of trainable tensor set away from its
/// initial value (nonzero biases and c, slopes ≠ 1, non-unit norm gains).
ParameterSet perturbed_model_params(const ModelConfig& model, std::uint64_t seed);

CheckResult check_bias_invariance(std::size_t draws, std::uint64_t seed);
CheckResult check_reduction_chain(std::size_t draws, std::uint64_t seed);
CheckResult check_row_constancy(std::size_t draws, std::uint64_t seed);
CheckResult check_permutation_equivariance(std::size_t draws, std::uint64_t seed);
/// Multi-head gradients of each variant, tolerance 1e-5.
CheckResult check_head_gradients(std::uint64_t seed);
/// Full-model gradients on a 2-layer, 2-head, d_h = 8, T = 12 model whose
/// lower layer is M5 and upper layer M2, tolerance 1e-4. `detail` lists the
/// worst error per parameter class.
CheckResult check_model_gradients(std::uint64_t seed);
CheckResult check_par_oracle(std::size_t instances, std::uint64_t seed);
CheckResult check_entropy_cases();

struct VerifyReport {
    std::vector<CheckResult> checks;
    double max_grad_error = 0.0;
    bool passed() const;
};

VerifyReport run_verification(std::uint64_t seed = 1);

}  // namespace phsa
