#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "phsa/autodiff.hpp"
#include "phsa/matrix.hpp"
#include "phsa/parameters.hpp"

namespace phsa {

class Rng;

/// Query-key score formulation of an attention head.
///   M1  (XW_Q)(XW_K)ᵀ
///   M2  (XW_Q)(XW_K)ᵀ + (XW_K b_Qᵀ)ᵀ                 vanilla self-attention
///   M3  (XW_Q)(XW_K)ᵀ + (X cᵀ)ᵀ
///   M4  (XW_Q)(XW_K)ᵀ + (φ(XW_C) cᵀ)ᵀ
///   M5  ψ_s((XW_Q)(XW_K)ᵀ) + ψ_c(φ(XW_C) cᵀ)ᵀ        phonetic self-attention
/// φ is Swish and ψ_s, ψ_c are PReLUs with per-head slopes. The second term
/// is a 1×T row broadcast to every query row.
enum class Variant { M1, M2, M3, M4, M5 };

inline constexpr Variant all_variants[] = {Variant::M1, Variant::M2, Variant::M3, Variant::M4,
                                           Variant::M5};

std::string_view to_string(Variant v) noexcept;
/// Accepts "M1".."M5" (case-insensitive); nullopt otherwise.
std::optional<Variant> parse_variant(std::string_view text) noexcept;
bool has_content_term(Variant v) noexcept;

/// Which terms of the score survive. Only the M5 decomposition is ablated in
/// practice, but every variant honors the flag.
enum class ScoreTerms { full, similarity_only, content_only };

std::string_view to_string(ScoreTerms t) noexcept;

/// Every symbol of one head. Input width d_in is the multi-head model width;
/// all projections map d_in → d_h. `c` is 1×d_in for M3 (it multiplies X
/// directly) and 1×d_h otherwise.
struct HeadParams {
    Matrix w_q, w_k, w_v;
    Matrix b_q, b_k, b_v;
    Matrix w_c;
    Matrix c;
    double alpha_s = 1.0;
    double alpha_c = 1.0;

    /// Glorot-uniform weights, zero biases and c, unit slopes.
    static HeadParams init(Variant v, std::size_t d_in, std::size_t d_h, Rng& rng);
    std::size_t d_in() const noexcept { return w_q.rows(); }
    std::size_t d_h() const noexcept { return w_q.cols(); }
};

/// Field names trained for a variant (W_V and b_V always included).
std::vector<std::string> trainable_fields(Variant v);

/// Tape handles for one head.
struct HeadVars {
    Var w_q, w_k, w_v;
    Var b_q, b_v;
    Var w_c, c;
    Var alpha_s, alpha_c;
};

/// Places `p` on the tape. Fields outside trainable_fields(v) become constants.
HeadVars bind_head(Tape& tape, Variant v, const HeadParams& p, bool requires_grad);
/// Reads a head stored under `prefix` (e.g. "layer0.attn.head1.") in a bound
/// set; fields the variant does not store become constants.
HeadVars bind_head(const BoundParameters& bound, Variant v, std::string_view prefix,
                   std::size_t d_in, std::size_t d_h);
/// Stores the trainable fields of `p` under `prefix`.
void store_head(ParameterSet& out, Variant v, std::string_view prefix, const HeadParams& p);
HeadParams load_head(const ParameterSet& in, Variant v, std::string_view prefix, std::size_t d_in,
                     std::size_t d_h);

// Tape-level building blocks.

/// (XW_Q)(XW_K)ᵀ, T×T.
Var similarity_term(Var x, const HeadVars& h);
/// The 1×T content row of the variant (ψ_c included for M5); nullopt for M1.
std::optional<Var> content_row(Variant v, Var x, const HeadVars& h);
/// Pre-softmax score map, T×T.
Var score(Variant v, Var x, const HeadVars& h, ScoreTerms terms = ScoreTerms::full);

struct HeadResult {
    Var output;  // T×d_h
    Var map;     // T×T, row-stochastic
};

/// softmax(score/√d_h) × (XW_V + b_V); the scale divides the whole score when enabled.
HeadResult head_forward(Variant v, Var x, const HeadVars& h, bool scale,
                        ScoreTerms terms = ScoreTerms::full);

/// Concatenated head outputs projected by W_O plus b_O. Per-head maps are
/// appended to `maps` when given.
Var multi_head_forward(Variant v, Var x, std::span<const HeadVars> heads, Var w_o, Var b_o,
                       bool scale, ScoreTerms terms = ScoreTerms::full,
                       std::vector<Matrix>* maps = nullptr);

// Matrix-level API (evaluated on a private tape without gradients).

Matrix score(Variant v, const Matrix& x, const HeadParams& p);
/// The literal product (XW_Q + b_Q)(XW_K + b_K)ᵀ including the key bias.
Matrix full_dot_product_with_biases(const Matrix& x, const HeadParams& p);
/// Content row (1×T) of M2..M5; zeros for M1.
Matrix content_term(Variant v, const Matrix& x, const HeadParams& p);

struct AttentionResult {
    Matrix output;
    Matrix map;
};

AttentionResult attention_head_forward(Variant v, const Matrix& x, const HeadParams& p,
                                       bool scale = true);
Matrix multi_head_forward(Variant v, const Matrix& x, std::span<const HeadParams> heads,
                          const Matrix& w_o, const Matrix& b_o, bool scale = true);

/// Trainable scalars of one multi-head block (heads plus W_O and b_O).
std::size_t attention_block_param_count(Variant v, std::size_t d_model, std::size_t num_heads,
                                        std::size_t d_h);

}  // namespace phsa
