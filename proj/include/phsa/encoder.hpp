#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "phsa/attention.hpp"
#include "phsa/autodiff.hpp"
#include "phsa/matrix.hpp"
#include "phsa/parameters.hpp"

namespace phsa {

class Rng;

/// Pre-norm transformer encoder. Layers [0, num_phsa_layers) use M5 with no
/// positional input; the remaining layers use `variant_for_upper`. When any
/// non-phSA layer exists and use_abs_pe is set, a sinusoidal absolute PE is
/// added to the hidden state entering the first non-phSA layer.
struct EncoderConfig {
    std::size_t num_layers = 4;
    std::size_t num_heads = 4;
    std::size_t d_model = 64;
    std::size_t d_h = 16;
    std::size_t ffn_dim = 128;
    std::size_t num_phsa_layers = 0;
    Variant variant_for_upper = Variant::M2;
    bool use_abs_pe = true;
    /// Divide the whole score by √d_h before softmax.
    bool scale_scores = true;
    std::uint64_t seed = 1;

    /// Throws ConfigError on violated invariants.
    void validate() const;
    Variant layer_variant(std::size_t layer) const;
    /// Layer index whose input receives the positional encoding, if any.
    std::optional<std::size_t> pe_layer() const;

    friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

/// Classic fixed sinusoidal table: sin on even columns, cos on odd columns.
Matrix sinusoidal_position_encoding(std::size_t length, std::size_t d_model);

/// Appends encoder parameters named "layer{i}.{attn,norm1,norm2,ffn}..." to `out`.
void init_encoder_params(const EncoderConfig& cfg, ParameterSet& out, Rng& rng);
std::string head_prefix(std::size_t layer, std::size_t head);
/// Scalars owned by one layer's attention block.
std::size_t attention_param_count(const EncoderConfig& cfg, std::size_t layer);

struct LayerHeadMap {
    std::size_t layer = 0;
    std::size_t head = 0;
    Matrix map;
};

/// Which score term to discard in every phSA layer.
enum class TermDrop { similarity, content };

/// Tape-level forward. `phsa_terms` applies to M5 layers only.
Var encoder_forward(const EncoderConfig& cfg, const BoundParameters& params, Var x,
                    ScoreTerms phsa_terms = ScoreTerms::full,
                    std::vector<LayerHeadMap>* maps = nullptr);

struct EncoderOutput {
    Matrix features;
    std::vector<LayerHeadMap> maps;
};

EncoderOutput encoder_forward(const EncoderConfig& cfg, const ParameterSet& params, const Matrix& x,
                              bool collect_maps = false);

/// Forward with one phSA term zeroed in every phSA layer, parameters fixed.
/// Throws ConfigError when the encoder has no phSA layers.
EncoderOutput term_ablated_forward(const EncoderConfig& cfg, const ParameterSet& params,
                                   const Matrix& x, TermDrop drop, bool collect_maps = false);

ScoreTerms terms_after_drop(TermDrop drop) noexcept;

}  // namespace phsa
