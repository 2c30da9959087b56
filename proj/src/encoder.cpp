#include "phsa/encoder.hpp"

#include <cmath>

#include "phsa/errors.hpp"
#include "phsa/random.hpp"

namespace phsa {

namespace {

std::string layer_prefix(std::size_t layer) { return "layer" + std::to_string(layer) + "."; }

}  // namespace

void EncoderConfig::validate() const {
    if (num_heads == 0 || d_h == 0 || d_model == 0 || ffn_dim == 0) {
        throw ConfigError("encoder dimensions must be positive");
    }
    if (d_model != num_heads * d_h) {
        throw ConfigError("d_model (" + std::to_string(d_model) + ") must equal num_heads x d_h (" +
                          std::to_string(num_heads) + " x " + std::to_string(d_h) + ")");
    }
    if (num_phsa_layers > num_layers) {
        throw ConfigError("num_phsa_layers (" + std::to_string(num_phsa_layers) +
                          ") exceeds num_layers (" + std::to_string(num_layers) + ")");
    }
}

Variant EncoderConfig::layer_variant(std::size_t layer) const {
    return layer < num_phsa_layers ? Variant::M5 : variant_for_upper;
}

std::optional<std::size_t> EncoderConfig::pe_layer() const {
    if (use_abs_pe && num_phsa_layers < num_layers) {
        return num_phsa_layers;
    }
    return std::nullopt;
}

Matrix sinusoidal_position_encoding(std::size_t length, std::size_t d_model) {
    Matrix pe(length, d_model);
    for (std::size_t pos = 0; pos < length; ++pos) {
        for (std::size_t i = 0; i < d_model; i += 2) {
            const double angle = static_cast<double>(pos) /
                                 std::pow(10000.0, static_cast<double>(i) / static_cast<double>(d_model));
            pe(pos, i) = std::sin(angle);
            if (i + 1 < d_model) {
                pe(pos, i + 1) = std::cos(angle);
            }
        }
    }
    return pe;
}

std::string head_prefix(std::size_t layer, std::size_t head) {
    return layer_prefix(layer) + "attn.head" + std::to_string(head) + ".";
}

void init_encoder_params(const EncoderConfig& cfg, ParameterSet& out, Rng& rng) {
    cfg.validate();
    for (std::size_t l = 0; l < cfg.num_layers; ++l) {
        const std::string pre = layer_prefix(l);
        const Variant v = cfg.layer_variant(l);
        out.add(pre + "norm1.gain", Matrix(1, cfg.d_model, 1.0));
        out.add(pre + "norm1.bias", Matrix(1, cfg.d_model));
        for (std::size_t h = 0; h < cfg.num_heads; ++h) {
            store_head(out, v, head_prefix(l, h), HeadParams::init(v, cfg.d_model, cfg.d_h, rng));
        }
        out.add(pre + "attn.w_o", rng.glorot_uniform(cfg.d_model, cfg.d_model));
        out.add(pre + "attn.b_o", Matrix(1, cfg.d_model));
        out.add(pre + "norm2.gain", Matrix(1, cfg.d_model, 1.0));
        out.add(pre + "norm2.bias", Matrix(1, cfg.d_model));
        out.add(pre + "ffn.w1", rng.glorot_uniform(cfg.d_model, cfg.ffn_dim));
        out.add(pre + "ffn.b1", Matrix(1, cfg.ffn_dim));
        out.add(pre + "ffn.w2", rng.glorot_uniform(cfg.ffn_dim, cfg.d_model));
        out.add(pre + "ffn.b2", Matrix(1, cfg.d_model));
    }
}

std::size_t attention_param_count(const EncoderConfig& cfg, std::size_t layer) {
    return attention_block_param_count(cfg.layer_variant(layer), cfg.d_model, cfg.num_heads, cfg.d_h);
}

Var encoder_forward(const EncoderConfig& cfg, const BoundParameters& params, Var x,
                    ScoreTerms phsa_terms, std::vector<LayerHeadMap>* maps) {
    cfg.validate();
    if (x.cols() != cfg.d_model) {
        throw ShapeError("encoder input " + x.value().shape_string() + " does not have d_model = " +
                         std::to_string(cfg.d_model) + " columns");
    }
    Tape& tape = params.tape();
    const auto pe_at = cfg.pe_layer();
    std::vector<HeadVars> heads(cfg.num_heads);
    std::vector<Matrix> head_maps;
    for (std::size_t l = 0; l < cfg.num_layers; ++l) {
        if (pe_at && *pe_at == l) {
            x = add(x, tape.constant(sinusoidal_position_encoding(x.rows(), cfg.d_model)));
        }
        const std::string pre = layer_prefix(l);
        const Variant v = cfg.layer_variant(l);
        for (std::size_t h = 0; h < cfg.num_heads; ++h) {
            heads[h] = bind_head(params, v, head_prefix(l, h), cfg.d_model, cfg.d_h);
        }
        const ScoreTerms terms = v == Variant::M5 ? phsa_terms : ScoreTerms::full;

        const Var normed = layer_norm(x, params[pre + "norm1.gain"], params[pre + "norm1.bias"]);
        head_maps.clear();
        const Var attended = multi_head_forward(v, normed, heads, params[pre + "attn.w_o"],
                                                params[pre + "attn.b_o"], cfg.scale_scores, terms,
                                                maps != nullptr ? &head_maps : nullptr);
        x = add(x, attended);
        if (maps != nullptr) {
            for (std::size_t h = 0; h < head_maps.size(); ++h) {
                maps->push_back(LayerHeadMap{l, h, std::move(head_maps[h])});
            }
        }

        const Var normed2 = layer_norm(x, params[pre + "norm2.gain"], params[pre + "norm2.bias"]);
        const Var hidden = swish(add_row(matmul(normed2, params[pre + "ffn.w1"]), params[pre + "ffn.b1"]));
        x = add(x, add_row(matmul(hidden, params[pre + "ffn.w2"]), params[pre + "ffn.b2"]));
    }
    return x;
}

EncoderOutput encoder_forward(const EncoderConfig& cfg, const ParameterSet& params, const Matrix& x,
                              bool collect_maps) {
    Tape tape;
    BoundParameters bound(tape, params, false);
    EncoderOutput out{x, {}};
    out.features = encoder_forward(cfg, bound, tape.constant(x), ScoreTerms::full,
                                   collect_maps ? &out.maps : nullptr)
                       .value();
    return out;
}

ScoreTerms terms_after_drop(TermDrop drop) noexcept {
    return drop == TermDrop::similarity ? ScoreTerms::content_only : ScoreTerms::similarity_only;
}

EncoderOutput term_ablated_forward(const EncoderConfig& cfg, const ParameterSet& params,
                                   const Matrix& x, TermDrop drop, bool collect_maps) {
    if (cfg.num_phsa_layers == 0) {
        throw ConfigError("term ablation requires at least one phSA layer");
    }
    Tape tape;
    BoundParameters bound(tape, params, false);
    EncoderOutput out{x, {}};
    out.features = encoder_forward(cfg, bound, tape.constant(x), terms_after_drop(drop),
                                   collect_maps ? &out.maps : nullptr)
                       .value();
    return out;
}

}  // namespace phsa
