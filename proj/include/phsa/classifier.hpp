#pragma once

#include <cstddef>
#include <vector>

#include "phsa/encoder.hpp"
#include "phsa/parameters.hpp"

namespace phsa {

/// Frame classifier: input projection → encoder → final norm → linear readout.
struct ModelConfig {
    EncoderConfig encoder;
    std::size_t input_dim = 16;
    std::size_t num_classes = 12;

    void validate() const;
    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Fresh parameters drawn from encoder.seed.
ParameterSet init_model(const ModelConfig& cfg);

/// T×num_classes logits for T×input_dim features.
Var model_logits(const ModelConfig& cfg, const BoundParameters& params, Var features,
                 ScoreTerms phsa_terms = ScoreTerms::full, std::vector<LayerHeadMap>* maps = nullptr);

Matrix model_logits(const ModelConfig& cfg, const ParameterSet& params, const Matrix& features,
                    ScoreTerms phsa_terms = ScoreTerms::full, std::vector<LayerHeadMap>* maps = nullptr);

/// Arg-max class per row; ties resolve to the lowest class id.
std::vector<int> argmax_rows(const Matrix& logits);

}  // namespace phsa
