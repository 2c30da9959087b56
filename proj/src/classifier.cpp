#include "phsa/classifier.hpp"

#include "phsa/errors.hpp"
#include "phsa/random.hpp"

namespace phsa {

void ModelConfig::validate() const {
    encoder.validate();
    if (input_dim == 0 || num_classes < 2) {
        throw ConfigError("model needs input_dim >= 1 and num_classes >= 2");
    }
}

ParameterSet init_model(const ModelConfig& cfg) {
    cfg.validate();
    Rng rng(derive_seed(cfg.encoder.seed, 0));
    const std::size_t d = cfg.encoder.d_model;
    ParameterSet p;
    p.add("input.w", rng.glorot_uniform(cfg.input_dim, d));
    p.add("input.b", Matrix(1, d));
    init_encoder_params(cfg.encoder, p, rng);
    p.add("final_norm.gain", Matrix(1, d, 1.0));
    p.add("final_norm.bias", Matrix(1, d));
    p.add("readout.w", rng.glorot_uniform(d, cfg.num_classes));
    p.add("readout.b", Matrix(1, cfg.num_classes));
    return p;
}

Var model_logits(const ModelConfig& cfg, const BoundParameters& params, Var features,
                 ScoreTerms phsa_terms, std::vector<LayerHeadMap>* maps) {
    if (features.cols() != cfg.input_dim) {
        throw ShapeError("features " + features.value().shape_string() + " do not have input_dim = " +
                         std::to_string(cfg.input_dim) + " columns");
    }
    Var x = add_row(matmul(features, params["input.w"]), params["input.b"]);
    x = encoder_forward(cfg.encoder, params, x, phsa_terms, maps);
    x = layer_norm(x, params["final_norm.gain"], params["final_norm.bias"]);
    return add_row(matmul(x, params["readout.w"]), params["readout.b"]);
}

Matrix model_logits(const ModelConfig& cfg, const ParameterSet& params, const Matrix& features,
                    ScoreTerms phsa_terms, std::vector<LayerHeadMap>* maps) {
    Tape tape;
    BoundParameters bound(tape, params, false);
    return model_logits(cfg, bound, tape.constant(features), phsa_terms, maps).value();
}

std::vector<int> argmax_rows(const Matrix& logits) {
    std::vector<int> out(logits.rows());
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < logits.cols(); ++j) {
            if (logits(i, j) > logits(i, best)) {
                best = j;
            }
        }
        out[i] = static_cast<int>(best);
    }
    return out;
}

}  // namespace phsa
