#pragma once

#include <cstddef>
#include <string>

#include "phsa/classifier.hpp"
#include "phsa/dataset.hpp"
#include "phsa/trainer.hpp"

namespace phsa {

/// Everything needed to reproduce a run. Serialized as JSON with sections
/// "encoder", "train" and "data" plus "output_dir".
struct RunConfig {
    EncoderConfig encoder;
    TrainConfig train;
    PhonemeInventory inventory;
    GeneratorConfig data;
    std::size_t train_utterances = 200;
    std::size_t dev_utterances = 50;
    std::string output_dir = "runs/default";

    ModelConfig model() const;
    /// Throws ConfigError on any violated invariant.
    void validate() const;

    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Pretty-printed JSON with a fixed key order.
std::string to_json(const RunConfig& cfg);
/// Applies the keys present in `json` on top of `base`. Unknown keys and
/// wrong types raise ConfigError.
RunConfig merge_json(const RunConfig& base, const std::string& json);

}  // namespace phsa
