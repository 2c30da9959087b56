#include "phsa/run_config.hpp"

#include <json.hpp>

#include "phsa/errors.hpp"

namespace phsa {

using nlohmann::ordered_json;

namespace {

template <typename T>
void take(const ordered_json& obj, const char* key, T& out) {
    if (obj.contains(key)) {
        out = obj.at(key).get<T>();
    }
}

void reject_unknown(const ordered_json& obj, const std::string& section,
                    std::initializer_list<const char*> known) {
    if (!obj.is_object()) {
        throw ConfigError("config section '" + section + "' must be an object");
    }
    for (const auto& [key, value] : obj.items()) {
        bool found = false;
        for (const char* k : known) {
            found = found || key == k;
        }
        if (!found) {
            throw ConfigError("unknown config key '" + (section.empty() ? "" : section + ".") + key + "'");
        }
    }
}

}  // namespace

ModelConfig RunConfig::model() const {
    return ModelConfig{encoder, data.input_dim, inventory.num_classes};
}

void RunConfig::validate() const {
    encoder.validate();
    train.validate();
    inventory.validate();
    data.validate();
    if (train_utterances == 0) {
        throw ConfigError("train_utterances must be positive");
    }
}

std::string to_json(const RunConfig& cfg) {
    ordered_json j;
    const EncoderConfig& e = cfg.encoder;
    j["encoder"] = {{"num_layers", e.num_layers},
                    {"num_heads", e.num_heads},
                    {"d_model", e.d_model},
                    {"d_h", e.d_h},
                    {"ffn_dim", e.ffn_dim},
                    {"num_phsa_layers", e.num_phsa_layers},
                    {"variant_for_upper", std::string(to_string(e.variant_for_upper))},
                    {"use_abs_pe", e.use_abs_pe},
                    {"scale_scores", e.scale_scores},
                    {"seed", e.seed}};
    const TrainConfig& t = cfg.train;
    j["train"] = {{"learning_rate", t.learning_rate}, {"weight_decay", t.weight_decay},
                  {"batch_size", t.batch_size},       {"epochs", t.epochs},
                  {"seed", t.seed},                   {"beta1", t.beta1},
                  {"beta2", t.beta2},                 {"adam_epsilon", t.adam_epsilon}};
    const GeneratorConfig& d = cfg.data;
    j["data"] = {{"num_classes", cfg.inventory.num_classes},
                 {"confusable_groups", cfg.inventory.confusable_groups},
                 {"min_length", d.min_length},
                 {"max_length", d.max_length},
                 {"input_dim", d.input_dim},
                 {"min_segment", d.min_segment},
                 {"max_segment", d.max_segment},
                 {"noise_scale", d.noise_scale},
                 {"speaker_scale", d.speaker_scale},
                 {"shared_fraction", d.shared_fraction},
                 {"seed", d.seed},
                 {"train_utterances", cfg.train_utterances},
                 {"dev_utterances", cfg.dev_utterances}};
    j["output_dir"] = cfg.output_dir;
    return j.dump(2) + "\n";
}

RunConfig merge_json(const RunConfig& base, const std::string& json) {
    RunConfig cfg = base;
    try {
        const ordered_json j = ordered_json::parse(json);
        reject_unknown(j, "", {"encoder", "train", "data", "output_dir"});
        if (j.contains("encoder")) {
            const auto& e = j.at("encoder");
            reject_unknown(e, "encoder",
                           {"num_layers", "num_heads", "d_model", "d_h", "ffn_dim", "num_phsa_layers",
                            "variant_for_upper", "use_abs_pe", "scale_scores", "seed"});
            take(e, "num_layers", cfg.encoder.num_layers);
            take(e, "num_heads", cfg.encoder.num_heads);
            take(e, "d_model", cfg.encoder.d_model);
            take(e, "d_h", cfg.encoder.d_h);
            take(e, "ffn_dim", cfg.encoder.ffn_dim);
            take(e, "num_phsa_layers", cfg.encoder.num_phsa_layers);
            if (e.contains("variant_for_upper")) {
                const auto name = e.at("variant_for_upper").get<std::string>();
                const auto v = parse_variant(name);
                if (!v) {
                    throw ConfigError("unknown variant '" + name + "'");
                }
                cfg.encoder.variant_for_upper = *v;
            }
            take(e, "use_abs_pe", cfg.encoder.use_abs_pe);
            take(e, "scale_scores", cfg.encoder.scale_scores);
            take(e, "seed", cfg.encoder.seed);
        }
        if (j.contains("train")) {
            const auto& t = j.at("train");
            reject_unknown(t, "train",
                           {"learning_rate", "weight_decay", "batch_size", "epochs", "seed", "beta1", "beta2",
                            "adam_epsilon"});
            take(t, "learning_rate", cfg.train.learning_rate);
            take(t, "weight_decay", cfg.train.weight_decay);
            take(t, "batch_size", cfg.train.batch_size);
            take(t, "epochs", cfg.train.epochs);
            take(t, "seed", cfg.train.seed);
            take(t, "beta1", cfg.train.beta1);
            take(t, "beta2", cfg.train.beta2);
            take(t, "adam_epsilon", cfg.train.adam_epsilon);
        }
        if (j.contains("data")) {
            const auto& d = j.at("data");
            reject_unknown(d, "data",
                           {"num_classes", "confusable_groups", "min_length", "max_length", "input_dim",
                            "min_segment", "max_segment", "noise_scale", "speaker_scale", "shared_fraction",
                            "seed", "train_utterances", "dev_utterances"});
            take(d, "num_classes", cfg.inventory.num_classes);
            take(d, "confusable_groups", cfg.inventory.confusable_groups);
            take(d, "min_length", cfg.data.min_length);
            take(d, "max_length", cfg.data.max_length);
            take(d, "input_dim", cfg.data.input_dim);
            take(d, "min_segment", cfg.data.min_segment);
            take(d, "max_segment", cfg.data.max_segment);
            take(d, "noise_scale", cfg.data.noise_scale);
            take(d, "speaker_scale", cfg.data.speaker_scale);
            take(d, "shared_fraction", cfg.data.shared_fraction);
            take(d, "seed", cfg.data.seed);
            take(d, "train_utterances", cfg.train_utterances);
            take(d, "dev_utterances", cfg.dev_utterances);
        }
        take(j, "output_dir", cfg.output_dir);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return cfg;
}

}  // namespace phsa
