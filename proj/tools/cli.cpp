#include "phsa/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "phsa/analysis.hpp"
#include "phsa/checkpoint.hpp"
#include "phsa/errors.hpp"
#include "phsa/random.hpp"
#include "phsa/run_config.hpp"
#include "phsa/text_io.hpp"
#include "phsa/verification.hpp"

namespace phsa::cli {

namespace fs = std::filesystem;

namespace {

using Override = std::function<void(RunConfig&)>;

/// Flags that overlay a RunConfig. They are collected during parsing and
/// applied after any config file so that flags win.
struct ConfigFlags {
    std::string config_file;
    std::vector<Override> overrides;
    bool d_h_given = false;
    bool shape_given = false;
    std::optional<Variant> variant;
    bool phsa_layers_given = false;

    template <typename T>
    void option(CLI::App* app, const std::string& name, const std::string& help,
                std::function<void(RunConfig&, const T&)> apply) {
        app->add_option_function<T>(
            name, [this, apply](const T& v) { overrides.push_back([apply, v](RunConfig& c) { apply(c, v); }); },
            help);
    }

    void add_model(CLI::App* app) {
        app->add_option("--config", config_file, "JSON run configuration");
        option<std::size_t>(app, "--layers", "encoder layers", [](RunConfig& c, const std::size_t& v) {
            c.encoder.num_layers = v;
        });
        app->add_option_function<std::size_t>(
            "--heads",
            [this](const std::size_t& v) {
                shape_given = true;
                overrides.push_back([v](RunConfig& c) { c.encoder.num_heads = v; });
            },
            "attention heads per layer");
        app->add_option_function<std::size_t>(
            "--d-model",
            [this](const std::size_t& v) {
                shape_given = true;
                overrides.push_back([v](RunConfig& c) { c.encoder.d_model = v; });
            },
            "model width");
        app->add_option_function<std::size_t>(
            "--d-h",
            [this](const std::size_t& v) {
                d_h_given = true;
                overrides.push_back([v](RunConfig& c) { c.encoder.d_h = v; });
            },
            "head width (default d_model / heads)");
        option<std::size_t>(app, "--ffn-dim", "feed-forward width",
                            [](RunConfig& c, const std::size_t& v) { c.encoder.ffn_dim = v; });
        app->add_option_function<std::size_t>(
            "--phsa-layers",
            [this](const std::size_t& v) {
                phsa_layers_given = true;
                overrides.push_back([v](RunConfig& c) { c.encoder.num_phsa_layers = v; });
            },
            "lower layers running phSA (M5)");
        app->add_option_function<std::string>(
            "--variant",
            [this](const std::string& v) {
                variant = parse_variant(v);
                if (!variant) throw CLI::ValidationError("--variant", "expected one of M1..M5, got " + v);
            },
            "M1..M4: variant of the non-phSA layers; M5: use phSA (all layers unless --phsa-layers)");
        app->add_flag_function(
            "--no-abs-pe",
            [this](std::int64_t) { overrides.push_back([](RunConfig& c) { c.encoder.use_abs_pe = false; }); },
            "disable the absolute PE of the vanilla layers");
        option<std::uint64_t>(app, "--model-seed", "parameter initialization seed",
                              [](RunConfig& c, const std::uint64_t& v) { c.encoder.seed = v; });
    }

    void add_train(CLI::App* app) {
        option<double>(app, "--lr", "learning rate",
                       [](RunConfig& c, const double& v) { c.train.learning_rate = v; });
        option<double>(app, "--weight-decay", "decoupled weight decay",
                       [](RunConfig& c, const double& v) { c.train.weight_decay = v; });
        option<std::size_t>(app, "--batch-size", "utterances per batch",
                            [](RunConfig& c, const std::size_t& v) { c.train.batch_size = v; });
        option<std::size_t>(app, "--epochs", "training epochs",
                            [](RunConfig& c, const std::size_t& v) { c.train.epochs = v; });
        option<std::uint64_t>(app, "--seed", "shuffle seed",
                              [](RunConfig& c, const std::uint64_t& v) { c.train.seed = v; });
    }

    void add_data(CLI::App* app) {
        if (app->get_option_no_throw("--config") == nullptr) {
            app->add_option("--config", config_file, "JSON run configuration");
        }
        option<std::size_t>(app, "--num-utts", "training utterances",
                            [](RunConfig& c, const std::size_t& v) { c.train_utterances = v; });
        option<std::size_t>(app, "--dev-utts", "development utterances",
                            [](RunConfig& c, const std::size_t& v) { c.dev_utterances = v; });
        option<std::size_t>(app, "--min-len", "minimum utterance length",
                            [](RunConfig& c, const std::size_t& v) { c.data.min_length = v; });
        option<std::size_t>(app, "--max-len", "maximum utterance length",
                            [](RunConfig& c, const std::size_t& v) { c.data.max_length = v; });
        option<std::size_t>(app, "--input-dim", "feature dimension",
                            [](RunConfig& c, const std::size_t& v) { c.data.input_dim = v; });
        option<double>(app, "--noise", "per-frame noise scale",
                       [](RunConfig& c, const double& v) { c.data.noise_scale = v; });
        option<double>(app, "--speaker", "per-utterance offset scale",
                       [](RunConfig& c, const double& v) { c.data.speaker_scale = v; });
        option<std::uint64_t>(app, "--data-seed", "generator seed",
                              [](RunConfig& c, const std::uint64_t& v) { c.data.seed = v; });
    }

    /// defaults → `base_json` (if any) → --config → flags.
    RunConfig resolve_config(const std::optional<std::string>& base_json = std::nullopt) const {
        RunConfig cfg;
        if (base_json) {
            cfg = merge_json(cfg, *base_json);
        }
        if (!config_file.empty()) {
            cfg = merge_json(cfg, text::read_file(resolve(config_file).string()));
        }
        for (const auto& o : overrides) {
            o(cfg);
        }
        if (shape_given && !d_h_given && cfg.encoder.num_heads > 0) {
            cfg.encoder.d_h = cfg.encoder.d_model / cfg.encoder.num_heads;
        }
        if (variant) {
            if (*variant == Variant::M5) {
                if (!phsa_layers_given) {
                    cfg.encoder.num_phsa_layers = cfg.encoder.num_layers;
                } else if (cfg.encoder.num_phsa_layers == 0) {
                    throw ConfigError("--variant M5 needs at least one phSA layer");
                }
            } else {
                cfg.encoder.variant_for_upper = *variant;
            }
        }
        cfg.validate();
        return cfg;
    }
};

std::optional<std::string> read_if_exists(const fs::path& p) {
    if (!fs::exists(p)) {
        return std::nullopt;
    }
    return text::read_file(p.string());
}

std::vector<Utterance> load_split(const fs::path& dir, const std::string& split, const ModelConfig& model) {
    const fs::path file = dir / (split + ".txt");
    if (!fs::exists(file)) {
        throw DataError("dataset file not found: " + file.string());
    }
    std::size_t classes = 0;
    auto data = load_dataset(file.string(), &classes);
    if (data.empty()) {
        throw DataError(file.string() + " holds no utterances");
    }
    if (classes != model.num_classes) {
        throw ConfigError(file.string() + " has " + std::to_string(classes) + " classes, model expects " +
                          std::to_string(model.num_classes));
    }
    for (const auto& u : data) {
        if (u.features.cols() != model.input_dim) {
            throw ConfigError(file.string() + " has d_in " + std::to_string(u.features.cols()) +
                              ", model expects " + std::to_string(model.input_dim));
        }
    }
    return data;
}

void write_history(const fs::path& path, const std::vector<EpochStats>& history) {
    std::ostringstream ss;
    ss << "# phsa-history v1\n";
    ss << "epoch,loss,accuracy\n";
    for (const auto& h : history) {
        ss << h.epoch << ',' << text::format(h.loss) << ',' << text::format(h.accuracy) << '\n';
    }
    text::write_file_atomic(path.string(), ss.str());
}

template <typename Writer>
void write_report(const fs::path& path, Writer&& writer) {
    std::ostringstream ss;
    writer(ss);
    text::write_file_atomic(path.string(), ss.str());
}

// ---- gen ------------------------------------------------------------------

int cmd_gen(const ConfigFlags& flags, const std::string& out_dir, bool force, std::ostream& out) {
    const RunConfig cfg = flags.resolve_config();
    const fs::path dir = resolve(out_dir);
    const std::vector<fs::path> files{dir / "train.txt", dir / "dev.txt", dir / "config.json"};
    if (!force) {
        for (const auto& f : files) {
            if (fs::exists(f)) {
                throw ConfigError("refusing to overwrite " + f.string() + " (pass --force)");
            }
        }
    }
    const auto train = generate_dataset(cfg.inventory, cfg.data, cfg.train_utterances, 0);
    const auto dev = generate_dataset(cfg.inventory, cfg.data, cfg.dev_utterances, 1);
    save_dataset(files[0].string(), train, cfg.inventory.num_classes);
    save_dataset(files[1].string(), dev, cfg.inventory.num_classes);
    text::write_file_atomic(files[2].string(), to_json(cfg));
    std::size_t frames = 0;
    for (const auto& u : train) frames += u.length();
    out << "wrote " << train.size() << " train utterances (" << frames << " frames) and " << dev.size()
        << " dev utterances to " << dir.string() << '\n';
    return kOk;
}

// ---- train ----------------------------------------------------------------

int cmd_train(const ConfigFlags& flags, const std::string& data_dir, const std::string& out_dir,
              std::ostream& out) {
    const fs::path data = resolve(data_dir);
    RunConfig cfg = flags.resolve_config(read_if_exists(data / "config.json"));
    if (!out_dir.empty()) {
        cfg.output_dir = out_dir;
    }
    const fs::path run = resolve(cfg.output_dir);
    const ModelConfig model = cfg.model();
    const auto train_set = load_split(data, "train", model);

    fs::create_directories(run);
    text::write_file_atomic((run / "config.json").string(), to_json(cfg));
    std::vector<EpochStats> history;
    const auto on_epoch = [&](const EpochStats& s, const ParameterSet& params, std::size_t step) {
        history.push_back(s);
        write_history(run / "history.csv", history);
        save_checkpoint((run / "checkpoint.txt").string(), Checkpoint{cfg, params, step, s.epoch});
        out << "epoch " << s.epoch << " loss " << text::format(s.loss) << " accuracy "
            << text::format(s.accuracy) << '\n';
    };
    const TrainResult result = train(cfg.train, model, train_set, on_epoch);
    if (fs::exists(data / "dev.txt")) {
        const auto dev = load_split(data, "dev", model);
        const Evaluation ev = evaluate(model, result.params, dev);
        out << "dev accuracy " << text::format(ev.accuracy) << " loss " << text::format(ev.loss) << '\n';
    }
    out << "checkpoint " << (run / "checkpoint.txt").string() << '\n';
    return kOk;
}

// ---- eval -----------------------------------------------------------------

int cmd_eval(const std::string& checkpoint, const std::string& data_dir, const std::string& split,
             const std::string& confusion_out, std::ostream& out) {
    const Checkpoint ckpt = load_checkpoint(resolve(checkpoint).string());
    const ModelConfig model = ckpt.config.model();
    const auto data = load_split(resolve(data_dir), split, model);
    const Evaluation ev = evaluate(model, ckpt.params, data);
    out << "split=" << split << ",frames=" << ev.frames << ",accuracy=" << text::format(ev.accuracy)
        << ",loss=" << text::format(ev.loss) << '\n';
    if (!confusion_out.empty()) {
        write_report(resolve(confusion_out), [&](std::ostream& s) {
            s << "# phsa-confusion v1\n";
            s << "true,predicted,count\n";
            for (std::size_t i = 0; i < ev.confusion.size(); ++i) {
                for (std::size_t j = 0; j < ev.confusion[i].size(); ++j) {
                    s << ckpt.config.inventory.class_name(static_cast<int>(i)) << ','
                      << ckpt.config.inventory.class_name(static_cast<int>(j)) << ',' << ev.confusion[i][j]
                      << '\n';
                }
            }
        });
    }
    return kOk;
}

// ---- analyze --------------------------------------------------------------

struct AnalyzeOptions {
    std::string checkpoint;
    std::string data_dir;
    std::string split = "dev";
    std::string which = "all";
    std::string out_dir;
    bool exclude_silence = false;
    std::size_t max_utterances = 0;
    std::size_t map_utterance = 0;
};

std::vector<std::vector<LayerHeadMap>> collect_maps(const ModelConfig& model, const ParameterSet& params,
                                                    const std::vector<Utterance>& data, ScoreTerms terms) {
    std::vector<std::vector<LayerHeadMap>> maps(data.size());
    for (std::size_t u = 0; u < data.size(); ++u) {
        model_logits(model, params, data[u].features, terms, &maps[u]);
    }
    return maps;
}

std::vector<LayerHeadMap> flatten(const std::vector<std::vector<LayerHeadMap>>& maps,
                                  std::size_t layer_limit) {
    std::vector<LayerHeadMap> out;
    for (const auto& per_utt : maps) {
        for (const auto& m : per_utt) {
            if (m.layer < layer_limit) out.push_back(m);
        }
    }
    return out;
}

void analyze_par(const Checkpoint& ckpt, const std::vector<Utterance>& data,
                 const std::vector<std::vector<LayerHeadMap>>& maps, const AnalyzeOptions& opt,
                 const fs::path& dir, std::ostream& out) {
    const auto& enc = ckpt.config.encoder;
    const auto& inv = ckpt.config.inventory;
    std::vector<std::string> names;
    for (std::size_t c = 0; c < inv.num_classes; ++c) names.push_back(inv.class_name(static_cast<int>(c)));
    std::ostringstream summary;
    summary << "# phsa-par-symmetry v1\n";
    summary << "layer,head,metric,mean,std\n";
    for (std::size_t l = 0; l < enc.num_layers; ++l) {
        for (std::size_t h = 0; h < enc.num_heads; ++h) {
            std::vector<LabeledMap> labeled;
            for (std::size_t u = 0; u < data.size(); ++u) {
                labeled.push_back(LabeledMap{&maps[u][l * enc.num_heads + h].map, data[u].labels});
            }
            const ParMatrix par =
                compute_par(labeled, inv.num_classes, names, ParOptions{.exclude_silence = opt.exclude_silence});
            write_report(dir / ("par_L" + std::to_string(l) + "_H" + std::to_string(h) + ".csv"),
                         [&](std::ostream& s) { write_par(s, par); });
            summary << l << ',' << h << ",symmetry," << text::format(par_symmetry_score(par)) << ",0\n";
        }
    }
    text::write_file_atomic((dir / "par_symmetry.csv").string(), summary.str());
    out << "par: " << enc.num_layers * enc.num_heads << " matrices, symmetry in par_symmetry.csv\n";
}

void analyze_ablation(const Checkpoint& ckpt, const std::vector<Utterance>& data,
                      const std::vector<std::vector<LayerHeadMap>>& full_maps, const fs::path& dir,
                      std::ostream& out) {
    const ModelConfig model = ckpt.config.model();
    const std::size_t k = model.encoder.num_phsa_layers;
    if (k == 0) {
        throw ConfigError("ablation requires a checkpoint with phSA layers");
    }
    struct Row {
        const char* tag;
        const char* s;
        const char* c;
        ScoreTerms terms;
    };
    const Row rows[] = {{"full", "1", "1", ScoreTerms::full},
                        {"similarity-only", "1", "0", ScoreTerms::similarity_only},
                        {"content-only", "0", "1", ScoreTerms::content_only}};
    std::vector<EntropyReport> reports;
    std::vector<double> max_var;
    std::vector<double> accuracy;
    for (const Row& r : rows) {
        const auto maps = r.terms == ScoreTerms::full ? full_maps : collect_maps(model, ckpt.params, data, r.terms);
        const auto phsa_maps = flatten(maps, k);
        reports.push_back(attention_entropy(phsa_maps, r.tag));
        double worst = 0.0;
        for (const auto& m : phsa_maps) worst = std::max(worst, row_entropy_variance(m.map));
        max_var.push_back(worst);
        accuracy.push_back(evaluate(model, ckpt.params, data, r.terms).accuracy);
    }
    const double sim = reports[1].row_mean;
    const double con = reports[2].row_mean;
    const std::string note = sim < con ? "entropy(similarity-only) < entropy(content-only), same ordering as the paper"
                                       : "entropy(similarity-only) >= entropy(content-only), ordering differs from the paper";
    std::ostringstream ss;
    ss << "# phsa-ablation v1 (natural log, phSA layers only)\n";
    ss << "# " << note << '\n';
    ss << "terms,similarity,content,entropy_mean,entropy_std,entropy_head_std,max_map_row_entropy_var,frame_accuracy\n";
    for (std::size_t i = 0; i < 3; ++i) {
        ss << rows[i].tag << ',' << rows[i].s << ',' << rows[i].c << ',' << text::format(reports[i].row_mean) << ','
           << text::format(reports[i].row_std) << ',' << text::format(reports[i].head_std) << ','
           << text::format(max_var[i]) << ',' << text::format(accuracy[i]) << '\n';
    }
    text::write_file_atomic((dir / "ablation.csv").string(), ss.str());
    write_report(dir / "ablation_entropy.csv", [&](std::ostream& s) { write_entropy(s, reports); });
    out << "S C | entropy (mean +- std)\n";
    for (std::size_t i = 0; i < 3; ++i) {
        out << rows[i].s << ' ' << rows[i].c << " | " << text::format(reports[i].row_mean) << " +- "
            << text::format(reports[i].row_std) << '\n';
    }
    out << "note: " << note << '\n';
}

int cmd_analyze(const AnalyzeOptions& opt, std::ostream& out) {
    static const std::vector<std::string> kinds{"par", "entropy", "slopes", "ablation", "maps", "all"};
    if (std::find(kinds.begin(), kinds.end(), opt.which) == kinds.end()) {
        throw ConfigError("--which must be one of par, entropy, slopes, ablation, maps, all");
    }
    const fs::path ckpt_path = resolve(opt.checkpoint);
    const Checkpoint ckpt = load_checkpoint(ckpt_path.string());
    const ModelConfig model = ckpt.config.model();
    const bool all = opt.which == "all";
    const bool has_phsa = model.encoder.num_phsa_layers > 0;
    if ((opt.which == "slopes" || opt.which == "ablation") && !has_phsa) {
        throw ConfigError(opt.which + " requires a checkpoint with phSA layers");
    }
    const fs::path dir = opt.out_dir.empty() ? ckpt_path.parent_path() / "analysis" : resolve(opt.out_dir);
    fs::create_directories(dir);

    if (opt.which == "slopes" || (all && has_phsa)) {
        const SlopeReport slopes = slope_report(ckpt.params, model.encoder);
        write_report(dir / "slopes.csv", [&](std::ostream& s) { write_slopes(s, slopes); });
        out << "slopes: " << slopes.heads.size() << " phSA heads\n";
        if (opt.which == "slopes") return kOk;
    }

    auto data = load_split(resolve(opt.data_dir), opt.split, model);
    if (opt.max_utterances > 0 && data.size() > opt.max_utterances) {
        data.erase(data.begin() + static_cast<std::ptrdiff_t>(opt.max_utterances), data.end());
    }
    const auto maps = collect_maps(model, ckpt.params, data, ScoreTerms::full);

    if (opt.which == "par" || all) {
        analyze_par(ckpt, data, maps, opt, dir, out);
    }
    if (opt.which == "entropy" || all) {
        const std::vector<EntropyReport> reports{attention_entropy(flatten(maps, model.encoder.num_layers))};
        write_report(dir / "entropy.csv", [&](std::ostream& s) { write_entropy(s, reports); });
        out << "entropy: mean " << text::format(reports[0].row_mean) << " nats over all layers\n";
    }
    if (opt.which == "ablation" || (all && has_phsa)) {
        analyze_ablation(ckpt, data, maps, dir, out);
    }
    if (opt.which == "maps" || all) {
        if (opt.map_utterance >= data.size()) {
            throw ConfigError("--utterance " + std::to_string(opt.map_utterance) + " is out of range");
        }
        const fs::path maps_dir = dir / "maps";
        fs::create_directories(maps_dir);
        for (const auto& m : maps[opt.map_utterance]) {
            write_report(maps_dir / ("u" + std::to_string(data[opt.map_utterance].id) + "_L" +
                                     std::to_string(m.layer) + "_H" + std::to_string(m.head) + ".csv"),
                         [&](std::ostream& s) { write_attention_map(s, m); });
        }
        out << "maps: " << maps[opt.map_utterance].size() << " files in " << maps_dir.string() << '\n';
    }
    return kOk;
}

// ---- verify ---------------------------------------------------------------

int cmd_verify(std::uint64_t seed, bool corrupt, std::ostream& out) {
    fault::set_corrupt_prelu_backward(corrupt);
    VerifyReport report;
    try {
        report = run_verification(seed);
    } catch (...) {
        fault::set_corrupt_prelu_backward(false);
        throw;
    }
    fault::set_corrupt_prelu_backward(false);
    for (const auto& c : report.checks) {
        out << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << text::format(c.value)
            << " (tolerance " << text::format(c.tolerance) << ")";
        if (!c.detail.empty()) out << " [" << c.detail << "]";
        out << '\n';
    }
    out << "max gradient error: " << text::format(report.max_grad_error) << '\n';
    out << (report.passed() ? "verify: all checks passed\n" : "verify: FAILED\n");
    return report.passed() ? kOk : kVerifyFailed;
}

// ---- bench ----------------------------------------------------------------

struct Timing {
    double median_ms = 0.0;
    double p95_ms = 0.0;
};

Timing summarize(std::vector<double> samples) {
    std::sort(samples.begin(), samples.end());
    const auto at = [&](double q) {
        const std::size_t idx = static_cast<std::size_t>(std::ceil(q * static_cast<double>(samples.size()))) - 1;
        return samples[std::min(idx, samples.size() - 1)];
    };
    const std::size_t n = samples.size();
    const double median = n % 2 ? samples[n / 2] : 0.5 * (samples[n / 2 - 1] + samples[n / 2]);
    return Timing{median, at(0.95)};
}

template <typename F>
Timing time_it(std::size_t warmup, std::size_t iterations, F&& f) {
    for (std::size_t i = 0; i < warmup; ++i) f();
    std::vector<double> samples;
    for (std::size_t i = 0; i < iterations; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        f();
        samples.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
    }
    return summarize(std::move(samples));
}

int cmd_bench(const ConfigFlags& flags, const std::vector<std::size_t>& lengths, std::size_t iterations,
              std::size_t warmup, const std::string& out_file, std::ostream& out) {
    if (iterations == 0) {
        throw ConfigError("--iterations must be positive");
    }
    const RunConfig cfg = flags.resolve_config();
    EncoderConfig sa = cfg.encoder;
    sa.num_layers = 1;
    sa.num_phsa_layers = 0;
    sa.use_abs_pe = true;
    EncoderConfig phsa = sa;
    phsa.num_phsa_layers = 1;

    std::ostringstream ss;
    ss << "# phsa-bench v1 (one encoder layer, d_model=" << sa.d_model << ", heads=" << sa.num_heads
       << ", warmup=" << warmup << ", iterations=" << iterations << ")\n";
    ss << "layer,T,metric,value\n";

    const std::size_t heads = sa.num_heads;
    const std::size_t phsa_attn = attention_param_count(phsa, 0);
    const std::size_t sa_attn_stored = attention_param_count(sa, 0);
    // b_K is dropped from storage (it cancels in the softmax) but a vanilla
    // layer carries it, so it is counted here.
    const std::size_t sa_attn = sa_attn_stored + heads * sa.d_h;
    ParameterSet sa_params;
    ParameterSet phsa_params;
    {
        Rng rng(derive_seed(cfg.encoder.seed, 0));
        init_encoder_params(sa, sa_params, rng);
        Rng rng2(derive_seed(cfg.encoder.seed, 0));
        init_encoder_params(phsa, phsa_params, rng2);
    }
    const std::size_t sa_layer = sa_params.scalar_count() + heads * sa.d_h;
    const std::size_t phsa_layer = phsa_params.scalar_count();
    const std::size_t w_c = heads * (sa.d_model * sa.d_h + sa.d_h + 2);
    const std::size_t removed = heads * 2 * sa.d_h;
    ss << "sa+pe,-,param_count," << sa_layer << '\n';
    ss << "phsa,-,param_count," << phsa_layer << '\n';
    ss << "sa+pe,-,attention_param_count," << sa_attn << '\n';
    ss << "phsa,-,attention_param_count," << phsa_attn << '\n';
    ss << "phsa,-,added_w_c_c_alpha," << w_c << '\n';
    ss << "sa+pe,-,removed_b_q_b_k," << removed << '\n';
    const bool parity = phsa_layer + removed == sa_layer + w_c;
    out << "parameters per layer: SA+PE " << sa_layer << ", phSA " << phsa_layer << " (phSA adds " << w_c
        << " for W_C, c, alpha; drops " << removed << " for b_Q, b_K)"
        << (parity ? "" : " MISMATCH") << '\n';

    Rng rng(derive_seed(cfg.encoder.seed, 99));
    for (std::size_t t : lengths) {
        const Matrix x = rng.normal_matrix(t, sa.d_model);
        for (int which = 0; which < 2; ++which) {
            const EncoderConfig& enc = which == 0 ? sa : phsa;
            const ParameterSet& params = which == 0 ? sa_params : phsa_params;
            const char* name = which == 0 ? "sa+pe" : "phsa";
            const Timing fwd = time_it(warmup, iterations, [&] {
                Tape tape;
                BoundParameters bound(tape, params, false);
                encoder_forward(enc, bound, tape.constant(x));
            });
            const Timing fb = time_it(warmup, iterations, [&] {
                Tape tape;
                BoundParameters bound(tape, params, true);
                tape.backward(sum(encoder_forward(enc, bound, tape.constant(x))));
            });
            ss << name << ',' << t << ",forward_median_ms," << text::format(fwd.median_ms) << '\n';
            ss << name << ',' << t << ",forward_p95_ms," << text::format(fwd.p95_ms) << '\n';
            ss << name << ',' << t << ",forward_backward_median_ms," << text::format(fb.median_ms) << '\n';
            ss << name << ',' << t << ",forward_backward_p95_ms," << text::format(fb.p95_ms) << '\n';
            out << name << " T=" << t << " forward " << text::format(fwd.median_ms) << " ms (p95 "
                << text::format(fwd.p95_ms) << "), forward+backward " << text::format(fb.median_ms)
                << " ms (p95 " << text::format(fb.p95_ms) << ")\n";
        }
    }
    if (!out_file.empty()) {
        text::write_file_atomic(resolve(out_file).string(), ss.str());
    } else {
        out << ss.str();
    }
    return parity ? kOk : kRuntime;
}

}  // namespace

fs::path resolve(const std::string& path) {
    const fs::path p(path);
    if (p.is_absolute()) {
        return p;
    }
    const char* root = std::getenv(kOutputRootEnv);
    return root != nullptr && *root != '\0' ? fs::path(root) / p : p;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"phonetic self-attention toolkit", "phsa"};
    app.require_subcommand(1);

    ConfigFlags gen_flags;
    std::string gen_out = "data";
    bool force = false;
    auto* gen = app.add_subcommand("gen", "generate the synthetic phoneme dataset");
    gen_flags.add_data(gen);
    gen->add_option("--out", gen_out, "output directory");
    gen->add_flag("--force", force, "overwrite existing files");

    ConfigFlags train_flags;
    std::string train_data;
    std::string train_out;
    auto* train_cmd = app.add_subcommand("train", "train a frame classifier");
    train_flags.add_model(train_cmd);
    train_flags.add_train(train_cmd);
    train_cmd->add_option("--data", train_data, "dataset directory (from gen)")->required();
    train_cmd->add_option("--out", train_out, "run directory (default: output_dir of the config)");

    std::string eval_ckpt;
    std::string eval_data;
    std::string eval_split = "dev";
    std::string eval_confusion;
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
    eval->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
    eval->add_option("--data", eval_data, "dataset directory")->required();
    eval->add_option("--split", eval_split, "train or dev");
    eval->add_option("--confusion", eval_confusion, "write the confusion matrix here");

    AnalyzeOptions an;
    auto* analyze = app.add_subcommand("analyze", "PAR, entropy, slope and ablation reports");
    analyze->add_option("--checkpoint", an.checkpoint, "checkpoint file")->required();
    analyze->add_option("--data", an.data_dir, "dataset directory");
    analyze->add_option("--split", an.split, "train or dev");
    analyze->add_option("--which", an.which, "par | entropy | slopes | ablation | maps | all");
    analyze->add_option("--out", an.out_dir, "report directory (default: <checkpoint dir>/analysis)");
    analyze->add_flag("--exclude-silence", an.exclude_silence, "drop silence frames from PAR");
    analyze->add_option("--utterances", an.max_utterances, "use only the first N utterances");
    analyze->add_option("--utterance", an.map_utterance, "utterance index for map export");

    std::uint64_t verify_seed = 1;
    bool corrupt = false;
    auto* verify = app.add_subcommand("verify", "run the numerical property suite");
    verify->add_option("--seed", verify_seed, "seed for the random instances");
    verify->add_flag("--corrupt-prelu-backward", corrupt)->group("");

    ConfigFlags bench_flags;
    std::vector<std::size_t> lengths{64, 256, 1024};
    std::size_t iterations = 5;
    std::size_t warmup = 1;
    std::string bench_out;
    auto* bench = app.add_subcommand("bench", "time SA+PE against phSA layers");
    bench_flags.add_model(bench);
    bench->add_option("--lengths", lengths, "sequence lengths")->delimiter(',');
    bench->add_option("--iterations", iterations, "timed iterations");
    bench->add_option("--warmup", warmup, "untimed iterations");
    bench->add_option("--out", bench_out, "write the table here instead of stdout");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            out << app.help();
            return kOk;
        }
        err << "phsa: " << e.what() << '\n';
        return kUsage;
    }

    try {
        if (*gen) return cmd_gen(gen_flags, gen_out, force, out);
        if (*train_cmd) return cmd_train(train_flags, train_data, train_out, out);
        if (*eval) return cmd_eval(eval_ckpt, eval_data, eval_split, eval_confusion, out);
        if (*analyze) {
            if (an.data_dir.empty() && an.which != "slopes") {
                throw ConfigError("--data is required unless --which slopes");
            }
            return cmd_analyze(an, out);
        }
        if (*verify) return cmd_verify(verify_seed, corrupt, out);
        if (*bench) return cmd_bench(bench_flags, lengths, iterations, warmup, bench_out, out);
    } catch (const std::invalid_argument& e) {
        // ConfigError, ShapeError and bad values all land here.
        err << "phsa: " << e.what() << '\n';
        return kUsage;
    } catch (const DivergenceError& e) {
        err << "phsa: divergence: " << e.what() << '\n';
        return kRuntime;
    } catch (const std::exception& e) {
        err << "phsa: " << e.what() << '\n';
        return kRuntime;
    }
    return kUsage;
}

}  // namespace phsa::cli
