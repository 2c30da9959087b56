// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "phsa/checkpoint.hpp"
#include "phsa/cli.hpp"
#include "phsa/encoder.hpp"
#include "phsa/random.hpp"
#include "phsa/text_io.hpp"
#include "phsa/trainer.hpp"
#include "phsa/verification.hpp"

using namespace phsa;
namespace fs = std::filesystem;

namespace {

constexpr std::size_t kEpochs = 8;
constexpr std::uint64_t kSeeds[] = {1, 2, 3};

struct Outcome {
    bool passed = false;
    std::string summary;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int precision = 3) {
    std::ostringstream ss;
    ss << std::setprecision(precision) << v;
    return ss.str();
}

Outcome from_check(const CheckResult& c, double elapsed, double time_limit) {
    const bool fast = elapsed < time_limit;
    return Outcome{c.passed && fast, c.name + " worst " + text::format(c.value) + " <= " + text::format(c.tolerance) +
                                         ", " + fmt(elapsed) + " s (limit " + fmt(time_limit) + " s)"};
}

template <typename F>
Outcome timed_check(double limit, F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    const CheckResult c = f();
    return from_check(c, seconds_since(t0), limit);
}

struct CliRun {
    int code;
    std::string out;
};

CliRun cli_run(const std::vector<std::string>& args) {
    std::ostringstream out;
    std::ostringstream err;
    const int code = cli::run(args, out, err);
    return CliRun{code, out.str() + err.str()};
}

std::vector<std::string> read_lines(const fs::path& p) {
    std::istringstream in(text::read_file(p.string()));
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
}

// ---- criterion 3 ----------------------------------------------------------

Outcome criterion_gradients() {
    const auto t0 = std::chrono::steady_clock::now();
    const CheckResult c = check_model_gradients(2024);
    const double elapsed = seconds_since(t0);
    bool covered = true;
    std::string missing;
    for (const char* cls :
         {"w_q", "w_k", "w_v", "b_q", "b_v", "w_c", "c", "alpha_s", "alpha_c", "ffn", "norms", "readout"}) {
        if (c.detail.find(std::string(cls) + "=") == std::string::npos) {
            covered = false;
            missing += std::string(" ") + cls;
        }
    }
    Outcome o = from_check(c, elapsed, 60.0);
    o.passed = o.passed && covered;
    o.summary += covered ? ", all parameter classes covered" : ", missing:" + missing;
    return o;
}

// ---- criterion 4 ----------------------------------------------------------

Outcome criterion_row_constancy() {
    const CheckResult rows = check_row_constancy(100, 404);
    const CheckResult perm = check_permutation_equivariance(100, 405);
    return Outcome{rows.passed && perm.passed, "row constancy worst " + text::format(rows.value) +
                                                   " <= 1e-14; permutation equivariance worst " +
                                                   text::format(perm.value) + " <= 1e-12"};
}

// ---- criterion 7 ----------------------------------------------------------

struct TrainingSummary {
    std::map<std::string, std::vector<double>> dev_accuracy;
    bool all_halved = true;
    std::string not_halved;
    ParameterSet m5_params;
    ModelConfig m5_model;
    double seconds = 0.0;
};

TrainingSummary run_training(const RunConfig& base, const std::vector<Utterance>& train_set,
                             const std::vector<Utterance>& dev_set) {
    TrainingSummary s;
    const auto t0 = std::chrono::steady_clock::now();
    for (Variant v : all_variants) {
        for (std::uint64_t seed : kSeeds) {
            RunConfig cfg = base;
            cfg.encoder.seed = seed;
            cfg.train.seed = seed;
            cfg.train.epochs = kEpochs;
            if (v == Variant::M5) {
                cfg.encoder.num_phsa_layers = cfg.encoder.num_layers;
            } else {
                cfg.encoder.num_phsa_layers = 0;
                cfg.encoder.variant_for_upper = v;
            }
            const ModelConfig model = cfg.model();
            const TrainResult r = train(cfg.train, model, train_set);
            const double first = r.history.front().loss;
            const double last = r.history.back().loss;
            if (!(last < 0.5 * first)) {
                s.all_halved = false;
                s.not_halved += " " + std::string(to_string(v)) + "/seed" + std::to_string(seed);
            }
            const double acc = evaluate(model, r.params, dev_set).accuracy;
            s.dev_accuracy[std::string(to_string(v))].push_back(acc);
            std::cout << "    " << to_string(v) << " seed " << seed << ": loss " << fmt(first, 4) << " -> "
                      << fmt(last, 4) << ", dev accuracy " << fmt(100 * acc, 5) << "%" << std::endl;
            if (v == Variant::M5 && seed == kSeeds[0]) {
                s.m5_params = r.params;
                s.m5_model = model;
            }
        }
    }
    s.seconds = seconds_since(t0);
    return s;
}

double mean(const std::vector<double>& v) {
    double t = 0.0;
    for (double x : v) t += x;
    return t / static_cast<double>(v.size());
}

Outcome criterion_training(const TrainingSummary& s) {
    const double m5 = mean(s.dev_accuracy.at("M5"));
    const double m2 = mean(s.dev_accuracy.at("M2"));
    const double gap_points = 100.0 * (m5 - m2);
    const bool non_inferior = gap_points >= -0.5;
    const bool fast = s.seconds < 600.0;
    std::string per_variant;
    for (const auto& [name, accs] : s.dev_accuracy) {
        per_variant += " " + name + "=" + fmt(100 * mean(accs), 4) + "%";
    }
    return Outcome{s.all_halved && non_inferior && fast,
                   std::string(s.all_halved ? "every run halved its loss" : "loss not halved:" + s.not_halved) +
                       "; mean dev accuracy" + per_variant + "; M5 - M2 = " + fmt(gap_points, 3) +
                       " points (bound -0.5); " + fmt(s.seconds, 4) + " s for 15 runs (limit 600 s)"};
}

// ---- criterion 8 ----------------------------------------------------------

Outcome criterion_ablation(const fs::path& root, const RunConfig& base, const TrainingSummary& s,
                           const std::vector<Utterance>& dev_set) {
    fs::create_directories(root / "c8/data");
    save_dataset((root / "c8/data/dev.txt").string(), dev_set, base.inventory.num_classes);
    RunConfig cfg = base;
    cfg.encoder = s.m5_model.encoder;
    save_checkpoint((root / "c8/checkpoint.txt").string(), Checkpoint{cfg, s.m5_params, 0, kEpochs});
    const CliRun r = cli_run({"analyze", "--checkpoint", "c8/checkpoint.txt", "--data", "c8/data", "--which",
                              "ablation", "--out", "c8/report"});
    if (r.code != 0) {
        return Outcome{false, "analyze --which ablation exited " + std::to_string(r.code) + ": " + r.out};
    }
    std::vector<std::vector<std::string>> rows;
    std::string note;
    bool header = false;
    for (const auto& line : read_lines(root / "c8/report/ablation.csv")) {
        if (line.rfind("# entropy", 0) == 0) note = line.substr(2);
        if (line.empty() || line[0] == '#') continue;
        if (!header) {
            header = true;
            continue;
        }
        std::vector<std::string> fields;
        for (auto f : text::split(line, ',')) fields.emplace_back(f);
        rows.push_back(fields);
    }
    const bool shape = rows.size() == 3 && rows[0][0] == "full" && rows[1][0] == "similarity-only" &&
                       rows[2][0] == "content-only";
    if (!shape) {
        return Outcome{false, "ablation report does not have the three rows full / similarity-only / content-only"};
    }
    const double content_var = text::parse_double(rows[2][6]);
    return Outcome{content_var == 0.0 && !note.empty(),
                   "entropy full " + fmt(text::parse_double(rows[0][3]), 4) + ", similarity-only " +
                       fmt(text::parse_double(rows[1][3]), 4) + ", content-only " +
                       fmt(text::parse_double(rows[2][3]), 4) + " nats; content-only max per-map row-entropy variance " +
                       text::format(content_var) + "; note: " + note};
}

// ---- criterion 9 ----------------------------------------------------------

Outcome criterion_parity(const RunConfig& base) {
    EncoderConfig sa = base.encoder;
    sa.num_layers = 1;
    sa.num_phsa_layers = 0;
    EncoderConfig ph = sa;
    ph.num_phsa_layers = 1;
    ParameterSet sa_params;
    ParameterSet ph_params;
    Rng r1(1);
    Rng r2(1);
    init_encoder_params(sa, sa_params, r1);
    init_encoder_params(ph, ph_params, r2);
    const std::size_t h = sa.num_heads;
    const std::size_t sa_count = sa_params.scalar_count() + h * sa.d_h;  // + b_K of a vanilla layer
    const std::size_t ph_count = ph_params.scalar_count();
    const std::size_t added = h * (sa.d_model * sa.d_h + sa.d_h + 2);
    const std::size_t removed = h * 2 * sa.d_h;
    const bool parity = ph_count + removed == sa_count + added;

    const CliRun r = cli_run({"bench", "--iterations", "2", "--warmup", "1", "--out", "c9/bench.csv"});
    bool timings = r.code == 0;
    if (timings) {
        const std::string table = text::read_file(cli::resolve("c9/bench.csv").string());
        for (const char* t : {"64", "256", "1024"}) {
            for (const char* layer : {"sa+pe", "phsa"}) {
                for (const char* m : {"forward_median_ms", "forward_p95_ms", "forward_backward_median_ms",
                                      "forward_backward_p95_ms"}) {
                    const std::string key = std::string(layer) + "," + t + "," + m + ",";
                    timings = timings && table.find(key) != std::string::npos;
                }
            }
        }
    }
    return Outcome{parity && timings, "SA layer " + std::to_string(sa_count) + " (with b_K), phSA layer " +
                                          std::to_string(ph_count) + ": +" + std::to_string(added) +
                                          " (W_C, c, alpha) -" + std::to_string(removed) + " (b_Q, b_K)" +
                                          (parity ? "" : " MISMATCH") + "; bench " +
                                          (timings ? "emitted timings at T = 64, 256, 1024" : "failed: " + r.out)};
}

// ---- criterion 10 ---------------------------------------------------------

std::map<std::string, std::string> snapshot(const fs::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (entry.is_regular_file()) {
            files[fs::relative(entry.path(), dir).string()] = text::read_file(entry.path().string());
        }
    }
    return files;
}

Outcome criterion_determinism() {
    const std::vector<std::vector<std::string>> pipeline{
        {"gen", "--out", "c10/data", "--num-utts", "16", "--dev-utts", "6", "--force"},
        {"train", "--data", "c10/data", "--out", "c10/run", "--layers", "2", "--phsa-layers", "1", "--variant",
         "M5", "--epochs", "2"},
        {"analyze", "--checkpoint", "c10/run/checkpoint.txt", "--data", "c10/data", "--which", "all", "--out",
         "c10/report"}};
    std::vector<std::string> failures;
    std::map<std::string, std::string> first;
    for (int pass = 0; pass < 2; ++pass) {
        for (const auto& args : pipeline) {
            const CliRun r = cli_run(args);
            if (r.code != 0) failures.push_back(args[0] + " exited " + std::to_string(r.code));
        }
        if (pass == 0) first = snapshot(cli::resolve("c10"));
    }
    const auto second = snapshot(cli::resolve("c10"));
    for (const auto& [name, contents] : first) {
        const auto it = second.find(name);
        if (it == second.end() || it->second != contents) failures.push_back("differs: " + name);
    }
    std::string detail = std::to_string(first.size()) + " files from gen/train/analyze identical across reruns";
    for (const auto& f : failures) detail += "; " + f;
    return Outcome{failures.empty() && first.size() > 20 && first.size() == second.size(), detail};
}

}  // namespace

int main() {
    const fs::path root = fs::temp_directory_path() / "phsa_acceptance";
    fs::remove_all(root);
    fs::create_directories(root);
    setenv(cli::kOutputRootEnv, root.c_str(), 1);

    std::vector<std::pair<std::string, std::function<Outcome()>>> criteria;
    const RunConfig base;
    const auto train_set = generate_dataset(base.inventory, base.data, base.train_utterances, 0);
    const auto dev_set = generate_dataset(base.inventory, base.data, base.dev_utterances, 1);
    TrainingSummary training;

    criteria.emplace_back("bias-removal invariance",
                          [] { return timed_check(1.0, [] { return check_bias_invariance(100, 101); }); });
    criteria.emplace_back("reduction chain",
                          [] { return timed_check(1.0, [] { return check_reduction_chain(100, 202); }); });
    criteria.emplace_back("gradient checks", criterion_gradients);
    criteria.emplace_back("content-term row constancy", criterion_row_constancy);
    criteria.emplace_back("PAR oracle equivalence", [] {
        const CheckResult c = check_par_oracle(50, 505);
        return Outcome{c.passed, "max |PAR - oracle| " + text::format(c.value) + " <= 1e-12; " + c.detail +
                                     " <= 1e-9"};
    });
    criteria.emplace_back("entropy correctness", [] {
        const CheckResult c = check_entropy_cases();
        return Outcome{c.passed, "one-hot, uniform T=4, [0.5,0.25,0.25] worst error " + text::format(c.value)};
    });
    criteria.emplace_back("training smoke and M5 vs M2", [&] {
        training = run_training(base, train_set, dev_set);
        return criterion_training(training);
    });
    criteria.emplace_back("term ablation report", [&] { return criterion_ablation(root, base, training, dev_set); });
    criteria.emplace_back("parameter parity and bench", [&] { return criterion_parity(base); });
    criteria.emplace_back("determinism", criterion_determinism);

    int failed = 0;
    std::vector<std::string> lines;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        std::cout << "criterion " << i + 1 << " (" << criteria[i].first << ") ..." << std::endl;
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = Outcome{false, std::string("exception: ") + e.what()};
        }
        failed += o.passed ? 0 : 1;
        lines.push_back(std::string(o.passed ? "PASS" : "FAIL") + "  " + std::to_string(i + 1) + ". " +
                        criteria[i].first + ": " + o.summary);
        std::cout << lines.back() << std::endl;
    }
    std::cout << "\nsummary\n";
    for (const auto& l : lines) std::cout << l << '\n';
    std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
    unsetenv(cli::kOutputRootEnv);
    fs::remove_all(root);
    return failed == 0 ? 0 : 1;
}
