#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "phsa/analysis.hpp"
#include "phsa/dataset.hpp"
#include "phsa/errors.hpp"
#include "phsa/random.hpp"
#include "phsa/trainer.hpp"

using namespace phsa;

namespace {

ModelConfig small_model(std::size_t layers, std::size_t phsa_layers, std::size_t input_dim = 16) {
    ModelConfig m;
    m.encoder.num_layers = layers;
    m.encoder.num_heads = 2;
    m.encoder.d_h = 8;
    m.encoder.d_model = 16;
    m.encoder.ffn_dim = 32;
    m.encoder.num_phsa_layers = phsa_layers;
    m.input_dim = input_dim;
    return m;
}

GeneratorConfig short_utterances() {
    GeneratorConfig g;
    g.min_length = 12;
    g.max_length = 20;
    return g;
}

}  // namespace

TEST_CASE("inventory validation") {
    PhonemeInventory inv;
    CHECK_NOTHROW(inv.validate());
    CHECK(inv.group_of(2) == 0);
    CHECK(inv.group_of(5) == 1);
    CHECK(inv.group_of(0) == -1);
    CHECK(inv.group_of(9) == -1);
    CHECK(inv.class_name(0) == "sil");
    inv.confusable_groups = {{1, 2}, {2, 3}};
    CHECK_THROWS_AS(inv.validate(), ConfigError);
    inv.confusable_groups = {{0, 1}};
    CHECK_THROWS_AS(inv.validate(), ConfigError);
    inv.confusable_groups = {{1, 12}};
    CHECK_THROWS_AS(inv.validate(), ConfigError);
}

TEST_CASE("generator ranges") {
    const PhonemeInventory inv;
    GeneratorConfig g;
    g.min_length = 3;
    CHECK_THROWS_AS(generate_dataset(inv, g, 1), ConfigError);
    g = GeneratorConfig{};
    g.min_length = 30;
    g.max_length = 20;
    CHECK_THROWS_AS(generate_dataset(inv, g, 1), ConfigError);
    g = GeneratorConfig{};
    g.input_dim = 7;
    CHECK_THROWS_AS(generate_dataset(inv, g, 1), ConfigError);
}

TEST_CASE("generated utterances respect the configuration") {
    const PhonemeInventory inv;
    const GeneratorConfig g;
    const auto data = generate_dataset(inv, g, 40);
    REQUIRE(data.size() == 40);
    for (std::size_t u = 0; u < data.size(); ++u) {
        const auto& utt = data[u];
        CHECK(utt.id == u);
        CHECK(utt.length() >= g.min_length);
        CHECK(utt.length() <= g.max_length);
        CHECK(utt.features.rows() == utt.length());
        CHECK(utt.features.cols() == g.input_dim);
        CHECK(std::all_of(utt.labels.begin(), utt.labels.end(), [](int l) { return l >= 0 && l < 12; }));
    }
    const Matrix means = class_means(inv, g);
    for (std::size_t j = 0; j < 8; ++j) {
        CHECK(means(1, j) == means(2, j));
        CHECK(means(4, j) == means(5, j));
    }
    CHECK(means(1, 8) != means(2, 8));
}

TEST_CASE("generation is deterministic and streams differ") {
    const PhonemeInventory inv;
    const GeneratorConfig g;
    CHECK(generate_dataset(inv, g, 10) == generate_dataset(inv, g, 10));
    CHECK_FALSE(generate_dataset(inv, g, 10, 0) == generate_dataset(inv, g, 10, 1));
    GeneratorConfig other = g;
    other.seed = 8;
    CHECK_FALSE(generate_dataset(inv, g, 10) == generate_dataset(inv, other, 10));
}

TEST_CASE("dataset text round trip") {
    const auto data = generate_dataset(PhonemeInventory{}, GeneratorConfig{}, 5);
    std::stringstream first;
    save_dataset(first, data, 12);
    std::size_t classes = 0;
    std::stringstream in(first.str());
    const auto loaded = load_dataset(in, &classes);
    CHECK(classes == 12);
    CHECK(loaded == data);
    std::stringstream second;
    save_dataset(second, loaded, 12);
    CHECK(second.str() == first.str());

    std::stringstream bad("# other v1\n");
    CHECK_THROWS_AS(load_dataset(bad), DataError);
    std::stringstream truncated(first.str().substr(0, first.str().size() / 2));
    CHECK_THROWS_AS(load_dataset(truncated), DataError);
}

TEST_CASE("evaluation of fixed predictions") {
    const std::vector<int> labels{0, 1, 1, 2, 2, 2};
    const auto perfect = evaluate_predictions(labels, labels, 3);
    CHECK(perfect.accuracy == 1.0);
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
            CHECK((perfect.confusion[i][j] != 0) == (i == j));
        }
    }
    const auto mixed = evaluate_predictions(labels, std::vector<int>{0, 2, 1, 0, 2, 2}, 3);
    CHECK(mixed.accuracy == doctest::Approx(4.0 / 6.0));
    const std::vector<std::size_t> counts{1, 2, 3};
    for (std::size_t i = 0; i < 3; ++i) {
        std::size_t row = 0;
        for (std::size_t n : mixed.confusion[i]) row += n;
        CHECK(row == counts[i]);
    }
    CHECK_THROWS_AS(evaluate_predictions({}, {}, 3), DataError);
    CHECK_THROWS_AS(evaluate(small_model(1, 0), init_model(small_model(1, 0)), {}), DataError);
}

TEST_CASE("uniform random predictions score about one in twelve") {
    Rng rng(77);
    const std::size_t n = 60000;
    std::vector<int> labels(n);
    std::vector<int> preds(n);
    for (std::size_t i = 0; i < n; ++i) {
        labels[i] = static_cast<int>(rng.below(12));
        preds[i] = static_cast<int>(rng.below(12));
    }
    const double p = 1.0 / 12.0;
    const double sigma = std::sqrt(p * (1 - p) / static_cast<double>(n));
    CHECK(std::abs(evaluate_predictions(labels, preds, 12).accuracy - p) < 4 * sigma);
}

TEST_CASE("zero learning rate leaves parameters unchanged") {
    const ModelConfig model = small_model(2, 1);
    const auto data = generate_dataset(PhonemeInventory{}, short_utterances(), 6);
    TrainConfig cfg;
    cfg.learning_rate = 0.0;
    cfg.weight_decay = 0.0;
    cfg.epochs = 1;
    cfg.batch_size = 4;
    const auto result = train(cfg, model, data);
    CHECK(result.params == init_model(model));
    REQUIRE(result.history.size() == 2);
    CHECK(result.history[1].loss == result.history[0].loss);
    CHECK(result.history[1].accuracy == result.history[0].accuracy);
    CHECK(result.steps == 2);
}

TEST_CASE("training is deterministic and reduces the loss") {
    const ModelConfig model = small_model(2, 1);
    const auto data = generate_dataset(PhonemeInventory{}, short_utterances(), 24);
    TrainConfig cfg;
    cfg.learning_rate = 1e-2;
    cfg.epochs = 4;
    std::vector<std::size_t> seen;
    const auto a = train(cfg, model, data, [&](const EpochStats& s, const ParameterSet&, std::size_t) {
        seen.push_back(s.epoch);
    });
    const auto b = train(cfg, model, data);
    CHECK(a.params == b.params);
    CHECK(seen == std::vector<std::size_t>{0, 1, 2, 3, 4});
    CHECK(a.history.back().loss < 0.5 * a.history.front().loss);
}

TEST_CASE("invalid training configuration") {
    TrainConfig cfg;
    cfg.learning_rate = -1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = TrainConfig{};
    cfg.weight_decay = -1e-3;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = TrainConfig{};
    cfg.batch_size = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("divergence is reported") {
    const ModelConfig model = small_model(1, 0);
    const auto data = generate_dataset(PhonemeInventory{}, short_utterances(), 2);
    ParameterSet params = init_model(model);
    params.at("readout.b")(0, 0) = std::numeric_limits<double>::infinity();
    TrainConfig cfg;
    cfg.epochs = 1;
    CHECK_THROWS_AS(train(cfg, model, data, params), DivergenceError);
}

TEST_CASE("noise-free classes are separable by a readout-only model") {
    GeneratorConfig g = short_utterances();
    g.noise_scale = 0.0;
    g.speaker_scale = 0.0;
    const auto data = generate_dataset(PhonemeInventory{}, g, 30);
    const ModelConfig model = small_model(0, 0);
    TrainConfig cfg;
    cfg.learning_rate = 3e-2;
    cfg.epochs = 25;
    const auto result = train(cfg, model, data);
    CHECK(result.history.back().accuracy == 1.0);
}

TEST_CASE("classes with identical means cannot beat the majority share") {
    PhonemeInventory inv;
    inv.confusable_groups = {{1, 2}};
    GeneratorConfig g = short_utterances();
    g.noise_scale = 0.0;
    g.speaker_scale = 0.0;
    g.shared_fraction = 1.0;
    const auto data = generate_dataset(inv, g, 40);
    const ModelConfig model = small_model(0, 0);
    TrainConfig cfg;
    cfg.learning_rate = 3e-2;
    cfg.epochs = 10;
    const auto result = train(cfg, model, data);
    const Evaluation ev = evaluate(model, result.params, data);
    const auto& c = ev.confusion;
    const double n1 = static_cast<double>(c[1][0] + c[1][1] + c[1][2]);
    const double n2 = static_cast<double>(c[2][0] + c[2][1] + c[2][2]);
    const double correct = static_cast<double>(c[1][1] + c[2][2]);
    CHECK(correct / (n1 + n2) <= std::max(n1, n2) / (n1 + n2));
}

TEST_CASE("confusions concentrate inside confusable groups") {
    GeneratorConfig g = short_utterances();
    g.noise_scale = 1.0;
    const auto data = generate_dataset(PhonemeInventory{}, g, 40);
    const ModelConfig model = small_model(1, 0);
    TrainConfig cfg;
    cfg.learning_rate = 1e-2;
    cfg.epochs = 4;
    const auto result = train(cfg, model, data);
    const auto ev = evaluate(model, result.params, generate_dataset(PhonemeInventory{}, g, 40, 1));
    CHECK(within_group_confusion_ratio(ev.confusion, PhonemeInventory{}) > 1.0);
}

TEST_CASE("confusion ratio arithmetic") {
    PhonemeInventory inv;
    inv.num_classes = 3;
    inv.confusable_groups = {{1, 2}};
    // Row rates: within pairs (1,2)=0.5 and (2,1)=0; across pairs 0.1 and four zeros.
    const std::vector<std::vector<std::size_t>> conf{{9, 1, 0}, {0, 5, 5}, {0, 0, 4}};
    CHECK(within_group_confusion_ratio(conf, inv) == doctest::Approx(0.25 / (0.1 / 4)));
}

TEST_CASE("optimizer defaults") {
    const TrainConfig cfg;
    CHECK(cfg.learning_rate == 1.56e-3);
    CHECK(cfg.weight_decay == 1e-4);
    CHECK(cfg.beta1 == 0.9);
    CHECK(cfg.beta2 == 0.999);
    CHECK(cfg.adam_epsilon == 1e-8);
}

TEST_CASE("weight decay skips vectors and scalars") {
    ParameterSet p;
    p.add("w", Matrix(2, 2, 1.0));
    p.add("b", Matrix(1, 2, 1.0));
    TrainConfig cfg;
    cfg.learning_rate = 0.1;
    cfg.weight_decay = 0.5;
    AdamOptimizer opt(cfg, p);
    opt.step(p, {Matrix(2, 2), Matrix(1, 2)});
    CHECK(p.at("w")(0, 0) == doctest::Approx(1.0 - 0.1 * 0.5));
    CHECK(p.at("b")(0, 0) == 1.0);
}
