#include <doctest.h>

#include <cmath>
#include <sstream>

#include "phsa/analysis.hpp"
#include "phsa/classifier.hpp"
#include "phsa/errors.hpp"
#include "phsa/ops.hpp"
#include "phsa/random.hpp"
#include "phsa/verification.hpp"

using namespace phsa;

namespace {

constexpr double kLn4 = 1.38629436111989062;
constexpr double kOnePointFiveLn2 = 1.03972077083991796;

std::size_t count_lines(const std::string& s) {
    std::size_t n = 0;
    for (char c : s) n += c == '\n' ? 1 : 0;
    return n;
}

}  // namespace

TEST_CASE("PAR of one frame per class is the map itself") {
    const Matrix map{{0.7, 0.3}, {0.4, 0.6}};
    const std::vector<int> labels{0, 1};
    const std::vector<LabeledMap> maps{{&map, labels}};
    const ParMatrix par = compute_par(maps, 2);
    CHECK(par.values == map);
    CHECK(par.support == std::vector<std::size_t>{1, 1});
    CHECK(par.class_names == std::vector<std::string>{"0", "1"});
}

TEST_CASE("PAR of a uniform map is the key-class frequency") {
    const Matrix map(5, 5, 0.2);
    const std::vector<int> labels{2, 0, 2, 2, 1};
    const std::vector<LabeledMap> maps{{&map, labels}};
    const ParMatrix par = compute_par(maps, 4);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(par.values(i, 0) == doctest::Approx(0.2));
        CHECK(par.values(i, 1) == doctest::Approx(0.2));
        CHECK(par.values(i, 2) == doctest::Approx(0.6));
        CHECK(par.values(i, 3) == 0.0);
    }
    // Class 3 never occurs: zero row, zero support.
    CHECK(par.support[3] == 0);
    for (std::size_t j = 0; j < 4; ++j) {
        CHECK(par.values(3, j) == 0.0);
    }
}

TEST_CASE("PAR averages per query frame across utterances") {
    const Matrix a{{0.5, 0.25, 0.25}, {0.2, 0.4, 0.4}, {0.1, 0.6, 0.3}};
    const Matrix b{{0.3, 0.3, 0.4}, {1.0, 0.0, 0.0}, {0.25, 0.25, 0.5}};
    const std::vector<int> la{0, 1, 1};
    const std::vector<int> lb{1, 0, 2};
    const std::vector<LabeledMap> maps{{&a, la}, {&b, lb}};
    const ParMatrix par = compute_par(maps, 3);
    // Exact rational aggregation.
    const Matrix expected{{1.0 / 4, 3.0 / 4, 0.0}, {1.0 / 5, 2.0 / 3, 2.0 / 15}, {1.0 / 4, 1.0 / 4, 1.0 / 2}};
    CHECK(max_abs_diff(par.values, expected) <= 1e-15);
    CHECK(par.support == std::vector<std::size_t>{2, 3, 1});
    CHECK(max_abs_diff(par.values, par_oracle(maps, 3)) <= 1e-15);
}

TEST_CASE("PAR input errors") {
    const Matrix map{{0.7, 0.3}, {0.4, 0.6}};
    const std::vector<int> short_labels{0};
    const std::vector<LabeledMap> mismatch{{&map, short_labels}};
    CHECK_THROWS_AS(compute_par(mismatch, 2), DataError);
    const std::vector<int> labels{0, 5};
    const std::vector<LabeledMap> out_of_range{{&map, labels}};
    CHECK_THROWS_AS(compute_par(out_of_range, 2), DataError);
    const Matrix not_stochastic{{0.7, 0.2}, {0.4, 0.6}};
    const std::vector<int> ok{0, 1};
    const std::vector<LabeledMap> bad{{&not_stochastic, ok}};
    CHECK_THROWS_AS(compute_par(bad, 2), DataError);
}

TEST_CASE("PAR relabeling permutes rows and columns") {
    Rng rng(3);
    const Matrix map = ops::softmax_rows(rng.normal_matrix(7, 7));
    const std::vector<int> labels{0, 1, 2, 2, 1, 0, 3};
    const std::vector<int> perm{2, 0, 3, 1};
    std::vector<int> relabeled;
    for (int l : labels) relabeled.push_back(perm[static_cast<std::size_t>(l)]);
    const std::vector<LabeledMap> a{{&map, labels}};
    const std::vector<LabeledMap> b{{&map, relabeled}};
    const ParMatrix pa = compute_par(a, 4);
    const ParMatrix pb = compute_par(b, 4);
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = 0; j < 4; ++j) {
            CHECK(pb.values(static_cast<std::size_t>(perm[i]), static_cast<std::size_t>(perm[j])) ==
                  pa.values(i, j));
        }
    }
}

TEST_CASE("PAR without silence") {
    const Matrix map{{0.5, 0.5, 0.0}, {0.5, 0.25, 0.25}, {1.0, 0.0, 0.0}};
    const std::vector<int> labels{0, 1, 2};
    const std::vector<LabeledMap> maps{{&map, labels}};
    const ParMatrix par = compute_par(maps, 3, {"sil", "a", "b"}, ParOptions{.exclude_silence = true});
    CHECK(par.support == std::vector<std::size_t>{0, 1, 0});
    CHECK(par.values(1, 0) == 0.0);
    CHECK(par.values(1, 1) == 0.5);
    CHECK(par.values(1, 2) == 0.5);
}

TEST_CASE("PAR matches the brute-force oracle") {
    const CheckResult r = check_par_oracle(50, 11);
    CHECK(r.passed);
    CHECK(r.value <= 1e-12);
}

TEST_CASE("PAR symmetry score") {
    const std::vector<std::size_t> all{1, 1};
    CHECK(par_symmetry_score(Matrix{{0.6, 0.4}, {0.4, 0.6}}, all) == 1.0);
    // Single off-diagonal entry a: ‖P − Pᵀ‖₁ = 2a and ‖P‖₁ + ‖Pᵀ‖₁ = 2a.
    CHECK(par_symmetry_score(Matrix{{0.0, 0.3}, {0.0, 0.0}}, all) == 0.0);
    // 1 − (0.5 + 0.5) / (2 + 2)
    CHECK(par_symmetry_score(Matrix{{0.5, 0.5}, {0.0, 1.0}}, all) == 0.75);
    // Column-constant: 1 − 0.8 / 4
    CHECK(par_symmetry_score(Matrix{{0.7, 0.3}, {0.7, 0.3}}, all) == doctest::Approx(0.8));
    // Unsupported rows and columns are ignored.
    const std::vector<std::size_t> first{1, 0};
    CHECK(par_symmetry_score(Matrix{{1.0, 0.0}, {0.9, 0.1}}, first) == 1.0);
    CHECK(par_symmetry_score(Matrix(2, 2), all) == 1.0);
}

TEST_CASE("row entropy reference values") {
    CHECK(row_entropy(std::vector<double>{0.0, 0.0, 1.0}) == 0.0);
    CHECK(std::abs(row_entropy(std::vector<double>(4, 0.25)) - kLn4) <= 1e-12);
    CHECK(std::abs(row_entropy(std::vector<double>{0.5, 0.25, 0.25}) - kOnePointFiveLn2) <= 1e-12);
    Rng rng(5);
    for (int i = 0; i < 50; ++i) {
        const Matrix p = ops::softmax_rows(rng.normal_matrix(1, 6));
        CHECK(row_entropy(p.row_span(0)) < std::log(6.0));
        CHECK(row_entropy(p.row_span(0)) > 0.0);
    }
    CHECK(row_entropy(std::vector<double>(6, 1.0 / 6)) == doctest::Approx(std::log(6.0)).epsilon(1e-15));
}

TEST_CASE("entropy report aggregation") {
    const std::vector<LayerHeadMap> maps{
        {0, 0, Matrix{{1.0, 0.0}, {0.5, 0.5}}},
        {0, 1, Matrix{{0.5, 0.5}, {0.5, 0.5}}},
        {0, 0, Matrix{{0.0, 1.0}, {0.0, 1.0}}},
    };
    const EntropyReport r = attention_entropy(maps, "full");
    const double ln2 = std::log(2.0);
    REQUIRE(r.heads.size() == 2);
    CHECK(r.heads[0].rows == 4);
    CHECK(r.heads[0].mean == doctest::Approx(ln2 / 4));
    CHECK(r.heads[0].std == doctest::Approx(std::sqrt(ln2 * ln2 / 4 - ln2 * ln2 / 16)));
    CHECK(r.heads[1].mean == doctest::Approx(ln2));
    CHECK(r.heads[1].std == doctest::Approx(0.0));
    CHECK(r.row_mean == doctest::Approx(ln2 / 2));
    CHECK(r.head_mean == doctest::Approx(5 * ln2 / 8));
    CHECK(r.head_std == doctest::Approx(3 * ln2 / 8));
    CHECK(r.max_length == 2);
    CHECK(r.head_mean <= std::log(2.0));

    const std::vector<LayerHeadMap> bad{{0, 0, Matrix{{0.4, 0.4}}}};
    CHECK_THROWS_AS(attention_entropy(bad), DataError);
}

TEST_CASE("row-constant maps have zero entropy variance") {
    CHECK(row_entropy_variance(Matrix{{0.2, 0.8}, {0.2, 0.8}, {0.2, 0.8}}) == 0.0);
    CHECK(row_entropy_variance(Matrix{{1.0, 0.0}, {0.5, 0.5}}) > 0.0);
}

TEST_CASE("slope report") {
    ModelConfig model;
    model.encoder.num_layers = 3;
    model.encoder.num_phsa_layers = 2;
    const ParameterSet params = init_model(model);
    const SlopeReport r = slope_report(params, model.encoder);
    CHECK(r.heads.size() == 2 * model.encoder.num_heads);
    for (const auto& h : r.heads) {
        CHECK(h.alpha_s == 1.0);
        CHECK(h.alpha_c == 1.0);
    }
    model.encoder.num_phsa_layers = 0;
    CHECK_THROWS_AS(slope_report(init_model(model), model.encoder), ConfigError);
}

TEST_CASE("report writers") {
    const Matrix map{{0.7, 0.3}, {0.4, 0.6}};
    const std::vector<int> labels{0, 1};
    const std::vector<LabeledMap> maps{{&map, labels}};
    std::ostringstream par;
    write_par(par, compute_par(maps, 2, {"sil", "p1"}));
    CHECK(par.str() ==
          "# phsa-par v1\nclass_i,class_j,value,support_i\n"
          "sil,sil,0.7,1\nsil,p1,0.3,1\np1,sil,0.4,1\np1,p1,0.6,1\n");

    std::ostringstream slopes;
    write_slopes(slopes, SlopeReport{{{0, 1, 2.5, 0.25}}});
    CHECK(slopes.str() == "# phsa-slopes v1\nlayer,head,metric,mean,std\n0,1,alpha_s,2.5,0\n0,1,alpha_c,0.25,0\n");

    const std::vector<LayerHeadMap> lhm{{1, 0, Matrix{{0.5, 0.5}, {1.0, 0.0}}}};
    std::vector<EntropyReport> reports{attention_entropy(lhm, "full")};
    std::ostringstream ent;
    write_entropy(ent, reports);
    CHECK(count_lines(ent.str()) == 2 + 1 + 2);
    CHECK(ent.str().find("1,0,entropy[full],") != std::string::npos);

    std::ostringstream exported;
    write_attention_map(exported, lhm[0]);
    CHECK(exported.str() == "# phsa-attention-map v1\nlayer,head,T\n1,0,2\n0.5,0.5\n1,0\n");
}
