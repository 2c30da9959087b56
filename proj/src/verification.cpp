#include "phsa/verification.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "phsa/attention.hpp"
#include "phsa/ops.hpp"
#include "phsa/random.hpp"
#include "phsa/text_io.hpp"

namespace phsa {

namespace {

HeadParams random_head(Variant v, std::size_t d_in, std::size_t d_h, Rng& rng) {
    HeadParams p = HeadParams::init(v, d_in, d_h, rng);
    p.b_q = rng.normal_matrix(1, d_h);
    p.b_k = rng.normal_matrix(1, d_h);
    p.b_v = rng.normal_matrix(1, d_h);
    p.c = rng.normal_matrix(1, p.c.cols());
    p.alpha_s = rng.uniform(0.2, 3.0);
    p.alpha_c = rng.uniform(0.2, 3.0);
    return p;
}

std::vector<std::size_t> random_permutation(std::size_t n, Rng& rng) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) {
        std::swap(perm[i - 1], perm[rng.below(i)]);
    }
    return perm;
}

CheckResult finish(std::string name, double value, double tolerance, std::string detail = {}) {
    return CheckResult{std::move(name), value <= tolerance, value, tolerance, std::move(detail)};
}

Matrix similarity(const Matrix& x, const HeadParams& p) {
    return ops::matmul_nt(ops::matmul(x, p.w_q), ops::matmul(x, p.w_k));
}

std::string parameter_class(const std::string& name) {
    const std::string field = name.substr(name.rfind('.') + 1);
    if (name.find(".head") != std::string::npos) {
        return field;
    }
    if (name.find("attn.") != std::string::npos) return "w_o/b_o";
    if (name.find("ffn.") != std::string::npos) return "ffn";
    if (name.find("norm") != std::string::npos) return "norms";
    if (name.rfind("readout.", 0) == 0) return "readout";
    return "input";
}

}  // namespace

Matrix par_oracle(std::span<const LabeledMap> maps, std::size_t num_classes) {
    Matrix sums(num_classes, num_classes);
    std::vector<double> counts(num_classes, 0.0);
    for (const auto& lm : maps) {
        const std::size_t t = lm.labels.size();
        for (std::size_t q = 0; q < t; ++q) {
            const auto i = static_cast<std::size_t>(lm.labels[q]);
            counts[i] += 1.0;
            for (std::size_t k = 0; k < t; ++k) {
                sums(i, static_cast<std::size_t>(lm.labels[k])) += (*lm.map)(q, k);
            }
        }
    }
    for (std::size_t i = 0; i < num_classes; ++i) {
        for (std::size_t j = 0; j < num_classes; ++j) {
            sums(i, j) = counts[i] > 0.0 ? sums(i, j) / counts[i] : 0.0;
        }
    }
    return sums;
}

std::vector<Matrix> parameter_values(const ParameterSet& params) {
    std::vector<Matrix> out;
    out.reserve(params.size());
    for (const auto& e : params.entries()) {
        out.push_back(e.value);
    }
    return out;
}

ScalarFunction model_loss(const ModelConfig& model, const ParameterSet& params, const Matrix& features,
                          std::vector<int> labels) {
    return [model, params, features, labels = std::move(labels)](Tape& tape, std::span<const Var> leaves) {
        const BoundParameters bound(tape, params, leaves);
        return cross_entropy(model_logits(model, bound, tape.constant(features)), labels);
    };
}

ParameterSet perturbed_model_params(const ModelConfig& model, std::uint64_t seed) {
    ParameterSet params = init_model(model);
    Rng rng(seed);
    for (auto& e : params.entries()) {
        const std::string cls = parameter_class(e.name);
        if (cls == "alpha_s" || cls == "alpha_c") {
            e.value(0, 0) = rng.uniform(0.3, 2.5);
        } else if (e.value.rows() == 1) {
            for (double& v : e.value.data()) {
                v += 0.3 * rng.normal();
            }
        }
    }
    return params;
}

CheckResult check_bias_invariance(std::size_t draws, std::uint64_t seed) {
    Rng rng(seed);
    double worst = 0.0;
    for (std::size_t n = 0; n < draws; ++n) {
        const std::size_t d_in = rng.between(1, 8);
        const std::size_t d_h = rng.between(1, 8);
        const Matrix x = rng.normal_matrix(rng.between(1, 12), d_in);
        const HeadParams p = random_head(Variant::M2, d_in, d_h, rng);
        worst = std::max(worst, max_abs_diff(ops::softmax_rows(full_dot_product_with_biases(x, p)),
                                             ops::softmax_rows(score(Variant::M2, x, p))));
    }
    return finish("bias-removal invariance", worst, 1e-12, std::to_string(draws) + " draws");
}

CheckResult check_reduction_chain(std::size_t draws, std::uint64_t seed) {
    Rng rng(seed);
    double worst = 0.0;
    for (std::size_t n = 0; n < draws; ++n) {
        const std::size_t d_in = rng.between(1, 8);
        const std::size_t d_h = rng.between(1, 8);
        const Matrix x = rng.normal_matrix(rng.between(1, 12), d_in);
        HeadParams p = random_head(Variant::M5, d_in, d_h, rng);

        // (a) unit slopes
        HeadParams unit = p;
        unit.alpha_s = unit.alpha_c = 1.0;
        worst = std::max(worst, max_abs_diff(score(Variant::M5, x, unit), score(Variant::M4, x, unit)));

        // (b) identity φ: M3 with cᵀ := W_C cᵀ
        const Matrix m4_linear =
            ops::add_row(similarity(x, p), ops::transpose(ops::matmul_nt(ops::matmul(x, p.w_c), p.c)));
        HeadParams p3 = p;
        p3.c = ops::transpose(ops::matmul_nt(p.w_c, p.c));
        worst = std::max(worst, max_abs_diff(m4_linear, score(Variant::M3, x, p3)));

        // (c) M3 with cᵀ := W_K b_Qᵀ
        p3.c = ops::transpose(ops::matmul_nt(p.w_k, p.b_q));
        worst = std::max(worst, max_abs_diff(score(Variant::M3, x, p3), score(Variant::M2, x, p)));

        // (d) zero query bias
        HeadParams p2 = p;
        p2.b_q = Matrix(1, d_h);
        worst = std::max(worst, max_abs_diff(score(Variant::M2, x, p2), score(Variant::M1, x, p)));
    }
    return finish("reduction chain M5>M4>M3>M2>M1", worst, 1e-10, std::to_string(draws) + " draws");
}

CheckResult check_row_constancy(std::size_t draws, std::uint64_t seed) {
    Rng rng(seed);
    double worst = 0.0;
    for (Variant v : {Variant::M3, Variant::M4, Variant::M5}) {
        for (std::size_t n = 0; n < draws; ++n) {
            const std::size_t t = rng.between(2, 10);
            const std::size_t d_in = rng.between(1, 6);
            const Matrix x = rng.normal_matrix(t, d_in);
            const HeadParams p = random_head(v, d_in, rng.between(1, 5), rng);
            Matrix sim = similarity(x, p);
            if (v == Variant::M5) {
                sim = ops::prelu(sim, p.alpha_s);
            }
            const Matrix diff = ops::sub(score(v, x, p), sim);
            for (std::size_t r = 1; r < t; ++r) {
                for (std::size_t c = 0; c < t; ++c) {
                    worst = std::max(worst, std::abs(diff(r, c) - diff(0, c)));
                }
            }
        }
    }
    return finish("content-term row constancy", worst, 1e-14, "M3, M4, M5");
}

CheckResult check_permutation_equivariance(std::size_t draws, std::uint64_t seed) {
    Rng rng(seed);
    double worst = 0.0;
    for (Variant v : all_variants) {
        for (std::size_t n = 0; n < draws; ++n) {
            const std::size_t t = rng.between(2, 10);
            const std::size_t d_in = rng.between(1, 6);
            const Matrix x = rng.normal_matrix(t, d_in);
            const HeadParams p = random_head(v, d_in, rng.between(1, 5), rng);
            const auto perm = random_permutation(t, rng);
            Matrix px(t, d_in);
            for (std::size_t i = 0; i < t; ++i) {
                for (std::size_t j = 0; j < d_in; ++j) {
                    px(i, j) = x(perm[i], j);
                }
            }
            const auto base = attention_head_forward(v, x, p);
            const auto moved = attention_head_forward(v, px, p);
            for (std::size_t i = 0; i < t; ++i) {
                for (std::size_t j = 0; j < t; ++j) {
                    worst = std::max(worst, std::abs(moved.map(i, j) - base.map(perm[i], perm[j])));
                }
                for (std::size_t j = 0; j < base.output.cols(); ++j) {
                    worst = std::max(worst, std::abs(moved.output(i, j) - base.output(perm[i], j)));
                }
            }
        }
    }
    return finish("permutation equivariance", worst, 1e-12, "M1..M5");
}

CheckResult check_head_gradients(std::uint64_t seed) {
    Rng rng(seed);
    double worst = 0.0;
    std::string detail;
    for (Variant v : all_variants) {
        const std::size_t d_model = 6;
        const std::size_t d_h = 3;
        std::vector<Matrix> params;
        for (int h = 0; h < 2; ++h) {
            const HeadParams p = random_head(v, d_model, d_h, rng);
            for (const Matrix* m : {&p.w_q, &p.w_k, &p.w_v, &p.b_q, &p.b_v, &p.w_c, &p.c}) {
                params.push_back(*m);
            }
            params.push_back(Matrix{{p.alpha_s}});
            params.push_back(Matrix{{p.alpha_c}});
        }
        params.push_back(rng.glorot_uniform(d_model, d_model));
        params.push_back(rng.normal_matrix(1, d_model));
        params.push_back(rng.normal_matrix(5, d_model));
        params.push_back(rng.normal_matrix(d_model, 1));
        const ScalarFunction f = [v](Tape&, std::span<const Var> q) {
            std::vector<HeadVars> heads;
            for (std::size_t h = 0; h < 2; ++h) {
                const Var* b = &q[h * 9];
                heads.push_back(HeadVars{b[0], b[1], b[2], b[3], b[4], b[5], b[6], b[7], b[8]});
            }
            return sum(swish(matmul(multi_head_forward(v, q[20], heads, q[18], q[19], true), q[21])));
        };
        const double err = grad_check(f, std::move(params), 1e-6);
        worst = std::max(worst, err);
        detail += std::string(detail.empty() ? "" : " ") + std::string(to_string(v)) + "=" + text::format(err);
    }
    return finish("multi-head gradients", worst, 1e-5, detail);
}

CheckResult check_model_gradients(std::uint64_t seed) {
    ModelConfig model;
    model.encoder.num_layers = 2;
    model.encoder.num_heads = 2;
    model.encoder.d_h = 8;
    model.encoder.d_model = 16;
    model.encoder.ffn_dim = 24;
    model.encoder.num_phsa_layers = 1;
    model.encoder.variant_for_upper = Variant::M2;
    model.encoder.seed = seed;
    model.input_dim = 8;
    model.num_classes = 5;
    const ParameterSet params = perturbed_model_params(model, derive_seed(seed, 1));
    Rng rng(derive_seed(seed, 2));
    const std::size_t t = 12;
    const Matrix features = rng.normal_matrix(t, model.input_dim);
    std::vector<int> labels(t);
    for (int& l : labels) {
        l = static_cast<int>(rng.below(model.num_classes));
    }
    const auto report = grad_check(model_loss(model, params, features, labels), parameter_values(params),
                                   GradCheckOptions{.epsilon = 1e-6});
    std::map<std::string, double> per_class;
    for (std::size_t i = 0; i < params.size(); ++i) {
        double& slot = per_class[parameter_class(params.entries()[i].name)];
        slot = std::max(slot, report.per_tensor[i]);
    }
    std::string detail;
    for (const auto& [cls, err] : per_class) {
        detail += std::string(detail.empty() ? "" : " ") + cls + "=" + text::format(err);
    }
    return finish("model gradients", report.max_relative_error, 1e-4, detail);
}

CheckResult check_par_oracle(std::size_t instances, std::uint64_t seed) {
    Rng rng(seed);
    double worst = 0.0;
    double worst_row = 0.0;
    for (std::size_t n = 0; n < instances; ++n) {
        const std::size_t classes = rng.between(1, 5);
        const std::size_t utts = rng.between(1, 4);
        std::vector<Matrix> maps;
        std::vector<std::vector<int>> labels;
        for (std::size_t u = 0; u < utts; ++u) {
            const std::size_t t = rng.between(1, 8);
            maps.push_back(ops::softmax_rows(rng.normal_matrix(t, t, 2.0)));
            std::vector<int> l(t);
            for (int& v : l) {
                v = static_cast<int>(rng.below(classes));
            }
            labels.push_back(std::move(l));
        }
        std::vector<LabeledMap> lm;
        for (std::size_t u = 0; u < utts; ++u) {
            lm.push_back(LabeledMap{&maps[u], labels[u]});
        }
        const ParMatrix par = compute_par(lm, classes);
        worst = std::max(worst, max_abs_diff(par.values, par_oracle(lm, classes)));
        for (std::size_t i = 0; i < classes; ++i) {
            if (par.support[i] > 0) {
                worst_row = std::max(worst_row, std::abs(std::accumulate(par.values.row_span(i).begin(), par.values.row_span(i).end(), 0.0) - 1.0));
            }
        }
    }
    const bool ok = worst <= 1e-12 && worst_row <= 1e-9;
    return CheckResult{"PAR oracle equivalence", ok, worst, 1e-12,
                       "max |row sum - 1| = " + text::format(worst_row)};
}

CheckResult check_entropy_cases() {
    double worst = 0.0;
    const std::vector<double> one_hot{0.0, 1.0, 0.0, 0.0};
    worst = std::max(worst, std::abs(row_entropy(one_hot)));
    const std::vector<double> uniform(4, 0.25);
    worst = std::max(worst, std::abs(row_entropy(uniform) - std::log(4.0)));
    const std::vector<double> hand{0.5, 0.25, 0.25};
    worst = std::max(worst, std::abs(row_entropy(hand) - 1.5 * std::log(2.0)));
    return finish("entropy reference cases", worst, 1e-12);
}

bool VerifyReport::passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

VerifyReport run_verification(std::uint64_t seed) {
    VerifyReport report;
    report.checks.push_back(check_bias_invariance(100, derive_seed(seed, 1)));
    report.checks.push_back(check_reduction_chain(100, derive_seed(seed, 2)));
    report.checks.push_back(check_row_constancy(50, derive_seed(seed, 3)));
    report.checks.push_back(check_permutation_equivariance(50, derive_seed(seed, 4)));
    report.checks.push_back(check_head_gradients(derive_seed(seed, 5)));
    report.checks.push_back(check_model_gradients(derive_seed(seed, 6)));
    report.checks.push_back(check_par_oracle(50, derive_seed(seed, 7)));
    report.checks.push_back(check_entropy_cases());
    report.max_grad_error = std::max(report.checks[4].value, report.checks[5].value);
    return report;
}

}  // namespace phsa
