#include "phsa/attention.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "phsa/ops.hpp"
#include "phsa/random.hpp"

namespace phsa {

namespace {

std::size_t content_width(Variant v, std::size_t d_in, std::size_t d_h) {
    return v == Variant::M3 ? d_in : d_h;
}

bool trains(Variant v, std::string_view field) {
    const auto fields = trainable_fields(v);
    return std::find(fields.begin(), fields.end(), field) != fields.end();
}

// Broadcasts a 1×T row to a T×T map.
Var broadcast_rows(Var row) {
    const std::size_t t = row.cols();
    return add_row(row.tape->constant(Matrix(t, t)), row);
}

}  // namespace

std::string_view to_string(Variant v) noexcept {
    switch (v) {
        case Variant::M1: return "M1";
        case Variant::M2: return "M2";
        case Variant::M3: return "M3";
        case Variant::M4: return "M4";
        case Variant::M5: return "M5";
    }
    return "?";
}

std::optional<Variant> parse_variant(std::string_view text) noexcept {
    if (text.size() != 2 || std::toupper(static_cast<unsigned char>(text[0])) != 'M') {
        return std::nullopt;
    }
    switch (text[1]) {
        case '1': return Variant::M1;
        case '2': return Variant::M2;
        case '3': return Variant::M3;
        case '4': return Variant::M4;
        case '5': return Variant::M5;
        default: return std::nullopt;
    }
}

bool has_content_term(Variant v) noexcept { return v != Variant::M1; }

std::string_view to_string(ScoreTerms t) noexcept {
    switch (t) {
        case ScoreTerms::full: return "full";
        case ScoreTerms::similarity_only: return "similarity-only";
        case ScoreTerms::content_only: return "content-only";
    }
    return "?";
}

HeadParams HeadParams::init(Variant v, std::size_t d_in, std::size_t d_h, Rng& rng) {
    HeadParams p{
        .w_q = rng.glorot_uniform(d_in, d_h),
        .w_k = rng.glorot_uniform(d_in, d_h),
        .w_v = rng.glorot_uniform(d_in, d_h),
        .b_q = Matrix(1, d_h),
        .b_k = Matrix(1, d_h),
        .b_v = Matrix(1, d_h),
        .w_c = rng.glorot_uniform(d_in, d_h),
        .c = Matrix(1, content_width(v, d_in, d_h)),
    };
    return p;
}

std::vector<std::string> trainable_fields(Variant v) {
    std::vector<std::string> f{"w_q", "w_k", "w_v", "b_v"};
    switch (v) {
        case Variant::M1: break;
        case Variant::M2: f.push_back("b_q"); break;
        case Variant::M3: f.push_back("c"); break;
        case Variant::M4:
            f.push_back("w_c");
            f.push_back("c");
            break;
        case Variant::M5:
            f.push_back("w_c");
            f.push_back("c");
            f.push_back("alpha_s");
            f.push_back("alpha_c");
            break;
    }
    return f;
}

HeadVars bind_head(Tape& tape, Variant v, const HeadParams& p, bool requires_grad) {
    auto leaf = [&](std::string_view field, const Matrix& value) {
        return tape.leaf(value, requires_grad && trains(v, field));
    };
    return HeadVars{
        .w_q = leaf("w_q", p.w_q),
        .w_k = leaf("w_k", p.w_k),
        .w_v = leaf("w_v", p.w_v),
        .b_q = leaf("b_q", p.b_q),
        .b_v = leaf("b_v", p.b_v),
        .w_c = leaf("w_c", p.w_c),
        .c = leaf("c", p.c),
        .alpha_s = leaf("alpha_s", Matrix(1, 1, p.alpha_s)),
        .alpha_c = leaf("alpha_c", Matrix(1, 1, p.alpha_c)),
    };
}

HeadVars bind_head(const BoundParameters& bound, Variant v, std::string_view prefix,
                   std::size_t d_in, std::size_t d_h) {
    Tape& tape = bound.tape();
    auto get = [&](std::string_view field, std::size_t rows, std::size_t cols, double fill) {
        const std::string name = std::string(prefix) + std::string(field);
        if (bound.contains(name)) {
            return bound[name];
        }
        return tape.constant(Matrix(rows, cols, fill));
    };
    return HeadVars{
        .w_q = get("w_q", d_in, d_h, 0.0),
        .w_k = get("w_k", d_in, d_h, 0.0),
        .w_v = get("w_v", d_in, d_h, 0.0),
        .b_q = get("b_q", 1, d_h, 0.0),
        .b_v = get("b_v", 1, d_h, 0.0),
        .w_c = get("w_c", d_in, d_h, 0.0),
        .c = get("c", 1, content_width(v, d_in, d_h), 0.0),
        .alpha_s = get("alpha_s", 1, 1, 1.0),
        .alpha_c = get("alpha_c", 1, 1, 1.0),
    };
}

void store_head(ParameterSet& out, Variant v, std::string_view prefix, const HeadParams& p) {
    const std::string pre(prefix);
    for (const auto& field : trainable_fields(v)) {
        if (field == "w_q") out.add(pre + field, p.w_q);
        else if (field == "w_k") out.add(pre + field, p.w_k);
        else if (field == "w_v") out.add(pre + field, p.w_v);
        else if (field == "b_q") out.add(pre + field, p.b_q);
        else if (field == "b_v") out.add(pre + field, p.b_v);
        else if (field == "w_c") out.add(pre + field, p.w_c);
        else if (field == "c") out.add(pre + field, p.c);
        else if (field == "alpha_s") out.add(pre + field, Matrix(1, 1, p.alpha_s));
        else if (field == "alpha_c") out.add(pre + field, Matrix(1, 1, p.alpha_c));
    }
}

HeadParams load_head(const ParameterSet& in, Variant v, std::string_view prefix, std::size_t d_in,
                     std::size_t d_h) {
    const std::string pre(prefix);
    auto get = [&](std::string_view field, std::size_t rows, std::size_t cols, double fill) {
        const std::string name = pre + std::string(field);
        return in.contains(name) ? in.at(name) : Matrix(rows, cols, fill);
    };
    return HeadParams{
        .w_q = get("w_q", d_in, d_h, 0.0),
        .w_k = get("w_k", d_in, d_h, 0.0),
        .w_v = get("w_v", d_in, d_h, 0.0),
        .b_q = get("b_q", 1, d_h, 0.0),
        .b_k = Matrix(1, d_h),
        .b_v = get("b_v", 1, d_h, 0.0),
        .w_c = get("w_c", d_in, d_h, 0.0),
        .c = get("c", 1, content_width(v, d_in, d_h), 0.0),
        .alpha_s = get("alpha_s", 1, 1, 1.0)(0, 0),
        .alpha_c = get("alpha_c", 1, 1, 1.0)(0, 0),
    };
}

Var similarity_term(Var x, const HeadVars& h) {
    return matmul_nt(matmul(x, h.w_q), matmul(x, h.w_k));
}

namespace {

std::optional<Var> content_row_with_keys(Variant v, Var x, Var keys, const HeadVars& h) {
    switch (v) {
        case Variant::M1: return std::nullopt;
        case Variant::M2: return matmul_nt(h.b_q, keys);
        case Variant::M3: return matmul_nt(h.c, x);
        case Variant::M4: return matmul_nt(h.c, swish(matmul(x, h.w_c)));
        case Variant::M5: return prelu(matmul_nt(h.c, swish(matmul(x, h.w_c))), h.alpha_c);
    }
    return std::nullopt;
}

}  // namespace

std::optional<Var> content_row(Variant v, Var x, const HeadVars& h) {
    if (v == Variant::M2) {
        return content_row_with_keys(v, x, matmul(x, h.w_k), h);
    }
    return content_row_with_keys(v, x, x, h);
}

Var score(Variant v, Var x, const HeadVars& h, ScoreTerms terms) {
    if (x.cols() != h.w_q.rows()) {
        throw ShapeError("score: input " + x.value().shape_string() + " does not match W_Q " +
                         h.w_q.value().shape_string());
    }
    const Var keys = matmul(x, h.w_k);
    std::optional<Var> sim;
    if (terms != ScoreTerms::content_only) {
        sim = matmul_nt(matmul(x, h.w_q), keys);
        if (v == Variant::M5) {
            sim = prelu(*sim, h.alpha_s);
        }
    }
    std::optional<Var> content;
    if (terms != ScoreTerms::similarity_only) {
        content = content_row_with_keys(v, x, keys, h);
    }
    if (sim && content) {
        return add_row(*sim, *content);
    }
    if (sim) {
        return *sim;
    }
    if (content) {
        return broadcast_rows(*content);
    }
    const std::size_t t = x.rows();
    return x.tape->constant(Matrix(t, t));
}

HeadResult head_forward(Variant v, Var x, const HeadVars& h, bool scale, ScoreTerms terms) {
    Var s = score(v, x, h, terms);
    if (scale) {
        s = phsa::scale(s, 1.0 / std::sqrt(static_cast<double>(h.w_q.cols())));
    }
    const Var map = softmax_rows(s);
    const Var values = add_row(matmul(x, h.w_v), h.b_v);
    return HeadResult{matmul(map, values), map};
}

Var multi_head_forward(Variant v, Var x, std::span<const HeadVars> heads, Var w_o, Var b_o,
                       bool scale, ScoreTerms terms, std::vector<Matrix>* maps) {
    if (heads.empty()) {
        throw ShapeError("multi_head_forward: no heads");
    }
    std::vector<Var> outputs;
    outputs.reserve(heads.size());
    for (const auto& h : heads) {
        HeadResult r = head_forward(v, x, h, scale, terms);
        outputs.push_back(r.output);
        if (maps != nullptr) {
            maps->push_back(r.map.value());
        }
    }
    const Var concat = outputs.size() == 1 ? outputs.front() : concat_cols(outputs);
    return add_row(matmul(concat, w_o), b_o);
}

Matrix score(Variant v, const Matrix& x, const HeadParams& p) {
    Tape tape;
    const HeadVars h = bind_head(tape, v, p, false);
    return score(v, tape.constant(x), h).value();
}

Matrix full_dot_product_with_biases(const Matrix& x, const HeadParams& p) {
    const Matrix q = ops::add_row(ops::matmul(x, p.w_q), p.b_q);
    const Matrix k = ops::add_row(ops::matmul(x, p.w_k), p.b_k);
    return ops::matmul_nt(q, k);
}

Matrix content_term(Variant v, const Matrix& x, const HeadParams& p) {
    Tape tape;
    const HeadVars h = bind_head(tape, v, p, false);
    auto row = content_row(v, tape.constant(x), h);
    return row ? row->value() : Matrix(1, x.rows());
}

AttentionResult attention_head_forward(Variant v, const Matrix& x, const HeadParams& p, bool scale) {
    Tape tape;
    const HeadVars h = bind_head(tape, v, p, false);
    HeadResult r = head_forward(v, tape.constant(x), h, scale);
    return AttentionResult{r.output.value(), r.map.value()};
}

Matrix multi_head_forward(Variant v, const Matrix& x, std::span<const HeadParams> heads,
                          const Matrix& w_o, const Matrix& b_o, bool scale) {
    Tape tape;
    std::vector<HeadVars> bound;
    bound.reserve(heads.size());
    for (const auto& p : heads) {
        bound.push_back(bind_head(tape, v, p, false));
    }
    return multi_head_forward(v, tape.constant(x), bound, tape.constant(w_o), tape.constant(b_o), scale)
        .value();
}

std::size_t attention_block_param_count(Variant v, std::size_t d_model, std::size_t num_heads,
                                        std::size_t d_h) {
    std::size_t per_head = 0;
    for (const auto& f : trainable_fields(v)) {
        if (f == "w_q" || f == "w_k" || f == "w_v" || f == "w_c") per_head += d_model * d_h;
        else if (f == "b_q" || f == "b_v") per_head += d_h;
        else if (f == "c") per_head += content_width(v, d_model, d_h);
        else per_head += 1;  // PReLU slopes
    }
    return num_heads * per_head + d_model * d_model + d_model;
}

}  // namespace phsa
