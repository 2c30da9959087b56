#include "phsa/autodiff.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <string>

#include "phsa/ops.hpp"

namespace phsa {

namespace {

std::atomic<bool> g_corrupt_prelu{false};

Tape& tape_of(Var a) {
    if (a.tape == nullptr) {
        throw std::logic_error("Var is not attached to a tape");
    }
    return *a.tape;
}

Tape& tape_of(Var a, Var b) {
    if (a.tape != b.tape) {
        throw std::logic_error("operands recorded on different tapes");
    }
    return tape_of(a);
}

Matrix column_sums(const Matrix& g) {
    Matrix out(1, g.cols());
    for (std::size_t i = 0; i < g.rows(); ++i) {
        auto r = g.row_span(i);
        for (std::size_t j = 0; j < r.size(); ++j) {
            out(0, j) += r[j];
        }
    }
    return out;
}

}  // namespace

namespace fault {
void set_corrupt_prelu_backward(bool enabled) noexcept { g_corrupt_prelu.store(enabled); }
bool corrupt_prelu_backward() noexcept { return g_corrupt_prelu.load(); }
}  // namespace fault

const Matrix& Var::value() const { return tape_of(*this).value(*this); }

Var Tape::leaf(Matrix value, bool requires_grad) {
    nodes_.push_back(Node{std::move(value), std::nullopt, nullptr, requires_grad});
    return Var{this, nodes_.size() - 1};
}

Var Tape::record(Matrix value, std::span<const Var> inputs, BackwardFn backward) {
    if (!value.all_finite()) {
        throw std::domain_error("non-finite value produced on tape (shape " + value.shape_string() +
                                ")");
    }
    bool needs = false;
    for (Var in : inputs) {
        needs = needs || nodes_.at(in.id).requires_grad;
    }
    nodes_.push_back(Node{std::move(value), std::nullopt, needs ? std::move(backward) : nullptr, needs});
    return Var{this, nodes_.size() - 1};
}

void Tape::accumulate(Var v, const Matrix& g) {
    Node& n = nodes_.at(v.id);
    if (!n.requires_grad) {
        return;
    }
    if (!g.same_shape(n.value)) {
        throw ShapeError("gradient " + g.shape_string() + " does not match value " +
                         n.value.shape_string());
    }
    if (!n.grad) {
        n.grad = g;
    } else {
        auto d = n.grad->data();
        auto s = g.data();
        for (std::size_t i = 0; i < d.size(); ++i) {
            d[i] += s[i];
        }
    }
}

void Tape::accumulate(Var v, Matrix&& g) {
    Node& n = nodes_.at(v.id);
    if (!n.requires_grad) {
        return;
    }
    if (!n.grad && g.same_shape(n.value)) {
        n.grad = std::move(g);
        return;
    }
    accumulate(v, static_cast<const Matrix&>(g));
}

Matrix Tape::grad(Var v) const {
    const Node& n = nodes_.at(v.id);
    if (n.grad) {
        return *n.grad;
    }
    return Matrix(n.value.rows(), n.value.cols());
}

void Tape::backward(Var target) {
    const Node& t = nodes_.at(target.id);
    if (t.value.rows() != 1 || t.value.cols() != 1) {
        throw ShapeError("backward target must be 1x1, got " + t.value.shape_string());
    }
    for (Node& n : nodes_) {
        n.grad.reset();
    }
    if (!t.requires_grad) {
        return;
    }
    nodes_[target.id].grad = Matrix(1, 1, 1.0);
    for (std::size_t i = target.id + 1; i-- > 0;) {
        Node& n = nodes_[i];
        // Callbacks only accumulate into earlier nodes, so *n.grad is stable.
        if (n.backward && n.grad) {
            n.backward(*this, *n.grad);
        }
    }
}

Var matmul(Var a, Var b) {
    Tape& t = tape_of(a, b);
    const Var in[] = {a, b};
    return t.record(ops::matmul(a.value(), b.value()), in, [a, b](Tape& tp, const Matrix& g) {
        if (tp.requires_grad(a)) {
            tp.accumulate(a, ops::matmul_nt(g, tp.value(b)));
        }
        if (tp.requires_grad(b)) {
            tp.accumulate(b, ops::matmul_tn(tp.value(a), g));
        }
    });
}

Var matmul_nt(Var a, Var b) {
    Tape& t = tape_of(a, b);
    const Var in[] = {a, b};
    return t.record(ops::matmul_nt(a.value(), b.value()), in, [a, b](Tape& tp, const Matrix& g) {
        if (tp.requires_grad(a)) {
            tp.accumulate(a, ops::matmul(g, tp.value(b)));
        }
        if (tp.requires_grad(b)) {
            tp.accumulate(b, ops::matmul_tn(g, tp.value(a)));
        }
    });
}

Var transpose(Var a) {
    const Var in[] = {a};
    return tape_of(a).record(ops::transpose(a.value()), in, [a](Tape& tp, const Matrix& g) {
        tp.accumulate(a, ops::transpose(g));
    });
}

Var add(Var a, Var b) {
    Tape& t = tape_of(a, b);
    const Var in[] = {a, b};
    return t.record(ops::add(a.value(), b.value()), in, [a, b](Tape& tp, const Matrix& g) {
        tp.accumulate(a, g);
        tp.accumulate(b, g);
    });
}

Var add_row(Var a, Var row) {
    Tape& t = tape_of(a, row);
    const Var in[] = {a, row};
    return t.record(ops::add_row(a.value(), row.value()), in, [a, row](Tape& tp, const Matrix& g) {
        tp.accumulate(a, g);
        if (tp.requires_grad(row)) {
            tp.accumulate(row, column_sums(g));
        }
    });
}

Var scale(Var a, double s) {
    const Var in[] = {a};
    return tape_of(a).record(ops::scale(a.value(), s), in, [a, s](Tape& tp, const Matrix& g) {
        tp.accumulate(a, ops::scale(g, s));
    });
}

Var swish(Var a) {
    const Var in[] = {a};
    return tape_of(a).record(ops::swish(a.value()), in, [a](Tape& tp, const Matrix& g) {
        Matrix d = g;
        auto x = tp.value(a).data();
        auto dd = d.data();
        for (std::size_t i = 0; i < dd.size(); ++i) {
            dd[i] *= ops::swish_derivative(x[i]);
        }
        tp.accumulate(a, std::move(d));
    });
}

Var prelu(Var a, Var alpha) {
    Tape& t = tape_of(a, alpha);
    if (alpha.rows() != 1 || alpha.cols() != 1) {
        throw ShapeError("prelu: slope must be [1x1], got " + alpha.value().shape_string());
    }
    const Var in[] = {a, alpha};
    return t.record(ops::prelu(a.value(), alpha.value()(0, 0)), in, [a, alpha](Tape& tp, const Matrix& g) {
        const double slope = tp.value(alpha)(0, 0);
        auto x = tp.value(a).data();
        auto gd = g.data();
        Matrix dx = g;
        auto dxd = dx.data();
        double dalpha = 0.0;
        for (std::size_t i = 0; i < gd.size(); ++i) {
            if (x[i] < 0.0) {
                dxd[i] *= slope;
                dalpha += gd[i] * x[i];
            }
        }
        if (fault::corrupt_prelu_backward()) {
            dalpha *= 2.0;
        }
        tp.accumulate(a, std::move(dx));
        tp.accumulate(alpha, Matrix(1, 1, dalpha));
    });
}

Var softmax_rows(Var s) {
    const Var in[] = {s};
    Tape& t = tape_of(s);
    Matrix p = ops::softmax_rows(s.value());
    const std::size_t out_id = t.size();
    return t.record(std::move(p), in, [s, out_id](Tape& tp, const Matrix& g) {
        const Matrix& prob = tp.value(Var{&tp, out_id});
        Matrix d(g.rows(), g.cols());
        for (std::size_t i = 0; i < g.rows(); ++i) {
            auto pr = prob.row_span(i);
            auto gr = g.row_span(i);
            double dot = 0.0;
            for (std::size_t j = 0; j < pr.size(); ++j) {
                dot += pr[j] * gr[j];
            }
            auto dr = d.row_span(i);
            for (std::size_t j = 0; j < pr.size(); ++j) {
                dr[j] = pr[j] * (gr[j] - dot);
            }
        }
        tp.accumulate(s, std::move(d));
    });
}

Var sum(Var a) {
    const Var in[] = {a};
    return tape_of(a).record(Matrix(1, 1, ops::sum(a.value())), in, [a](Tape& tp, const Matrix& g) {
        const Matrix& x = tp.value(a);
        tp.accumulate(a, Matrix(x.rows(), x.cols(), g(0, 0)));
    });
}

Var concat_cols(std::span<const Var> parts) {
    if (parts.empty()) {
        throw ShapeError("concat_cols: no parts");
    }
    Tape& t = tape_of(parts.front());
    const std::size_t rows = parts.front().rows();
    std::size_t cols = 0;
    for (Var p : parts) {
        tape_of(parts.front(), p);
        if (p.rows() != rows) {
            throw ShapeError("concat_cols: row mismatch " + parts.front().value().shape_string() +
                             " vs " + p.value().shape_string());
        }
        cols += p.cols();
    }
    Matrix out(rows, cols);
    std::size_t offset = 0;
    for (Var p : parts) {
        const Matrix& v = p.value();
        for (std::size_t i = 0; i < rows; ++i) {
            for (std::size_t j = 0; j < v.cols(); ++j) {
                out(i, offset + j) = v(i, j);
            }
        }
        offset += v.cols();
    }
    std::vector<Var> saved(parts.begin(), parts.end());
    return t.record(std::move(out), parts, [saved](Tape& tp, const Matrix& g) {
        std::size_t off = 0;
        for (Var p : saved) {
            const std::size_t c = tp.value(p).cols();
            if (tp.requires_grad(p)) {
                Matrix d(g.rows(), c);
                for (std::size_t i = 0; i < g.rows(); ++i) {
                    for (std::size_t j = 0; j < c; ++j) {
                        d(i, j) = g(i, off + j);
                    }
                }
                tp.accumulate(p, std::move(d));
            }
            off += c;
        }
    });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
    Tape& t = tape_of(x, gain);
    tape_of(x, bias);
    const Matrix& xv = x.value();
    const std::size_t n = xv.cols();
    if (gain.rows() != 1 || gain.cols() != n || bias.rows() != 1 || bias.cols() != n) {
        throw ShapeError("layer_norm: input " + xv.shape_string() + " with gain " +
                         gain.value().shape_string() + " and bias " + bias.value().shape_string());
    }
    Matrix normalized(xv.rows(), n);
    std::vector<double> inv_std(xv.rows());
    for (std::size_t i = 0; i < xv.rows(); ++i) {
        auto r = xv.row_span(i);
        double mean = 0.0;
        for (double v : r) {
            mean += v;
        }
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (double v : r) {
            var += (v - mean) * (v - mean);
        }
        var /= static_cast<double>(n);
        inv_std[i] = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < n; ++j) {
            normalized(i, j) = (r[j] - mean) * inv_std[i];
        }
    }
    Matrix out(xv.rows(), n);
    const Matrix& gv = gain.value();
    const Matrix& bv = bias.value();
    for (std::size_t i = 0; i < xv.rows(); ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            out(i, j) = gv(0, j) * normalized(i, j) + bv(0, j);
        }
    }
    const Var in[] = {x, gain, bias};
    return t.record(std::move(out), in,
                    [x, gain, bias, normalized = std::move(normalized), inv_std = std::move(inv_std)](
                        Tape& tp, const Matrix& g) {
                        const std::size_t rows = g.rows();
                        const std::size_t cols = g.cols();
                        const Matrix& gv2 = tp.value(gain);
                        if (tp.requires_grad(bias)) {
                            tp.accumulate(bias, column_sums(g));
                        }
                        if (tp.requires_grad(gain)) {
                            Matrix dg(1, cols);
                            for (std::size_t i = 0; i < rows; ++i) {
                                for (std::size_t j = 0; j < cols; ++j) {
                                    dg(0, j) += g(i, j) * normalized(i, j);
                                }
                            }
                            tp.accumulate(gain, std::move(dg));
                        }
                        if (tp.requires_grad(x)) {
                            Matrix dx(rows, cols);
                            const double inv_n = 1.0 / static_cast<double>(cols);
                            for (std::size_t i = 0; i < rows; ++i) {
                                double mean_d = 0.0;
                                double mean_dx = 0.0;
                                for (std::size_t j = 0; j < cols; ++j) {
                                    const double d = g(i, j) * gv2(0, j);
                                    mean_d += d;
                                    mean_dx += d * normalized(i, j);
                                }
                                mean_d *= inv_n;
                                mean_dx *= inv_n;
                                for (std::size_t j = 0; j < cols; ++j) {
                                    const double d = g(i, j) * gv2(0, j);
                                    dx(i, j) = inv_std[i] * (d - mean_d - normalized(i, j) * mean_dx);
                                }
                            }
                            tp.accumulate(x, std::move(dx));
                        }
                    });
}

Var cross_entropy(Var logits, std::span<const int> labels, bool mean) {
    Tape& t = tape_of(logits);
    const Matrix& z = logits.value();
    if (labels.size() != z.rows()) {
        throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for logits " +
                         z.shape_string());
    }
    Matrix prob = ops::softmax_rows(z);
    double loss = 0.0;
    for (std::size_t i = 0; i < z.rows(); ++i) {
        const int y = labels[i];
        if (y < 0 || static_cast<std::size_t>(y) >= z.cols()) {
            throw std::out_of_range("cross_entropy: label " + std::to_string(y) + " outside [0," +
                                    std::to_string(z.cols()) + ")");
        }
        loss -= std::log(std::max(prob(i, static_cast<std::size_t>(y)), 1e-300));
    }
    const double norm = mean ? 1.0 / static_cast<double>(z.rows()) : 1.0;
    std::vector<int> saved(labels.begin(), labels.end());
    const Var in[] = {logits};
    return t.record(Matrix(1, 1, loss * norm), in,
                    [logits, prob = std::move(prob), saved = std::move(saved), norm](Tape& tp,
                                                                                    const Matrix& g) {
                        Matrix d = prob;
                        for (std::size_t i = 0; i < d.rows(); ++i) {
                            d(i, static_cast<std::size_t>(saved[i])) -= 1.0;
                        }
                        tp.accumulate(logits, ops::scale(d, g(0, 0) * norm));
                    });
}

}  // namespace phsa
