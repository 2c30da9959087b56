#include "phsa/ops.hpp"

#include <algorithm>
#include <cmath>

namespace phsa::ops {

namespace {

void require_same_shape(const char* op, const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) {
        throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " +
                         b.shape_string());
    }
}

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: " + a.shape_string() + " x " + b.shape_string());
    }
    const std::size_t n = a.rows();
    const std::size_t k = a.cols();
    const std::size_t m = b.cols();
    Matrix out(n, m);
    const double* __restrict pa = a.data().data();
    const double* __restrict pb = b.data().data();
    double* __restrict po = out.data().data();
    // i-k-j order keeps the inner loop contiguous in both b and out; four
    // output rows share each loaded row of b.
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        double* __restrict o0 = po + i * m;
        double* __restrict o1 = o0 + m;
        double* __restrict o2 = o1 + m;
        double* __restrict o3 = o2 + m;
        for (std::size_t p = 0; p < k; ++p) {
            const double a0 = pa[i * k + p];
            const double a1 = pa[(i + 1) * k + p];
            const double a2 = pa[(i + 2) * k + p];
            const double a3 = pa[(i + 3) * k + p];
            const double* __restrict brow = pb + p * m;
            for (std::size_t j = 0; j < m; ++j) {
                const double bv = brow[j];
                o0[j] += a0 * bv;
                o1[j] += a1 * bv;
                o2[j] += a2 * bv;
                o3[j] += a3 * bv;
            }
        }
    }
    for (; i < n; ++i) {
        double* __restrict orow = po + i * m;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = pa[i * k + p];
            const double* __restrict brow = pb + p * m;
            for (std::size_t j = 0; j < m; ++j) {
                orow[j] += av * brow[j];
            }
        }
    }
    return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) {
        throw ShapeError("matmul_nt: " + a.shape_string() + " x " + b.shape_string() + "^T");
    }
    // A dot-product inner loop does not vectorize without reassociation;
    // the explicit transpose lets matmul stream contiguous rows instead.
    return matmul(a, transpose(b));
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) {
        throw ShapeError("matmul_tn: " + a.shape_string() + "^T x " + b.shape_string());
    }
    const std::size_t k = a.rows();
    const std::size_t n = a.cols();
    const std::size_t m = b.cols();
    Matrix out(n, m);
    const double* __restrict pa = a.data().data();
    const double* __restrict pb = b.data().data();
    double* __restrict po = out.data().data();
    for (std::size_t p = 0; p < k; ++p) {
        const double* arow = pa + p * n;
        const double* __restrict brow = pb + p * m;
        for (std::size_t i = 0; i < n; ++i) {
            const double av = arow[i];
            double* __restrict orow = po + i * m;
            for (std::size_t j = 0; j < m; ++j) {
                orow[j] += av * brow[j];
            }
        }
    }
    return out;
}

Matrix transpose(const Matrix& a) {
    Matrix out(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) {
            out(j, i) = a(i, j);
        }
    }
    return out;
}

Matrix add(const Matrix& a, const Matrix& b) {
    require_same_shape("add", a, b);
    Matrix out = a;
    auto o = out.data();
    auto bd = b.data();
    for (std::size_t i = 0; i < o.size(); ++i) {
        o[i] += bd[i];
    }
    return out;
}

Matrix sub(const Matrix& a, const Matrix& b) {
    require_same_shape("sub", a, b);
    Matrix out = a;
    auto o = out.data();
    auto bd = b.data();
    for (std::size_t i = 0; i < o.size(); ++i) {
        o[i] -= bd[i];
    }
    return out;
}

Matrix scale(const Matrix& a, double s) {
    Matrix out = a;
    for (double& v : out.data()) {
        v *= s;
    }
    return out;
}

Matrix add_row(const Matrix& a, const Matrix& row) {
    if (row.rows() != 1 || row.cols() != a.cols()) {
        throw ShapeError("add_row: " + a.shape_string() + " + broadcast " + row.shape_string());
    }
    Matrix out = a;
    for (std::size_t i = 0; i < out.rows(); ++i) {
        auto r = out.row_span(i);
        for (std::size_t j = 0; j < r.size(); ++j) {
            r[j] += row(0, j);
        }
    }
    return out;
}

Matrix softmax_rows(const Matrix& s) {
    Matrix out(s.rows(), s.cols());
    for (std::size_t i = 0; i < s.rows(); ++i) {
        auto in = s.row_span(i);
        auto o = out.row_span(i);
        const double mx = *std::max_element(in.begin(), in.end());
        double total = 0.0;
        for (std::size_t j = 0; j < in.size(); ++j) {
            o[j] = std::exp(in[j] - mx);
            total += o[j];
        }
        const double inv = 1.0 / total;
        for (double& v : o) {
            v *= inv;
        }
    }
    return out;
}

double sigmoid(double x) noexcept {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double swish(double x) noexcept { return x * sigmoid(x); }

double swish_derivative(double x) noexcept {
    const double s = sigmoid(x);
    return s + x * s * (1.0 - s);
}

Matrix swish(const Matrix& a) {
    Matrix out = a;
    for (double& v : out.data()) {
        v = swish(v);
    }
    return out;
}

Matrix prelu(const Matrix& a, double alpha) {
    Matrix out = a;
    for (double& v : out.data()) {
        v = prelu(v, alpha);
    }
    return out;
}

double sum(const Matrix& a) noexcept {
    double s = 0.0;
    for (double v : a.data()) {
        s += v;
    }
    return s;
}

}  // namespace phsa::ops
