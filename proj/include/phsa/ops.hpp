#pragma once

#include "phsa/matrix.hpp"

namespace phsa::ops {

// Plain (non-recording) kernels. The tape-recording versions in autodiff.hpp
// are built on these.

Matrix matmul(const Matrix& a, const Matrix& b);
/// a × bᵀ without materializing the transpose.
Matrix matmul_nt(const Matrix& a, const Matrix& b);
/// aᵀ × b without materializing the transpose.
Matrix matmul_tn(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);

Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double s);
/// Adds a 1×cols row vector to every row of `a`.
Matrix add_row(const Matrix& a, const Matrix& row);

/// Row-wise softmax, stabilized by subtracting each row's maximum.
Matrix softmax_rows(const Matrix& s);

double sigmoid(double x) noexcept;
/// Swish with β = 1: x·sigmoid(x).
double swish(double x) noexcept;
double swish_derivative(double x) noexcept;
Matrix swish(const Matrix& a);

/// Parametric ReLU; the x = 0 case takes the non-negative branch.
constexpr double prelu(double x, double alpha) noexcept { return x >= 0.0 ? x : alpha * x; }
Matrix prelu(const Matrix& a, double alpha);

double sum(const Matrix& a) noexcept;

}  // namespace phsa::ops
