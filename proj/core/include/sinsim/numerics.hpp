#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sinsim/matrix.hpp"

// Dense kernels shared by every other module. All functions are pure; shape
// violations raise DimensionError.

namespace sinsim {

Matrix matmul(const Matrix& a, const Matrix& b);
/// aᵀ · b without materializing the transpose.
Matrix matmul_tn(const Matrix& a, const Matrix& b);
/// a · bᵀ without materializing the transpose.
Matrix matmul_nt(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& m);

Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& m, double s);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix exp(const Matrix& m);
/// Elementwise natural log; log(0) is -inf, negative entries give NaN.
Matrix log(const Matrix& m);
/// In-place a += s * b.
void axpy(double s, const Matrix& b, Matrix& a);
/// Adds `v` to every row of `m` in place.
void add_row_vector(Matrix& m, std::span<const double> v);

Vector row_sums(const Matrix& m);
Vector col_sums(const Matrix& m);
std::vector<std::size_t> argmax_rows(const Matrix& m);

/// Frobenius inner product Σ_ij a_ij b_ij.
double frobenius(const Matrix& a, const Matrix& b);
double max_abs(const Matrix& m);
double max_abs_diff(const Matrix& a, const Matrix& b);
bool all_finite(const Matrix& m);

double dot(std::span<const double> u, std::span<const double> v);
double norm(std::span<const double> v);

/// log Σ exp(x) with max-subtraction. -inf entries contribute nothing; an
/// empty or all -inf input gives -inf.
double logsumexp(std::span<const double> x);
Vector logsumexp_rows(const Matrix& m);

/// result(i, j) = ‖a_i − b_j‖², from the expanded form with tiny negative
/// rounding clamped to 0.
Matrix pairwise_sqdist(const Matrix& a, const Matrix& b);

/// Cosine similarity clamped to [-1, 1]; DomainError on a zero-norm input.
double cosine_sim(std::span<const double> u, std::span<const double> v);

}  // namespace sinsim
