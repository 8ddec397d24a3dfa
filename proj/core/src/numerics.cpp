#include "sinsim/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "sinsim/errors.hpp"

namespace sinsim {

namespace {

std::string shape(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape(a) + " vs " + shape(b));
  }
}

template <typename F>
Matrix map(const Matrix& m, F f) {
  Matrix out(m.rows(), m.cols());
  auto src = m.data();
  auto dst = out.data();
  for (std::size_t k = 0; k < src.size(); ++k) dst[k] = f(src[k]);
  return out;
}

template <typename F>
Matrix zip(const Matrix& a, const Matrix& b, const char* op, F f) {
  require_same_shape(a, b, op);
  Matrix out(a.rows(), a.cols());
  auto x = a.data();
  auto y = b.data();
  auto dst = out.data();
  for (std::size_t k = 0; k < x.size(); ++k) dst[k] = f(x[k], y[k]);
  return out;
}

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions differ, " + shape(a) + " * " + shape(b));
  }
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto dst = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto brow = b.row(k);
      for (std::size_t j = 0; j < brow.size(); ++j) dst[j] += aik * brow[j];
    }
  }
  return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    throw DimensionError("matmul_tn: row counts differ, " + shape(a) + " vs " + shape(b));
  }
  Matrix out(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    auto arow = a.row(k);
    auto brow = b.row(k);
    for (std::size_t i = 0; i < arow.size(); ++i) {
      const double aki = arow[i];
      if (aki == 0.0) continue;
      auto dst = out.row(i);
      for (std::size_t j = 0; j < brow.size(); ++j) dst[j] += aki * brow[j];
    }
  }
  return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw DimensionError("matmul_nt: column counts differ, " + shape(a) + " vs " + shape(b));
  }
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) out(i, j) = dot(a.row(i), b.row(j));
  }
  return out;
}

Matrix transpose(const Matrix& m) {
  Matrix out(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) out(j, i) = m(i, j);
  }
  return out;
}

Matrix add(const Matrix& a, const Matrix& b) {
  return zip(a, b, "add", [](double x, double y) { return x + y; });
}

Matrix sub(const Matrix& a, const Matrix& b) {
  return zip(a, b, "sub", [](double x, double y) { return x - y; });
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  return zip(a, b, "hadamard", [](double x, double y) { return x * y; });
}

Matrix scale(const Matrix& m, double s) {
  return map(m, [s](double x) { return s * x; });
}

Matrix exp(const Matrix& m) {
  return map(m, [](double x) { return std::exp(x); });
}

Matrix log(const Matrix& m) {
  return map(m, [](double x) { return std::log(x); });
}

void axpy(double s, const Matrix& b, Matrix& a) {
  require_same_shape(a, b, "axpy");
  auto x = b.data();
  auto y = a.data();
  for (std::size_t k = 0; k < x.size(); ++k) y[k] += s * x[k];
}

void add_row_vector(Matrix& m, std::span<const double> v) {
  if (v.size() != m.cols()) {
    throw DimensionError("add_row_vector: vector length " + std::to_string(v.size()) +
                         " vs " + std::to_string(m.cols()) + " columns");
  }
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += v[j];
  }
}

Vector row_sums(const Matrix& m) {
  Vector out(m.rows(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (double x : m.row(i)) out[i] += x;
  }
  return out;
}

Vector col_sums(const Matrix& m) {
  Vector out(m.cols(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) out[j] += r[j];
  }
  return out;
}

std::vector<std::size_t> argmax_rows(const Matrix& m) {
  std::vector<std::size_t> out(m.rows(), 0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    out[i] = static_cast<std::size_t>(std::max_element(r.begin(), r.end()) - r.begin());
  }
  return out;
}

double frobenius(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "frobenius");
  return dot(a.data(), b.data());
}

double max_abs(const Matrix& m) {
  double out = 0.0;
  for (double x : m.data()) out = std::max(out, std::abs(x));
  return out;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "max_abs_diff");
  double out = 0.0;
  auto x = a.data();
  auto y = b.data();
  for (std::size_t k = 0; k < x.size(); ++k) out = std::max(out, std::abs(x[k] - y[k]));
  return out;
}

bool all_finite(const Matrix& m) {
  return std::all_of(m.data().begin(), m.data().end(), [](double x) { return std::isfinite(x); });
}

double dot(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw DimensionError("dot: lengths " + std::to_string(u.size()) + " vs " +
                         std::to_string(v.size()));
  }
  double s = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) s += u[k] * v[k];
  return s;
}

double norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

double logsumexp(std::span<const double> x) {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  double peak = kNegInf;
  for (double v : x) peak = std::max(peak, v);
  if (peak == kNegInf) return kNegInf;
  double s = 0.0;
  for (double v : x) s += std::exp(v - peak);
  return peak + std::log(s);
}

Vector logsumexp_rows(const Matrix& m) {
  Vector out(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) out[i] = logsumexp(m.row(i));
  return out;
}

Matrix pairwise_sqdist(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw DimensionError("pairwise_sqdist: feature dims " + shape(a) + " vs " + shape(b));
  }
  Vector sq_a(a.rows());
  Vector sq_b(b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) sq_a[i] = dot(a.row(i), a.row(i));
  for (std::size_t j = 0; j < b.rows(); ++j) sq_b[j] = dot(b.row(j), b.row(j));
  Matrix out = matmul_nt(a, b);
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) {
      r[j] = std::max(0.0, sq_a[i] + sq_b[j] - 2.0 * r[j]);
    }
  }
  return out;
}

double cosine_sim(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw DimensionError("cosine_sim: length mismatch");
  // Rescale by the largest entry so tiny or huge vectors neither underflow nor overflow.
  double su = 0.0, sv = 0.0;
  for (double x : u) su = std::max(su, std::abs(x));
  for (double x : v) sv = std::max(sv, std::abs(x));
  if (su == 0.0 || sv == 0.0) throw DomainError("cosine_sim: zero-norm input");
  double uv = 0.0, uu = 0.0, vv = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    const double a = u[k] / su;
    const double b = v[k] / sv;
    uv += a * b;
    uu += a * a;
    vv += b * b;
  }
  return std::clamp(uv / std::sqrt(uu * vv), -1.0, 1.0);
}

}  // namespace sinsim
