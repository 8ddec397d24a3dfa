#include "sinsim/losses.hpp"

#include <cmath>
#include <string>

#include "sinsim/errors.hpp"
#include "sinsim/numerics.hpp"

namespace sinsim {

namespace {

struct NtXentState {
  std::size_t n = 0;
  Matrix unit;       // 2N×d, rows of [z1; z2] scaled to unit norm
  Vector norms;      // 2N
  Matrix logits;     // 2N×2N, cosine / τ
  Vector log_denom;  // 2N, LSE over k != a
};

NtXentState prepare(const Matrix& z1, const Matrix& z2, const NtXentSettings& settings) {
  settings.validate();
  if (!z1.same_shape(z2)) throw DimensionError("nt_xent: z1 and z2 must have the same shape");
  if (z1.rows() < 2) throw DomainError("nt_xent: need N >= 2 pairs so that negatives exist");

  NtXentState st;
  st.n = z1.rows();
  const std::size_t two_n = 2 * st.n;
  const std::size_t d = z1.cols();
  st.unit = Matrix(two_n, d);
  st.norms.resize(two_n);
  for (std::size_t a = 0; a < two_n; ++a) {
    auto src = a < st.n ? z1.row(a) : z2.row(a - st.n);
    const double nrm = norm(src);
    if (nrm == 0.0) throw DomainError("nt_xent: zero-norm projection row " + std::to_string(a));
    st.norms[a] = nrm;
    auto dst = st.unit.row(a);
    for (std::size_t k = 0; k < d; ++k) dst[k] = src[k] / nrm;
  }

  st.logits = matmul_nt(st.unit, st.unit);
  const double inv_tau = 1.0 / settings.temperature;
  Vector scratch;
  scratch.reserve(two_n - 1);
  st.log_denom.resize(two_n);
  for (std::size_t a = 0; a < two_n; ++a) {
    auto row = st.logits.row(a);
    scratch.clear();
    for (std::size_t k = 0; k < two_n; ++k) {
      row[k] *= inv_tau;
      if (k != a) scratch.push_back(row[k]);
    }
    st.log_denom[a] = logsumexp(scratch);
  }
  return st;
}

std::size_t positive_of(std::size_t a, std::size_t n) { return a < n ? a + n : a - n; }

}  // namespace

void NtXentSettings::validate() const {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw DomainError("nt_xent: temperature must be finite and > 0");
  }
}

Vector nt_xent_per_anchor(const Matrix& z1, const Matrix& z2, const NtXentSettings& settings) {
  const NtXentState st = prepare(z1, z2, settings);
  Vector out(2 * st.n);
  for (std::size_t a = 0; a < out.size(); ++a) {
    out[a] = st.log_denom[a] - st.logits(a, positive_of(a, st.n));
  }
  return out;
}

LossValue nt_xent(const Matrix& z1, const Matrix& z2, const NtXentSettings& settings) {
  const NtXentState st = prepare(z1, z2, settings);
  const std::size_t two_n = 2 * st.n;
  const double inv_count = 1.0 / static_cast<double>(two_n);

  LossValue out;
  double total = 0.0;
  // grad_logits(a, k) = (softmax_a(k) − [k is a's positive]) / 2N, zero on the diagonal.
  Matrix grad_logits(two_n, two_n);
  for (std::size_t a = 0; a < two_n; ++a) {
    const std::size_t p = positive_of(a, st.n);
    total += st.log_denom[a] - st.logits(a, p);
    for (std::size_t k = 0; k < two_n; ++k) {
      if (k == a) continue;
      grad_logits(a, k) = std::exp(st.logits(a, k) - st.log_denom[a]) * inv_count;
    }
    grad_logits(a, p) -= inv_count;
  }
  out.value = total * inv_count;

  // logits = U Uᵀ / τ, so dL/dU = (G + Gᵀ) U / τ.
  Matrix sym = add(grad_logits, transpose(grad_logits));
  Matrix grad_unit = scale(matmul(sym, st.unit), 1.0 / settings.temperature);

  // Through u = z / ‖z‖: dz = (du − u (u·du)) / ‖z‖.
  const std::size_t d = z1.cols();
  Matrix g1(st.n, d);
  Matrix g2(st.n, d);
  for (std::size_t a = 0; a < two_n; ++a) {
    auto u = st.unit.row(a);
    auto du = grad_unit.row(a);
    const double radial = dot(u, du);
    auto dst = a < st.n ? g1.row(a) : g2.row(a - st.n);
    for (std::size_t k = 0; k < d; ++k) dst[k] = (du[k] - u[k] * radial) / st.norms[a];
  }
  out.grad_z1 = std::move(g1);
  out.grad_z2 = std::move(g2);
  return out;
}

LossValue sinkhorn_loss(const Matrix& h1, const Matrix& h2, const SinkhornSettings& settings) {
  if (!h1.same_shape(h2)) throw DimensionError("sinkhorn_loss: h1 and h2 must have the same shape");
  if (h1.rows() == 0) throw DimensionError("sinkhorn_loss: empty batch");

  const Matrix cost = pairwise_sqdist(h1, h2);
  TransportPlan plan = sinkhorn(OtProblem::uniform(cost), settings);

  LossValue out;
  out.value = transport_cost(plan, cost);

  const Vector rows = row_sums(plan.gamma);
  const Vector cols = col_sums(plan.gamma);
  // 2 (r_i h1_i − (γ h2)_i) and 2 (c_j h2_j − (γᵀ h1)_j)
  Matrix g1 = matmul(plan.gamma, h2);
  Matrix g2 = matmul_tn(plan.gamma, h1);
  for (std::size_t i = 0; i < h1.rows(); ++i) {
    auto dst = g1.row(i);
    auto src = h1.row(i);
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = 2.0 * (rows[i] * src[k] - dst[k]);
  }
  for (std::size_t j = 0; j < h2.rows(); ++j) {
    auto dst = g2.row(j);
    auto src = h2.row(j);
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = 2.0 * (cols[j] * src[k] - dst[k]);
  }
  out.grad_h1 = std::move(g1);
  out.grad_h2 = std::move(g2);
  out.plan = std::move(plan);
  return out;
}

LossValue sinsim_loss(const Matrix& h1, const Matrix& h2, const Matrix& z1, const Matrix& z2,
                      double beta, const NtXentSettings& ntxent, const SinkhornSettings& sink,
                      RegularizeOn on, SinSimTerms* terms) {
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw DomainError("sinsim_loss: beta must be >= 0");

  LossValue contrastive = nt_xent(z1, z2, ntxent);
  LossValue transport =
      on == RegularizeOn::h ? sinkhorn_loss(h1, h2, sink) : sinkhorn_loss(z1, z2, sink);

  LossValue out;
  out.value = contrastive.value + beta * transport.value;
  out.grad_z1 = std::move(*contrastive.grad_z1);
  out.grad_z2 = std::move(*contrastive.grad_z2);
  if (on == RegularizeOn::h) {
    out.grad_h1 = scale(*transport.grad_h1, beta);
    out.grad_h2 = scale(*transport.grad_h2, beta);
  } else {
    axpy(beta, *transport.grad_h1, *out.grad_z1);
    axpy(beta, *transport.grad_h2, *out.grad_z2);
    out.grad_h1 = Matrix(h1.rows(), h1.cols());
    out.grad_h2 = Matrix(h2.rows(), h2.cols());
  }
  if (terms != nullptr) {
    terms->nt_xent = contrastive.value;
    terms->sinkhorn = transport.value;
    terms->marginal_err = transport.plan->marginal_err;
  }
  out.plan = std::move(transport.plan);
  return out;
}

LossValue sinsim_loss(const BatchPair& batch, double beta, const NtXentSettings& ntxent,
                      const SinkhornSettings& sink, RegularizeOn on, SinSimTerms* terms) {
  return sinsim_loss(batch.h1, batch.h2, batch.z1, batch.z2, beta, ntxent, sink, on, terms);
}

}  // namespace sinsim
