#pragma once

#include <optional>

#include "sinsim/batch.hpp"
#include "sinsim/matrix.hpp"
#include "sinsim/ot.hpp"

namespace sinsim {

struct LossValue {
  double value = 0.0;
  std::optional<Matrix> grad_h1;
  std::optional<Matrix> grad_h2;
  std::optional<Matrix> grad_z1;
  std::optional<Matrix> grad_z2;
  /// Present for losses that solve a transport problem.
  std::optional<TransportPlan> plan;
};

struct NtXentSettings {
  double temperature = 0.5;

  void validate() const;
};

/// Normalized temperature-scaled cross entropy over the 2N views [z1; z2].
///
/// Anchor a has its paired view as the positive; the softmax denominator runs
/// over the other 2N − 1 views. The value is the mean over all 2N anchors.
/// Gradients are returned in grad_z1 / grad_z2.
LossValue nt_xent(const Matrix& z1, const Matrix& z2, const NtXentSettings& settings);

/// The 2N per-anchor terms of nt_xent (rows of z1 first, then z2).
Vector nt_xent_per_anchor(const Matrix& z1, const Matrix& z2, const NtXentSettings& settings);

/// ⟨γ*, C⟩ with C = pairwise_sqdist(h1, h2) and γ* the entropic plan under
/// uniform marginals.
///
/// The gradient holds γ* fixed:
///   ∂/∂h1_i = Σ_j γ*_ij · 2 (h1_i − h2_j),   ∂/∂h2_j = Σ_i γ*_ij · 2 (h2_j − h1_i).
/// This is the exact derivative of the optimal entropic objective
/// ⟨γ*, C⟩ − λ H(γ*), whose stationarity in γ removes the plan's sensitivity.
/// It is not the exact derivative of the reported ⟨γ*, C⟩ alone, which also
/// moves through γ*.
LossValue sinkhorn_loss(const Matrix& h1, const Matrix& h2, const SinkhornSettings& settings);

/// Where the transport regularizer is applied.
enum class RegularizeOn { h, z };

struct SinSimTerms {
  double nt_xent = 0.0;
  double sinkhorn = 0.0;
  double marginal_err = 0.0;
};

/// nt_xent(z1, z2) + β · sinkhorn_loss(h1, h2), or with the transport term on
/// (z1, z2) when `on == RegularizeOn::z`.
///
/// Every gradient slot is filled. With β = 0 the value equals the NT-Xent
/// value exactly and grad_h1 / grad_h2 are zero.
LossValue sinsim_loss(const Matrix& h1, const Matrix& h2, const Matrix& z1, const Matrix& z2,
                      double beta, const NtXentSettings& ntxent, const SinkhornSettings& sink,
                      RegularizeOn on = RegularizeOn::h, SinSimTerms* terms = nullptr);

/// Same, reading h1, h2, z1, z2 from a forwarded batch.
LossValue sinsim_loss(const BatchPair& batch, double beta, const NtXentSettings& ntxent,
                      const SinkhornSettings& sink, RegularizeOn on = RegularizeOn::h,
                      SinSimTerms* terms = nullptr);

}  // namespace sinsim
