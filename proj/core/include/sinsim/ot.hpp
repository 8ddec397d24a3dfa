#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "sinsim/matrix.hpp"

// Entropic optimal transport.
//
// Sign convention: the entropic problem solved here is
//
//     min_{γ ∈ Π(μ, ν)}  ⟨γ, C⟩ − λ H(γ),      H(γ) = −Σ γ_ij ln γ_ij,
//
// i.e. entropy is *rewarded*. Its unique minimizer has the Gibbs form
// γ_ij = exp((f_i + g_j − C_ij) / λ), which is what sinkhorn() returns.
// entropic_objective() evaluates exactly this expression.

namespace sinsim {

struct OtProblem {
  Matrix cost;  ///< N×M, finite and ≥ 0
  Vector mu;    ///< length N, ≥ 0, sums to 1
  Vector nu;    ///< length M, ≥ 0, sums to 1

  /// Uniform marginals 1/N and 1/M over `cost`.
  static OtProblem uniform(Matrix cost);
  /// Throws DimensionError / DomainError if any invariant is violated.
  void validate() const;
  bool is_uniform_square() const;
};

struct SinkhornSettings {
  double lambda = 0.05;
  std::size_t max_iters = 40;
  /// Stop once marginal_err <= tol. Zero always runs max_iters iterations.
  double tol = 0.0;

  void validate() const;
};

struct TransportPlan {
  Matrix gamma;
  /// (f_i + g_j − C_ij) / λ; finite wherever mu_i > 0 and nu_j > 0.
  Matrix log_gamma;
  Vector f;
  Vector g;
  std::size_t iterations_run = 0;
  /// max |row sum − μ| and |column sum − ν| of `gamma`.
  double marginal_err = 0.0;
  double lambda = 0.0;
  /// marginal_err after every kCheckpointStride-th iteration.
  std::vector<double> checkpoint_errs;

  static constexpr std::size_t kCheckpointStride = 5;
};

/// Log-domain Sinkhorn-Knopp.
///
/// Starts from f = g = 0 and alternates
///   f_i ← λ ln μ_i − λ LSE_j((g_j − C_ij)/λ)
///   g_j ← λ ln ν_j − λ LSE_i((f_i − C_ij)/λ).
/// One iteration is one row update followed by one column update.
TransportPlan sinkhorn(const OtProblem& problem, const SinkhornSettings& settings);

inline constexpr std::size_t kAnnealStageIters = 2000;
inline constexpr double kAnnealStageTol = 1e-9;

/// Same fixed point reached through λ-annealing: stages at λ = max C, half
/// that, and so on while above 2λ, each capped at kAnnealStageIters iterations
/// or kAnnealStageTol marginal error, then `settings` from the warm-started
/// potentials. Far fewer iterations when λ is small next to the costs and
/// the plan is close to a permutation, where cold starts crawl.
/// iterations_run counts every stage; checkpoint_errs covers the last stage.
TransportPlan sinkhorn_annealed(const OtProblem& problem, const SinkhornSettings& settings);

/// max |row/col sum − marginal| of an arbitrary coupling.
double marginal_error(const Matrix& gamma, const Vector& mu, const Vector& nu);

/// ⟨γ, C⟩.
double transport_cost(const Matrix& gamma, const Matrix& cost);
double transport_cost(const TransportPlan& plan, const Matrix& cost);

/// −Σ γ ln γ with 0 ln 0 := 0.
double entropy(const Matrix& gamma);
double entropy(const TransportPlan& plan);

/// ⟨γ, C⟩ − λ H(γ).
double entropic_objective(const Matrix& gamma, const Matrix& cost, double lambda);
double entropic_objective(const TransportPlan& plan, const Matrix& cost);

/// Projects a nonnegative near-coupling onto Π(μ, ν): rows and then columns
/// are scaled down where they overshoot, and the remaining deficit is added
/// back as a rank-one term. The result differs from `gamma` by at most twice
/// its marginal error in L1, and stays positive wherever `gamma` was.
Matrix round_to_feasible(const Matrix& gamma, const Vector& mu, const Vector& nu);

/// Largest relative gap between exp((f_i + g_j − C_ij)/λ) and stored γ_ij.
double gibbs_reconstruction_error(const TransportPlan& plan, const Matrix& cost);

struct ExactOt {
  double cost = 0.0;
  /// assignment[i] = column matched to row i.
  std::vector<std::size_t> assignment;
};

/// Largest N accepted by exact_ot.
inline constexpr std::size_t kMaxExactOtSize = 512;

/// Unregularized OT for uniform square marginals, where an optimal coupling is
/// a permutation scaled by 1/N. Solved by the O(N³) shortest augmenting path
/// assignment method; for N <= 6 the result is cross-checked against full
/// permutation enumeration.
ExactOt exact_ot(const OtProblem& problem);

/// Minimum-sum assignment for a square cost matrix.
std::vector<std::size_t> solve_assignment(const Matrix& cost);

struct BoundCheck {
  std::string name;
  bool pass = false;
  double value = 0.0;
  double bound = 0.0;
  /// Distance to the bound in the direction that must stay ≥ 0.
  double slack = 0.0;
};

struct LemmaReport {
  std::size_t n = 0;
  double lambda = 0.0;
  std::size_t iterations = 0;
  double marginal_err = 0.0;
  /// entropic_objective(γ*) <= mean diagonal cost − λ ln N, up to a relative
  /// roundoff allowance of 1e-12.
  BoundCheck upper_bound;
  /// ⟨γ*, C⟩ >= exact OT cost, with γ* first rounded onto Π(μ, ν) so that an
  /// unconverged plan cannot undercut the optimum by being infeasible.
  BoundCheck lower_bound;
  /// ⟨γ*, C⟩ of the unrounded plan.
  double raw_transport_cost = 0.0;
  /// Every log γ_ij finite, so γ_ij > 0. `value` is min γ_ij as a double,
  /// which may underflow to 0 for costs far above λ.
  BoundCheck positivity;
  double min_log_gamma = 0.0;
  double gibbs_error = 0.0;

  bool all_pass() const { return upper_bound.pass && lower_bound.pass && positivity.pass; }
};

LemmaReport check_lemma_bounds(const OtProblem& problem, const SinkhornSettings& settings);

}  // namespace sinsim
