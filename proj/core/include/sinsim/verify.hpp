#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "sinsim/matrix.hpp"
#include "sinsim/rng.hpp"

namespace sinsim {

/// One verifier check. For upper-bound checks slack = bound − value, for
/// lower-bound checks slack = value − bound; a check passes iff slack ≥ 0,
/// except that the entropic upper bound allows 1e-12 relative roundoff.
/// Non-gating checks are reported but do not affect the overall verdict.
struct VerifyCheck {
  std::string name;
  bool pass = false;
  double value = 0.0;
  double bound = 0.0;
  double slack = 0.0;
  bool gating = true;
};

struct VerifyReport {
  std::uint64_t seed = 0;
  std::vector<VerifyCheck> checks;

  bool all_pass() const;
  std::size_t failures() const;
  /// {"seed":…, "pass":…, "failures":…,
  ///  "checks":[{name, pass, gating, value, bound, slack}, …]}
  std::string to_json() const;
};

/// Sizes and strengths of the bound battery.
inline constexpr std::size_t kBatterySizes[] = {2, 8, 32, 128};
inline constexpr double kBatteryLambdas[] = {0.01, 0.05, 0.5};

/// Costs between two independent clouds of unit-Gaussian points, scaled so
/// the largest entry is 1.
Matrix normalized_gaussian_cost(std::size_t n, std::size_t dim, Rng& rng);
/// Raw squared distances between two independent unit-Gaussian clouds.
Matrix gaussian_sqdist_cost(std::size_t n, std::size_t dim, Rng& rng);

/// Runs the full transport battery: bound, positivity, Gibbs, feasibility,
/// mass and checkpoint-monotonicity checks on every (size, λ) pair, plus the
/// large-λ product limit, the small-λ exact limit, cost-translation
/// covariance, the near-diagonal paired case and the single-point case.
/// Instances are drawn from `seed`.
///
/// Converged solves use sinkhorn_annealed. Feasibility is still non-gating
/// for n ≤ 8 with λ ≤ 0.01: there the plan is close to a permutation and on a
/// few draws in a hundred the marginal error decays only like 1/k even from
/// a warm start, so no practical iteration budget reaches 1e-8 every time. In
/// those cells the upper-bound check is also non-gating whenever the plan
/// did not reach 1e-8.
VerifyReport run_verify_battery(std::uint64_t seed);

/// Whether marginal feasibility gates the verdict for this battery cell.
bool feasibility_gates(std::size_t n, double lambda);

struct EmdCompareRow {
  double lambda = 0.0;
  std::size_t n = 0;
  std::size_t instances = 0;
  double mean_rel_err = 0.0;
  double max_rel_err = 0.0;
  double mean_iterations = 0.0;
};

/// |⟨γ*,C⟩ − exact| / exact on `instances` uniform n×n Gaussian problems per λ,
/// solved to marginal error 1e-9.
std::vector<EmdCompareRow> emd_compare(std::uint64_t seed, const std::vector<double>& lambdas,
                                       std::size_t n, std::size_t instances);
/// Header lambda,n,instances,mean_rel_err,max_rel_err,mean_iterations.
std::string emd_compare_csv(const std::vector<EmdCompareRow>& rows);

}  // namespace sinsim
