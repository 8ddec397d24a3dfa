#include "sinsim/ot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "sinsim/errors.hpp"
#include "sinsim/numerics.hpp"

namespace sinsim {

namespace {

constexpr double kMarginalSumTol = 1e-12;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void validate_marginal(const Vector& w, const char* name) {
  double total = 0.0;
  for (double x : w) {
    if (!std::isfinite(x) || x < 0.0) {
      throw DomainError(std::string("OtProblem: ") + name + " has a negative or non-finite weight");
    }
    total += x;
  }
  if (std::abs(total - 1.0) > kMarginalSumTol) {
    throw DomainError(std::string("OtProblem: ") + name + " sums to " + std::to_string(total));
  }
}

Vector log_weights(const Vector& w) {
  Vector out(w.size());
  std::transform(w.begin(), w.end(), out.begin(), [](double x) { return std::log(x); });
  return out;
}

// Rebuilds log γ and γ from the potentials and returns the marginal error.
double assemble_plan(const Matrix& cost, const Vector& f, const Vector& g, double lambda,
                     const Vector& mu, const Vector& nu, Matrix& log_gamma, Matrix& gamma) {
  for (std::size_t i = 0; i < cost.rows(); ++i) {
    auto c = cost.row(i);
    auto lg = log_gamma.row(i);
    auto gm = gamma.row(i);
    for (std::size_t j = 0; j < c.size(); ++j) {
      lg[j] = (f[i] + g[j] - c[j]) / lambda;
      gm[j] = std::exp(lg[j]);
    }
  }
  return marginal_error(gamma, mu, nu);
}

// LSE over k of (potential_k − costs_k) / λ, streaming with a running max.
double scaled_lse(std::span<const double> costs, const Vector& potential, double lambda) {
  double peak = kNegInf;
  for (std::size_t k = 0; k < costs.size(); ++k) {
    peak = std::max(peak, (potential[k] - costs[k]) / lambda);
  }
  if (peak == kNegInf) return kNegInf;
  double s = 0.0;
  for (std::size_t k = 0; k < costs.size(); ++k) {
    s += std::exp((potential[k] - costs[k]) / lambda - peak);
  }
  return peak + std::log(s);
}

double brute_force_assignment_cost(const Matrix& cost) {
  std::vector<std::size_t> perm(cost.rows());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (std::size_t i = 0; i < perm.size(); ++i) total += cost(i, perm[i]);
    best = std::min(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace

OtProblem OtProblem::uniform(Matrix cost) {
  OtProblem p;
  p.mu.assign(cost.rows(), cost.rows() == 0 ? 0.0 : 1.0 / static_cast<double>(cost.rows()));
  p.nu.assign(cost.cols(), cost.cols() == 0 ? 0.0 : 1.0 / static_cast<double>(cost.cols()));
  p.cost = std::move(cost);
  return p;
}

void OtProblem::validate() const {
  if (cost.rows() == 0 || cost.cols() == 0) throw DimensionError("OtProblem: empty cost matrix");
  if (mu.size() != cost.rows() || nu.size() != cost.cols()) {
    throw DimensionError("OtProblem: marginal lengths do not match the cost matrix");
  }
  for (double c : cost.data()) {
    if (!std::isfinite(c)) throw DomainError("OtProblem: non-finite cost entry");
    if (c < 0.0) throw DomainError("OtProblem: negative cost entry");
  }
  validate_marginal(mu, "mu");
  validate_marginal(nu, "nu");
}

bool OtProblem::is_uniform_square() const {
  const std::size_t n = cost.rows();
  if (n == 0 || cost.cols() != n || mu.size() != n || nu.size() != n) return false;
  const double w = 1.0 / static_cast<double>(n);
  auto is_w = [w](double x) { return std::abs(x - w) <= kMarginalSumTol; };
  return std::all_of(mu.begin(), mu.end(), is_w) && std::all_of(nu.begin(), nu.end(), is_w);
}

void SinkhornSettings::validate() const {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw DomainError("sinkhorn: lambda must be finite and > 0, got " + std::to_string(lambda));
  }
  if (max_iters < 1) throw DomainError("sinkhorn: max_iters must be >= 1");
  if (!(tol >= 0.0)) throw DomainError("sinkhorn: tol must be >= 0");
}

namespace {

// Sinkhorn iterations from the given potentials.
TransportPlan sinkhorn_from(const OtProblem& problem, const SinkhornSettings& settings, Vector f0,
                            Vector g0) {
  const Matrix& cost = problem.cost;
  const Matrix cost_t = transpose(cost);
  const std::size_t n = cost.rows();
  const std::size_t m = cost.cols();
  const double lambda = settings.lambda;
  const Vector log_mu = log_weights(problem.mu);
  const Vector log_nu = log_weights(problem.nu);

  TransportPlan plan;
  plan.lambda = lambda;
  plan.f = std::move(f0);
  plan.g = std::move(g0);
  plan.gamma = Matrix(n, m);
  plan.log_gamma = Matrix(n, m);

  bool assembled = false;
  std::size_t it = 0;
  Vector next_f(n);
  while (it < settings.max_iters) {
    // After a column update the columns are exact and row i of the plan sums
    // to μ_i·exp((f_i − f'_i)/λ), where f' is the next row update. That gives
    // the stopping test without assembling γ.
    double row_err = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      next_f[i] = lambda * (log_mu[i] - scaled_lse(cost.row(i), plan.g, lambda));
      if (problem.mu[i] > 0.0) {
        row_err = std::max(row_err, problem.mu[i] * std::abs(1.0 - std::exp((plan.f[i] - next_f[i]) / lambda)));
      }
    }
    if (it > 0 && settings.tol > 0.0 && row_err <= settings.tol) break;
    std::swap(plan.f, next_f);
    for (std::size_t j = 0; j < m; ++j) {
      plan.g[j] = lambda * (log_nu[j] - scaled_lse(cost_t.row(j), plan.f, lambda));
    }
    ++it;
    assembled = false;

    if (it % TransportPlan::kCheckpointStride == 0) {
      plan.marginal_err = assemble_plan(cost, plan.f, plan.g, lambda, problem.mu, problem.nu,
                                        plan.log_gamma, plan.gamma);
      assembled = true;
      plan.checkpoint_errs.push_back(plan.marginal_err);
    }
  }
  if (!assembled) {
    plan.marginal_err = assemble_plan(cost, plan.f, plan.g, lambda, problem.mu, problem.nu,
                                      plan.log_gamma, plan.gamma);
  }
  plan.iterations_run = it;
  return plan;
}

}  // namespace

TransportPlan sinkhorn(const OtProblem& problem, const SinkhornSettings& settings) {
  settings.validate();
  problem.validate();
  return sinkhorn_from(problem, settings, Vector(problem.cost.rows(), 0.0),
                       Vector(problem.cost.cols(), 0.0));
}

TransportPlan sinkhorn_annealed(const OtProblem& problem, const SinkhornSettings& settings) {
  settings.validate();
  problem.validate();
  double start = 0.0;
  for (double c : problem.cost.data()) start = std::max(start, c);
  Vector f(problem.cost.rows(), 0.0);
  Vector g(problem.cost.cols(), 0.0);
  std::size_t spent = 0;
  for (double lambda = start; lambda > 2.0 * settings.lambda; lambda *= 0.5) {
    const SinkhornSettings stage{lambda, kAnnealStageIters, kAnnealStageTol};
    TransportPlan p = sinkhorn_from(problem, stage, std::move(f), std::move(g));
    f = std::move(p.f);
    g = std::move(p.g);
    spent += p.iterations_run;
  }
  TransportPlan plan = sinkhorn_from(problem, settings, std::move(f), std::move(g));
  plan.iterations_run += spent;
  return plan;
}

double marginal_error(const Matrix& gamma, const Vector& mu, const Vector& nu) {
  if (mu.size() != gamma.rows() || nu.size() != gamma.cols()) {
    throw DimensionError("marginal_error: marginals do not match the coupling");
  }
  const Vector rs = row_sums(gamma);
  const Vector cs = col_sums(gamma);
  double err = 0.0;
  for (std::size_t i = 0; i < rs.size(); ++i) err = std::max(err, std::abs(rs[i] - mu[i]));
  for (std::size_t j = 0; j < cs.size(); ++j) err = std::max(err, std::abs(cs[j] - nu[j]));
  return err;
}

double transport_cost(const Matrix& gamma, const Matrix& cost) { return frobenius(gamma, cost); }

double transport_cost(const TransportPlan& plan, const Matrix& cost) {
  return transport_cost(plan.gamma, cost);
}

double entropy(const Matrix& gamma) {
  double h = 0.0;
  for (double x : gamma.data()) {
    if (x > 0.0) h -= x * std::log(x);
  }
  return h;
}

double entropy(const TransportPlan& plan) {
  // log γ is stored exactly, so use it rather than re-taking logs of γ.
  double h = 0.0;
  auto gm = plan.gamma.data();
  auto lg = plan.log_gamma.data();
  for (std::size_t k = 0; k < gm.size(); ++k) {
    if (gm[k] > 0.0) h -= gm[k] * lg[k];
  }
  return h;
}

double entropic_objective(const Matrix& gamma, const Matrix& cost, double lambda) {
  return transport_cost(gamma, cost) - lambda * entropy(gamma);
}

double entropic_objective(const TransportPlan& plan, const Matrix& cost) {
  return transport_cost(plan, cost) - plan.lambda * entropy(plan);
}

Matrix round_to_feasible(const Matrix& gamma, const Vector& mu, const Vector& nu) {
  if (mu.size() != gamma.rows() || nu.size() != gamma.cols()) {
    throw DimensionError("round_to_feasible: marginals do not match the coupling");
  }
  Matrix out = gamma;
  const Vector rs = row_sums(out);
  for (std::size_t i = 0; i < out.rows(); ++i) {
    if (rs[i] > mu[i]) {
      const double s = mu[i] / rs[i];
      for (double& x : out.row(i)) x *= s;
    }
  }
  const Vector cs = col_sums(out);
  for (std::size_t j = 0; j < out.cols(); ++j) {
    if (cs[j] > nu[j]) {
      const double s = nu[j] / cs[j];
      for (std::size_t i = 0; i < out.rows(); ++i) out(i, j) *= s;
    }
  }
  const Vector rs2 = row_sums(out);
  const Vector cs2 = col_sums(out);
  Vector err_r(mu.size());
  Vector err_c(nu.size());
  double mass = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) mass += err_r[i] = std::max(0.0, mu[i] - rs2[i]);
  for (std::size_t j = 0; j < nu.size(); ++j) err_c[j] = std::max(0.0, nu[j] - cs2[j]);
  if (mass > 0.0) {
    for (std::size_t i = 0; i < out.rows(); ++i) {
      for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += err_r[i] * err_c[j] / mass;
    }
  }
  return out;
}

double gibbs_reconstruction_error(const TransportPlan& plan, const Matrix& cost) {
  if (!plan.gamma.same_shape(cost)) throw DimensionError("gibbs_reconstruction_error: shape mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < cost.rows(); ++i) {
    for (std::size_t j = 0; j < cost.cols(); ++j) {
      const double rebuilt = std::exp((plan.f[i] + plan.g[j] - cost(i, j)) / plan.lambda);
      const double stored = plan.gamma(i, j);
      const double denom = std::max(std::abs(stored), std::numeric_limits<double>::min());
      worst = std::max(worst, std::abs(rebuilt - stored) / denom);
    }
  }
  return worst;
}

std::vector<std::size_t> solve_assignment(const Matrix& cost) {
  const std::size_t n = cost.rows();
  if (cost.cols() != n) throw DimensionError("solve_assignment: cost matrix must be square");
  if (n == 0) return {};

  // Shortest augmenting path with row/column potentials (1-based; column 0
  // is the virtual root of each augmentation).
  constexpr double kInf = std::numeric_limits<double>::infinity();
  Vector u(n + 1, 0.0);
  Vector v(n + 1, 0.0);
  std::vector<std::size_t> row_of(n + 1, 0);
  std::vector<std::size_t> way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    row_of[0] = i;
    std::size_t j0 = 0;
    Vector min_slack(n + 1, kInf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = row_of[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double reduced = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (reduced < min_slack[j]) {
          min_slack[j] = reduced;
          way[j] = j0;
        }
        if (min_slack[j] < delta) {
          delta = min_slack[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[row_of[j]] += delta;
          v[j] -= delta;
        } else {
          min_slack[j] -= delta;
        }
      }
      j0 = j1;
    } while (row_of[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      row_of[j0] = row_of[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<std::size_t> assignment(n, 0);
  for (std::size_t j = 1; j <= n; ++j) assignment[row_of[j] - 1] = j - 1;
  return assignment;
}

ExactOt exact_ot(const OtProblem& problem) {
  problem.validate();
  if (!problem.is_uniform_square()) {
    throw UnsupportedInstance("exact_ot: only uniform square marginals are supported");
  }
  const std::size_t n = problem.cost.rows();
  if (n > kMaxExactOtSize) {
    throw UnsupportedInstance("exact_ot: N=" + std::to_string(n) + " exceeds " +
                              std::to_string(kMaxExactOtSize));
  }

  ExactOt out;
  out.assignment = solve_assignment(problem.cost);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += problem.cost(i, out.assignment[i]);

  if (n <= 6) {
    const double brute = brute_force_assignment_cost(problem.cost);
    const double scale = std::max(1.0, std::abs(brute));
    if (std::abs(brute - total) > 1e-12 * scale) {
      throw std::logic_error("exact_ot: assignment solver disagrees with enumeration");
    }
  }
  out.cost = total / static_cast<double>(n);
  return out;
}

constexpr double kBoundRoundoff = 1e-12;

LemmaReport check_lemma_bounds(const OtProblem& problem, const SinkhornSettings& settings) {
  problem.validate();
  if (!problem.is_uniform_square()) {
    throw UnsupportedInstance("check_lemma_bounds: requires uniform square marginals");
  }
  const std::size_t n = problem.cost.rows();
  const TransportPlan plan = sinkhorn_annealed(problem, settings);
  const ExactOt exact = exact_ot(problem);

  LemmaReport r;
  r.n = n;
  r.lambda = settings.lambda;
  r.iterations = plan.iterations_run;
  r.marginal_err = plan.marginal_err;

  double diag = 0.0;
  for (std::size_t i = 0; i < n; ++i) diag += problem.cost(i, i);
  diag /= static_cast<double>(n);

  r.upper_bound.name = "diagonal_candidate_upper_bound";
  r.upper_bound.value = entropic_objective(plan, problem.cost);
  r.upper_bound.bound = diag - settings.lambda * std::log(static_cast<double>(n));
  r.upper_bound.slack = r.upper_bound.bound - r.upper_bound.value;
  // When the diagonal is the optimal assignment the bound is tight up to
  // terms of order exp(−Δ/λ), below the roundoff of either side.
  r.upper_bound.pass = r.upper_bound.slack >= -kBoundRoundoff * std::max(1.0, std::abs(r.upper_bound.bound));

  r.lower_bound.name = "exact_ot_lower_bound";
  r.raw_transport_cost = transport_cost(plan, problem.cost);
  r.lower_bound.value =
      transport_cost(round_to_feasible(plan.gamma, problem.mu, problem.nu), problem.cost);
  r.lower_bound.bound = exact.cost;
  r.lower_bound.slack = r.lower_bound.value - r.lower_bound.bound;
  r.lower_bound.pass = r.lower_bound.slack >= 0.0;

  double min_gamma = std::numeric_limits<double>::infinity();
  double min_log = std::numeric_limits<double>::infinity();
  bool logs_finite = true;
  for (double x : plan.gamma.data()) min_gamma = std::min(min_gamma, x);
  for (double x : plan.log_gamma.data()) {
    logs_finite = logs_finite && std::isfinite(x);
    min_log = std::min(min_log, x);
  }
  r.positivity.name = "strict_positivity";
  r.positivity.value = min_gamma;
  r.positivity.bound = 0.0;
  r.positivity.slack = min_gamma;
  // A finite log γ_ij is a strictly positive entry even when exp underflows
  // to zero in double precision, which happens once costs exceed ~700λ.
  r.positivity.pass = logs_finite;
  r.min_log_gamma = min_log;
  r.gibbs_error = gibbs_reconstruction_error(plan, problem.cost);
  return r;
}

}  // namespace sinsim
