#include "sinsim/verify.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sinsim/csv.hpp"
#include "sinsim/numerics.hpp"
#include "sinsim/ot.hpp"

namespace sinsim {

namespace {

constexpr double kConvergedTol = 1e-11;
constexpr std::size_t kConvergedMaxIters = 1'000'000;

std::string tagged(const std::string& name, std::size_t n, double lambda) {
  return name + "[n=" + std::to_string(n) + ",lambda=" + format_double(lambda) + "]";
}

VerifyCheck at_most(std::string name, double value, double bound) {
  const double slack = bound - value;
  return {std::move(name), slack >= 0.0, value, bound, slack};
}

VerifyCheck from_bound(const BoundCheck& b, std::size_t n, double lambda) {
  return {tagged(b.name, n, lambda), b.pass, b.value, b.bound, b.slack, true};
}

Matrix gaussian_points(std::size_t n, std::size_t dim, Rng& rng) {
  Matrix p(n, dim);
  for (double& x : p.data()) x = rng.normal();
  return p;
}

double total_mass(const Matrix& gamma) {
  double s = 0.0;
  for (double x : gamma.data()) s += x;
  return s;
}

double worst_checkpoint_increase(const std::vector<double>& errs) {
  double worst = 0.0;
  for (std::size_t k = 1; k < errs.size(); ++k) worst = std::max(worst, errs[k] - errs[k - 1]);
  return worst;
}

void battery_case(VerifyReport& report, std::size_t n, double lambda, Rng& rng) {
  const OtProblem problem = OtProblem::uniform(normalized_gaussian_cost(n, 2, rng));
  const SinkhornSettings settings{lambda, kConvergedMaxIters, kConvergedTol};
  const LemmaReport lemma = check_lemma_bounds(problem, settings);
  auto& c = report.checks;
  const std::size_t upper = c.size();
  c.push_back(from_bound(lemma.upper_bound, n, lambda));
  c.push_back(from_bound(lemma.lower_bound, n, lambda));
  c.push_back(from_bound(lemma.positivity, n, lambda));
  c.push_back(at_most(tagged("gibbs_reconstruction", n, lambda), lemma.gibbs_error, 1e-10));
  c.push_back(at_most(tagged("marginal_feasibility", n, lambda), lemma.marginal_err, 1e-8));
  c.back().gating = feasibility_gates(n, lambda);
  // An unconverged plan says nothing about the optimum's objective.
  if (!feasibility_gates(n, lambda) && lemma.marginal_err > 1e-8) c[upper].gating = false;

  // Fixed-budget run for the checkpoint diagnostic, so every size reports
  // the same number of checkpoints.
  const TransportPlan plan = sinkhorn(problem, {lambda, 10'000, 1e-9});
  c.push_back(at_most(tagged("total_mass", n, lambda), std::abs(total_mass(plan.gamma) - 1.0), 1e-9));
  c.push_back(at_most(tagged("monotone_checkpoints", n, lambda),
                      worst_checkpoint_increase(plan.checkpoint_errs), 1e-12));
}

}  // namespace

bool VerifyReport::all_pass() const { return failures() == 0; }

std::size_t VerifyReport::failures() const {
  return static_cast<std::size_t>(
      std::count_if(checks.begin(), checks.end(),
                    [](const VerifyCheck& c) { return c.gating && !c.pass; }));
}

std::string VerifyReport::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& c : checks) {
    arr.push_back({{"name", c.name},
                   {"pass", c.pass},
                   {"gating", c.gating},
                   {"value", c.value},
                   {"bound", c.bound},
                   {"slack", c.slack}});
  }
  const nlohmann::json doc = {
      {"seed", seed}, {"pass", all_pass()}, {"failures", failures()}, {"checks", arr}};
  return doc.dump(2) + "\n";
}

bool feasibility_gates(std::size_t n, double lambda) { return !(n <= 8 && lambda <= 0.01); }

Matrix normalized_gaussian_cost(std::size_t n, std::size_t dim, Rng& rng) {
  Matrix c = gaussian_sqdist_cost(n, dim, rng);
  const double top = max_abs(c);
  return top > 0.0 ? scale(c, 1.0 / top) : c;
}

Matrix gaussian_sqdist_cost(std::size_t n, std::size_t dim, Rng& rng) {
  const Matrix a = gaussian_points(n, dim, rng);
  const Matrix b = gaussian_points(n, dim, rng);
  return pairwise_sqdist(a, b);
}

VerifyReport run_verify_battery(std::uint64_t seed) {
  VerifyReport report;
  report.seed = seed;
  auto& c = report.checks;
  std::uint64_t case_id = 0;

  for (std::size_t n : kBatterySizes) {
    for (double lambda : kBatteryLambdas) {
      Rng rng(derive_seed(seed, {case_id++}));
      battery_case(report, n, lambda, rng);
    }
  }

  {
    // Large λ: entropy dominates and the plan approaches μνᵀ.
    Rng rng(derive_seed(seed, {case_id++}));
    const std::size_t n = 16;
    Matrix cost(n, n);
    for (double& x : cost.data()) x = rng.uniform();
    const TransportPlan plan = sinkhorn(OtProblem::uniform(cost), {1e3, 1000, 1e-12});
    double dev = 0.0;
    for (double g : plan.gamma.data()) dev = std::max(dev, std::abs(g - 1.0 / (n * n)));
    c.push_back(at_most("product_limit[n=16,lambda=1000]", dev, 1e-4));
  }

  {
    // Small λ: the entropic cost approaches the exact assignment cost.
    double worst = 0.0;
    for (int k = 0; k < 5; ++k) {
      Rng rng(derive_seed(seed, {case_id++}));
      const OtProblem problem = OtProblem::uniform(gaussian_sqdist_cost(8, 2, rng));
      const TransportPlan plan = sinkhorn_annealed(problem, {1e-3, kConvergedMaxIters, 1e-9});
      const double exact = exact_ot(problem).cost;
      worst = std::max(worst, std::abs(transport_cost(plan, problem.cost) - exact) / exact);
    }
    c.push_back(at_most("exact_limit[n=8,lambda=0.001]", worst, 0.01));
  }

  {
    // Adding a constant to every cost leaves the plan unchanged.
    Rng rng(derive_seed(seed, {case_id++}));
    const Matrix cost = normalized_gaussian_cost(8, 2, rng);
    const double shift = 2.5;
    Matrix shifted = cost;
    for (double& x : shifted.data()) x += shift;
    const SinkhornSettings s{0.05, 200, 0.0};
    const TransportPlan a = sinkhorn(OtProblem::uniform(cost), s);
    const TransportPlan b = sinkhorn(OtProblem::uniform(shifted), s);
    c.push_back(at_most("translation_plan[n=8,lambda=0.05]", max_abs_diff(a.gamma, b.gamma), 1e-10));
    const double delta = transport_cost(b, shifted) - transport_cost(a, cost);
    c.push_back(at_most("translation_cost[n=8,lambda=0.05]", std::abs(delta - shift), 1e-9));
  }

  {
    // Second view = first view + small noise: the diagonal is near optimal.
    Rng rng(derive_seed(seed, {case_id++}));
    const std::size_t n = 16;
    const double lambda = 0.05;
    const Matrix h1 = gaussian_points(n, 8, rng);
    Matrix h2 = h1;
    for (double& x : h2.data()) x += 0.01 * rng.normal();
    const LemmaReport r = check_lemma_bounds(OtProblem::uniform(pairwise_sqdist(h1, h2)),
                                             {lambda, kConvergedMaxIters, kConvergedTol});
    c.push_back(from_bound(r.upper_bound, n, lambda));
    c.push_back(at_most("paired_slack_tight[n=16,lambda=0.05]", r.upper_bound.slack,
                        lambda * std::log(static_cast<double>(n)) + 1e-9));
  }

  {
    const Matrix cost = Matrix::from_rows({{3.0}});
    const LemmaReport r = check_lemma_bounds(OtProblem::uniform(cost), {0.05, 40, 0.0});
    c.push_back(from_bound(r.upper_bound, 1, 0.05));
    c.push_back(from_bound(r.lower_bound, 1, 0.05));
    c.push_back(from_bound(r.positivity, 1, 0.05));
    c.push_back(at_most("single_point_zero_slack[n=1,lambda=0.05]",
                        std::abs(r.upper_bound.slack) + std::abs(r.lower_bound.slack), 0.0));
  }
  return report;
}

std::vector<EmdCompareRow> emd_compare(std::uint64_t seed, const std::vector<double>& lambdas,
                                       std::size_t n, std::size_t instances) {
  std::vector<EmdCompareRow> rows;
  for (std::size_t li = 0; li < lambdas.size(); ++li) {
    EmdCompareRow row;
    row.lambda = lambdas[li];
    row.n = n;
    row.instances = instances;
    for (std::size_t k = 0; k < instances; ++k) {
      // Same instances for every λ.
      Rng rng(derive_seed(seed, {k}));
      const OtProblem problem = OtProblem::uniform(gaussian_sqdist_cost(n, 2, rng));
      const TransportPlan plan = sinkhorn_annealed(problem, {row.lambda, kConvergedMaxIters, 1e-9});
      const double exact = exact_ot(problem).cost;
      const double rel = std::abs(transport_cost(plan, problem.cost) - exact) / exact;
      row.mean_rel_err += rel;
      row.max_rel_err = std::max(row.max_rel_err, rel);
      row.mean_iterations += static_cast<double>(plan.iterations_run);
    }
    if (instances > 0) {
      row.mean_rel_err /= static_cast<double>(instances);
      row.mean_iterations /= static_cast<double>(instances);
    }
    rows.push_back(row);
  }
  return rows;
}

std::string emd_compare_csv(const std::vector<EmdCompareRow>& rows) {
  std::ostringstream os;
  os << "lambda,n,instances,mean_rel_err,max_rel_err,mean_iterations\n";
  for (const auto& r : rows) {
    os << format_double(r.lambda) << ',' << r.n << ',' << r.instances << ','
       << format_double(r.mean_rel_err) << ',' << format_double(r.max_rel_err) << ','
       << format_double(r.mean_iterations) << '\n';
  }
  return os.str();
}

}  // namespace sinsim
