// Acceptance run: one PASS/FAIL line per criterion. Expects to be started from
// the project root so the configs/ and data/ paths resolve.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "sinsim/config.hpp"
#include "sinsim/losses.hpp"
#include "sinsim/model.hpp"
#include "sinsim/numerics.hpp"
#include "sinsim/ot.hpp"
#include "sinsim/pipeline.hpp"
#include "sinsim/verify.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using namespace sinsim;
using sinsim::testing::central_difference;
using sinsim::testing::random_matrix;
using sinsim::testing::relative_error;
using sinsim::testing::resolved_entropic_value;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string read_file(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

const VerifyReport& battery() {
  static const VerifyReport report = run_verify_battery(0);
  return report;
}

bool has(const std::string& s, const char* part) { return s.find(part) != std::string::npos; }

// Checks from the (size, λ) grid, as opposed to the extra single cases.
bool battery_cell(const std::string& name) {
  for (std::size_t n : kBatterySizes) {
    if (has(name, ("[n=" + std::to_string(n) + ",").c_str())) return true;
  }
  return false;
}

Outcome exact_ot_agreement() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (std::uint64_t k = 0; k < 50; ++k) {
    Rng rng(derive_seed(1, {k}));
    const OtProblem prob = OtProblem::uniform(gaussian_sqdist_cost(8, 2, rng));
    const TransportPlan plan = sinkhorn_annealed(prob, {1e-3, 1'000'000, 1e-9});
    const double exact = exact_ot(prob).cost;
    worst = std::max(worst, std::abs(transport_cost(plan, prob.cost) - exact) / exact);
  }
  const double secs = seconds_since(t0);
  return {worst <= 0.01 && secs < 10.0,
          fmt("50 instances, max rel err %.3e (<= 1e-2), %.2f s (< 10 s)", worst, secs)};
}

Outcome positivity_and_gibbs() {
  double min_gamma = INFINITY, worst_gibbs = 0.0;
  bool pass = true;
  std::size_t cells = 0;
  for (const auto& c : battery().checks) {
    if (!battery_cell(c.name)) continue;
    if (has(c.name, "strict_positivity")) {
      ++cells;
      pass = pass && c.pass;
      min_gamma = std::min(min_gamma, c.value);
    } else if (has(c.name, "gibbs_reconstruction")) {
      pass = pass && c.pass;
      worst_gibbs = std::max(worst_gibbs, c.value);
    }
  }
  pass = pass && cells == 12;
  return {pass, fmt("%zu cells, min gamma %.3e (> 0), max Gibbs error %.3e (<= 1e-10)", cells,
                    min_gamma, worst_gibbs)};
}

Outcome bounds() {
  double upper = INFINITY, lower = INFINITY;
  bool pass = true;
  for (const auto& c : battery().checks) {
    if (!battery_cell(c.name)) continue;
    if (has(c.name, "diagonal_candidate_upper_bound")) {
      pass = pass && c.pass;
      upper = std::min(upper, c.slack);
    } else if (has(c.name, "exact_ot_lower_bound")) {
      pass = pass && c.pass;
      lower = std::min(lower, c.slack);
    }
  }
  return {pass, fmt("min slack upper %.3e, lower %.3e", upper, lower)};
}

Outcome product_limit() {
  Rng rng(4);
  Matrix c(16, 16);
  for (double& x : c.data()) x = rng.uniform();
  const OtProblem prob = OtProblem::uniform(c);
  const TransportPlan plan = sinkhorn(prob, {1e3, 10'000, 1e-12});
  double dev = 0.0;
  for (std::size_t i = 0; i < 16; ++i)
    for (std::size_t j = 0; j < 16; ++j)
      dev = std::max(dev, std::abs(plan.gamma(i, j) - prob.mu[i] * prob.nu[j]));
  return {dev <= 1e-4, fmt("max |gamma - mu nu^T| = %.3e (<= 1e-4)", dev)};
}

double model_backward_error() {
  Rng rng(5);
  const ModelParams p0 =
      init_params({{5, 7, 4}, Activation::tanh}, {{4, 6, 3}, Activation::tanh}, rng);
  const Matrix x = random_matrix(6, 5, rng);
  const Matrix wh = random_matrix(6, 4, rng);
  const Matrix wz = random_matrix(6, 3, rng);
  auto loss = [&](const ModelParams& p) {
    const ForwardResult r = forward(p, x);
    return frobenius(r.h, wh) + frobenius(r.z, wz);
  };
  const ParamGrads g = backward(p0, forward(p0, x).trace, wh, wz);
  double worst = 0.0;
  auto check = [&](const LayerStack& grads, bool encoder) {
    for (std::size_t l = 0; l < grads.size(); ++l) {
      auto an = grads[l].weight.data();
      for (std::size_t k = 0; k < an.size(); ++k) {
        ModelParams p = p0;
        double& w = (encoder ? p.encoder : p.head)[l].weight.data()[k];
        const double saved = w;
        w = saved + 1e-6;
        const double up = loss(p);
        w = saved - 1e-6;
        const double down = loss(p);
        const double fd = (up - down) / 2e-6;
        worst = std::max(worst, std::abs(an[k] - fd) / std::max(1.0, std::abs(fd)));
      }
    }
  };
  check(g.encoder, true);
  check(g.head, false);
  return worst;
}

Outcome gradients() {
  const auto t0 = Clock::now();
  double nt = 0.0, sk = 0.0;
  for (std::uint64_t inst = 0; inst < 20; ++inst) {
    Rng rng(derive_seed(5, {inst}));
    const std::size_t n = 4 + inst % 5;
    const Matrix z1 = random_matrix(n, 8, rng);
    const Matrix z2 = random_matrix(n, 8, rng);
    const LossValue lv = nt_xent(z1, z2, {0.5});
    nt = std::max(nt, relative_error(*lv.grad_z1, central_difference(
                                         [&](const Matrix& m) { return nt_xent(m, z2, {0.5}).value; },
                                         z1, 1e-5)));
    nt = std::max(nt, relative_error(*lv.grad_z2, central_difference(
                                         [&](const Matrix& m) { return nt_xent(z1, m, {0.5}).value; },
                                         z2, 1e-5)));
  }
  for (std::uint64_t inst = 0; inst < 20; ++inst) {
    Rng rng(derive_seed(6, {inst}));
    const Matrix h1 = random_matrix(5, 3, rng, 0.3);
    const Matrix h2 = random_matrix(5, 3, rng, 0.3);
    const LossValue lv = sinkhorn_loss(h1, h2, {0.05, 200000, 1e-12});
    sk = std::max(sk, relative_error(*lv.grad_h1,
                                     central_difference([&](const Matrix& m) {
                                       return resolved_entropic_value(m, h2, 0.05);
                                     }, h1, 1e-5)));
    sk = std::max(sk, relative_error(*lv.grad_h2,
                                     central_difference([&](const Matrix& m) {
                                       return resolved_entropic_value(h1, m, 0.05);
                                     }, h2, 1e-5)));
  }
  const double mb = model_backward_error();
  const double secs = seconds_since(t0);
  return {nt <= 1e-5 && sk <= 1e-3 && mb <= 1e-6 && secs < 60.0,
          fmt("nt_xent %.2e (<= 1e-5), sinkhorn %.2e (<= 1e-3), model %.2e (<= 1e-6), %.1f s (< 60 s)",
              nt, sk, mb, secs)};
}

Outcome beta_zero_reduction() {
  RunConfig c = load_config("configs/blobs.json");
  c.beta = 0.0;
  c.max_steps = 200;
  c.seed = 6;
  const TrainTest data = load_data(c);
  const PretrainResult a = pretrain(c, data.train);
  const PretrainResult b = pretrain_simclr(c, data.train);
  const std::string la = a.log.steps_csv(), lb = b.log.steps_csv();
  return {a.log.steps.size() == 200 && la == lb && a.params == b.params,
          fmt("%zu logged steps, logs %s, parameters %s", a.log.steps.size(),
              la == lb ? "bit-identical" : "differ", a.params == b.params ? "bit-identical" : "differ")};
}

Outcome directional_ablation() {
  const auto t0 = Clock::now();
  RunConfig base = load_config("configs/blobs.json");
  std::string detail;
  double sum_reg = 0.0, sum_plain = 0.0;
  bool each = true;
  for (std::uint64_t seed : {0, 1, 2}) {
    RunConfig c = base;
    c.seed = seed;
    const TrainTest data = load_data(c);
    const ProbeSettings ps = probe_settings(c);
    const double reg = probe(pretrain(c, data.train).params, data.train, data.test, ps);
    c.beta = 0.0;
    const double plain = probe(pretrain_simclr(c, data.train).params, data.train, data.test, ps);
    each = each && reg >= plain - 0.02;
    sum_reg += reg;
    sum_plain += plain;
    detail += fmt("seed %llu: %.4f vs %.4f; ", static_cast<unsigned long long>(seed), reg, plain);
  }
  const double secs = seconds_since(t0);
  const bool mean_ok = sum_reg / 3 >= sum_plain / 3;
  return {each && mean_ok && secs < 600.0,
          detail + fmt("mean %.4f vs %.4f, %.0f s (< 600 s)", sum_reg / 3, sum_plain / 3, secs)};
}

Outcome iteration_trend() {
  RunConfig c = load_config("configs/blobs.json");
  c.seed = 8;
  const auto rows = sweep(c, SweepAxis::iters, {1, 5, 40});
  bool ok = rows.size() == 3;
  std::string detail = "marginal_err_final:";
  for (std::size_t k = 0; k < rows.size(); ++k) {
    ok = ok && rows[k].status == "ok";
    if (k > 0) ok = ok && rows[k].marginal_err_final < rows[k - 1].marginal_err_final;
    detail += fmt(" iters=%g -> %.3e", rows[k].axis_value, rows[k].marginal_err_final);
  }
  return {ok, detail};
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "sinsim_acceptance_determinism";
  fs::remove_all(root);
  RunConfig c = load_config("configs/blobs.json");
  c.seed = 9;
  c.epochs = 3;
  bool train_same = true;
  c.output_dir = root / "run";
  const char* files[] = {"metrics.csv", "probes.csv", "config.json", "checkpoint.bin"};
  std::string first[4];
  for (int run = 0; run < 2; ++run) {
    train_run(c);
    for (int f = 0; f < 4; ++f) {
      const std::string text = read_file(c.output_dir / files[f]);
      if (run == 0) first[f] = text;
      else train_same = train_same && text == first[f];
    }
  }
  c.epochs = 2;
  const bool sweep_same = sweep_csv(sweep(c, SweepAxis::beta, {0.0, 0.8})) ==
                          sweep_csv(sweep(c, SweepAxis::beta, {0.0, 0.8}));
  const bool verify_same = battery().to_json() == run_verify_battery(0).to_json();
  fs::remove_all(root);
  return {train_same && sweep_same && verify_same,
          fmt("train artifacts %s, sweep CSV %s, verify JSON %s", train_same ? "identical" : "differ",
              sweep_same ? "identical" : "differ", verify_same ? "identical" : "differ")};
}

Outcome mnist_smoke() {
  const auto t0 = Clock::now();
  RunConfig c = load_config("configs/mnist_subset.json");
  c.seed = 0;
  const TrainTest data = load_data(c);
  if (data.train.size() != 2000 || data.test.size() != 1000) {
    return {false, fmt("expected a 2000/1000 subset, found %zu/%zu", data.train.size(),
                       data.test.size())};
  }
  const ProbeSettings ps = probe_settings(c);
  const double reg = probe(pretrain(c, data.train).params, data.train, data.test, ps);
  c.beta = 0.0;
  const double plain = probe(pretrain_simclr(c, data.train).params, data.train, data.test, ps);
  return {reg >= 0.80 && reg >= plain - 0.02,
          fmt("beta=0.8 %.4f (>= 0.80), beta=0 %.4f (reg >= plain - 0.02), %.0f s", reg, plain,
              seconds_since(t0))};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"sinkhorn vs exact transport", exact_ot_agreement},
      {"strict positivity and Gibbs form", positivity_and_gibbs},
      {"entropic upper and exact lower bounds", bounds},
      {"large-lambda product limit", product_limit},
      {"gradient suite", gradients},
      {"beta=0 reduction", beta_zero_reduction},
      {"directional ablation on blobs", directional_ablation},
      {"iteration-count trend", iteration_trend},
      {"determinism", determinism},
      {"MNIST subset smoke run", mnist_smoke},
  };
  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("criterion %zu %s: %s: %s\n", k + 1, o.pass ? "PASS" : "FAIL", criteria[k].first,
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
