#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "sinsim/errors.hpp"
#include "sinsim/numerics.hpp"
#include "sinsim/pipeline.hpp"

namespace sinsim {
namespace {

namespace fs = std::filesystem;

RunConfig small_config() {
  RunConfig c;
  c.dataset.n_per_class = 48;
  c.dataset.test_per_class = 24;
  c.dataset.num_classes = 2;
  c.dataset.dim = 4;
  c.dataset.separation = 6.0;
  c.encoder_hidden = {16, 8};
  c.head_widths = {8, 4};
  c.batch_size = 16;
  c.epochs = 2;
  c.seed = 3;
  c.probe.steps = 100;
  return c;
}

std::string read_file(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("sinsim_test_" + name);
  fs::remove_all(p);
  return p;
}

TEST(Pretrain, ZeroEpochsReturnsInitialParams) {
  RunConfig c = small_config();
  c.epochs = 0;
  const TrainTest data = load_data(c);
  const PretrainResult r = pretrain(c, data.train);
  EXPECT_TRUE(r.log.steps.empty());
  EXPECT_EQ(r.params.step_count, 0u);
  c.epochs = 1;
  c.max_steps = 1;
  const PretrainResult one = pretrain(c, data.train);
  EXPECT_NE(one.params.encoder, r.params.encoder);
  EXPECT_EQ(one.log.steps.size(), 1u);
}

TEST(Pretrain, BetaZeroMatchesPlainContrastivePath) {
  for (RegularizeOn on : {RegularizeOn::h, RegularizeOn::z}) {
    RunConfig c = small_config();
    c.beta = 0.0;
    c.regularize_on = on;
    const TrainTest data = load_data(c);
    const PretrainResult a = pretrain(c, data.train);
    const PretrainResult b = pretrain_simclr(c, data.train);
    EXPECT_EQ(a.log, b.log);
    EXPECT_EQ(a.params, b.params);
    EXPECT_EQ(a.log.steps_csv(), b.log.steps_csv());
  }
}

TEST(Pretrain, PositiveBetaChangesTrajectory) {
  RunConfig c = small_config();
  const TrainTest data = load_data(c);
  const PretrainResult a = pretrain(c, data.train);
  const PretrainResult b = pretrain_simclr(c, data.train);
  EXPECT_NE(a.params.encoder, b.params.encoder);
}

TEST(Pretrain, LoggedTotalIsExactComposition) {
  RunConfig c = small_config();
  c.beta = 0.8;
  const TrainTest data = load_data(c);
  const PretrainResult r = pretrain(c, data.train);
  ASSERT_FALSE(r.log.steps.empty());
  std::uint64_t prev = 0;
  for (const auto& s : r.log.steps) {
    EXPECT_NEAR(s.total, s.nt_xent + c.beta * s.sinkhorn, 1e-12);
    EXPECT_TRUE(std::isfinite(s.total) && std::isfinite(s.marginal_err));
    EXPECT_EQ(s.step, prev + 1);
    prev = s.step;
  }
}

TEST(Pretrain, LossDecreasesOverEpochs) {
  RunConfig c = small_config();
  c.dataset.n_per_class = 128;
  c.dataset.separation = 6.0;
  c.epochs = 5;
  const TrainTest data = load_data(c);
  const PretrainResult r = pretrain(c, data.train);
  double first = 0, last = 0;
  int nf = 0, nl = 0;
  for (const auto& s : r.log.steps) {
    if (s.epoch == 1) first += s.total, ++nf;
    if (s.epoch == 5) last += s.total, ++nl;
  }
  EXPECT_LT(last / nl, first / nf);
}

TEST(Pretrain, Deterministic) {
  RunConfig c = small_config();
  c.probe.every_epochs = 1;
  const TrainTest data = load_data(c);
  const PretrainResult a = pretrain(c, data.train, &data.test);
  const PretrainResult b = pretrain(c, data.train, &data.test);
  EXPECT_EQ(a.log, b.log);
  EXPECT_EQ(a.params, b.params);
  EXPECT_EQ(a.log.probes.size(), 2u);
}

TEST(Pretrain, IgnoresTrainingLabels) {
  RunConfig c = small_config();
  const TrainTest data = load_data(c);
  Dataset shuffled = data.train;
  std::reverse(shuffled.labels.begin(), shuffled.labels.end());
  const PretrainResult a = pretrain(c, data.train);
  const PretrainResult b = pretrain(c, shuffled);
  EXPECT_EQ(a.params, b.params);
  EXPECT_EQ(a.log, b.log);
}

TEST(Pretrain, NonFiniteInputAbortsWithStep) {
  RunConfig c = small_config();
  TrainTest data = load_data(c);
  for (std::size_t i = 0; i < data.train.size(); ++i) data.train.samples(i, 0) = std::nan("");
  try {
    pretrain(c, data.train);
    FAIL() << "expected NonFiniteLoss";
  } catch (const NonFiniteLoss& e) {
    EXPECT_EQ(e.step(), 1u);
    EXPECT_EQ(e.term(), "h");
  }
}

TEST(Pretrain, RejectsDatasetSmallerThanABatch) {
  RunConfig c = small_config();
  TrainTest data = load_data(c);
  EXPECT_THROW(pretrain(c, slice(data.train, 0, 5)), DomainError);
}

Dataset two_blobs(std::size_t per, double sep, std::uint64_t seed) {
  Rng rng(seed);
  return make_blobs(per, 2, 2, sep, rng);
}

ModelParams identity_encoder(std::size_t dim) {
  ModelParams p;
  p.encoder_spec = {{dim, dim}, Activation::relu};
  p.head_spec = {{dim, 1}, Activation::relu};
  p.encoder = {{Matrix::identity(dim), Vector(dim, 0.0)}};
  p.head = {{Matrix(dim, 1, 1.0), Vector(1, 0.0)}};
  return p;
}

TEST(Probe, SeparableBlobsGivePerfectAccuracy) {
  const Dataset d = two_blobs(50, 50.0, 1);
  EXPECT_EQ(probe(identity_encoder(2), d, d, {}), 1.0);
  ProbeSettings mlp;
  mlp.kind = ProbeKind::mlp;
  mlp.hidden = 16;
  EXPECT_EQ(probe(identity_encoder(2), d, d, mlp), 1.0);
}

TEST(Probe, RandomTestLabelsGiveChance) {
  const Dataset train = two_blobs(200, 8.0, 2);
  Dataset test = two_blobs(200, 8.0, 3);
  Rng rng(4);
  for (std::size_t i = test.labels.size(); i > 1; --i) {
    std::swap(test.labels[i - 1], test.labels[rng.below(i)]);
  }
  EXPECT_NEAR(probe(identity_encoder(2), train, test, {}), 0.5, 0.1);
}

// Softmax regression written with explicit loops and its own standardisation.
double reference_logistic_accuracy(const Dataset& train, const Dataset& test, int steps, double lr) {
  const std::size_t n = train.size(), d = train.samples.cols(), k = train.num_classes;
  std::vector<double> mean(d, 0), sd(d, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) mean[j] += train.samples(i, j) / n;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) sd[j] += std::pow(train.samples(i, j) - mean[j], 2) / n;
  for (double& s : sd) s = std::sqrt(s);
  std::vector<std::vector<double>> w(d + 1, std::vector<double>(k, 0.0));
  auto feature = [&](const Dataset& ds, std::size_t i, std::size_t j) {
    return j == d ? 1.0 : (ds.samples(i, j) - mean[j]) / sd[j];
  };
  for (int t = 0; t < steps; ++t) {
    std::vector<std::vector<double>> grad(d + 1, std::vector<double>(k, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> logit(k, 0.0);
      for (std::size_t c = 0; c < k; ++c)
        for (std::size_t j = 0; j <= d; ++j) logit[c] += feature(train, i, j) * w[j][c];
      const double mx = *std::max_element(logit.begin(), logit.end());
      double z = 0;
      for (double& l : logit) z += (l = std::exp(l - mx));
      for (std::size_t c = 0; c < k; ++c) {
        const double r = logit[c] / z - (int(c) == train.labels[i] ? 1.0 : 0.0);
        for (std::size_t j = 0; j <= d; ++j) grad[j][c] += r * feature(train, i, j) / n;
      }
    }
    for (std::size_t j = 0; j <= d; ++j)
      for (std::size_t c = 0; c < k; ++c) w[j][c] -= lr * grad[j][c];
  }
  int hits = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    std::size_t best = 0;
    double best_v = -1e300;
    for (std::size_t c = 0; c < k; ++c) {
      double v = 0;
      for (std::size_t j = 0; j <= d; ++j) v += feature(test, i, j) * w[j][c];
      if (v > best_v) best_v = v, best = c;
    }
    hits += int(best) == test.labels[i];
  }
  return double(hits) / test.size();
}

TEST(Probe, RawInputsMatchIndependentLogisticRegression) {
  Rng a(5), b(6);
  const Dataset train = make_blobs(100, 4, 6, 2.0, a);
  const Dataset test = make_blobs(100, 4, 6, 2.0, b);
  const double ours = probe_features(train.samples, train.labels, test.samples, test.labels, 4, {});
  const double ref = reference_logistic_accuracy(train, test, 500, 0.1);
  EXPECT_NEAR(ours, ref, 0.02);
}

TEST(Probe, MissingClassIsAnError) {
  Dataset train = two_blobs(20, 5.0, 7);
  const Dataset test = train;
  train = slice(train, 0, 20);
  train.num_classes = 2;
  EXPECT_THROW(probe(identity_encoder(2), train, test, {}), DomainError);
}

TEST(Sweep, BaselineRowMatchesBetaZero) {
  RunConfig c = small_config();
  const auto rows = sweep(c, SweepAxis::beta, {0.0});
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].status, "baseline");
  EXPECT_EQ(rows[1].status, "ok");
  EXPECT_EQ(rows[0].probe_acc, rows[1].probe_acc);
  EXPECT_EQ(rows[0].nt_xent_final, rows[1].nt_xent_final);
  EXPECT_EQ(rows[0].seconds, 0.0);
}

TEST(Sweep, MoreIterationsLowerMarginalError) {
  RunConfig c = small_config();
  const auto rows = sweep(c, SweepAxis::iters, {1, 40});
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_LT(rows[1].marginal_err_final, rows[0].marginal_err_final);
}

TEST(Sweep, FailedRunBecomesErrorRow) {
  RunConfig c = small_config();
  const auto rows = sweep(c, SweepAxis::lambda, {-1.0, 0.05});
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].status, "error");
  EXPECT_FALSE(rows[0].error.empty());
  EXPECT_EQ(rows[1].status, "ok");
  const std::string csv = sweep_csv(rows);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "axis_value,probe_acc,nt_xent_final,sinkhorn_final,status,seconds");
  EXPECT_THROW(sweep(c, SweepAxis::beta, {}), DomainError);
}

TEST(Sweep, SeedsDependOnAxisAndValue) {
  EXPECT_NE(sweep_seed(1, SweepAxis::beta, 0.4), sweep_seed(1, SweepAxis::lambda, 0.4));
  EXPECT_NE(sweep_seed(1, SweepAxis::beta, 0.4), sweep_seed(1, SweepAxis::beta, 0.8));
  EXPECT_EQ(sweep_seed(1, SweepAxis::beta, 0.0), sweep_seed(1, SweepAxis::beta, -0.0));
}

TEST(Export, WritesOneRowPerSample) {
  const fs::path dir = temp_dir("export");
  Rng rng(8);
  const Dataset d = make_blobs(1, 3, 2, 1.0, rng);
  Rng init(9);
  const ModelParams p = init_params({{2, 5}, Activation::relu}, {{5, 2}, Activation::relu}, init);
  export_embeddings(p, d, dir / "a.csv");
  export_embeddings(p, d, dir / "b.csv");
  const std::string text = read_file(dir / "a.csv");
  EXPECT_EQ(text, read_file(dir / "b.csv"));
  std::istringstream is(text);
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "h_0,h_1,h_2,h_3,h_4,label");
  int rows = 0;
  while (std::getline(is, line)) {
    ++rows;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 5);
  }
  EXPECT_EQ(rows, 3);
  EXPECT_THROW(export_embeddings(p, d, "/proc/sinsim/x.csv"), IoError);
  fs::remove_all(dir);
}

TEST(TrainRun, WritesReproducibleArtifacts) {
  RunConfig c = small_config();
  c.output_dir = temp_dir("train_a");
  train_run(c);
  const std::string a = read_file(c.output_dir / "metrics.csv");
  const std::string ck = read_file(c.output_dir / "checkpoint.bin");
  EXPECT_EQ(a.substr(0, a.find('\n')), "step,epoch,nt_xent,sinkhorn,total,marginal_err");
  train_run(c);
  EXPECT_EQ(read_file(c.output_dir / "metrics.csv"), a);
  EXPECT_EQ(read_file(c.output_dir / "checkpoint.bin"), ck);
  EXPECT_EQ(load_checkpoint(c.output_dir / "checkpoint.bin").step_count, 12u);
  EXPECT_EQ(config_to_json(load_config(c.output_dir / "config.json")), config_to_json(c));
  fs::remove_all(c.output_dir);
}

}  // namespace
}  // namespace sinsim
