#include "sinsim/pipeline.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "sinsim/csv.hpp"
#include "sinsim/errors.hpp"
#include "sinsim/losses.hpp"
#include "sinsim/numerics.hpp"

namespace sinsim {

namespace {

// Stream tags for derive_seed; each consumer of randomness gets its own stream.
constexpr std::uint64_t kTagTrainData = 1;
constexpr std::uint64_t kTagTestData = 2;
constexpr std::uint64_t kTagInit = 3;
constexpr std::uint64_t kTagShuffle = 4;
constexpr std::uint64_t kTagProbe = 5;

Matrix vstack(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() + b.rows(), a.cols());
  std::ranges::copy(a.data(), out.data().begin());
  std::ranges::copy(b.data(), out.data().begin() + static_cast<std::ptrdiff_t>(a.data().size()));
  return out;
}

Matrix rows_of(const Matrix& m, std::size_t first, std::size_t count) {
  Matrix out(count, m.cols());
  const auto src = m.data().subspan(first * m.cols(), count * m.cols());
  std::ranges::copy(src, out.data().begin());
  return out;
}

enum class Objective { sinsim, simclr };

void require_finite(double value, std::uint64_t step, const char* term) {
  if (!std::isfinite(value)) throw NonFiniteLoss(step, term);
}

PretrainResult run_pretrain(const RunConfig& config, const Dataset& train, const Dataset* probe_test,
                            Objective objective) {
  config.validate();
  if (train.size() < config.batch_size) {
    throw DomainError("pretrain: training set has " + std::to_string(train.size()) +
                      " samples, fewer than one batch of " + std::to_string(config.batch_size));
  }
  Rng init_rng(derive_seed(config.seed, {kTagInit}));
  PretrainResult out;
  out.params = init_params(config.encoder_spec(train.samples.cols()), config.head_spec(), init_rng);

  const AugmentSpec aug = config.augment_for(train);
  const NtXentSettings ntx = config.ntxent();
  const AdamSettings adam = config.adam();
  const ProbeSettings probing = probe_settings(config);
  Rng shuffle_rng(derive_seed(config.seed, {kTagShuffle}));

  bool done = false;
  for (std::size_t epoch = 1; epoch <= config.epochs && !done; ++epoch) {
    EpochBatches epoch_batches(train.samples, config.batch_size, aug, shuffle_rng);
    for (std::size_t k = 0; k < epoch_batches.size(); ++k) {
      const std::uint64_t step = out.params.step_count + 1;
      const BatchPair batch = epoch_batches.batch(k);
      const std::size_t n = batch.x1.rows();
      ForwardResult fw = forward(out.params, vstack(batch.x1, batch.x2));
      if (!all_finite(fw.h)) throw NonFiniteLoss(step, "h");
      if (!all_finite(fw.z)) throw NonFiniteLoss(step, "z");
      const Matrix h1 = rows_of(fw.h, 0, n);
      const Matrix h2 = rows_of(fw.h, n, n);
      const Matrix z1 = rows_of(fw.z, 0, n);
      const Matrix z2 = rows_of(fw.z, n, n);

      StepRecord rec;
      rec.step = step;
      rec.epoch = epoch;
      ParamGrads grads;
      if (objective == Objective::sinsim) {
        SinSimTerms terms;
        LossValue loss = sinsim_loss(h1, h2, z1, z2, config.beta, ntx, config.sinkhorn,
                                     config.regularize_on, &terms);
        rec.nt_xent = terms.nt_xent;
        rec.sinkhorn = terms.sinkhorn;
        rec.total = loss.value;
        rec.marginal_err = terms.marginal_err;
        require_finite(rec.nt_xent, step, "nt_xent");
        require_finite(rec.sinkhorn, step, "sinkhorn");
        require_finite(rec.total, step, "total");
        grads = backward(out.params, fw.trace, vstack(*loss.grad_h1, *loss.grad_h2),
                         vstack(*loss.grad_z1, *loss.grad_z2));
      } else {
        LossValue contrastive = nt_xent(z1, z2, ntx);
        const bool on_h = config.regularize_on == RegularizeOn::h;
        const LossValue diagnostic =
            on_h ? sinkhorn_loss(h1, h2, config.sinkhorn) : sinkhorn_loss(z1, z2, config.sinkhorn);
        rec.nt_xent = contrastive.value;
        rec.sinkhorn = diagnostic.value;
        rec.total = contrastive.value;
        rec.marginal_err = diagnostic.plan->marginal_err;
        require_finite(rec.nt_xent, step, "nt_xent");
        require_finite(rec.sinkhorn, step, "sinkhorn");
        grads = backward(out.params, fw.trace, Matrix{},
                         vstack(*contrastive.grad_z1, *contrastive.grad_z2));
      }
      adam_step(out.params, grads, adam);
      out.log.steps.push_back(rec);
      if (config.max_steps > 0 && out.params.step_count >= config.max_steps) {
        done = true;
        break;
      }
    }
    if (probe_test != nullptr && config.probe.every_epochs > 0 &&
        epoch % config.probe.every_epochs == 0) {
      out.log.probes.push_back({epoch, probe(out.params, train, *probe_test, probing)});
    }
  }
  return out;
}

Matrix standardise(const Matrix& x, const Vector& mean, const Vector& sd) {
  Matrix out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) = (x(i, j) - mean[j]) / sd[j];
  }
  return out;
}

// Softmax cross-entropy gradient w.r.t. logits, averaged over rows.
Matrix softmax_xent_grad(const Matrix& logits, const std::vector<int>& y) {
  Matrix g(logits.rows(), logits.cols());
  const double inv_n = 1.0 / static_cast<double>(logits.rows());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const auto row = logits.row(i);
    const double lse = logsumexp(row);
    for (std::size_t k = 0; k < row.size(); ++k) g(i, k) = std::exp(row[k] - lse) * inv_n;
    g(i, static_cast<std::size_t>(y[i])) -= inv_n;
  }
  return g;
}

double accuracy(const Matrix& logits, const std::vector<int>& y) {
  const auto pred = argmax_rows(logits);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < y.size(); ++i) hits += pred[i] == static_cast<std::size_t>(y[i]);
  return y.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(y.size());
}

}  // namespace

std::string MetricsLog::steps_csv() const {
  std::ostringstream os;
  os << "step,epoch,nt_xent,sinkhorn,total,marginal_err\n";
  for (const auto& r : steps) {
    os << r.step << ',' << r.epoch << ',' << format_double(r.nt_xent) << ','
       << format_double(r.sinkhorn) << ',' << format_double(r.total) << ','
       << format_double(r.marginal_err) << '\n';
  }
  return os.str();
}

std::string MetricsLog::probes_csv() const {
  std::ostringstream os;
  os << "epoch,accuracy\n";
  for (const auto& p : probes) os << p.epoch << ',' << format_double(p.accuracy) << '\n';
  return os.str();
}

StepRecord MetricsLog::last_epoch_mean() const {
  StepRecord mean;
  if (steps.empty()) return mean;
  const std::size_t epoch = steps.back().epoch;
  std::size_t count = 0;
  for (const auto& r : steps) {
    if (r.epoch != epoch) continue;
    mean.nt_xent += r.nt_xent;
    mean.sinkhorn += r.sinkhorn;
    mean.total += r.total;
    mean.marginal_err += r.marginal_err;
    ++count;
  }
  const double c = static_cast<double>(count);
  mean.step = steps.back().step;
  mean.epoch = epoch;
  mean.nt_xent /= c;
  mean.sinkhorn /= c;
  mean.total /= c;
  mean.marginal_err /= c;
  return mean;
}

TrainTest load_data(const RunConfig& config) {
  const auto& d = config.dataset;
  TrainTest out;
  if (d.kind == DatasetKind::blobs) {
    Rng train_rng(derive_seed(config.seed, {kTagTrainData}));
    Rng test_rng(derive_seed(config.seed, {kTagTestData}));
    out.train = make_blobs(d.n_per_class, d.num_classes, d.dim, d.separation, train_rng);
    out.test = make_blobs(d.test_per_class, d.num_classes, d.dim, d.separation, test_rng);
  } else {
    out.train = load_idx(d.train_images, d.train_labels);
    out.test = load_idx(d.test_images, d.test_labels);
    if (d.train_limit > 0) out.train = slice(out.train, 0, d.train_limit);
    if (d.test_limit > 0) out.test = slice(out.test, 0, d.test_limit);
    const int classes = std::max(out.train.num_classes, out.test.num_classes);
    out.train.num_classes = classes;
    out.test.num_classes = classes;
  }
  if (out.train.samples.cols() != out.test.samples.cols()) {
    throw DimensionError("train and test samples have different widths");
  }
  return out;
}

PretrainResult pretrain(const RunConfig& config, const Dataset& train, const Dataset* probe_test) {
  return run_pretrain(config, train, probe_test, Objective::sinsim);
}

PretrainResult pretrain_simclr(const RunConfig& config, const Dataset& train,
                               const Dataset* probe_test) {
  return run_pretrain(config, train, probe_test, Objective::simclr);
}

ProbeSettings ProbeSettings::from(const ProbeConfig& c, std::uint64_t seed) {
  ProbeSettings s;
  s.kind = c.kind;
  s.steps = c.steps;
  s.lr = c.lr;
  s.hidden = c.hidden;
  s.seed = seed;
  return s;
}

ProbeSettings probe_settings(const RunConfig& config) {
  return ProbeSettings::from(config.probe, derive_seed(config.seed, {kTagProbe}));
}

double probe_features(const Matrix& train_x, const std::vector<int>& train_y,
                      const Matrix& test_x, const std::vector<int>& test_y, int num_classes,
                      const ProbeSettings& settings) {
  if (train_x.rows() != train_y.size() || test_x.rows() != test_y.size()) {
    throw DimensionError("probe: feature and label counts differ");
  }
  if (train_x.cols() != test_x.cols()) throw DimensionError("probe: train/test feature widths differ");
  if (num_classes < 1) throw DomainError("probe: need at least one class");
  std::vector<std::size_t> counts(static_cast<std::size_t>(num_classes), 0);
  for (int y : train_y) {
    if (y < 0 || y >= num_classes) throw DomainError("probe: training label out of range");
    ++counts[static_cast<std::size_t>(y)];
  }
  for (int y : test_y) {
    if (y < 0 || y >= num_classes) throw DomainError("probe: test label out of range");
  }
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (counts[k] == 0) throw DomainError("probe: class " + std::to_string(k) + " has no training samples");
  }

  const std::size_t d = train_x.cols();
  const double n = static_cast<double>(train_x.rows());
  Vector mean = col_sums(train_x);
  for (double& m : mean) m /= n;
  Vector sd(d, 0.0);
  for (std::size_t i = 0; i < train_x.rows(); ++i) {
    for (std::size_t j = 0; j < d; ++j) sd[j] += (train_x(i, j) - mean[j]) * (train_x(i, j) - mean[j]);
  }
  for (double& s : sd) {
    s = std::sqrt(s / n);
    if (!(s > 1e-12)) s = 1.0;
  }
  const Matrix xtr = standardise(train_x, mean, sd);
  const Matrix xte = standardise(test_x, mean, sd);

  const auto k = static_cast<std::size_t>(num_classes);
  LayerStack layers;
  if (settings.kind == ProbeKind::linear) {
    layers.push_back({Matrix(d, k), Vector(k, 0.0)});
  } else {
    Rng rng(settings.seed);
    auto dense = [&](std::size_t in, std::size_t out) {
      const double limit = std::sqrt(6.0 / static_cast<double>(in));
      DenseLayer l{Matrix(in, out), Vector(out, 0.0)};
      for (double& w : l.weight.data()) w = rng.uniform(-limit, limit);
      return l;
    };
    layers.push_back(dense(d, settings.hidden));
    layers.push_back(dense(settings.hidden, k));
  }

  std::vector<Matrix> inputs;
  std::vector<Matrix> pre;
  LayerStack grads;
  for (std::size_t step = 0; step < settings.steps; ++step) {
    const Matrix logits = mlp_forward(layers, Activation::relu, xtr, &inputs, &pre);
    mlp_backward(layers, Activation::relu, inputs, pre, softmax_xent_grad(logits, train_y), grads);
    for (std::size_t l = 0; l < layers.size(); ++l) {
      axpy(-settings.lr, grads[l].weight, layers[l].weight);
      for (std::size_t j = 0; j < layers[l].bias.size(); ++j) {
        layers[l].bias[j] -= settings.lr * grads[l].bias[j];
      }
    }
  }
  return accuracy(mlp_forward(layers, Activation::relu, xte), test_y);
}

double probe(const ModelParams& params, const Dataset& train, const Dataset& test,
             const ProbeSettings& settings) {
  const int classes = std::max(train.num_classes, test.num_classes);
  return probe_features(encode(params, train.samples), train.labels, encode(params, test.samples),
                        test.labels, classes, settings);
}

std::string to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::beta: return "beta";
    case SweepAxis::lambda: return "lambda";
    case SweepAxis::iters: return "iters";
  }
  return "";
}

SweepAxis parse_sweep_axis(const std::string& name) {
  if (name == "beta") return SweepAxis::beta;
  if (name == "lambda") return SweepAxis::lambda;
  if (name == "iters") return SweepAxis::iters;
  throw DomainError("unknown sweep axis '" + name + "' (expected beta, lambda or iters)");
}

std::uint64_t sweep_seed(std::uint64_t base, SweepAxis axis, double value) {
  // +0.0 so that -0.0 and 0.0 name the same run.
  return derive_seed(base, {static_cast<std::uint64_t>(axis), std::bit_cast<std::uint64_t>(value + 0.0)});
}

std::vector<SweepRow> sweep(const RunConfig& config, SweepAxis axis,
                            const std::vector<double>& values, const SweepOptions& options) {
  if (values.empty()) throw DomainError("sweep: no values given");
  config.validate();
  const TrainTest data = load_data(config);

  auto run_one = [&](double value, bool baseline) {
    SweepRow row;
    row.axis_value = value;
    const auto start = std::chrono::steady_clock::now();
    try {
      RunConfig c = config;
      c.seed = sweep_seed(config.seed, axis, value);
      switch (axis) {
        case SweepAxis::beta: c.beta = value; break;
        case SweepAxis::lambda: c.sinkhorn.lambda = value; break;
        case SweepAxis::iters:
          if (!(value >= 1.0) || value != std::floor(value)) {
            throw DomainError("sweep: iteration counts must be positive integers");
          }
          c.sinkhorn.max_iters = static_cast<std::size_t>(value);
          break;
      }
      const PretrainResult run = baseline ? pretrain_simclr(c, data.train) : pretrain(c, data.train);
      const StepRecord last = run.log.last_epoch_mean();
      row.probe_acc = probe(run.params, data.train, data.test,
                            probe_settings(c));
      row.nt_xent_final = last.nt_xent;
      row.sinkhorn_final = last.sinkhorn;
      row.marginal_err_final = last.marginal_err;
      row.status = baseline ? "baseline" : "ok";
    } catch (const Error& e) {
      row.status = "error";
      row.error = e.what();
      row.probe_acc = row.nt_xent_final = row.sinkhorn_final = row.marginal_err_final = std::nan("");
    }
    if (options.timings) {
      row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
    return row;
  };

  std::vector<SweepRow> rows;
  if (axis == SweepAxis::beta) rows.push_back(run_one(0.0, true));
  for (double v : values) rows.push_back(run_one(v, false));
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os << "axis_value,probe_acc,nt_xent_final,sinkhorn_final,status,seconds\n";
  for (const auto& r : rows) {
    os << format_double(r.axis_value) << ',' << format_double(r.probe_acc) << ','
       << format_double(r.nt_xent_final) << ',' << format_double(r.sinkhorn_final) << ','
       << r.status << ',' << format_double(r.seconds) << '\n';
  }
  return os.str();
}

void export_embeddings(const ModelParams& params, const Dataset& dataset,
                       const std::filesystem::path& path) {
  dataset.validate();
  const Matrix h = encode(params, dataset.samples);
  std::ostringstream os;
  for (std::size_t k = 0; k < h.cols(); ++k) os << "h_" << k << ',';
  os << "label\n";
  for (std::size_t i = 0; i < h.rows(); ++i) {
    for (double x : h.row(i)) os << format_double(x) << ',';
    os << dataset.labels[i] << '\n';
  }
  write_text(path, os.str());
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << text;
  if (!os) throw IoError("failed writing " + path.string());
}

TrainSummary train_run(const RunConfig& config) {
  config.validate();
  const TrainTest data = load_data(config);
  const PretrainResult run = pretrain(config, data.train, &data.test);
  TrainSummary summary;
  summary.steps = run.log.steps.size();
  summary.final_epoch = run.log.last_epoch_mean();
  summary.probe_acc = probe(run.params, data.train, data.test,
                            probe_settings(config));
  MetricsLog log = run.log;
  if (log.probes.empty() || log.probes.back().epoch != summary.final_epoch.epoch) {
    log.probes.push_back({summary.final_epoch.epoch, summary.probe_acc});
  }
  const auto& dir = config.output_dir;
  write_text(dir / "metrics.csv", log.steps_csv());
  write_text(dir / "probes.csv", log.probes_csv());
  write_text(dir / "config.json", config_to_json(config));
  save_checkpoint(run.params, dir / "checkpoint.bin");
  return summary;
}

}  // namespace sinsim
