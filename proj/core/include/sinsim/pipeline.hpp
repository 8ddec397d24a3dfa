#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sinsim/config.hpp"
#include "sinsim/data.hpp"
#include "sinsim/model.hpp"

namespace sinsim {

struct StepRecord {
  std::uint64_t step = 0;  ///< 1-based optimizer step
  std::size_t epoch = 0;   ///< 1-based
  double nt_xent = 0.0;
  double sinkhorn = 0.0;
  double total = 0.0;
  double marginal_err = 0.0;

  bool operator==(const StepRecord&) const = default;
};

struct ProbeRecord {
  std::size_t epoch = 0;
  double accuracy = 0.0;

  bool operator==(const ProbeRecord&) const = default;
};

struct MetricsLog {
  std::vector<StepRecord> steps;
  std::vector<ProbeRecord> probes;

  /// Header step,epoch,nt_xent,sinkhorn,total,marginal_err; doubles are
  /// written in shortest round-trip form.
  std::string steps_csv() const;
  /// Header epoch,accuracy.
  std::string probes_csv() const;
  /// Mean of each term over the last epoch that logged any step.
  StepRecord last_epoch_mean() const;

  bool operator==(const MetricsLog&) const = default;
};

struct TrainTest {
  Dataset train;
  Dataset test;
};

/// Builds the configured dataset. Blobs are generated from config.seed, IDX
/// files are read and truncated to the configured limits.
TrainTest load_data(const RunConfig& config);

struct PretrainResult {
  ModelParams params;
  MetricsLog log;
};

/// Self-supervised training: for each batch, forward both views, evaluate
/// nt_xent + β·sinkhorn, backpropagate and take one Adam step. Only
/// train.samples is read; labels are untouched. When `probe_test` is given and
/// config.probe.every_epochs > 0, a probe runs every that many epochs.
/// Raises NonFiniteLoss naming the step and the first non-finite term.
PretrainResult pretrain(const RunConfig& config, const Dataset& train,
                        const Dataset* probe_test = nullptr);

/// Plain contrastive training with no transport term in the gradient. The
/// transport cost is still evaluated and logged as a diagnostic, so a run
/// matches pretrain() with β = 0 step for step.
PretrainResult pretrain_simclr(const RunConfig& config, const Dataset& train,
                               const Dataset* probe_test = nullptr);

struct ProbeSettings {
  ProbeKind kind = ProbeKind::linear;
  std::size_t steps = 500;
  double lr = 0.1;
  std::size_t hidden = 128;
  std::uint64_t seed = 0;  ///< initialises the mlp probe

  static ProbeSettings from(const ProbeConfig& c, std::uint64_t seed);
};

/// config.probe with the mlp initialisation seed derived from config.seed.
ProbeSettings probe_settings(const RunConfig& config);

/// Test accuracy of a classifier trained by full-batch gradient descent on
/// features standardised with the training mean and deviation. Raises
/// DomainError if some class has no training sample.
double probe_features(const Matrix& train_x, const std::vector<int>& train_y,
                      const Matrix& test_x, const std::vector<int>& test_y, int num_classes,
                      const ProbeSettings& settings);

/// Frozen-encoder probe on h.
double probe(const ModelParams& params, const Dataset& train, const Dataset& test,
             const ProbeSettings& settings);

enum class SweepAxis { beta, lambda, iters };
std::string to_string(SweepAxis a);
SweepAxis parse_sweep_axis(const std::string& name);

struct SweepRow {
  double axis_value = 0.0;
  double probe_acc = 0.0;
  double nt_xent_final = 0.0;
  double sinkhorn_final = 0.0;
  double marginal_err_final = 0.0;
  std::string status;  ///< ok, baseline or error
  double seconds = 0.0;
  std::string error;
};

struct SweepOptions {
  /// Record wall time per row. Off by default so reports are reproducible.
  bool timings = false;
};

/// One fresh pretrain + probe per value with seed derive_seed(config.seed,
/// {axis, bits(value)}). The dataset is built once from config.seed. The
/// beta axis starts with a plain contrastive baseline row sharing the seed of
/// value 0. A failing run becomes an error row and the sweep continues.
std::vector<SweepRow> sweep(const RunConfig& config, SweepAxis axis,
                            const std::vector<double>& values, const SweepOptions& options = {});
std::uint64_t sweep_seed(std::uint64_t base, SweepAxis axis, double value);

/// Header axis_value,probe_acc,nt_xent_final,sinkhorn_final,status,seconds.
std::string sweep_csv(const std::vector<SweepRow>& rows);

/// CSV of encoder outputs: h_0..h_{d-1},label, one row per sample.
void export_embeddings(const ModelParams& params, const Dataset& dataset,
                       const std::filesystem::path& path);

struct TrainSummary {
  std::size_t steps = 0;
  double probe_acc = 0.0;
  StepRecord final_epoch;
};

/// load_data → pretrain → probe, writing metrics.csv, probes.csv,
/// checkpoint.bin and config.json under config.output_dir.
TrainSummary train_run(const RunConfig& config);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace sinsim
