#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sinsim/data.hpp"
#include "sinsim/losses.hpp"
#include "sinsim/model.hpp"
#include "sinsim/ot.hpp"

namespace sinsim {

enum class DatasetKind { blobs, idx };
enum class ProbeKind { linear, mlp };

struct DatasetConfig {
  DatasetKind kind = DatasetKind::blobs;
  // blobs
  std::size_t n_per_class = 500;
  std::size_t test_per_class = 250;
  std::size_t num_classes = 4;
  std::size_t dim = 16;
  double separation = 4.0;
  // idx
  std::filesystem::path train_images;
  std::filesystem::path train_labels;
  std::filesystem::path test_images;
  std::filesystem::path test_labels;
  /// Keep only the first k samples; 0 keeps everything.
  std::size_t train_limit = 0;
  std::size_t test_limit = 0;
};

struct ProbeConfig {
  ProbeKind kind = ProbeKind::linear;
  std::size_t steps = 500;
  double lr = 0.1;
  std::size_t hidden = 128;
  /// Probe every k epochs during pretraining; 0 probes only at the end.
  std::size_t every_epochs = 0;
};

struct RunConfig {
  DatasetConfig dataset;
  std::vector<std::size_t> encoder_hidden = {256, 128};
  std::vector<std::size_t> head_widths = {64, 32};
  Activation activation = Activation::relu;
  double temperature = 0.5;
  double beta = 0.8;
  SinkhornSettings sinkhorn;
  RegularizeOn regularize_on = RegularizeOn::h;
  std::size_t epochs = 20;
  /// Stop after this many optimizer steps; 0 means no cap.
  std::size_t max_steps = 0;
  std::size_t batch_size = 64;
  double lr = 1e-3;
  double weight_decay = 1e-6;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "runs/default";
  /// Unset means the default chain for the dataset kind.
  std::optional<AugmentSpec> augment;
  ProbeConfig probe;

  void validate() const;
  MlpSpec encoder_spec(std::size_t input_dim) const;
  MlpSpec head_spec() const;
  AugmentSpec augment_for(const Dataset& d) const;
  NtXentSettings ntxent() const { return {temperature}; }
  AdamSettings adam() const;
};

/// Parses a JSON document. Missing keys keep their defaults; unknown keys,
/// wrong types and invalid values raise ConfigError.
RunConfig config_from_json(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);
/// Pretty-printed JSON with every field, parseable by config_from_json.
std::string config_to_json(const RunConfig& config);

std::string to_string(DatasetKind k);
std::string to_string(ProbeKind k);
std::string to_string(RegularizeOn r);
ProbeKind parse_probe_kind(const std::string& name);
RegularizeOn parse_regularize_on(const std::string& name);

}  // namespace sinsim
