#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sinsim/matrix.hpp"
#include "sinsim/rng.hpp"

namespace sinsim {

enum class Activation { relu, tanh };

std::string to_string(Activation a);
Activation parse_activation(const std::string& name);

/// Fully connected network: widths[0] inputs → … → widths.back() outputs.
/// The activation follows every layer except the last.
struct MlpSpec {
  std::vector<std::size_t> widths;
  Activation activation = Activation::relu;

  std::size_t input_width() const { return widths.front(); }
  std::size_t output_width() const { return widths.back(); }
  std::size_t layer_count() const { return widths.size() - 1; }
  void validate() const;

  bool operator==(const MlpSpec&) const = default;
};

/// y = x · weight + bias with weight shaped (fan_in × fan_out).
struct DenseLayer {
  Matrix weight;
  Vector bias;

  bool operator==(const DenseLayer&) const = default;
};

using LayerStack = std::vector<DenseLayer>;

/// Encoder f (x → h) and projection head g (h → z) with Adam moments.
struct ModelParams {
  MlpSpec encoder_spec;
  MlpSpec head_spec;
  LayerStack encoder;
  LayerStack head;
  LayerStack encoder_m;
  LayerStack encoder_v;
  LayerStack head_m;
  LayerStack head_v;
  std::uint64_t step_count = 0;

  bool operator==(const ModelParams&) const = default;
};

/// Same layout as the parameters of a ModelParams.
struct ParamGrads {
  LayerStack encoder;
  LayerStack head;
};

/// Per-layer inputs and pre-activations cached by forward().
struct ForwardTrace {
  std::vector<Matrix> encoder_inputs;
  std::vector<Matrix> encoder_pre;
  std::vector<Matrix> head_inputs;
  std::vector<Matrix> head_pre;
};

struct ForwardResult {
  Matrix h;
  Matrix z;
  ForwardTrace trace;
};

/// Weights ~ U(−a, a) with a = sqrt(6 / fan_in) for relu networks and
/// sqrt(3 / fan_in) for tanh; biases zero; Adam moments zero.
ModelParams init_params(const MlpSpec& encoder, const MlpSpec& head, Rng& rng);

ForwardResult forward(const ModelParams& params, const Matrix& x);
/// Encoder only, no trace.
Matrix encode(const ModelParams& params, const Matrix& x);

/// Standalone MLP pass, shared by the encoder, head and probes.
Matrix mlp_forward(const LayerStack& layers, Activation act, const Matrix& x,
                   std::vector<Matrix>* inputs = nullptr, std::vector<Matrix>* pre = nullptr);
/// Reverse pass through one MLP; fills `grads` and returns the input gradient.
Matrix mlp_backward(const LayerStack& layers, Activation act, const std::vector<Matrix>& inputs,
                    const std::vector<Matrix>& pre, const Matrix& grad_out, LayerStack& grads);

/// Reverse-mode gradients for a loss with gradient `grad_z` at z and a direct
/// gradient `grad_h` at h, which is added to the signal coming back through
/// the head. An empty `grad_h` means no direct term.
ParamGrads backward(const ModelParams& params, const ForwardTrace& trace, const Matrix& grad_h,
                    const Matrix& grad_z);

struct AdamSettings {
  double lr = 1e-3;
  double weight_decay = 1e-6;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const;
};

/// One Adam step with bias correction. Weight decay is coupled: wd · param is
/// added to the gradient before the moment updates.
void adam_step(ModelParams& params, const ParamGrads& grads, const AdamSettings& settings);

/// Versioned binary checkpoint. Layout: 8-byte magic "SINSIMCK", u32 format
/// version, u32 header length, JSON header (specs, step count, layer shapes),
/// then every parameter and moment as little-endian IEEE-754 doubles. Loading
/// restores the exact bit patterns.
void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace sinsim
