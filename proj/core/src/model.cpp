#include "sinsim/model.hpp"

#include <cmath>

#include "sinsim/errors.hpp"
#include "sinsim/numerics.hpp"

namespace sinsim {

namespace {

double activate(Activation act, double x) {
  // Written so that NaN passes through relu instead of becoming 0.
  return act == Activation::relu ? (x < 0.0 ? 0.0 : x) : std::tanh(x);
}

double activate_grad(Activation act, double pre) {
  if (act == Activation::relu) return pre > 0.0 ? 1.0 : 0.0;
  const double t = std::tanh(pre);
  return 1.0 - t * t;
}

LayerStack init_stack(const MlpSpec& spec, Rng& rng) {
  LayerStack layers;
  layers.reserve(spec.layer_count());
  const double gain = spec.activation == Activation::relu ? 6.0 : 3.0;
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    const std::size_t fan_in = spec.widths[l];
    const std::size_t fan_out = spec.widths[l + 1];
    const double limit = std::sqrt(gain / static_cast<double>(fan_in));
    DenseLayer layer{Matrix(fan_in, fan_out), Vector(fan_out, 0.0)};
    for (double& w : layer.weight.data()) w = rng.uniform(-limit, limit);
    layers.push_back(std::move(layer));
  }
  return layers;
}

LayerStack zeros_like(const LayerStack& layers) {
  LayerStack out;
  out.reserve(layers.size());
  for (const auto& l : layers) {
    out.push_back({Matrix(l.weight.rows(), l.weight.cols()), Vector(l.bias.size(), 0.0)});
  }
  return out;
}

void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m,
                 std::span<double> v, const AdamSettings& s, double correction1,
                 double correction2) {
  for (std::size_t k = 0; k < param.size(); ++k) {
    const double g = grad[k] + s.weight_decay * param[k];
    m[k] = s.beta1 * m[k] + (1.0 - s.beta1) * g;
    v[k] = s.beta2 * v[k] + (1.0 - s.beta2) * g * g;
    const double m_hat = m[k] / correction1;
    const double v_hat = v[k] / correction2;
    param[k] -= s.lr * m_hat / (std::sqrt(v_hat) + s.eps);
  }
}

void adam_stack(LayerStack& params, const LayerStack& grads, LayerStack& m, LayerStack& v,
                const AdamSettings& s, double c1, double c2) {
  if (grads.size() != params.size()) throw DimensionError("adam_step: gradient layer count mismatch");
  for (std::size_t l = 0; l < params.size(); ++l) {
    if (!grads[l].weight.same_shape(params[l].weight) ||
        grads[l].bias.size() != params[l].bias.size()) {
      throw DimensionError("adam_step: gradient shape mismatch in layer " + std::to_string(l));
    }
    adam_update(params[l].weight.data(), grads[l].weight.data(), m[l].weight.data(),
                v[l].weight.data(), s, c1, c2);
    adam_update(params[l].bias, grads[l].bias, m[l].bias, v[l].bias, s, c1, c2);
  }
}

}  // namespace

std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  throw DomainError("unknown activation '" + name + "'");
}

void MlpSpec::validate() const {
  if (widths.size() < 2) throw DomainError("MlpSpec: need at least input and output widths");
  for (std::size_t w : widths) {
    if (w < 1) throw DomainError("MlpSpec: every width must be >= 1");
  }
}

ModelParams init_params(const MlpSpec& encoder, const MlpSpec& head, Rng& rng) {
  encoder.validate();
  head.validate();
  if (head.input_width() != encoder.output_width()) {
    throw DimensionError("init_params: head input width " + std::to_string(head.input_width()) +
                         " != encoder output width " + std::to_string(encoder.output_width()));
  }
  ModelParams p;
  p.encoder_spec = encoder;
  p.head_spec = head;
  p.encoder = init_stack(encoder, rng);
  p.head = init_stack(head, rng);
  p.encoder_m = zeros_like(p.encoder);
  p.encoder_v = zeros_like(p.encoder);
  p.head_m = zeros_like(p.head);
  p.head_v = zeros_like(p.head);
  return p;
}

Matrix mlp_forward(const LayerStack& layers, Activation act, const Matrix& x,
                   std::vector<Matrix>* inputs, std::vector<Matrix>* pre) {
  if (layers.empty()) throw DimensionError("mlp_forward: no layers");
  if (x.cols() != layers.front().weight.rows()) {
    throw DimensionError("mlp_forward: input has " + std::to_string(x.cols()) +
                         " columns, network expects " +
                         std::to_string(layers.front().weight.rows()));
  }
  if (inputs) inputs->clear();
  if (pre) pre->clear();
  Matrix a = x;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Matrix y = matmul(a, layers[l].weight);
    add_row_vector(y, layers[l].bias);
    if (inputs) inputs->push_back(std::move(a));
    const bool last = l + 1 == layers.size();
    if (last) {
      if (pre) pre->push_back(y);
      a = std::move(y);
    } else {
      Matrix out(y.rows(), y.cols());
      auto src = y.data();
      auto dst = out.data();
      for (std::size_t k = 0; k < src.size(); ++k) dst[k] = activate(act, src[k]);
      if (pre) pre->push_back(std::move(y));
      a = std::move(out);
    }
  }
  return a;
}

Matrix mlp_backward(const LayerStack& layers, Activation act, const std::vector<Matrix>& inputs,
                    const std::vector<Matrix>& pre, const Matrix& grad_out, LayerStack& grads) {
  if (inputs.size() != layers.size() || pre.size() != layers.size()) {
    throw DimensionError("mlp_backward: trace does not match the network");
  }
  if (!grad_out.same_shape(pre.back())) throw DimensionError("mlp_backward: output gradient shape");
  grads.assign(layers.size(), DenseLayer{});
  Matrix delta = grad_out;
  for (std::size_t l = layers.size(); l-- > 0;) {
    if (l + 1 < layers.size()) {
      auto d = delta.data();
      auto y = pre[l].data();
      for (std::size_t k = 0; k < d.size(); ++k) d[k] *= activate_grad(act, y[k]);
    }
    grads[l].weight = matmul_tn(inputs[l], delta);
    grads[l].bias = col_sums(delta);
    delta = matmul_nt(delta, layers[l].weight);
  }
  return delta;
}

ForwardResult forward(const ModelParams& params, const Matrix& x) {
  ForwardResult r;
  r.h = mlp_forward(params.encoder, params.encoder_spec.activation, x, &r.trace.encoder_inputs,
                    &r.trace.encoder_pre);
  r.z = mlp_forward(params.head, params.head_spec.activation, r.h, &r.trace.head_inputs,
                    &r.trace.head_pre);
  return r;
}

Matrix encode(const ModelParams& params, const Matrix& x) {
  return mlp_forward(params.encoder, params.encoder_spec.activation, x);
}

ParamGrads backward(const ModelParams& params, const ForwardTrace& trace, const Matrix& grad_h,
                    const Matrix& grad_z) {
  ParamGrads g;
  Matrix dh = mlp_backward(params.head, params.head_spec.activation, trace.head_inputs,
                           trace.head_pre, grad_z, g.head);
  if (!grad_h.empty()) {
    if (!grad_h.same_shape(dh)) throw DimensionError("backward: grad_h shape does not match h");
    axpy(1.0, grad_h, dh);
  }
  mlp_backward(params.encoder, params.encoder_spec.activation, trace.encoder_inputs,
               trace.encoder_pre, dh, g.encoder);
  return g;
}

void AdamSettings::validate() const {
  if (!(lr >= 0.0)) throw DomainError("adam: lr must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw DomainError("adam: betas must lie in [0, 1)");
  }
  if (!(eps > 0.0)) throw DomainError("adam: eps must be > 0");
  if (!(weight_decay >= 0.0)) throw DomainError("adam: weight decay must be >= 0");
}

void adam_step(ModelParams& params, const ParamGrads& grads, const AdamSettings& settings) {
  settings.validate();
  const auto t = static_cast<double>(params.step_count + 1);
  const double c1 = 1.0 - std::pow(settings.beta1, t);
  const double c2 = 1.0 - std::pow(settings.beta2, t);
  adam_stack(params.encoder, grads.encoder, params.encoder_m, params.encoder_v, settings, c1, c2);
  adam_stack(params.head, grads.head, params.head_m, params.head_v, settings, c1, c2);
  ++params.step_count;
}

}  // namespace sinsim
