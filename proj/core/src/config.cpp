#include "sinsim/config.hpp"

#include <algorithm>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sinsim/errors.hpp"

namespace sinsim {

namespace {

using nlohmann::json;

void reject_unknown(const json& j, std::initializer_list<const char*> allowed,
                    const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(),
                                   [&](const char* a) { return key == a; });
    if (!known) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

void read_path(const json& j, const char* key, std::filesystem::path& out,
               const std::string& where) {
  std::string s = out.string();
  read(j, key, s, where);
  out = s;
}

template <typename Parse, typename T>
void read_enum(const json& j, const char* key, T& out, const std::string& where, Parse parse) {
  if (!j.contains(key)) return;
  std::string s;
  read(j, key, s, where);
  try {
    out = parse(s);
  } catch (const Error& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

DatasetKind parse_dataset_kind(const std::string& name) {
  if (name == "blobs") return DatasetKind::blobs;
  if (name == "idx") return DatasetKind::idx;
  throw DomainError("unknown dataset kind '" + name + "'");
}

AugmentKind parse_augment_kind(const std::string& name) {
  if (name == "image") return AugmentKind::image;
  if (name == "vector") return AugmentKind::vector;
  throw DomainError("unknown augmentation kind '" + name + "'");
}

void parse_dataset(const json& j, DatasetConfig& d) {
  const std::string w = "dataset";
  reject_unknown(j,
                 {"kind", "n_per_class", "test_per_class", "num_classes", "dim", "separation",
                  "train_images", "train_labels", "test_images", "test_labels", "train_limit",
                  "test_limit"},
                 w);
  read_enum(j, "kind", d.kind, w, parse_dataset_kind);
  read(j, "n_per_class", d.n_per_class, w);
  read(j, "test_per_class", d.test_per_class, w);
  read(j, "num_classes", d.num_classes, w);
  read(j, "dim", d.dim, w);
  read(j, "separation", d.separation, w);
  read_path(j, "train_images", d.train_images, w);
  read_path(j, "train_labels", d.train_labels, w);
  read_path(j, "test_images", d.test_images, w);
  read_path(j, "test_labels", d.test_labels, w);
  read(j, "train_limit", d.train_limit, w);
  read(j, "test_limit", d.test_limit, w);
}

AugmentSpec parse_augment(const json& j) {
  const std::string w = "augment";
  reject_unknown(j, {"kind", "noise_sigma", "shift_max_px", "erase_prob", "scale_jitter"}, w);
  AugmentSpec a;
  read_enum(j, "kind", a.kind, w, parse_augment_kind);
  read(j, "noise_sigma", a.noise_sigma, w);
  read(j, "shift_max_px", a.shift_max_px, w);
  read(j, "erase_prob", a.erase_prob, w);
  read(j, "scale_jitter", a.scale_jitter, w);
  return a;
}

json augment_json(const AugmentSpec& a) {
  return {{"kind", a.kind == AugmentKind::image ? "image" : "vector"},
          {"noise_sigma", a.noise_sigma},
          {"shift_max_px", a.shift_max_px},
          {"erase_prob", a.erase_prob},
          {"scale_jitter", a.scale_jitter}};
}

}  // namespace

std::string to_string(DatasetKind k) { return k == DatasetKind::blobs ? "blobs" : "idx"; }
std::string to_string(ProbeKind k) { return k == ProbeKind::linear ? "linear" : "mlp"; }
std::string to_string(RegularizeOn r) { return r == RegularizeOn::h ? "h" : "z"; }

ProbeKind parse_probe_kind(const std::string& name) {
  if (name == "linear") return ProbeKind::linear;
  if (name == "mlp") return ProbeKind::mlp;
  throw DomainError("unknown probe kind '" + name + "'");
}

RegularizeOn parse_regularize_on(const std::string& name) {
  if (name == "h") return RegularizeOn::h;
  if (name == "z") return RegularizeOn::z;
  throw DomainError("regularize_on must be 'h' or 'z', got '" + name + "'");
}

void RunConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  const auto& d = dataset;
  if (d.kind == DatasetKind::blobs) {
    if (d.n_per_class < 1 || d.test_per_class < 1 || d.num_classes < 1 || d.dim < 1) {
      fail("dataset: blob counts and dim must be >= 1");
    }
    if (!(d.separation > 0.0)) fail("dataset.separation must be > 0");
  } else if (d.train_images.empty() || d.train_labels.empty() || d.test_images.empty() ||
             d.test_labels.empty()) {
    fail("dataset: idx datasets need train/test image and label paths");
  }
  if (encoder_hidden.empty()) fail("encoder_hidden must list at least one width");
  if (head_widths.empty()) fail("head_widths must list at least one width");
  for (auto w : encoder_hidden) if (w < 1) fail("encoder_hidden widths must be >= 1");
  for (auto w : head_widths) if (w < 1) fail("head_widths must be >= 1");
  if (!(temperature > 0.0)) fail("temperature must be > 0");
  if (!(beta >= 0.0)) fail("beta must be >= 0");
  try {
    sinkhorn.validate();
    adam().validate();
    if (augment) augment->validate();
  } catch (const Error& e) {
    fail(e.what());
  }
  if (batch_size < 2) fail("batch_size must be >= 2");
  if (probe.steps < 1) fail("probe.steps must be >= 1");
  if (!(probe.lr > 0.0)) fail("probe.lr must be > 0");
  if (probe.hidden < 1) fail("probe.hidden must be >= 1");
}

MlpSpec RunConfig::encoder_spec(std::size_t input_dim) const {
  MlpSpec s;
  s.widths.push_back(input_dim);
  s.widths.insert(s.widths.end(), encoder_hidden.begin(), encoder_hidden.end());
  s.activation = activation;
  return s;
}

MlpSpec RunConfig::head_spec() const {
  MlpSpec s;
  s.widths.push_back(encoder_hidden.back());
  s.widths.insert(s.widths.end(), head_widths.begin(), head_widths.end());
  s.activation = activation;
  return s;
}

AugmentSpec RunConfig::augment_for(const Dataset& d) const {
  if (augment) return *augment;
  AugmentSpec a;
  if (d.image_side > 0) {
    a.kind = AugmentKind::image;
    a.noise_sigma = 0.1;
    a.shift_max_px = 2;
    a.erase_prob = 0.25;
  } else {
    a.kind = AugmentKind::vector;
    a.noise_sigma = 0.5;
    a.scale_jitter = 0.2;
  }
  return a;
}

AdamSettings RunConfig::adam() const {
  AdamSettings a;
  a.lr = lr;
  a.weight_decay = weight_decay;
  return a;
}

RunConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  const std::string w = "config";
  reject_unknown(j,
                 {"dataset", "encoder_hidden", "head_widths", "activation", "temperature", "beta",
                  "sinkhorn", "regularize_on", "epochs", "max_steps", "batch_size", "lr",
                  "weight_decay", "seed", "output_dir", "augment", "probe"},
                 w);
  RunConfig c;
  if (j.contains("dataset")) parse_dataset(j.at("dataset"), c.dataset);
  read(j, "encoder_hidden", c.encoder_hidden, w);
  read(j, "head_widths", c.head_widths, w);
  read_enum(j, "activation", c.activation, w, parse_activation);
  read(j, "temperature", c.temperature, w);
  read(j, "beta", c.beta, w);
  if (j.contains("sinkhorn")) {
    const auto& s = j.at("sinkhorn");
    reject_unknown(s, {"lambda", "max_iters", "tol"}, "sinkhorn");
    read(s, "lambda", c.sinkhorn.lambda, "sinkhorn");
    read(s, "max_iters", c.sinkhorn.max_iters, "sinkhorn");
    read(s, "tol", c.sinkhorn.tol, "sinkhorn");
  }
  read_enum(j, "regularize_on", c.regularize_on, w, parse_regularize_on);
  read(j, "epochs", c.epochs, w);
  read(j, "max_steps", c.max_steps, w);
  read(j, "batch_size", c.batch_size, w);
  read(j, "lr", c.lr, w);
  read(j, "weight_decay", c.weight_decay, w);
  read(j, "seed", c.seed, w);
  read_path(j, "output_dir", c.output_dir, w);
  if (j.contains("augment") && !j.at("augment").is_null()) c.augment = parse_augment(j.at("augment"));
  if (j.contains("probe")) {
    const auto& p = j.at("probe");
    reject_unknown(p, {"kind", "steps", "lr", "hidden", "every_epochs"}, "probe");
    read_enum(p, "kind", c.probe.kind, "probe", parse_probe_kind);
    read(p, "steps", c.probe.steps, "probe");
    read(p, "lr", c.probe.lr, "probe");
    read(p, "hidden", c.probe.hidden, "probe");
    read(p, "every_epochs", c.probe.every_epochs, "probe");
  }
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return config_from_json(ss.str());
}

std::string config_to_json(const RunConfig& c) {
  const auto& d = c.dataset;
  json j = {
      {"dataset",
       {{"kind", to_string(d.kind)},
        {"n_per_class", d.n_per_class},
        {"test_per_class", d.test_per_class},
        {"num_classes", d.num_classes},
        {"dim", d.dim},
        {"separation", d.separation},
        {"train_images", d.train_images.string()},
        {"train_labels", d.train_labels.string()},
        {"test_images", d.test_images.string()},
        {"test_labels", d.test_labels.string()},
        {"train_limit", d.train_limit},
        {"test_limit", d.test_limit}}},
      {"encoder_hidden", c.encoder_hidden},
      {"head_widths", c.head_widths},
      {"activation", to_string(c.activation)},
      {"temperature", c.temperature},
      {"beta", c.beta},
      {"sinkhorn",
       {{"lambda", c.sinkhorn.lambda}, {"max_iters", c.sinkhorn.max_iters}, {"tol", c.sinkhorn.tol}}},
      {"regularize_on", to_string(c.regularize_on)},
      {"epochs", c.epochs},
      {"max_steps", c.max_steps},
      {"batch_size", c.batch_size},
      {"lr", c.lr},
      {"weight_decay", c.weight_decay},
      {"seed", c.seed},
      {"output_dir", c.output_dir.string()},
      {"augment", c.augment ? augment_json(*c.augment) : json(nullptr)},
      {"probe",
       {{"kind", to_string(c.probe.kind)},
        {"steps", c.probe.steps},
        {"lr", c.probe.lr},
        {"hidden", c.probe.hidden},
        {"every_epochs", c.probe.every_epochs}}},
  };
  return j.dump(2) + "\n";
}

}  // namespace sinsim
