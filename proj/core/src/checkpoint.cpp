#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <nlohmann/json.hpp>

#include "sinsim/errors.hpp"
#include "sinsim/model.hpp"

namespace sinsim {

namespace {

constexpr char kMagic[8] = {'S', 'I', 'N', 'S', 'I', 'M', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

using nlohmann::json;

json spec_json(const MlpSpec& s) {
  return json{{"widths", s.widths}, {"activation", to_string(s.activation)}};
}

MlpSpec spec_from_json(const json& j) {
  MlpSpec s;
  s.widths = j.at("widths").get<std::vector<std::size_t>>();
  s.activation = parse_activation(j.at("activation").get<std::string>());
  s.validate();
  return s;
}

json shapes_json(const LayerStack& layers) {
  json arr = json::array();
  for (const auto& l : layers) arr.push_back({l.weight.rows(), l.weight.cols()});
  return arr;
}

// Parameters, then first moments, then second moments; encoder before head.
template <typename Params>
auto ordered_stacks(Params& p) {
  return std::array{&p.encoder, &p.head, &p.encoder_m, &p.head_m, &p.encoder_v, &p.head_v};
}

void write_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t read_u32(std::istream& is) {
  std::uint32_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw TruncatedFile("checkpoint: truncated header");
  return v;
}

void write_doubles(std::ostream& os, std::span<const double> xs) {
  os.write(reinterpret_cast<const char*>(xs.data()),
           static_cast<std::streamsize>(xs.size() * sizeof(double)));
}

void read_doubles(std::istream& is, std::span<double> xs) {
  if (!is.read(reinterpret_cast<char*>(xs.data()),
               static_cast<std::streamsize>(xs.size() * sizeof(double)))) {
    throw TruncatedFile("checkpoint: truncated parameter payload");
  }
}

LayerStack shaped_stack(const MlpSpec& spec) {
  LayerStack out;
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    out.push_back({Matrix(spec.widths[l], spec.widths[l + 1]), Vector(spec.widths[l + 1], 0.0)});
  }
  return out;
}

}  // namespace

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
  const json header = {
      {"format", "sinsim-checkpoint"},
      {"encoder", spec_json(params.encoder_spec)},
      {"head", spec_json(params.head_spec)},
      {"step_count", params.step_count},
      {"encoder_shapes", shapes_json(params.encoder)},
      {"head_shapes", shapes_json(params.head)},
      {"payload", "params,m,v; encoder then head; weight row-major then bias; f64 little-endian"},
  };
  const std::string text = header.dump();

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path.string());
  os.write(kMagic, sizeof kMagic);
  write_u32(os, kVersion);
  write_u32(os, static_cast<std::uint32_t>(text.size()));
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const LayerStack* stack : ordered_stacks(params)) {
    for (const auto& layer : *stack) {
      write_doubles(os, layer.weight.data());
      write_doubles(os, layer.bias);
    }
  }
  if (!os) throw IoError("failed writing checkpoint: " + path.string());
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path.string());
  char magic[sizeof kMagic] = {};
  if (!is.read(magic, sizeof magic)) throw TruncatedFile("checkpoint: truncated magic");
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw BadMagic("not a sinsim checkpoint");
  const std::uint32_t version = read_u32(is);
  if (version != kVersion) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  }
  const std::uint32_t header_len = read_u32(is);
  std::string text(header_len, '\0');
  if (!is.read(text.data(), header_len)) throw TruncatedFile("checkpoint: truncated header");

  ModelParams p;
  try {
    const json header = json::parse(text);
    p.encoder_spec = spec_from_json(header.at("encoder"));
    p.head_spec = spec_from_json(header.at("head"));
    p.step_count = header.at("step_count").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint: bad header: ") + e.what());
  }
  p.encoder = shaped_stack(p.encoder_spec);
  p.head = shaped_stack(p.head_spec);
  p.encoder_m = p.encoder;
  p.encoder_v = p.encoder;
  p.head_m = p.head;
  p.head_v = p.head;
  for (LayerStack* stack : ordered_stacks(p)) {
    for (auto& layer : *stack) {
      read_doubles(is, layer.weight.data());
      read_doubles(is, layer.bias);
    }
  }
  if (is.peek() != std::char_traits<char>::eof()) {
    throw FormatError("checkpoint: trailing bytes after payload");
  }
  return p;
}

}  // namespace sinsim
