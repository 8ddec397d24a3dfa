#include "sinsim/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>

#include "sinsim/csv.hpp"
#include "sinsim/errors.hpp"

namespace sinsim {

namespace {

constexpr std::uint32_t kIdxImageMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

std::uint32_t big_endian_u32(const std::vector<unsigned char>& bytes, std::size_t offset,
                             const std::filesystem::path& path) {
  if (bytes.size() < offset + 4) throw TruncatedFile("truncated IDX header in " + path.string());
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void put_big_endian_u32(std::ostream& os, std::uint32_t v) {
  const std::array<char, 4> b = {static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                                 static_cast<char>(v >> 8), static_cast<char>(v)};
  os.write(b.data(), b.size());
}

std::size_t square_side(std::size_t length) {
  const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(length))));
  return side * side == length ? side : 0;
}

void augment_image(Vector& view, std::size_t side, const AugmentSpec& spec, Rng& rng) {
  if (spec.shift_max_px > 0) {
    const auto span = 2 * spec.shift_max_px + 1;
    const auto dx = static_cast<long>(rng.below(span)) - static_cast<long>(spec.shift_max_px);
    const auto dy = static_cast<long>(rng.below(span)) - static_cast<long>(spec.shift_max_px);
    Vector shifted(view.size(), 0.0);
    const auto s = static_cast<long>(side);
    for (long r = 0; r < s; ++r) {
      for (long c = 0; c < s; ++c) {
        const long src_r = r - dy;
        const long src_c = c - dx;
        if (src_r >= 0 && src_r < s && src_c >= 0 && src_c < s) {
          shifted[static_cast<std::size_t>(r * s + c)] = view[static_cast<std::size_t>(src_r * s + src_c)];
        }
      }
    }
    view = std::move(shifted);
  }
  if (spec.noise_sigma > 0.0) {
    for (double& px : view) px = std::clamp(px + spec.noise_sigma * rng.normal(), 0.0, 1.0);
  }
  if (spec.erase_prob > 0.0 && rng.uniform() < spec.erase_prob) {
    const std::size_t max_extent = std::max<std::size_t>(1, side / 2);
    const std::size_t h = 1 + rng.below(max_extent);
    const std::size_t w = 1 + rng.below(max_extent);
    const std::size_t top = rng.below(side - h + 1);
    const std::size_t left = rng.below(side - w + 1);
    for (std::size_t r = top; r < top + h; ++r) {
      for (std::size_t c = left; c < left + w; ++c) view[r * side + c] = 0.0;
    }
  }
}

void augment_vector(Vector& view, const AugmentSpec& spec, Rng& rng) {
  if (spec.noise_sigma > 0.0) {
    for (double& x : view) x += spec.noise_sigma * rng.normal();
  }
  if (spec.scale_jitter > 0.0) {
    const double factor = 1.0 + rng.uniform(-spec.scale_jitter, spec.scale_jitter);
    for (double& x : view) x *= factor;
  }
}

}  // namespace

void Dataset::validate() const {
  if (labels.size() != samples.rows()) {
    throw CountMismatch("dataset has " + std::to_string(samples.rows()) + " samples but " +
                        std::to_string(labels.size()) + " labels");
  }
  for (int y : labels) {
    if (y < 0 || y >= num_classes) throw DomainError("dataset label out of range");
  }
}

Dataset slice(const Dataset& d, std::size_t first, std::size_t count) {
  first = std::min(first, d.size());
  count = std::min(count, d.size() - first);
  Dataset out;
  out.num_classes = d.num_classes;
  out.image_side = d.image_side;
  out.samples = Matrix(count, d.samples.cols());
  for (std::size_t i = 0; i < count; ++i) {
    std::ranges::copy(d.samples.row(first + i), out.samples.row(i).begin());
  }
  out.labels.assign(d.labels.begin() + static_cast<std::ptrdiff_t>(first),
                    d.labels.begin() + static_cast<std::ptrdiff_t>(first + count));
  return out;
}

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
  const auto img = read_file(images);
  const auto lab = read_file(labels);

  if (big_endian_u32(img, 0, images) != kIdxImageMagic) {
    throw BadMagic("expected IDX image magic 0x00000803 in " + images.string());
  }
  if (big_endian_u32(lab, 0, labels) != kIdxLabelMagic) {
    throw BadMagic("expected IDX label magic 0x00000801 in " + labels.string());
  }
  const std::size_t n = big_endian_u32(img, 4, images);
  const std::size_t rows = big_endian_u32(img, 8, images);
  const std::size_t cols = big_endian_u32(img, 12, images);
  const std::size_t n_labels = big_endian_u32(lab, 4, labels);
  if (n != n_labels) {
    throw CountMismatch(images.string() + " holds " + std::to_string(n) + " images but " +
                        labels.string() + " holds " + std::to_string(n_labels) + " labels");
  }
  const std::size_t pixels = rows * cols;
  constexpr std::size_t kImageHeader = 16;
  constexpr std::size_t kLabelHeader = 8;
  if (img.size() < kImageHeader + n * pixels) throw TruncatedFile("truncated pixel data in " + images.string());
  if (lab.size() < kLabelHeader + n) throw TruncatedFile("truncated label data in " + labels.string());

  Dataset d;
  d.image_side = rows == cols ? rows : 0;
  d.samples = Matrix(n, pixels);
  auto dst = d.samples.data();
  for (std::size_t k = 0; k < n * pixels; ++k) dst[k] = img[kImageHeader + k] / 255.0;
  d.labels.resize(n);
  int max_label = -1;
  for (std::size_t i = 0; i < n; ++i) {
    d.labels[i] = lab[kLabelHeader + i];
    max_label = std::max(max_label, d.labels[i]);
  }
  d.num_classes = max_label + 1;
  return d;
}

void save_idx(const Dataset& d, const std::filesystem::path& images,
              const std::filesystem::path& labels) {
  if (d.image_side == 0) throw DomainError("save_idx: dataset is not a square image set");
  std::ofstream img(images, std::ios::binary | std::ios::trunc);
  std::ofstream lab(labels, std::ios::binary | std::ios::trunc);
  if (!img || !lab) throw IoError("save_idx: cannot open output files");
  put_big_endian_u32(img, kIdxImageMagic);
  put_big_endian_u32(img, static_cast<std::uint32_t>(d.size()));
  put_big_endian_u32(img, static_cast<std::uint32_t>(d.image_side));
  put_big_endian_u32(img, static_cast<std::uint32_t>(d.image_side));
  for (double px : d.samples.data()) {
    img.put(static_cast<char>(std::lround(std::clamp(px, 0.0, 1.0) * 255.0)));
  }
  put_big_endian_u32(lab, kIdxLabelMagic);
  put_big_endian_u32(lab, static_cast<std::uint32_t>(d.size()));
  for (int y : d.labels) lab.put(static_cast<char>(y));
  if (!img || !lab) throw IoError("save_idx: write failed");
}

Dataset make_blobs(std::size_t n_per_class, std::size_t num_classes, std::size_t dim,
                   double separation, Rng& rng) {
  if (n_per_class < 1 || num_classes < 1 || dim < 1) {
    throw DomainError("make_blobs: counts and dim must be >= 1");
  }
  if (!(separation > 0.0)) throw DomainError("make_blobs: separation must be > 0");

  Dataset d;
  d.num_classes = static_cast<int>(num_classes);
  d.samples = Matrix(n_per_class * num_classes, dim);
  d.labels.resize(n_per_class * num_classes);
  const double base = separation / std::sqrt(2.0);
  for (std::size_t k = 0; k < num_classes; ++k) {
    const std::size_t axis = k % dim;
    const double radius = base * (1.0 + std::sqrt(2.0) * static_cast<double>(k / dim));
    for (std::size_t s = 0; s < n_per_class; ++s) {
      const std::size_t i = k * n_per_class + s;
      auto row = d.samples.row(i);
      for (double& x : row) x = rng.normal();
      row[axis] += radius;
      d.labels[i] = static_cast<int>(k);
    }
  }
  return d;
}

void write_dataset_csv(const Dataset& d, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string());
  for (std::size_t k = 0; k < d.samples.cols(); ++k) os << "x_" << k << ',';
  os << "label\n";
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (double x : d.samples.row(i)) os << format_double(x) << ',';
    os << d.labels[i] << '\n';
  }
  if (!os) throw IoError("failed writing " + path.string());
}

void AugmentSpec::validate() const {
  if (!(noise_sigma >= 0.0)) throw DomainError("augment: noise_sigma must be >= 0");
  if (!(erase_prob >= 0.0 && erase_prob <= 1.0)) throw DomainError("augment: erase_prob must be in [0, 1]");
  if (!(scale_jitter >= 0.0)) throw DomainError("augment: scale_jitter must be >= 0");
}

std::pair<Vector, Vector> augment_pair(std::span<const double> sample, const AugmentSpec& spec,
                                       Rng& rng) {
  spec.validate();
  std::size_t side = 0;
  if (spec.kind == AugmentKind::image) {
    side = square_side(sample.size());
    if (side == 0) {
      throw DimensionError("augment_pair: image augmentation needs a square image, got length " +
                           std::to_string(sample.size()));
    }
  }
  std::pair<Vector, Vector> views{Vector(sample.begin(), sample.end()),
                                  Vector(sample.begin(), sample.end())};
  for (Vector* view : {&views.first, &views.second}) {
    if (spec.kind == AugmentKind::image) {
      augment_image(*view, side, spec, rng);
    } else {
      augment_vector(*view, spec, rng);
    }
  }
  return views;
}

EpochBatches::EpochBatches(const Matrix& samples, std::size_t batch_size, const AugmentSpec& spec,
                           Rng& rng)
    : samples_(&samples), batch_size_(batch_size), spec_(spec) {
  if (batch_size < 2) throw DomainError("batches: batch_size must be >= 2");
  spec_.validate();
  order_.resize(samples.rows());
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  for (std::size_t i = order_.size(); i > 1; --i) {
    std::swap(order_[i - 1], order_[rng.below(i)]);
  }
  epoch_key_ = rng.next_u64();
}

BatchPair EpochBatches::batch(std::size_t k) const {
  if (k >= size()) throw DimensionError("EpochBatches: batch index out of range");
  const std::size_t d = samples_->cols();
  BatchPair b;
  b.x1 = Matrix(batch_size_, d);
  b.x2 = Matrix(batch_size_, d);
  b.pair_index.resize(batch_size_);
  for (std::size_t r = 0; r < batch_size_; ++r) {
    const std::size_t src = order_[k * batch_size_ + r];
    Rng rng(derive_seed(epoch_key_, {src}));
    auto [v1, v2] = augment_pair(samples_->row(src), spec_, rng);
    std::ranges::copy(v1, b.x1.row(r).begin());
    std::ranges::copy(v2, b.x2.row(r).begin());
    b.pair_index[r] = src;
  }
  return b;
}

std::vector<BatchPair> batches(const Matrix& samples, std::size_t batch_size,
                               const AugmentSpec& spec, Rng& rng) {
  EpochBatches epoch(samples, batch_size, spec, rng);
  std::vector<BatchPair> out;
  out.reserve(epoch.size());
  for (std::size_t k = 0; k < epoch.size(); ++k) out.push_back(epoch.batch(k));
  return out;
}

}  // namespace sinsim
