#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "sinsim/batch.hpp"
#include "sinsim/matrix.hpp"
#include "sinsim/rng.hpp"

namespace sinsim {

struct Dataset {
  /// n × input_dim; image pixels are scaled to [0, 1].
  Matrix samples;
  /// Class ids in [0, num_classes). Only probes read these.
  std::vector<int> labels;
  int num_classes = 0;
  /// Side length for square images, 0 for plain vectors.
  std::size_t image_side = 0;

  std::size_t size() const { return samples.rows(); }
  void validate() const;
};

/// Rows [first, first + count) of `d`, clamped to its size.
Dataset slice(const Dataset& d, std::size_t first, std::size_t count);

/// Reads an IDX image file (magic 0x00000803, u8 pixels) and its IDX label
/// file (magic 0x00000801). Raises BadMagic, TruncatedFile or CountMismatch.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

/// Writes `d` as an IDX image/label pair, rounding pixels to the nearest
/// u8 after scaling by 255. Requires image_side > 0.
void save_idx(const Dataset& d, const std::filesystem::path& images,
              const std::filesystem::path& labels);

/// Isotropic unit-variance Gaussian clusters. The centre of class k sits on
/// axis (k mod dim) at distance (s/√2)(1 + √2·⌊k/dim⌋) from the origin, so
/// the closest two centres are exactly `separation` apart. Samples are
/// ordered class by class.
Dataset make_blobs(std::size_t n_per_class, std::size_t num_classes, std::size_t dim,
                   double separation, Rng& rng);

/// CSV with header x_0..x_{d-1},label and one row per sample.
void write_dataset_csv(const Dataset& d, const std::filesystem::path& path);

enum class AugmentKind { image, vector };

struct AugmentSpec {
  AugmentKind kind = AugmentKind::vector;
  double noise_sigma = 0.0;
  /// image: shift by up to this many pixels along each axis, zero padded.
  std::size_t shift_max_px = 0;
  /// image: probability of blanking one random rectangle.
  double erase_prob = 0.0;
  /// vector: multiply the view by (1 + U(−scale_jitter, scale_jitter)).
  double scale_jitter = 0.0;

  void validate() const;
};

/// Two independent draws of the augmentation chain applied to `sample`.
///
/// image: shift → additive Gaussian noise clamped to [0, 1] → random erase.
/// vector: additive Gaussian noise → multiplicative scale jitter.
/// Steps whose strength is zero consume no randomness.
std::pair<Vector, Vector> augment_pair(std::span<const double> sample, const AugmentSpec& spec,
                                       Rng& rng);

/// One shuffled pass over a sample matrix, cut into full batches of paired
/// views. A trailing partial batch is dropped. Augmentation randomness for
/// source row r in epoch e comes from derive_seed(epoch_key, {r}), where
/// `epoch_key` is drawn from the caller's generator, so batches can be built
/// in any order with identical results.
class EpochBatches {
 public:
  EpochBatches(const Matrix& samples, std::size_t batch_size, const AugmentSpec& spec, Rng& rng);

  std::size_t size() const { return order_.size() / batch_size_; }
  BatchPair batch(std::size_t k) const;
  /// Shuffled sample order for this epoch.
  const std::vector<std::size_t>& order() const { return order_; }

 private:
  const Matrix* samples_;
  std::size_t batch_size_;
  AugmentSpec spec_;
  std::vector<std::size_t> order_;
  std::uint64_t epoch_key_;
};

/// Materializes every batch of one epoch.
std::vector<BatchPair> batches(const Matrix& samples, std::size_t batch_size,
                               const AugmentSpec& spec, Rng& rng);

}  // namespace sinsim
