#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "lmdnn/matrix.hpp"

namespace lmdnn {

/// Labeled sample set: features in [-feature_bound, feature_bound]^d,
/// labels 1-based in {1..num_classes}. Immutable by convention after
/// construction; freely shareable across threads.
struct Dataset {
  Matrix features;          // m x d
  std::vector<int> labels;  // 1..num_classes
  int num_classes = 0;
  double feature_bound = 0.0;  // M

  long size() const { return static_cast<long>(features.rows()); }
  int dim() const { return static_cast<int>(features.cols()); }
  void validate() const;  // throws ConfigError on a broken invariant
};

/// Strict big-endian IDX reader. Pixel values are scaled to [0,1]
/// (feature_bound 1), labels are shifted to {1..10}. Format violations throw
/// DataError naming the byte offset.
Dataset load_mnist_idx(const std::filesystem::path& images_path,
                       const std::filesystem::path& labels_path);

/// IDX writers (fixture/synthetic-data support). `pixels` is count*rows*cols
/// bytes, row-major per image.
void write_idx_images(const std::filesystem::path& path, std::span<const std::uint8_t> pixels,
                      std::uint32_t count, std::uint32_t rows, std::uint32_t cols);
void write_idx_labels(const std::filesystem::path& path, std::span<const std::uint8_t> labels);

/// Subtract the per-feature mean of `train` from `train` and every dataset
/// in `others`; feature_bound becomes the observed max magnitude.
void per_feature_mean_center(Dataset& train, std::span<Dataset*> others);

/// K Gaussian clusters with seeded centers at least unit distance apart,
/// coordinates clipped to [-3,3], labels balanced within +-1.
Dataset synthetic_blobs(long m, int d, int num_classes, double spread, std::uint64_t seed);

/// Deterministic 28x28 digit-glyph images (d=784, K=10, values in [0,1]).
/// A desk-scale stand-in with the exact shape of the MNIST tensors.
Dataset synthetic_digits(long m, std::uint64_t seed);

/// Seeded permutation followed by contiguous cuts; piece sizes differ from
/// the exact proportions by less than one sample.
std::vector<Dataset> split(const Dataset& dataset, std::span<const double> fractions,
                           std::uint64_t seed);

/// Rows [offset, offset+count) as a new dataset.
Dataset subset(const Dataset& dataset, long offset, long count);

}  // namespace lmdnn
