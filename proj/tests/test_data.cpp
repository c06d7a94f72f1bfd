#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <vector>

#include "doctest.h"
#include "lmdnn/data.hpp"
#include "lmdnn/errors.hpp"
#include "support.hpp"

using namespace lmdnn;

namespace {

struct IdxPair {
  std::filesystem::path images;
  std::filesystem::path labels;
};

// 3 tiny 2x2 images with known bytes
IdxPair write_tiny_idx(const std::filesystem::path& dir) {
  const std::vector<std::uint8_t> pixels = {0, 51, 102, 153, 204, 255, 0, 255, 10, 20, 30, 40};
  const std::vector<std::uint8_t> labels = {0, 9, 4};
  IdxPair paths{dir / "imgs", dir / "labs"};
  write_idx_images(paths.images, pixels, 3, 2, 2);
  write_idx_labels(paths.labels, labels);
  return paths;
}

void truncate_file(const std::filesystem::path& path, std::uintmax_t keep) {
  std::filesystem::resize_file(path, keep);
}

void patch_byte(const std::filesystem::path& path, long offset, std::uint8_t value) {
  std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
  f.seekp(offset);
  f.write(reinterpret_cast<const char*>(&value), 1);
}

}  // namespace

TEST_CASE("IDX files round-trip with scaling and one-based labels") {
  testsupport::TempDir tmp;
  const auto paths = write_tiny_idx(tmp.path());
  const auto ds = load_mnist_idx(paths.images, paths.labels);
  CHECK(ds.size() == 3);
  CHECK(ds.dim() == 4);
  CHECK(ds.num_classes == 10);
  CHECK(ds.feature_bound == 1.0);
  CHECK(ds.features(0, 0) == 0.0);
  CHECK(ds.features(0, 1) == doctest::Approx(51.0 / 255).epsilon(1e-15));
  CHECK(ds.features(1, 1) == 1.0);
  CHECK(ds.labels == std::vector<int>{1, 10, 5});
  CHECK_NOTHROW(ds.validate());

  const auto again = load_mnist_idx(paths.images, paths.labels);
  CHECK(again.features == ds.features);
  CHECK(again.labels == ds.labels);
}

TEST_CASE("IDX magic numbers are enforced with byte offsets") {
  testsupport::TempDir tmp;
  const auto paths = write_tiny_idx(tmp.path());
  // labels file where images belong: wrong magic at offset 0
  CHECK_THROWS_WITH_AS(load_mnist_idx(paths.labels, paths.labels),
                       doctest::Contains("byte 0"), DataError);
  CHECK_THROWS_WITH_AS(load_mnist_idx(paths.images, paths.images),
                       doctest::Contains("byte 0"), DataError);
}

TEST_CASE("IDX count mismatches name the offending offset") {
  testsupport::TempDir tmp;
  const auto paths = write_tiny_idx(tmp.path());
  patch_byte(paths.labels, 7, 2);  // label count 3 -> 2
  CHECK_THROWS_WITH_AS(load_mnist_idx(paths.images, paths.labels), doctest::Contains("byte 4"),
                       DataError);
}

TEST_CASE("truncated IDX files report the end-of-file position") {
  testsupport::TempDir tmp;
  const auto paths = write_tiny_idx(tmp.path());
  truncate_file(paths.images, 16 + 7);  // header plus not quite two images
  CHECK_THROWS_WITH_AS(load_mnist_idx(paths.images, paths.labels),
                       doctest::Contains("end of file"), DataError);

  const auto paths2 = write_tiny_idx(tmp.path());
  truncate_file(paths2.images, 10);  // inside the header
  CHECK_THROWS_AS(load_mnist_idx(paths2.images, paths2.labels), DataError);
}

TEST_CASE("label bytes outside 0..9 are rejected") {
  testsupport::TempDir tmp;
  const auto paths = write_tiny_idx(tmp.path());
  patch_byte(paths.labels, 8 + 1, 12);  // second label
  CHECK_THROWS_WITH_AS(load_mnist_idx(paths.images, paths.labels), doctest::Contains("12"),
                       DataError);
}

TEST_CASE("mean centering uses train statistics everywhere") {
  Dataset train;
  train.features = Matrix::from_rows({{1.0, 0.0}, {3.0, 0.5}, {2.0, 1.0}});
  train.labels = {1, 2, 1};
  train.num_classes = 2;
  train.feature_bound = 3.0;
  Dataset test;
  test.features = Matrix::from_rows({{2.0, 0.5}});
  test.labels = {2};
  test.num_classes = 2;
  test.feature_bound = 3.0;

  Dataset* others[] = {&test};
  per_feature_mean_center(train, others);
  CHECK(train.features(0, 0) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(train.features(1, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(train.features(2, 1) == doctest::Approx(0.5).epsilon(1e-12));
  // test moves by the train means, not its own
  CHECK(test.features(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(test.features(0, 1) == doctest::Approx(0.0).epsilon(1e-12));
  // bound covers the observed post-centering range
  CHECK(train.feature_bound >= 1.0);

  // a constant feature centers to all zeros
  Dataset flat;
  flat.features = Matrix::from_rows({{5.0}, {5.0}});
  flat.labels = {1, 2};
  flat.num_classes = 2;
  flat.feature_bound = 5.0;
  per_feature_mean_center(flat, {});
  CHECK(flat.features(0, 0) == 0.0);
  CHECK(flat.features(1, 0) == 0.0);
}

TEST_CASE("mean centering rejects mismatched widths") {
  Dataset train;
  train.features = Matrix::from_rows({{1.0, 2.0}});
  train.labels = {1};
  train.num_classes = 2;
  train.feature_bound = 2.0;
  Dataset other;
  other.features = Matrix::from_rows({{1.0}});
  other.labels = {1};
  other.num_classes = 2;
  other.feature_bound = 1.0;
  Dataset* others[] = {&other};
  CHECK_THROWS_AS(per_feature_mean_center(train, others), ShapeError);
}

TEST_CASE("blobs are deterministic, balanced, and clipped") {
  const auto a = synthetic_blobs(100, 4, 3, 0.5, 7);
  const auto b = synthetic_blobs(100, 4, 3, 0.5, 7);
  CHECK(a.features == b.features);
  CHECK(a.labels == b.labels);
  CHECK(a.num_classes == 3);
  CHECK(a.feature_bound == 3.0);
  CHECK_NOTHROW(a.validate());

  std::map<int, int> counts;
  for (int y : a.labels) ++counts[y];
  REQUIRE(counts.size() == 3);
  int lo = 100, hi = 0;
  for (const auto& [y, n] : counts) {
    lo = std::min(lo, n);
    hi = std::max(hi, n);
  }
  CHECK(hi - lo <= 1);

  for (std::size_t i = 0; i < a.features.size(); ++i) {
    CHECK(std::abs(a.features.data()[i]) <= 3.0);
  }

  const auto c = synthetic_blobs(100, 4, 3, 0.5, 8);
  CHECK_FALSE(a.features == c.features);
}

TEST_CASE("zero spread collapses blobs onto their centers") {
  const auto ds = synthetic_blobs(30, 3, 3, 0.0, 5);
  // every sample of a class sits exactly on that class's center
  std::map<int, std::vector<double>> first;
  for (long i = 0; i < ds.size(); ++i) {
    auto row = ds.features.row(static_cast<std::size_t>(i));
    const int y = ds.labels[static_cast<std::size_t>(i)];
    if (!first.count(y)) {
      first[y] = {row.begin(), row.end()};
      continue;
    }
    for (std::size_t j = 0; j < row.size(); ++j) CHECK(row[j] == first[y][j]);
  }
}

TEST_CASE("blob centers stay apart") {
  const auto ds = synthetic_blobs(40, 2, 4, 0.0, 13);
  std::map<int, std::vector<double>> centers;
  for (long i = 0; i < ds.size(); ++i) {
    auto row = ds.features.row(static_cast<std::size_t>(i));
    centers[ds.labels[static_cast<std::size_t>(i)]] = {row.begin(), row.end()};
  }
  REQUIRE(centers.size() == 4);
  for (const auto& [ya, a] : centers) {
    for (const auto& [yb, b] : centers) {
      if (ya >= yb) continue;
      double dist2 = 0.0;
      for (std::size_t j = 0; j < a.size(); ++j) dist2 += (a[j] - b[j]) * (a[j] - b[j]);
      CHECK(dist2 >= 1.0 - 1e-12);
    }
  }
}

TEST_CASE("blob generation validates its arguments") {
  CHECK_THROWS_AS(synthetic_blobs(2, 4, 3, 0.5, 1), ConfigError);  // m < K
  CHECK_THROWS_AS(synthetic_blobs(10, 0, 3, 0.5, 1), ConfigError);
  CHECK_THROWS_AS(synthetic_blobs(10, 4, 1, 0.5, 1), ConfigError);
  CHECK_THROWS_AS(synthetic_blobs(10, 4, 3, -0.5, 1), ConfigError);
}

TEST_CASE("synthetic digits look like the real tensors") {
  const auto ds = synthetic_digits(50, 3);
  CHECK(ds.size() == 50);
  CHECK(ds.dim() == 784);
  CHECK(ds.num_classes == 10);
  CHECK(ds.feature_bound == 1.0);
  CHECK_NOTHROW(ds.validate());
  for (std::size_t i = 0; i < ds.features.size(); ++i) {
    CHECK(ds.features.data()[i] >= 0.0);
    CHECK(ds.features.data()[i] <= 1.0);
  }
  std::map<int, int> counts;
  for (int y : ds.labels) ++counts[y];
  CHECK(counts.size() == 10);

  const auto again = synthetic_digits(50, 3);
  CHECK(again.features == ds.features);

  // images carry actual strokes: plenty of bright and dark pixels
  long bright = 0;
  for (std::size_t i = 0; i < ds.features.size(); ++i) {
    if (ds.features.data()[i] > 0.5) ++bright;
  }
  CHECK(bright > 50 * 20);
  CHECK(bright < static_cast<long>(ds.features.size()) / 2);
}

TEST_CASE("split cuts proportionally and preserves the multiset") {
  const auto ds = synthetic_blobs(100, 3, 2, 0.5, 17);
  const double fractions[] = {0.33, 0.33, 0.34};
  const auto parts = split(ds, fractions, 23);
  REQUIRE(parts.size() == 3);
  CHECK(parts[0].size() == 33);
  CHECK(parts[1].size() == 33);
  CHECK(parts[2].size() == 34);

  // union of the pieces is exactly the original multiset of rows
  std::multiset<std::vector<double>> original, recombined;
  for (long i = 0; i < ds.size(); ++i) {
    auto row = ds.features.row(static_cast<std::size_t>(i));
    original.insert(std::vector<double>(row.begin(), row.end()));
  }
  for (const auto& part : parts) {
    CHECK(part.num_classes == ds.num_classes);
    CHECK(part.feature_bound == ds.feature_bound);
    for (long i = 0; i < part.size(); ++i) {
      auto row = part.features.row(static_cast<std::size_t>(i));
      recombined.insert(std::vector<double>(row.begin(), row.end()));
    }
  }
  CHECK(original == recombined);
}

TEST_CASE("a single-fraction split is the identity") {
  const auto ds = synthetic_blobs(20, 3, 2, 0.5, 29);
  const double one[] = {1.0};
  const auto parts = split(ds, one, 99);
  REQUIRE(parts.size() == 1);
  CHECK(parts[0].features == ds.features);
  CHECK(parts[0].labels == ds.labels);
}

TEST_CASE("split is deterministic in the seed") {
  const auto ds = synthetic_blobs(50, 2, 2, 0.5, 31);
  const double fractions[] = {0.5, 0.5};
  const auto a = split(ds, fractions, 7);
  const auto b = split(ds, fractions, 7);
  CHECK(a[0].features == b[0].features);
  CHECK(a[1].labels == b[1].labels);
  const auto c = split(ds, fractions, 8);
  CHECK_FALSE(a[0].features == c[0].features);
}

TEST_CASE("split validates fractions") {
  const auto ds = synthetic_blobs(10, 2, 2, 0.5, 37);
  const double bad_sum[] = {0.5, 0.4};
  CHECK_THROWS_AS(split(ds, bad_sum, 1), ConfigError);
  const double negative[] = {1.5, -0.5};
  CHECK_THROWS_AS(split(ds, negative, 1), ConfigError);
  CHECK_THROWS_AS(split(ds, {}, 1), ConfigError);
}

TEST_CASE("subset slices rows and checks ranges") {
  const auto ds = synthetic_blobs(10, 2, 2, 0.5, 41);
  const auto head = subset(ds, 0, 4);
  CHECK(head.size() == 4);
  CHECK(head.features.row(0)[0] == ds.features.row(0)[0]);
  const auto tail = subset(ds, 6, 4);
  CHECK(tail.features.row(0)[1] == ds.features.row(6)[1]);
  CHECK(tail.labels[3] == ds.labels[9]);

  CHECK_THROWS_AS(subset(ds, 8, 4), ConfigError);
  CHECK_THROWS_AS(subset(ds, -1, 2), ConfigError);
  CHECK_THROWS_AS(subset(ds, 0, 0), ConfigError);
}

TEST_CASE("dataset validation catches inconsistencies") {
  Dataset ds;
  ds.features = Matrix::from_rows({{0.5, 0.5}});
  ds.labels = {1, 2};  // wrong count
  ds.num_classes = 2;
  ds.feature_bound = 1.0;
  CHECK_THROWS_AS(ds.validate(), ConfigError);
  ds.labels = {3};  // outside 1..K
  CHECK_THROWS_AS(ds.validate(), ConfigError);
  ds.labels = {1};
  CHECK_NOTHROW(ds.validate());
}
