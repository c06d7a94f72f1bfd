#include "lmdnn/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "lmdnn/errors.hpp"
#include "lmdnn/rng.hpp"

namespace lmdnn {

void Dataset::validate() const {
  if (size() < 1) throw ConfigError("dataset must contain at least one sample");
  if (labels.size() != features.rows()) {
    throw ConfigError("dataset label count does not match feature rows");
  }
  if (num_classes < 2) throw ConfigError("dataset needs num_classes >= 2");
  for (int label : labels) {
    if (label < 1 || label > num_classes) {
      throw ConfigError("dataset label " + std::to_string(label) + " outside {1.." +
                        std::to_string(num_classes) + "}");
    }
  }
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (!(std::abs(features.data()[i]) <= feature_bound + 1e-9)) {
      throw ConfigError("dataset feature exceeds the declared bound " +
                        std::to_string(feature_bound));
    }
  }
}

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

class IdxReader {
 public:
  IdxReader(const std::filesystem::path& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw DataError("cannot open " + path.string());
  }

  std::uint32_t read_u32() {
    unsigned char bytes[4];
    read_bytes(bytes, 4);
    return (std::uint32_t(bytes[0]) << 24) | (std::uint32_t(bytes[1]) << 16) |
           (std::uint32_t(bytes[2]) << 8) | std::uint32_t(bytes[3]);
  }

  void read_bytes(unsigned char* dst, std::size_t n) {
    in_.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
      throw DataError(path_.string() + ": unexpected end of file at byte " +
                      std::to_string(offset_ + static_cast<std::size_t>(in_.gcount())));
    }
    offset_ += n;
  }

  std::size_t offset() const { return offset_; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
  std::size_t offset_ = 0;
};

std::string hex32(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%08x", v);
  return buf;
}

}  // namespace

Dataset load_mnist_idx(const std::filesystem::path& images_path,
                       const std::filesystem::path& labels_path) {
  IdxReader images(images_path);
  const std::uint32_t image_magic = images.read_u32();
  if (image_magic != kImagesMagic) {
    throw DataError(images_path.string() + ": bad image magic " + hex32(image_magic) +
                    " at byte 0 (expected " + hex32(kImagesMagic) + ")");
  }
  const std::uint32_t count = images.read_u32();
  const std::uint32_t rows = images.read_u32();
  const std::uint32_t cols = images.read_u32();
  if (count == 0 || rows == 0 || cols == 0) {
    throw DataError(images_path.string() + ": zero-sized image tensor in header");
  }

  IdxReader labels(labels_path);
  const std::uint32_t label_magic = labels.read_u32();
  if (label_magic != kLabelsMagic) {
    throw DataError(labels_path.string() + ": bad label magic " + hex32(label_magic) +
                    " at byte 0 (expected " + hex32(kLabelsMagic) + ")");
  }
  const std::uint32_t label_count = labels.read_u32();
  if (label_count != count) {
    throw DataError(labels_path.string() + ": label count " + std::to_string(label_count) +
                    " at byte 4 does not match image count " + std::to_string(count));
  }

  const std::size_t dim = static_cast<std::size_t>(rows) * cols;
  Dataset ds;
  ds.features = Matrix(count, dim);
  ds.labels.resize(count);
  ds.num_classes = 10;
  ds.feature_bound = 1.0;

  std::vector<unsigned char> buf(dim);
  for (std::uint32_t i = 0; i < count; ++i) {
    images.read_bytes(buf.data(), dim);
    double* row = ds.features.data() + static_cast<std::size_t>(i) * dim;
    for (std::size_t j = 0; j < dim; ++j) row[j] = buf[j] / 255.0;  // pixels scaled to [0,1]
  }
  for (std::uint32_t i = 0; i < count; ++i) {
    unsigned char raw;
    const std::size_t at = labels.offset();
    labels.read_bytes(&raw, 1);
    if (raw > 9) {
      throw DataError(labels_path.string() + ": label value " + std::to_string(int(raw)) +
                      " at byte " + std::to_string(at) + " outside 0..9");
    }
    ds.labels[i] = int(raw) + 1;  // stored 1-based
  }
  return ds;
}

namespace {

void write_u32_be(std::ofstream& out, std::uint32_t v) {
  unsigned char bytes[4] = {static_cast<unsigned char>(v >> 24),
                            static_cast<unsigned char>(v >> 16),
                            static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(bytes), 4);
}

}  // namespace

void write_idx_images(const std::filesystem::path& path, std::span<const std::uint8_t> pixels,
                      std::uint32_t count, std::uint32_t rows, std::uint32_t cols) {
  if (pixels.size() != static_cast<std::size_t>(count) * rows * cols) {
    throw ConfigError("write_idx_images: pixel buffer size does not match header");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  write_u32_be(out, kImagesMagic);
  write_u32_be(out, count);
  write_u32_be(out, rows);
  write_u32_be(out, cols);
  out.write(reinterpret_cast<const char*>(pixels.data()),
            static_cast<std::streamsize>(pixels.size()));
  if (!out) throw DataError("short write to " + path.string());
}

void write_idx_labels(const std::filesystem::path& path, std::span<const std::uint8_t> labels) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  write_u32_be(out, kLabelsMagic);
  write_u32_be(out, static_cast<std::uint32_t>(labels.size()));
  out.write(reinterpret_cast<const char*>(labels.data()),
            static_cast<std::streamsize>(labels.size()));
  if (!out) throw DataError("short write to " + path.string());
}

void per_feature_mean_center(Dataset& train, std::span<Dataset*> others) {
  const std::size_t d = train.features.cols();
  for (Dataset* ds : others) {
    if (ds->features.cols() != d) {
      throw ShapeError("per_feature_mean_center: dimension mismatch across datasets");
    }
  }
  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < train.features.rows(); ++i) {
    auto row = train.features.row(i);
    for (std::size_t j = 0; j < d; ++j) mean[j] += row[j];
  }
  for (double& v : mean) v /= static_cast<double>(train.features.rows());

  double bound = 0.0;
  auto center = [&](Dataset& ds) {
    for (std::size_t i = 0; i < ds.features.rows(); ++i) {
      auto row = ds.features.row(i);
      for (std::size_t j = 0; j < d; ++j) {
        row[j] -= mean[j];
        bound = std::max(bound, std::abs(row[j]));
      }
    }
  };
  center(train);
  for (Dataset* ds : others) center(*ds);
  // the datasets share one input space, so they share the observed bound
  train.feature_bound = bound;
  for (Dataset* ds : others) ds->feature_bound = bound;
}

Dataset synthetic_blobs(long m, int d, int num_classes, double spread, std::uint64_t seed) {
  if (num_classes < 2) throw ConfigError("synthetic_blobs: num_classes must be >= 2");
  if (m < num_classes) throw ConfigError("synthetic_blobs: need at least one sample per class");
  if (d < 1) throw ConfigError("synthetic_blobs: d must be >= 1");
  if (spread < 0.0) throw ConfigError("synthetic_blobs: spread must be >= 0");

  constexpr double kBound = 3.0;
  rng::Engine eng(rng::derive(seed, 0xb10b5));

  // centers at least unit distance apart
  std::vector<std::vector<double>> centers;
  for (int k = 0; k < num_classes; ++k) {
    for (int attempt = 0;; ++attempt) {
      std::vector<double> c(d);
      for (double& v : c) v = rng::uniform(eng, -2.0, 2.0);
      bool ok = true;
      for (const auto& prev : centers) {
        double dist2 = 0.0;
        for (int j = 0; j < d; ++j) dist2 += (c[j] - prev[j]) * (c[j] - prev[j]);
        if (dist2 < 1.0) {
          ok = false;
          break;
        }
      }
      if (ok) {
        centers.push_back(std::move(c));
        break;
      }
      if (attempt > 10000) {
        throw ConfigError("synthetic_blobs: could not separate this many centers");
      }
    }
  }

  Dataset ds;
  ds.features = Matrix(static_cast<std::size_t>(m), static_cast<std::size_t>(d));
  ds.labels.resize(static_cast<std::size_t>(m));
  ds.num_classes = num_classes;
  ds.feature_bound = kBound;
  for (long i = 0; i < m; ++i) {
    const int k = static_cast<int>(i % num_classes);
    ds.labels[static_cast<std::size_t>(i)] = k + 1;
    auto row = ds.features.row(static_cast<std::size_t>(i));
    for (int j = 0; j < d; ++j) {
      double v = centers[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)] +
                 spread * rng::normal(eng);
      row[static_cast<std::size_t>(j)] = std::clamp(v, -kBound, kBound);
    }
  }
  return ds;
}

namespace {

// 5x7 digit glyphs, one string per row, '#' = ink.
constexpr const char* kGlyphs[10][7] = {
    {".###.", "#...#", "#..##", "#.#.#", "##..#", "#...#", ".###."},
    {"..#..", ".##..", "..#..", "..#..", "..#..", "..#..", ".###."},
    {".###.", "#...#", "....#", "...#.", "..#..", ".#...", "#####"},
    {"#####", "...#.", "..#..", "...#.", "....#", "#...#", ".###."},
    {"...#.", "..##.", ".#.#.", "#..#.", "#####", "...#.", "...#."},
    {"#####", "#....", "####.", "....#", "....#", "#...#", ".###."},
    {"..##.", ".#...", "#....", "####.", "#...#", "#...#", ".###."},
    {"#####", "....#", "...#.", "..#..", ".#...", ".#...", ".#..."},
    {".###.", "#...#", "#...#", ".###.", "#...#", "#...#", ".###."},
    {".###.", "#...#", "#...#", ".####", "....#", "...#.", ".##.."}};

}  // namespace

Dataset synthetic_digits(long m, std::uint64_t seed) {
  if (m < 1) throw ConfigError("synthetic_digits: m must be >= 1");
  constexpr int kSide = 28, kScale = 3, kGlyphRows = 7, kGlyphCols = 5;
  constexpr int kInkRows = kGlyphRows * kScale, kInkCols = kGlyphCols * kScale;

  rng::Engine eng(rng::derive(seed, 0xd161f5));
  Dataset ds;
  ds.features = Matrix(static_cast<std::size_t>(m), kSide * kSide);
  ds.labels.resize(static_cast<std::size_t>(m));
  ds.num_classes = 10;
  ds.feature_bound = 1.0;

  for (long i = 0; i < m; ++i) {
    const int digit = static_cast<int>(i % 10);
    ds.labels[static_cast<std::size_t>(i)] = digit + 1;
    double* img = ds.features.data() + static_cast<std::size_t>(i) * kSide * kSide;
    const int dy = static_cast<int>(eng() % (kSide - kInkRows + 1));
    const int dx = static_cast<int>(eng() % (kSide - kInkCols + 1));
    const double ink = rng::uniform(eng, 0.55, 1.0);
    for (int p = 0; p < kSide * kSide; ++p) img[p] = rng::uniform(eng, 0.0, 0.2);
    for (int r = 0; r < kInkRows; ++r) {
      for (int c = 0; c < kInkCols; ++c) {
        if (kGlyphs[digit][r / kScale][c / kScale] == '#') {
          const double level = ink * rng::uniform(eng, 0.8, 1.0);
          double& px = img[(dy + r) * kSide + (dx + c)];
          px = std::min(1.0, px + level);
        }
      }
    }
  }
  return ds;
}

std::vector<Dataset> split(const Dataset& dataset, std::span<const double> fractions,
                           std::uint64_t seed) {
  dataset.validate();
  if (fractions.empty()) throw ConfigError("split: need at least one fraction");
  double sum = 0.0;
  for (double f : fractions) {
    if (!(f > 0.0)) throw ConfigError("split: fractions must be positive");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("split: fractions must sum to 1");
  // one piece is the identity split: no reason to disturb the row order
  if (fractions.size() == 1) return {dataset};

  const long m = dataset.size();
  std::vector<std::size_t> order(static_cast<std::size_t>(m));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  // hand-rolled Fisher-Yates: std::shuffle's draw sequence is
  // implementation-defined
  rng::Engine eng(rng::derive(seed, 0x5b117));
  for (std::size_t i = order.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(eng() % i);
    std::swap(order[i - 1], order[j]);
  }

  std::vector<Dataset> parts;
  double cum = 0.0;
  long start = 0;
  for (std::size_t p = 0; p < fractions.size(); ++p) {
    cum += fractions[p];
    const long end = p + 1 == fractions.size()
                         ? m
                         : std::llround(cum * static_cast<double>(m));
    Dataset part;
    part.features = Matrix(static_cast<std::size_t>(end - start), dataset.features.cols());
    part.labels.resize(static_cast<std::size_t>(end - start));
    part.num_classes = dataset.num_classes;
    part.feature_bound = dataset.feature_bound;
    for (long i = start; i < end; ++i) {
      const std::size_t src = order[static_cast<std::size_t>(i)];
      auto from = dataset.features.row(src);
      auto to = part.features.row(static_cast<std::size_t>(i - start));
      std::copy(from.begin(), from.end(), to.begin());
      part.labels[static_cast<std::size_t>(i - start)] = dataset.labels[src];
    }
    parts.push_back(std::move(part));
    start = end;
  }
  return parts;
}

Dataset subset(const Dataset& dataset, long offset, long count) {
  if (offset < 0 || count < 1 || offset + count > dataset.size()) {
    throw ConfigError("subset: range outside the dataset");
  }
  Dataset out;
  out.features = Matrix(static_cast<std::size_t>(count), dataset.features.cols());
  out.labels.resize(static_cast<std::size_t>(count));
  out.num_classes = dataset.num_classes;
  out.feature_bound = dataset.feature_bound;
  for (long i = 0; i < count; ++i) {
    auto from = dataset.features.row(static_cast<std::size_t>(offset + i));
    auto to = out.features.row(static_cast<std::size_t>(i));
    std::copy(from.begin(), from.end(), to.begin());
    out.labels[static_cast<std::size_t>(i)] = dataset.labels[static_cast<std::size_t>(offset + i)];
  }
  return out;
}

}  // namespace lmdnn
