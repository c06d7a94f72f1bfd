#pragma once

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "lmdnn/data.hpp"
#include "lmdnn/loss.hpp"
#include "lmdnn/network.hpp"
#include "lmdnn/rng.hpp"

namespace testsupport {

inline bool rel_close(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max({std::abs(a), std::abs(b), 1e-300});
}

/// Unique scratch directory, removed when the object dies.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    const auto base = std::filesystem::temp_directory_path();
    path_ = base / ("lmdnn-test-" + std::to_string(::getpid()) + "-" +
                    std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

inline lmdnn::Matrix random_batch(int rows, int cols, double bound, std::uint64_t seed) {
  lmdnn::Matrix m(static_cast<std::size_t>(rows), static_cast<std::size_t>(cols));
  lmdnn::rng::Engine eng(lmdnn::rng::derive(seed, 0x7e57));
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      m(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) =
          lmdnn::rng::uniform(eng, -bound, bound);
    }
  }
  return m;
}

inline std::vector<int> cyclic_labels(int rows, int num_classes) {
  std::vector<int> labels(static_cast<std::size_t>(rows));
  for (int i = 0; i < rows; ++i) labels[static_cast<std::size_t>(i)] = i % num_classes + 1;
  return labels;
}

inline double batch_loss_value(const lmdnn::Network& net, const lmdnn::Matrix& batch,
                               std::span<const int> labels, const lmdnn::LossKind& kind) {
  auto [outputs, trace] = lmdnn::forward(net, batch);
  auto [value, grad] = lmdnn::batch_loss_and_grad(kind, outputs, labels);
  return value.total;
}

/// Central finite differences of the mean batch loss over every parameter.
/// Forward evaluations only, so it is an oracle independent of backward().
inline std::vector<double> fd_loss_gradient(const lmdnn::Network& net, const lmdnn::Matrix& batch,
                                            std::span<const int> labels,
                                            const lmdnn::LossKind& kind, double step) {
  const auto params = net.parameters_flat();
  std::vector<double> grad(params.size());
  lmdnn::Network work = net;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params;
    p[i] = params[i] + step;
    work.set_parameters_flat(p);
    const double up = batch_loss_value(work, batch, labels, kind);
    p[i] = params[i] - step;
    work.set_parameters_flat(p);
    const double down = batch_loss_value(work, batch, labels, kind);
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

inline std::vector<double> analytic_loss_gradient(const lmdnn::Network& net,
                                                  const lmdnn::Matrix& batch,
                                                  std::span<const int> labels,
                                                  const lmdnn::LossKind& kind) {
  auto [outputs, trace] = lmdnn::forward(net, batch);
  auto [value, grad] = lmdnn::batch_loss_and_grad(kind, outputs, labels);
  return lmdnn::backward(net, trace, grad).flat();
}

inline double max_rel_gradient_gap(std::span<const double> analytic, std::span<const double> fd) {
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double denom = std::max({std::abs(analytic[i]), std::abs(fd[i]), 1e-3});
    worst = std::max(worst, std::abs(analytic[i] - fd[i]) / denom);
  }
  return worst;
}

/// Hand recount of per-sample margins: softmax by the textbook formula and
/// the best-wrong-class scan written out longhand.
inline std::vector<double> brute_margins(const lmdnn::Network& net, const lmdnn::Dataset& ds,
                                         bool softmax_space) {
  auto [outputs, trace] = lmdnn::forward(net, ds.features);
  std::vector<double> margins(static_cast<std::size_t>(ds.size()));
  for (long i = 0; i < ds.size(); ++i) {
    auto row = outputs.row(static_cast<std::size_t>(i));
    std::vector<double> scores(row.begin(), row.end());
    if (softmax_space) {
      double hi = scores[0];
      for (double v : scores) hi = std::max(hi, v);
      double sum = 0.0;
      for (double& v : scores) {
        v = std::exp(v - hi);
        sum += v;
      }
      for (double& v : scores) v /= sum;
    }
    const int y = ds.labels[static_cast<std::size_t>(i)];
    double best_wrong = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < scores.size(); ++k) {
      if (static_cast<int>(k) + 1 == y) continue;
      best_wrong = std::max(best_wrong, scores[k]);
    }
    margins[static_cast<std::size_t>(i)] = scores[static_cast<std::size_t>(y - 1)] - best_wrong;
  }
  return margins;
}

inline double brute_margin_error(std::span<const double> margins, double gamma) {
  long hits = 0;
  for (double m : margins) {
    if (m <= gamma) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(margins.size());
}

/// Directory with the four official-size IDX files. Prefers a real corpus
/// ($LMDNN_DATA_DIR or ./data/mnist); otherwise renders the synthetic digits
/// at the official counts into a per-process scratch dir.
inline const std::filesystem::path& mnist_fixture_dir() {
  static const std::filesystem::path dir = [] {
    const char* names[] = {"train-images-idx3-ubyte", "train-labels-idx1-ubyte",
                           "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"};
    auto has_all = [&](const std::filesystem::path& d) {
      for (const char* n : names) {
        if (!std::filesystem::exists(d / n)) return false;
      }
      return true;
    };
    if (const char* env = std::getenv("LMDNN_DATA_DIR"); env && has_all(env)) {
      return std::filesystem::path(env);
    }
    if (has_all("data/mnist")) return std::filesystem::path("data/mnist");

    static TempDir scratch;
    const auto out = scratch.path() / "mnist";
    std::filesystem::create_directories(out);
    auto render = [&](long count, std::uint64_t seed, const char* images, const char* labels) {
      const auto ds = lmdnn::synthetic_digits(count, seed);
      std::vector<std::uint8_t> pixels(static_cast<std::size_t>(count) * 784);
      std::vector<std::uint8_t> bytes(static_cast<std::size_t>(count));
      for (long i = 0; i < count; ++i) {
        auto row = ds.features.row(static_cast<std::size_t>(i));
        for (int j = 0; j < 784; ++j) {
          const double v = std::clamp(row[static_cast<std::size_t>(j)], 0.0, 1.0);
          pixels[static_cast<std::size_t>(i) * 784 + static_cast<std::size_t>(j)] =
              static_cast<std::uint8_t>(std::lround(v * 255.0));
        }
        bytes[static_cast<std::size_t>(i)] =
            static_cast<std::uint8_t>(ds.labels[static_cast<std::size_t>(i)] - 1);
      }
      lmdnn::write_idx_images(out / images, pixels, static_cast<std::uint32_t>(count), 28, 28);
      lmdnn::write_idx_labels(out / labels, bytes);
    };
    render(60000, 0xF1D0, "train-images-idx3-ubyte", "train-labels-idx1-ubyte");
    render(10000, 0xF1D1, "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte");
    return out;
  }();
  return dir;
}

}  // namespace testsupport
