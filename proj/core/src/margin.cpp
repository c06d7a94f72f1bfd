#include "lmdnn/margin.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>
#include <string>

#include "lmdnn/errors.hpp"
#include "lmdnn/loss.hpp"

namespace lmdnn {

std::string_view to_string(MarginSpace space) {
  return space == MarginSpace::Raw ? "raw" : "softmax";
}

MarginSpace margin_space_from_string(std::string_view name) {
  if (name == "raw") return MarginSpace::Raw;
  if (name == "softmax") return MarginSpace::Softmax;
  throw ConfigError("unknown margin space '" + std::string(name) + "'");
}

void MarginCurve::validate() const {
  if (gammas.empty()) throw ConfigError("margin curve needs a nonempty grid");
  if (gammas.size() != errors.size()) {
    throw ConfigError("margin curve grid/error length mismatch");
  }
  for (std::size_t i = 0; i < gammas.size(); ++i) {
    if (!(gammas[i] > 0.0 && gammas[i] < 1.0)) {
      throw ConfigError("margin grid point " + std::to_string(gammas[i]) +
                        " outside (0,1)");
    }
    if (i > 0 && !(gammas[i] > gammas[i - 1])) {
      throw ConfigError("margin grid must be strictly ascending");
    }
    if (!(errors[i] >= 0.0 && errors[i] <= 1.0)) {
      throw ConfigError("margin curve value outside [0,1]");
    }
    if (i > 0 && errors[i] < errors[i - 1]) {
      throw ConfigError("margin curve must be non-decreasing");
    }
  }
}

double margin(std::span<const double> outputs, int label) {
  const int k = static_cast<int>(outputs.size());
  if (k < 2) throw ConfigError("margin needs at least two classes");
  if (label < 1 || label > k) {
    throw ConfigError("label " + std::to_string(label) + " outside {1.." +
                      std::to_string(k) + "}");
  }
  double best_other = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < k; ++j) {
    if (j + 1 == label) continue;
    best_other = std::max(best_other, outputs[static_cast<std::size_t>(j)]);
  }
  return outputs[static_cast<std::size_t>(label - 1)] - best_other;
}

double empirical_margin_error(std::span<const double> margins, double gamma) {
  if (margins.empty()) throw ConfigError("empirical margin error needs samples");
  if (!(gamma > 0.0)) throw ConfigError("margin coefficient must be positive");
  std::size_t count = 0;
  for (double rho : margins) count += (rho <= gamma) ? 1 : 0;
  return static_cast<double>(count) / static_cast<double>(margins.size());
}

std::vector<double> default_gamma_grid() {
  std::vector<double> grid;
  grid.reserve(19);
  for (int i = 1; i <= 19; ++i) grid.push_back(i * 0.05);
  return grid;
}

namespace {

// Streams the per-sample output rows of one pass over the dataset without
// keeping whole-dataset traces alive.
void for_each_output_row(const Network& net, const Dataset& dataset,
                         const std::function<void(std::size_t, std::span<const double>)>& visit) {
  dataset.validate();
  const std::size_t d = static_cast<std::size_t>(net.spec.input_dim);
  if (dataset.features.cols() != d) {
    throw ShapeError("dataset dimension " + std::to_string(dataset.features.cols()) +
                     " does not match network input " + std::to_string(d));
  }
  if (dataset.num_classes != net.spec.num_classes) {
    throw ShapeError("dataset classes do not match network output");
  }
  constexpr std::size_t kChunk = 512;
  const std::size_t m = dataset.features.rows();
  for (std::size_t start = 0; start < m; start += kChunk) {
    const std::size_t rows = std::min(kChunk, m - start);
    Matrix batch(rows, d);
    for (std::size_t i = 0; i < rows; ++i) {
      auto from = dataset.features.row(start + i);
      auto to = batch.row(i);
      std::copy(from.begin(), from.end(), to.begin());
    }
    auto [outputs, trace] = forward(net, batch);
    for (std::size_t i = 0; i < rows; ++i) visit(start + i, outputs.row(i));
  }
}

}  // namespace

std::vector<double> sample_margins(const Network& net, const Dataset& dataset,
                                   MarginSpace space) {
  std::vector<double> margins(dataset.features.rows());
  std::vector<double> probs;
  for_each_output_row(net, dataset, [&](std::size_t i, std::span<const double> out) {
    const int y = dataset.labels[i];
    if (space == MarginSpace::Softmax) {
      probs = softmax(out);
      margins[i] = margin(probs, y);
    } else {
      margins[i] = margin(out, y);
    }
  });
  return margins;
}

MarginCurve margin_curve(const Network& net, const Dataset& dataset,
                         std::span<const double> gammas, MarginSpace space) {
  MarginCurve curve;
  curve.gammas.assign(gammas.begin(), gammas.end());
  curve.errors.assign(gammas.size(), 0.0);
  curve.space = space;

  const std::vector<double> margins = sample_margins(net, dataset, space);
  for (std::size_t g = 0; g < curve.gammas.size(); ++g) {
    curve.errors[g] = empirical_margin_error(margins, curve.gammas[g]);
  }
  curve.validate();
  return curve;
}

double zero_one_error(const Network& net, const Dataset& dataset) {
  std::size_t wrong = 0;
  for_each_output_row(net, dataset, [&](std::size_t i, std::span<const double> out) {
    std::size_t arg = 0;
    for (std::size_t j = 1; j < out.size(); ++j) {
      if (out[j] > out[arg]) arg = j;  // lowest index keeps ties
    }
    if (static_cast<int>(arg) + 1 != dataset.labels[i]) ++wrong;
  });
  return static_cast<double>(wrong) / static_cast<double>(dataset.features.rows());
}

void write_curve_csv(const std::filesystem::path& path, const MarginCurve& curve,
                     const std::string& comment) {
  curve.validate();
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  if (!comment.empty()) out << "# " << comment << "\n";
  out << "gamma,err\n";
  char line[80];
  for (std::size_t i = 0; i < curve.gammas.size(); ++i) {
    std::snprintf(line, sizeof line, "%.9g,%.9g\n", curve.gammas[i], curve.errors[i]);
    out << line;
  }
  if (!out) throw DataError("short write to " + path.string());
}

MarginCurve read_curve_csv(const std::filesystem::path& path, MarginSpace space) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  MarginCurve curve;
  curve.space = space;
  std::string line;
  long line_no = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (!saw_header) {
      if (line != "gamma,err") {
        throw DataError(path.string() + ": expected header 'gamma,err' on line " +
                        std::to_string(line_no));
      }
      saw_header = true;
      continue;
    }
    const char* s = line.c_str();
    char* rest = nullptr;
    const double gamma = std::strtod(s, &rest);
    if (rest == s || *rest != ',') {
      throw DataError(path.string() + ": malformed row on line " + std::to_string(line_no));
    }
    const char* s2 = rest + 1;
    const double err = std::strtod(s2, &rest);
    if (rest == s2 || *rest != '\0') {
      throw DataError(path.string() + ": malformed row on line " + std::to_string(line_no));
    }
    curve.gammas.push_back(gamma);
    curve.errors.push_back(err);
  }
  if (!saw_header) throw DataError(path.string() + ": missing 'gamma,err' header");
  curve.validate();
  return curve;
}

}  // namespace lmdnn
