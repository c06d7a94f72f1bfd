#include "lmdnn/loss.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>

#include "lmdnn/errors.hpp"

namespace lmdnn {

namespace {

void check_label(std::size_t k, int label) {
  if (label < 1 || static_cast<std::size_t>(label) > k) {
    throw ConfigError("label " + std::to_string(label) + " outside {1.." + std::to_string(k) +
                      "}");
  }
}

/// Index of the largest entry among k != y; ties go to the lowest index.
std::size_t best_competitor(std::span<const double> values, std::size_t y) {
  std::size_t best = y == 0 ? 1 : 0;
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (k == y) continue;
    if (values[k] > values[best]) best = k;
  }
  return best;
}

}  // namespace

LossKind LossKind::parse(const std::string& text) {
  if (text == "c") return cross_entropy();
  auto parse_lambda = [&](std::size_t prefix) {
    const std::string body = text.substr(prefix);
    char* end = nullptr;
    double v = std::strtod(body.c_str(), &end);
    if (body.empty() || end != body.c_str() + body.size() || !(v >= 0.0)) {
      throw ConfigError("bad loss lambda in '" + text + "'");
    }
    return v;
  };
  if (text.rfind("c1:", 0) == 0) return c1(parse_lambda(3));
  if (text.rfind("c2:", 0) == 0) return c2(parse_lambda(3));
  throw ConfigError("unknown loss '" + text + "' (expected c, c1:<lambda>, c2:<lambda>)");
}

std::string LossKind::to_string() const {
  char buf[64];
  switch (family) {
    case LossFamily::CrossEntropy: return "c";
    case LossFamily::C1: std::snprintf(buf, sizeof buf, "c1:%g", lambda); return buf;
    case LossFamily::C2: std::snprintf(buf, sizeof buf, "c2:%g", lambda); return buf;
  }
  return "c";
}

void LossKind::validate() const {
  if (!(lambda >= 0.0)) throw ConfigError("loss lambda must be >= 0");
}

std::vector<double> softmax(std::span<const double> outputs) {
  if (outputs.size() < 2) throw ConfigError("softmax needs at least 2 outputs");
  const double top = *std::max_element(outputs.begin(), outputs.end());
  std::vector<double> probs(outputs.size());
  double denom = 0.0;
  for (std::size_t k = 0; k < outputs.size(); ++k) {
    probs[k] = std::exp(outputs[k] - top);
    denom += probs[k];
  }
  for (double& p : probs) p /= denom;
  return probs;
}

double cross_entropy(std::span<const double> probs, int label) {
  check_label(probs.size(), label);
  return -std::log(std::max(probs[static_cast<std::size_t>(label - 1)], 1e-300));
}

double penalty_c1(std::span<const double> probs, int label, double lambda) {
  check_label(probs.size(), label);
  const std::size_t y = static_cast<std::size_t>(label - 1);
  const double rho = probs[y] - probs[best_competitor(probs, y)];
  const double gap = 1.0 - rho;
  return lambda * gap * gap;
}

double penalty_c2(std::span<const double> probs, int label, double lambda) {
  check_label(probs.size(), label);
  const std::size_t y = static_cast<std::size_t>(label - 1);
  double acc = 0.0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    if (k == y) continue;
    const double gap = 1.0 - (probs[y] - probs[k]);
    acc += gap * gap;
  }
  return lambda / static_cast<double>(probs.size() - 1) * acc;
}

std::pair<LossValue, std::vector<double>> loss_and_grad(const LossKind& kind,
                                                        std::span<const double> outputs,
                                                        int label) {
  kind.validate();
  check_label(outputs.size(), label);
  const std::size_t k = outputs.size();
  const std::size_t y = static_cast<std::size_t>(label - 1);
  const std::vector<double> probs = softmax(outputs);

  LossValue value;
  value.base_ce = cross_entropy(probs, label);

  // d(CE)/df = softmax - onehot
  std::vector<double> grad(probs.begin(), probs.end());
  grad[y] -= 1.0;

  // With lambda == 0 both penalties vanish; skip the penalty path entirely so
  // C1{0}/C2{0} are bit-identical to plain cross entropy.
  if (kind.family != LossFamily::CrossEntropy && kind.lambda > 0.0) {
    std::span<const double> space = kind.penalty_on_raw ? outputs : std::span<const double>(probs);
    if (kind.family == LossFamily::C1) {
      const std::size_t c = best_competitor(space, y);
      const double rho = space[y] - space[c];
      const double gap = 1.0 - rho;
      value.penalty = kind.lambda * gap * gap;
      const double dp_drho = -2.0 * kind.lambda * gap;
      if (kind.penalty_on_raw) {
        grad[y] += dp_drho;
        grad[c] -= dp_drho;
      } else {
        // chain rho = p_y - p_c through softmax
        std::vector<double> dp_ds(k, 0.0);
        dp_ds[y] = dp_drho;
        dp_ds[c] = -dp_drho;
        double dot = dp_ds[y] * probs[y] + dp_ds[c] * probs[c];
        for (std::size_t t = 0; t < k; ++t) grad[t] += probs[t] * (dp_ds[t] - dot);
      }
    } else {
      const double scale = kind.lambda / static_cast<double>(k - 1);
      double acc = 0.0;
      std::vector<double> dp_ds(k, 0.0);
      for (std::size_t j = 0; j < k; ++j) {
        if (j == y) continue;
        const double gap = 1.0 - (space[y] - space[j]);
        acc += gap * gap;
        dp_ds[j] = 2.0 * scale * gap;
        dp_ds[y] -= 2.0 * scale * gap;
      }
      value.penalty = scale * acc;
      if (kind.penalty_on_raw) {
        for (std::size_t t = 0; t < k; ++t) grad[t] += dp_ds[t];
      } else {
        double dot = 0.0;
        for (std::size_t t = 0; t < k; ++t) dot += dp_ds[t] * probs[t];
        for (std::size_t t = 0; t < k; ++t) grad[t] += probs[t] * (dp_ds[t] - dot);
      }
    }
  }
  value.total = value.base_ce + value.penalty;
  return {value, std::move(grad)};
}

std::pair<LossValue, Matrix> batch_loss_and_grad(const LossKind& kind, const Matrix& outputs,
                                                 std::span<const int> labels) {
  if (outputs.rows() != labels.size() || outputs.rows() == 0) {
    throw ShapeError("batch_loss_and_grad: outputs rows must match label count");
  }
  const double inv = 1.0 / static_cast<double>(outputs.rows());
  LossValue mean;
  Matrix grads(outputs.rows(), outputs.cols());
  for (std::size_t i = 0; i < outputs.rows(); ++i) {
    auto [value, grad] = loss_and_grad(kind, outputs.row(i), labels[i]);
    mean.total += value.total * inv;
    mean.base_ce += value.base_ce * inv;
    mean.penalty += value.penalty * inv;
    auto out = grads.row(i);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = grad[j] * inv;
  }
  return {mean, std::move(grads)};
}

}  // namespace lmdnn
