#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lmdnn/matrix.hpp"

namespace lmdnn {

enum class LossFamily { CrossEntropy, C1, C2 };

/// Which training loss to minimize: plain cross entropy, or cross entropy
/// plus one of the two margin penalties, weighted by lambda.
struct LossKind {
  LossFamily family = LossFamily::CrossEntropy;
  double lambda = 0.0;
  /// Measure the penalty's margin on the raw outputs instead of the softmax
  /// probabilities (experimental; the default softmax space is what makes 1
  /// the margin's upper bound).
  bool penalty_on_raw = false;

  static LossKind cross_entropy() { return {}; }
  static LossKind c1(double lambda) { return {LossFamily::C1, lambda, false}; }
  static LossKind c2(double lambda) { return {LossFamily::C2, lambda, false}; }

  /// Accepts "c", "c1:<lambda>", "c2:<lambda>".
  static LossKind parse(const std::string& text);
  std::string to_string() const;
  void validate() const;  // lambda >= 0

  bool operator==(const LossKind&) const = default;
};

struct LossValue {
  double total = 0.0;
  double base_ce = 0.0;
  double penalty = 0.0;
};

/// Overflow-safe softmax (max-shifted). Labels elsewhere are 1-based.
std::vector<double> softmax(std::span<const double> outputs);

/// -ln(probs[label]) with probs clamped at 1e-300. label in {1..K}.
double cross_entropy(std::span<const double> probs, int label);

/// lambda * (1 - rho)^2 where rho = p_y - max_{k != y} p_k.
double penalty_c1(std::span<const double> probs, int label, double lambda);

/// (lambda / (K-1)) * sum_{k != y} (1 - (p_y - p_k))^2.
double penalty_c2(std::span<const double> probs, int label, double lambda);

/// Loss and its exact gradient with respect to the raw (pre-softmax)
/// outputs. Ties in max_{k != y} break toward the lowest index, so the
/// subgradient is deterministic.
std::pair<LossValue, std::vector<double>> loss_and_grad(const LossKind& kind,
                                                        std::span<const double> outputs,
                                                        int label);

/// Mean loss over a batch of raw output rows, and the matching per-row
/// gradients (already scaled by 1/batch).
std::pair<LossValue, Matrix> batch_loss_and_grad(const LossKind& kind, const Matrix& outputs,
                                                 std::span<const int> labels);

}  // namespace lmdnn
