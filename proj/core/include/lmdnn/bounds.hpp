#pragma once

#include <string_view>

#include "lmdnn/margin.hpp"

namespace lmdnn {

/// Inputs to the Rademacher-average capacity estimate
/// c * M * sqrt(ln d / m) * (p * lipschitz * A)^depth.
struct RaBoundParams {
  double c = 1.0;           // unspecified leading constant
  double input_bound = 1.0;  // M, half-width of the input box
  long input_dim = 2;        // d, must be >= 2 so ln d > 0
  long sample_count = 1;     // m
  long pool_region = 1;      // p, largest pooling region (1 when unpooled)
  double activation_lipschitz = 1.0;
  double weight_bound = 1.0;  // A, max incoming L1 norm per unit
  long depth = 1;             // L, number of weighted layers

  void validate() const;  // throws ConfigError
};

double ra_upper_bound(const RaBoundParams& params);

/// Variant accumulated by the derivation chain rather than the headline
/// statement: (2 p lipschitz A)^(depth-1) * c * A * M * sqrt(ln d / m).
double ra_upper_bound_proof_chain(const RaBoundParams& params);

/// Complexity triple of a Pfaffian activation chain.
struct PfaffianComplexity {
  long alpha = 1;
  long beta = 1;
  long eta = 1;
};

/// arctan -> (3,1,2), tanh -> (2,1,1); anything else is unsupported.
PfaffianComplexity pfaffian_for_activation(std::string_view name);

struct BettiBoundParams {
  long num_classes = 2;  // K
  long input_dim = 2;    // d
  long hidden_units = 2;  // h, total across hidden layers
  long depth = 2;         // L
  PfaffianComplexity pf;

  void validate() const;  // throws ConfigError; requires d <= h * eta
};

/// Natural log of the topological-complexity growth bound
/// (K-1)^(d+1) * 2^(he(he-1)/2) * (d ((a+b-1+ab)(L-1) + b(a+1)))^(d+he)
/// with the big-O constant taken as 1 and he = h * eta.
double betti_log_bound(const BettiBoundParams& params);

struct MarginBoundParams {
  double delta = 0.05;   // confidence level, in (0,1)
  long sample_count = 1;  // m
  long num_classes = 2;   // K
  double rademacher = 0.0;  // R, capacity value or its upper bound
  MarginCurve curve;        // empirical margin errors over the gamma grid

  void validate() const;  // throws ConfigError
};

struct MarginBoundResult {
  double value = 0.0;
  double argmin_gamma = 0.0;
};

/// Minimum over the curve's grid of
/// err(gamma) + (8K(2K-1)/gamma) R + sqrt(ln(log2(2/gamma))/m)
///            + sqrt(ln(2/delta)/(2m)).
MarginBoundResult margin_bound(const MarginBoundParams& params);

}  // namespace lmdnn
