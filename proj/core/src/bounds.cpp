#include "lmdnn/bounds.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "lmdnn/errors.hpp"

namespace lmdnn {

void RaBoundParams::validate() const {
  if (!(c > 0.0)) throw ConfigError("ra bound: c must be positive");
  if (!(input_bound > 0.0)) throw ConfigError("ra bound: input_bound must be positive");
  if (input_dim < 2) throw ConfigError("ra bound: input_dim must be >= 2");
  if (sample_count < 1) throw ConfigError("ra bound: sample_count must be >= 1");
  if (pool_region < 1) throw ConfigError("ra bound: pool_region must be >= 1");
  if (!(activation_lipschitz > 0.0)) {
    throw ConfigError("ra bound: activation_lipschitz must be positive");
  }
  if (!(weight_bound > 0.0)) throw ConfigError("ra bound: weight_bound must be positive");
  if (depth < 1) throw ConfigError("ra bound: depth must be >= 1");
}

double ra_upper_bound(const RaBoundParams& p) {
  p.validate();
  const double base = static_cast<double>(p.pool_region) * p.activation_lipschitz * p.weight_bound;
  return p.c * p.input_bound *
         std::sqrt(std::log(static_cast<double>(p.input_dim)) /
                   static_cast<double>(p.sample_count)) *
         std::pow(base, static_cast<double>(p.depth));
}

double ra_upper_bound_proof_chain(const RaBoundParams& p) {
  p.validate();
  const double per_layer =
      2.0 * static_cast<double>(p.pool_region) * p.activation_lipschitz * p.weight_bound;
  return std::pow(per_layer, static_cast<double>(p.depth - 1)) * p.c * p.weight_bound *
         p.input_bound *
         std::sqrt(std::log(static_cast<double>(p.input_dim)) /
                   static_cast<double>(p.sample_count));
}

PfaffianComplexity pfaffian_for_activation(std::string_view name) {
  if (name == "arctan") return {3, 1, 2};
  if (name == "tanh") return {2, 1, 1};
  throw ConfigError("no Pfaffian complexity known for activation '" + std::string(name) + "'");
}

void BettiBoundParams::validate() const {
  if (num_classes < 2) throw ConfigError("betti bound: num_classes must be >= 2");
  if (input_dim < 1) throw ConfigError("betti bound: input_dim must be >= 1");
  if (hidden_units < 1) throw ConfigError("betti bound: hidden_units must be >= 1");
  if (depth < 2) throw ConfigError("betti bound: depth must be >= 2");
  if (pf.alpha < 1 || pf.beta < 1 || pf.eta < 1) {
    throw ConfigError("betti bound: Pfaffian complexity entries must be >= 1");
  }
  if (input_dim > hidden_units * pf.eta) {
    throw ConfigError("betti bound hypothesis violated: input_dim " +
                      std::to_string(input_dim) + " exceeds hidden_units * eta = " +
                      std::to_string(hidden_units * pf.eta));
  }
}

double betti_log_bound(const BettiBoundParams& p) {
  p.validate();
  const double d = static_cast<double>(p.input_dim);
  const double he = static_cast<double>(p.hidden_units * p.pf.eta);
  const double a = static_cast<double>(p.pf.alpha);
  const double b = static_cast<double>(p.pf.beta);
  const double L = static_cast<double>(p.depth);

  const double class_term = (d + 1.0) * std::log(static_cast<double>(p.num_classes - 1));
  const double pair_term = he * (he - 1.0) / 2.0 * std::log(2.0);
  const double poly_arg = d * ((a + b - 1.0 + a * b) * (L - 1.0) + b * (a + 1.0));
  const double poly_term = (d + he) * std::log(poly_arg);
  return class_term + pair_term + poly_term;
}

void MarginBoundParams::validate() const {
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("margin bound: delta must be in (0,1)");
  if (sample_count < 1) throw ConfigError("margin bound: sample_count must be >= 1");
  if (num_classes < 2) throw ConfigError("margin bound: num_classes must be >= 2");
  if (!(rademacher >= 0.0)) throw ConfigError("margin bound: rademacher must be >= 0");
  curve.validate();  // grid in (0,1) keeps log2(2/gamma) > 1
}

MarginBoundResult margin_bound(const MarginBoundParams& p) {
  p.validate();
  const double m = static_cast<double>(p.sample_count);
  const double K = static_cast<double>(p.num_classes);
  const double confidence = std::sqrt(std::log(2.0 / p.delta) / (2.0 * m));

  MarginBoundResult best;
  best.value = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < p.curve.gammas.size(); ++i) {
    const double gamma = p.curve.gammas[i];
    const double capacity = 8.0 * K * (2.0 * K - 1.0) / gamma * p.rademacher;
    const double grid_term = std::sqrt(std::log(std::log2(2.0 / gamma)) / m);
    const double value = p.curve.errors[i] + capacity + grid_term + confidence;
    if (value < best.value) {
      best.value = value;
      best.argmin_gamma = gamma;
    }
  }
  return best;
}

}  // namespace lmdnn
