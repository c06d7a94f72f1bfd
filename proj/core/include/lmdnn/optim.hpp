#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "lmdnn/data.hpp"
#include "lmdnn/loss.hpp"
#include "lmdnn/network.hpp"

namespace lmdnn {

/// base_lr * (1 + a*T)^(-power).
struct InversePolySchedule {
  double base_lr = 0.01;
  double a = 0.0001;
  double power = 0.75;
};

/// Piecewise-constant rates: rates[i] applies while T <= boundaries[i],
/// rates.back() afterwards. rates is one longer than boundaries.
struct StepSchedule {
  std::vector<long> boundaries;
  std::vector<double> rates;
};

struct ConstantSchedule {
  double lr = 0.01;
};

using Schedule = std::variant<InversePolySchedule, StepSchedule, ConstantSchedule>;

void validate(const Schedule& schedule);  // throws ConfigError
double learning_rate(const Schedule& schedule, long iteration);

struct TrainConfig {
  LossKind loss = LossKind::cross_entropy();
  long batch_size = 64;
  double momentum = 0.9;
  double weight_decay = 0.0005;
  Schedule schedule = InversePolySchedule{};
  long iterations = 0;
  std::uint64_t seed = 0;

  void validate() const;  // throws ConfigError
  std::string to_json_string(int indent = -1) const;
  static TrainConfig from_json_string(const std::string& text);
};

/// Momentum buffers congruent with the parameters, plus the step counter.
struct OptimizerState {
  std::vector<Matrix> weight_velocity;
  std::vector<std::vector<double>> bias_velocity;
  long iteration = 0;

  static OptimizerState for_network(const Network& net);
};

/// v <- momentum*v - lr*(g + weight_decay*w); w <- w + v. Biases are not
/// decayed. Uses learning_rate(schedule, state.iteration), then increments
/// the counter.
void sgd_step(Network& net, const Gradients& grads, OptimizerState& state,
              const TrainConfig& config);

struct HistoryRow {
  long iter = 0;
  double lr = 0.0;
  double loss = 0.0;
  double base_ce = 0.0;
  double penalty = 0.0;
};

struct EpochRow {
  long epoch = 0;
  double train_err = 0.0;
  double test_err = 0.0;  // NaN when no eval set was supplied
};

struct TrainResult {
  Network net;
  std::vector<HistoryRow> history;  // one row per iteration
  std::vector<EpochRow> epochs;     // one row per completed pass
};

/// Mini-batch SGD, seeded end to end (init, per-epoch shuffles, batch order).
/// Returns the last-iteration model. Non-finite loss or parameters abort
/// with DivergenceError naming the iteration.
TrainResult train(const NetworkSpec& spec, const Dataset& train_set, const TrainConfig& config,
                  const Dataset* eval_set = nullptr);

void write_history_csv(const std::filesystem::path& path, std::span<const HistoryRow> rows,
                       const std::string& comment = "");
void write_epochs_csv(const std::filesystem::path& path, std::span<const EpochRow> rows,
                      const std::string& comment = "");

}  // namespace lmdnn
