#include "lmdnn/optim.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "lmdnn/errors.hpp"
#include "lmdnn/margin.hpp"
#include "lmdnn/rng.hpp"

namespace lmdnn {

void validate(const Schedule& schedule) {
  std::visit(
      [](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, InversePolySchedule>) {
          if (!(s.base_lr > 0.0)) throw ConfigError("schedule: base_lr must be positive");
          if (!(s.a >= 0.0)) throw ConfigError("schedule: a must be >= 0");
          if (!(s.power >= 0.0)) throw ConfigError("schedule: power must be >= 0");
        } else if constexpr (std::is_same_v<T, StepSchedule>) {
          if (s.rates.size() != s.boundaries.size() + 1) {
            throw ConfigError("schedule: rates must be one longer than boundaries");
          }
          for (std::size_t i = 0; i < s.boundaries.size(); ++i) {
            if (s.boundaries[i] < 0) throw ConfigError("schedule: boundaries must be >= 0");
            if (i > 0 && s.boundaries[i] <= s.boundaries[i - 1]) {
              throw ConfigError("schedule: boundaries must be strictly ascending");
            }
          }
          for (double r : s.rates) {
            if (!(r > 0.0)) throw ConfigError("schedule: rates must be positive");
          }
        } else {
          if (!(s.lr > 0.0)) throw ConfigError("schedule: lr must be positive");
        }
      },
      schedule);
}

double learning_rate(const Schedule& schedule, long iteration) {
  if (iteration < 0) throw ConfigError("learning_rate: iteration must be >= 0");
  return std::visit(
      [iteration](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, InversePolySchedule>) {
          return s.base_lr * std::pow(1.0 + s.a * static_cast<double>(iteration), -s.power);
        } else if constexpr (std::is_same_v<T, StepSchedule>) {
          for (std::size_t i = 0; i < s.boundaries.size(); ++i) {
            if (iteration <= s.boundaries[i]) return s.rates[i];
          }
          return s.rates.back();
        } else {
          return s.lr;
        }
      },
      schedule);
}

void TrainConfig::validate() const {
  loss.validate();
  if (batch_size < 1) throw ConfigError("train config: batch_size must be >= 1");
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw ConfigError("train config: momentum must be in [0,1)");
  }
  if (!(weight_decay >= 0.0)) throw ConfigError("train config: weight_decay must be >= 0");
  if (iterations < 0) throw ConfigError("train config: iterations must be >= 0");
  lmdnn::validate(schedule);
}

namespace {

nlohmann::json schedule_to_json(const Schedule& schedule) {
  return std::visit(
      [](const auto& s) -> nlohmann::json {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, InversePolySchedule>) {
          return {{"kind", "inverse_poly"}, {"base_lr", s.base_lr}, {"a", s.a},
                  {"power", s.power}};
        } else if constexpr (std::is_same_v<T, StepSchedule>) {
          return {{"kind", "steps"}, {"boundaries", s.boundaries}, {"rates", s.rates}};
        } else {
          return {{"kind", "constant"}, {"lr", s.lr}};
        }
      },
      schedule);
}

Schedule schedule_from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "inverse_poly") {
    InversePolySchedule s;
    s.base_lr = j.at("base_lr").get<double>();
    if (j.contains("a")) s.a = j.at("a").get<double>();
    if (j.contains("power")) s.power = j.at("power").get<double>();
    return s;
  }
  if (kind == "steps") {
    StepSchedule s;
    s.boundaries = j.at("boundaries").get<std::vector<long>>();
    s.rates = j.at("rates").get<std::vector<double>>();
    return s;
  }
  if (kind == "constant") {
    return ConstantSchedule{j.at("lr").get<double>()};
  }
  throw ConfigError("unknown schedule kind '" + kind + "'");
}

}  // namespace

std::string TrainConfig::to_json_string(int indent) const {
  nlohmann::json j{{"loss", loss.to_string()},
                   {"batch_size", batch_size},
                   {"momentum", momentum},
                   {"weight_decay", weight_decay},
                   {"schedule", schedule_to_json(schedule)},
                   {"iterations", iterations},
                   {"seed", seed}};
  return j.dump(indent);
}

TrainConfig TrainConfig::from_json_string(const std::string& text) {
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    TrainConfig cfg;
    if (j.contains("loss")) cfg.loss = LossKind::parse(j.at("loss").get<std::string>());
    if (j.contains("batch_size")) cfg.batch_size = j.at("batch_size").get<long>();
    if (j.contains("momentum")) cfg.momentum = j.at("momentum").get<double>();
    if (j.contains("weight_decay")) cfg.weight_decay = j.at("weight_decay").get<double>();
    if (j.contains("schedule")) cfg.schedule = schedule_from_json(j.at("schedule"));
    if (j.contains("iterations")) cfg.iterations = j.at("iterations").get<long>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.validate();
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("train config JSON: ") + e.what());
  }
}

OptimizerState OptimizerState::for_network(const Network& net) {
  OptimizerState state;
  state.weight_velocity.reserve(net.weights.size());
  state.bias_velocity.reserve(net.biases.size());
  for (const Matrix& w : net.weights) {
    state.weight_velocity.emplace_back(w.rows(), w.cols());
  }
  for (const std::vector<double>& b : net.biases) {
    state.bias_velocity.emplace_back(b.size(), 0.0);
  }
  return state;
}

void sgd_step(Network& net, const Gradients& grads, OptimizerState& state,
              const TrainConfig& config) {
  if (grads.weights.size() != net.weights.size() ||
      state.weight_velocity.size() != net.weights.size() ||
      grads.biases.size() != net.biases.size() ||
      state.bias_velocity.size() != net.biases.size()) {
    throw ShapeError("sgd_step: gradient/state layer count mismatch");
  }
  const double lr = learning_rate(config.schedule, state.iteration);
  const double mu = config.momentum;
  const double wd = config.weight_decay;

  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    Matrix& w = net.weights[l];
    const Matrix& g = grads.weights[l];
    Matrix& v = state.weight_velocity[l];
    if (!w.same_shape(g) || !w.same_shape(v)) {
      throw ShapeError("sgd_step: weight shape mismatch in layer " + std::to_string(l));
    }
    for (std::size_t i = 0; i < w.size(); ++i) {
      v.data()[i] = mu * v.data()[i] - lr * (g.data()[i] + wd * w.data()[i]);
      w.data()[i] += v.data()[i];
    }
  }
  for (std::size_t l = 0; l < net.biases.size(); ++l) {
    std::vector<double>& b = net.biases[l];
    const std::vector<double>& g = grads.biases[l];
    std::vector<double>& v = state.bias_velocity[l];
    if (b.size() != g.size() || b.size() != v.size()) {
      throw ShapeError("sgd_step: bias shape mismatch in layer " + std::to_string(l));
    }
    for (std::size_t i = 0; i < b.size(); ++i) {
      v[i] = mu * v[i] - lr * g[i];  // biases are not decayed
      b[i] += v[i];
    }
  }
  ++state.iteration;
}

namespace {

bool finite_parameters(const Network& net, const OptimizerState& state) {
  for (const Matrix& w : net.weights) {
    if (!w.all_finite()) return false;
  }
  for (const Matrix& v : state.weight_velocity) {
    if (!v.all_finite()) return false;
  }
  for (const std::vector<double>& b : net.biases) {
    for (double x : b) {
      if (!std::isfinite(x)) return false;
    }
  }
  for (const std::vector<double>& v : state.bias_velocity) {
    for (double x : v) {
      if (!std::isfinite(x)) return false;
    }
  }
  return true;
}

}  // namespace

TrainResult train(const NetworkSpec& spec, const Dataset& train_set, const TrainConfig& config,
                  const Dataset* eval_set) {
  spec.validate();
  config.validate();
  train_set.validate();
  if (train_set.dim() != spec.input_dim) {
    throw ShapeError("train: dataset dimension does not match network input");
  }
  if (train_set.num_classes != spec.num_classes) {
    throw ConfigError("train: dataset classes do not match network output");
  }
  if (eval_set != nullptr) {
    eval_set->validate();
    if (eval_set->dim() != spec.input_dim || eval_set->num_classes != spec.num_classes) {
      throw ShapeError("train: eval set does not match network shape");
    }
  }

  TrainResult result;
  result.net = build(spec, config.seed);
  OptimizerState state = OptimizerState::for_network(result.net);
  result.history.reserve(static_cast<std::size_t>(config.iterations));

  const long m = train_set.size();
  const std::size_t d = train_set.features.cols();
  std::vector<std::size_t> order(static_cast<std::size_t>(m));
  long epoch = 0;
  while (state.iteration < config.iterations) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng::Engine shuffle_eng(rng::derive(config.seed, 0xE50C00u + static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = order.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(shuffle_eng() % i);
      std::swap(order[i - 1], order[j]);
    }

    for (long start = 0; start < m && state.iteration < config.iterations;
         start += config.batch_size) {
      const long rows = std::min(config.batch_size, m - start);
      Matrix batch(static_cast<std::size_t>(rows), d);
      std::vector<int> labels(static_cast<std::size_t>(rows));
      for (long i = 0; i < rows; ++i) {
        const std::size_t src = order[static_cast<std::size_t>(start + i)];
        auto from = train_set.features.row(src);
        auto to = batch.row(static_cast<std::size_t>(i));
        std::copy(from.begin(), from.end(), to.begin());
        labels[static_cast<std::size_t>(i)] = train_set.labels[src];
      }

      const long T = state.iteration;
      const double lr = learning_rate(config.schedule, T);
      try {
        auto [outputs, trace] = forward(result.net, batch);
        auto [value, output_grad] = batch_loss_and_grad(config.loss, outputs, labels);
        if (!std::isfinite(value.total)) {
          throw DivergenceError("loss became non-finite", T);
        }
        const Gradients grads = backward(result.net, trace, output_grad);
        sgd_step(result.net, grads, state, config);
        if (!finite_parameters(result.net, state)) {
          throw DivergenceError("parameters became non-finite", T);
        }
        result.history.push_back({T, lr, value.total, value.base_ce, value.penalty});
      } catch (const DivergenceError&) {
        throw;
      } catch (const NumericError& e) {
        throw DivergenceError(e.what(), T);
      }
    }

    ++epoch;
    EpochRow row;
    row.epoch = epoch;
    row.train_err = zero_one_error(result.net, train_set);
    row.test_err = eval_set != nullptr ? zero_one_error(result.net, *eval_set)
                                       : std::numeric_limits<double>::quiet_NaN();
    result.epochs.push_back(row);
  }
  return result;
}

void write_history_csv(const std::filesystem::path& path, std::span<const HistoryRow> rows,
                       const std::string& comment) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  if (!comment.empty()) out << "# " << comment << "\n";
  out << "iter,lr,loss,base_ce,penalty\n";
  char line[160];
  for (const HistoryRow& r : rows) {
    std::snprintf(line, sizeof line, "%ld,%.9g,%.9g,%.9g,%.9g\n", r.iter, r.lr, r.loss,
                  r.base_ce, r.penalty);
    out << line;
  }
  if (!out) throw DataError("short write to " + path.string());
}

void write_epochs_csv(const std::filesystem::path& path, std::span<const EpochRow> rows,
                      const std::string& comment) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  if (!comment.empty()) out << "# " << comment << "\n";
  out << "epoch,train_err,test_err\n";
  char line[120];
  for (const EpochRow& r : rows) {
    std::snprintf(line, sizeof line, "%ld,%.9g,%.9g\n", r.epoch, r.train_err, r.test_err);
    out << line;
  }
  if (!out) throw DataError("short write to " + path.string());
}

}  // namespace lmdnn
