#include <chrono>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "lmdnn/bounds.hpp"
#include "lmdnn/errors.hpp"
#include "lmdnn/harness.hpp"
#include "lmdnn/margin.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitDiverged = 4;

struct GlobalArgs {
  std::string config_path;
  std::string out_dir = "results";
  std::optional<std::uint64_t> seed;
  std::string data_dir;
};

lmdnn::ExperimentConfig load_config(const GlobalArgs& args, bool seed_overrides_run) {
  if (args.config_path.empty()) throw lmdnn::ConfigError("--config is required for this command");
  auto cfg = lmdnn::ExperimentConfig::from_json_file(args.config_path);
  if (!args.data_dir.empty()) cfg.data.data_dir = args.data_dir;
  if (args.seed && seed_overrides_run) cfg.train.seed = *args.seed;
  return cfg;
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void report_plots(const std::vector<std::filesystem::path>& scripts) {
  for (const auto& p : scripts) std::printf("plot script: %s\n", p.string().c_str());
}

int cmd_train(const GlobalArgs& args) {
  const auto cfg = load_config(args, true);
  Stopwatch watch;
  const auto out = lmdnn::run_train(cfg, args.out_dir);
  std::printf("train: seed=%llu train_err=%.9g test_err=%.9g effective_A=%.9g\n",
              static_cast<unsigned long long>(out.run.seed), out.run.train_err, out.run.test_err,
              out.run.effective_A);
  report_plots(lmdnn::emit_plots(args.out_dir));
  std::printf("results written to %s (%.1fs)\n", args.out_dir.c_str(), watch.seconds());
  return 0;
}

int cmd_sweep_depth(const GlobalArgs& args) {
  const auto cfg = load_config(args, false);
  Stopwatch watch;
  const auto result = lmdnn::run_depth_sweep(cfg, args.out_dir);
  for (const auto& point : result.points) {
    std::printf(
        "depth=%d units=%d mean_test_err=%.9g min_test_err=%.9g std=%.9g mean_ra_bound=%.9g "
        "diverged=%d\n",
        point.depth, point.units_per_layer, point.summary.mean_test_err,
        point.summary.min_test_err, point.summary.std_test_err, point.mean_ra_bound,
        point.summary.diverged_runs);
  }
  report_plots(lmdnn::emit_plots(args.out_dir));
  std::printf("results written to %s (%.1fs)\n", args.out_dir.c_str(), watch.seconds());
  return 0;
}

int cmd_sweep_lambda(const GlobalArgs& args) {
  const auto cfg = load_config(args, false);
  Stopwatch watch;
  const auto result = lmdnn::run_lambda_sweep(cfg, args.out_dir);
  for (const auto& point : result.points) {
    std::printf("lambda=%.9g%s mean_test_err=%.9g min_test_err=%.9g std=%.9g diverged=%d\n",
                point.lambda, point.baseline ? " (baseline)" : "", point.summary.mean_test_err,
                point.summary.min_test_err, point.summary.std_test_err,
                point.summary.diverged_runs);
  }
  report_plots(lmdnn::emit_plots(args.out_dir));
  std::printf("results written to %s (%.1fs)\n", args.out_dir.c_str(), watch.seconds());
  return 0;
}

int cmd_compare_losses(const GlobalArgs& args) {
  const auto cfg = load_config(args, false);
  Stopwatch watch;
  const auto result = lmdnn::compare_losses(cfg, args.out_dir);
  for (const auto& point : result.points) {
    std::printf("loss=%s mean_test_err=%.9g std=%.9g min_test_err=%.9g diverged=%d\n",
                point.kind.to_string().c_str(), point.summary.mean_test_err,
                point.summary.std_test_err, point.summary.min_test_err,
                point.summary.diverged_runs);
  }
  report_plots(lmdnn::emit_plots(args.out_dir));
  std::printf("results written to %s (%.1fs)\n", args.out_dir.c_str(), watch.seconds());
  return 0;
}

int cmd_margin_curve(const GlobalArgs& args) {
  const auto cfg = load_config(args, true);
  Stopwatch watch;
  const auto out = lmdnn::run_margin_curve(cfg, args.out_dir);
  std::printf("margin-curve: %zu grid points (train and test)\n", out.train_curve.gammas.size());
  report_plots(lmdnn::emit_plots(args.out_dir));
  std::printf("results written to %s (%.1fs)\n", args.out_dir.c_str(), watch.seconds());
  return 0;
}

int cmd_gradcheck(const GlobalArgs& args, double step) {
  const auto cfg = load_config(args, true);
  const auto report = lmdnn::gradient_check(cfg.network, cfg.train.loss, cfg.train.seed, step);
  nlohmann::json doc;
  doc["max_rel_err"] = report.max_rel_err;
  doc["worst_coordinate"] = report.worst_coordinate;
  doc["checked"] = report.checked;
  doc["skipped"] = report.skipped;
  std::printf("%s\n", doc.dump(2).c_str());
  return 0;
}

struct BoundsArgs {
  double c = 1.0;
  double input_bound = 1.0;
  double lipschitz = 1.0;
  int pool_region = 1;
  double delta = 0.05;
  std::optional<int> input_dim;
  std::optional<long> samples;
  std::optional<double> weight_bound;
  std::optional<int> depth;
  std::optional<int> classes;
  std::optional<int> hidden_units;
  std::optional<std::string> pfaffian;
  std::optional<double> rademacher;
  std::optional<std::string> curve_path;
};

int cmd_bounds(const BoundsArgs& args) {
  nlohmann::json doc;
  doc["ra_bound"] = nullptr;
  doc["betti_log_bound"] = nullptr;
  doc["margin_bound"] = nullptr;
  doc["argmin_gamma"] = nullptr;

  std::optional<double> ra;
  if (args.input_dim && args.samples && args.weight_bound && args.depth) {
    lmdnn::RaBoundParams params;
    params.c = args.c;
    params.input_bound = args.input_bound;
    params.input_dim = *args.input_dim;
    params.sample_count = *args.samples;
    params.pool_region = args.pool_region;
    params.activation_lipschitz = args.lipschitz;
    params.weight_bound = *args.weight_bound;
    params.depth = *args.depth;
    ra = lmdnn::ra_upper_bound(params);
    doc["ra_bound"] = *ra;
  }

  if (args.classes && args.input_dim && args.hidden_units && args.depth && args.pfaffian) {
    lmdnn::BettiBoundParams params;
    params.num_classes = *args.classes;
    params.input_dim = *args.input_dim;
    params.hidden_units = *args.hidden_units;
    params.depth = *args.depth;
    params.pf = lmdnn::pfaffian_for_activation(*args.pfaffian);
    doc["betti_log_bound"] = lmdnn::betti_log_bound(params);
  }

  if (args.curve_path) {
    if (!args.samples || !args.classes) {
      throw lmdnn::ConfigError("margin bound needs --samples and --classes with --curve");
    }
    std::optional<double> complexity = args.rademacher ? args.rademacher : ra;
    if (!complexity) {
      throw lmdnn::ConfigError(
          "margin bound needs --rademacher or the flags that determine the network complexity "
          "bound");
    }
    lmdnn::MarginBoundParams params;
    params.delta = args.delta;
    params.sample_count = *args.samples;
    params.num_classes = *args.classes;
    params.rademacher = *complexity;
    params.curve = lmdnn::read_curve_csv(*args.curve_path);
    const auto result = lmdnn::margin_bound(params);
    doc["margin_bound"] = result.value;
    doc["argmin_gamma"] = result.argmin_gamma;
  }

  std::printf("%s\n", doc.dump(2).c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deep network training with margin-penalized losses, plus capacity calculators"};
  app.require_subcommand(1);

  GlobalArgs global;
  app.add_option("--config", global.config_path, "experiment JSON document");
  app.add_option("--out", global.out_dir, "output directory for CSV results")
      ->capture_default_str();
  app.add_option("--seed", global.seed, "override the run seed from the config");
  app.add_option("--data", global.data_dir, "directory holding the IDX image/label files");

  auto* train = app.add_subcommand("train", "train one model and write history/epoch CSVs");
  auto* sweep_depth =
      app.add_subcommand("sweep-depth", "train across depths at a fixed hidden-unit budget");
  auto* sweep_lambda =
      app.add_subcommand("sweep-lambda", "train across penalty weights, lambda 0 as baseline");
  auto* compare =
      app.add_subcommand("compare-losses", "train plain CE against both penalized losses");
  auto* margin_curve =
      app.add_subcommand("margin-curve", "train one model and write train/test margin curves");
  auto* bounds = app.add_subcommand("bounds", "evaluate capacity bounds, JSON on stdout");
  auto* gradcheck =
      app.add_subcommand("gradcheck", "compare analytic gradients to finite differences");

  double gradcheck_step = 1e-5;
  gradcheck->add_option("--step", gradcheck_step, "finite-difference step")
      ->capture_default_str();

  BoundsArgs bargs;
  bounds->add_option("--ra-c", bargs.c, "leading constant of the complexity bound")
      ->capture_default_str();
  bounds->add_option("--input-bound", bargs.input_bound, "max-norm bound on the inputs")
      ->capture_default_str();
  bounds->add_option("--lipschitz", bargs.lipschitz, "activation Lipschitz constant")
      ->capture_default_str();
  bounds->add_option("--pool-region", bargs.pool_region, "pooling region size")
      ->capture_default_str();
  bounds->add_option("--delta", bargs.delta, "confidence parameter")->capture_default_str();
  bounds->add_option("--input-dim", bargs.input_dim, "input dimension");
  bounds->add_option("--samples", bargs.samples, "training-set size");
  bounds->add_option("--weight-bound", bargs.weight_bound, "per-unit incoming L1 bound");
  bounds->add_option("--depth", bargs.depth, "number of weighted layers");
  bounds->add_option("--classes", bargs.classes, "number of classes");
  bounds->add_option("--hidden-units", bargs.hidden_units, "total hidden units");
  bounds->add_option("--pfaffian", bargs.pfaffian, "activation name (tanh or arctan)");
  bounds->add_option("--rademacher", bargs.rademacher, "explicit complexity value");
  bounds->add_option("--curve", bargs.curve_path, "margin curve CSV (gamma,err)");

  for (auto* sub : {train, sweep_depth, sweep_lambda, compare, margin_curve, bounds, gradcheck}) {
    sub->fallthrough();
  }

  try {
    app.parse(argc, argv);
    if (*train) return cmd_train(global);
    if (*sweep_depth) return cmd_sweep_depth(global);
    if (*sweep_lambda) return cmd_sweep_lambda(global);
    if (*compare) return cmd_compare_losses(global);
    if (*margin_curve) return cmd_margin_curve(global);
    if (*bounds) return cmd_bounds(bargs);
    if (*gradcheck) return cmd_gradcheck(global, gradcheck_step);
    return kExitConfig;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  } catch (const lmdnn::DivergenceError& e) {
    std::fprintf(stderr, "diverged at iteration %ld: %s\n", e.iteration(), e.what());
    return kExitDiverged;
  } catch (const lmdnn::NumericError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return kExitDiverged;
  } catch (const lmdnn::DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  } catch (const lmdnn::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const lmdnn::ShapeError& e) {
    std::fprintf(stderr, "shape error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  }
}
