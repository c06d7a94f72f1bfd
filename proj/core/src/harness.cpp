#include "lmdnn/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <string>

#include <nlohmann/json.hpp>

#include "lmdnn/errors.hpp"
#include "lmdnn/loss.hpp"
#include "lmdnn/rng.hpp"

namespace lmdnn {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string g9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << content;
  if (!out) throw DataError("short write to " + path.string());
}

std::string family_tag(LossFamily family) {
  switch (family) {
    case LossFamily::CrossEntropy: return "c";
    case LossFamily::C1: return "c1";
    default: return "c2";
  }
}

LossFamily family_from_tag(const std::string& tag) {
  if (tag == "c") return LossFamily::CrossEntropy;
  if (tag == "c1") return LossFamily::C1;
  if (tag == "c2") return LossFamily::C2;
  throw ConfigError("unknown loss family '" + tag + "'");
}

}  // namespace

std::string_view to_string(DataConfig::Kind kind) {
  switch (kind) {
    case DataConfig::Kind::Blobs: return "blobs";
    case DataConfig::Kind::Digits: return "digits";
    default: return "mnist";
  }
}

DataConfig::Kind data_kind_from_string(std::string_view name) {
  if (name == "blobs") return DataConfig::Kind::Blobs;
  if (name == "digits") return DataConfig::Kind::Digits;
  if (name == "mnist") return DataConfig::Kind::Mnist;
  throw ConfigError("unknown data kind '" + std::string(name) + "'");
}

void DataConfig::validate() const {
  if (kind == Kind::Mnist) {
    if (train_size < 0 || test_size < 0) {
      throw ConfigError("data config: mnist subset sizes must be >= 0");
    }
    return;
  }
  if (train_size < 1 || test_size < 1) {
    throw ConfigError("data config: synthetic train/test sizes must be >= 1");
  }
  if (kind == Kind::Blobs) {
    if (dim < 1) throw ConfigError("data config: dim must be >= 1");
    if (num_classes < 2) throw ConfigError("data config: num_classes must be >= 2");
    if (spread < 0.0) throw ConfigError("data config: spread must be >= 0");
  }
}

namespace {

std::filesystem::path resolve_mnist_dir(const DataConfig& config) {
  if (!config.data_dir.empty()) return config.data_dir;
  if (const char* env = std::getenv("LMDNN_DATA_DIR")) return env;
  return std::filesystem::path("data") / "mnist";
}

}  // namespace

LoadedData load_data(const DataConfig& config) {
  config.validate();
  LoadedData out;
  if (config.kind == DataConfig::Kind::Blobs || config.kind == DataConfig::Kind::Digits) {
    const long total = config.train_size + config.test_size;
    Dataset all = config.kind == DataConfig::Kind::Blobs
                      ? synthetic_blobs(total, config.dim, config.num_classes, config.spread,
                                        config.seed)
                      : synthetic_digits(total, config.seed);
    out.train = subset(all, 0, config.train_size);
    out.test = subset(all, config.train_size, config.test_size);
  } else {
    const std::filesystem::path dir = resolve_mnist_dir(config);
    const std::filesystem::path train_images = dir / "train-images-idx3-ubyte";
    const std::filesystem::path train_labels = dir / "train-labels-idx1-ubyte";
    const std::filesystem::path test_images = dir / "t10k-images-idx3-ubyte";
    const std::filesystem::path test_labels = dir / "t10k-labels-idx1-ubyte";
    for (const auto& p : {train_images, train_labels, test_images, test_labels}) {
      if (!std::filesystem::exists(p)) {
        throw DataError("mnist file not found: " + p.string() +
                        " (set data_dir, --data, or $LMDNN_DATA_DIR)");
      }
    }
    out.train = load_mnist_idx(train_images, train_labels);
    out.test = load_mnist_idx(test_images, test_labels);
    if (config.train_size > 0) out.train = subset(out.train, 0, config.train_size);
    if (config.test_size > 0) out.test = subset(out.test, 0, config.test_size);
  }
  if (config.mean_center) {
    Dataset* others[] = {&out.test};
    per_feature_mean_center(out.train, others);
  }
  return out;
}

void ExperimentConfig::validate() const {
  network.validate();
  train.validate();
  data.validate();
  if (seeds.empty()) throw ConfigError("experiment: seed list must be nonempty");
  if (epochs < 0) throw ConfigError("experiment: epochs must be >= 0");
  for (std::size_t i = 0; i < gammas.size(); ++i) {
    if (!(gammas[i] > 0.0 && gammas[i] < 1.0)) {
      throw ConfigError("experiment: gamma grid points must lie in (0,1)");
    }
    if (i > 0 && !(gammas[i] > gammas[i - 1])) {
      throw ConfigError("experiment: gamma grid must be strictly ascending");
    }
  }
  if (depth_axis) {
    if (depth_axis->depths.empty()) throw ConfigError("depth axis: depth list must be nonempty");
    for (int L : depth_axis->depths) {
      if (L < 2) throw ConfigError("depth axis: depths must be >= 2");
      if (depth_axis->total_hidden < L - 1) {
        throw ConfigError("depth axis: total_hidden too small for depth " + std::to_string(L));
      }
    }
  }
  if (lambda_axis) {
    if (lambda_axis->family == LossFamily::CrossEntropy) {
      throw ConfigError("lambda axis: family must be c1 or c2");
    }
    if (lambda_axis->lambdas.empty()) throw ConfigError("lambda axis: lambda list is empty");
    bool has_zero = false;
    for (double l : lambda_axis->lambdas) {
      if (!(l >= 0.0)) throw ConfigError("lambda axis: lambdas must be >= 0");
      if (l == 0.0) has_zero = true;
    }
    if (!has_zero) throw ConfigError("lambda axis: lambda list must include 0, the baseline");
  }
  if (compare) {
    if (!(compare->lambda_c1 >= 0.0) || !(compare->lambda_c2 >= 0.0)) {
      throw ConfigError("compare: lambdas must be >= 0");
    }
  }
}

namespace {

nlohmann::json data_to_json(const DataConfig& d) {
  return {{"kind", std::string(to_string(d.kind))},
          {"train_size", d.train_size},
          {"test_size", d.test_size},
          {"dim", d.dim},
          {"num_classes", d.num_classes},
          {"spread", d.spread},
          {"seed", d.seed},
          {"mean_center", d.mean_center},
          {"data_dir", d.data_dir.string()}};
}

DataConfig data_from_json(const nlohmann::json& j) {
  DataConfig d;
  if (j.contains("kind")) d.kind = data_kind_from_string(j.at("kind").get<std::string>());
  if (j.contains("train_size")) d.train_size = j.at("train_size").get<long>();
  if (j.contains("test_size")) d.test_size = j.at("test_size").get<long>();
  if (j.contains("dim")) d.dim = j.at("dim").get<int>();
  if (j.contains("num_classes")) d.num_classes = j.at("num_classes").get<int>();
  if (j.contains("spread")) d.spread = j.at("spread").get<double>();
  if (j.contains("seed")) d.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("mean_center")) d.mean_center = j.at("mean_center").get<bool>();
  if (j.contains("data_dir")) d.data_dir = j.at("data_dir").get<std::string>();
  return d;
}

}  // namespace

std::string ExperimentConfig::to_json_string(int indent) const {
  nlohmann::json j;
  j["network"] = nlohmann::json::parse(network.to_json_string());
  j["train"] = nlohmann::json::parse(train.to_json_string());
  j["data"] = data_to_json(data);
  j["seeds"] = seeds;
  j["epochs"] = epochs;
  j["gammas"] = gammas;
  j["margin_space"] = std::string(lmdnn::to_string(margin_space));
  if (depth_axis) {
    j["depth_axis"] = {{"depths", depth_axis->depths},
                       {"total_hidden", depth_axis->total_hidden}};
  }
  if (lambda_axis) {
    j["lambda_axis"] = {{"family", family_tag(lambda_axis->family)},
                        {"lambdas", lambda_axis->lambdas}};
  }
  if (compare) {
    j["compare"] = {{"lambda_c1", compare->lambda_c1}, {"lambda_c2", compare->lambda_c2}};
  }
  return j.dump(indent);
}

ExperimentConfig ExperimentConfig::from_json_string(const std::string& text) {
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    ExperimentConfig cfg;
    if (j.contains("network")) {
      cfg.network = NetworkSpec::from_json_string(j.at("network").dump());
    } else {
      throw ConfigError("experiment config: missing 'network' section");
    }
    if (j.contains("train")) cfg.train = TrainConfig::from_json_string(j.at("train").dump());
    if (j.contains("data")) cfg.data = data_from_json(j.at("data"));
    if (j.contains("seeds")) cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (j.contains("repeats")) {
      const auto repeats = j.at("repeats").get<std::size_t>();
      if (repeats != cfg.seeds.size()) {
        throw ConfigError("experiment config: repeats must equal the seed count");
      }
    }
    if (j.contains("epochs")) cfg.epochs = j.at("epochs").get<long>();
    if (j.contains("gammas")) cfg.gammas = j.at("gammas").get<std::vector<double>>();
    if (j.contains("margin_space")) {
      cfg.margin_space = margin_space_from_string(j.at("margin_space").get<std::string>());
    }
    if (j.contains("depth_axis")) {
      DepthAxis axis;
      axis.depths = j.at("depth_axis").at("depths").get<std::vector<int>>();
      axis.total_hidden = j.at("depth_axis").at("total_hidden").get<int>();
      cfg.depth_axis = axis;
    }
    if (j.contains("lambda_axis")) {
      LambdaAxis axis;
      axis.family = family_from_tag(j.at("lambda_axis").at("family").get<std::string>());
      axis.lambdas = j.at("lambda_axis").at("lambdas").get<std::vector<double>>();
      cfg.lambda_axis = axis;
    }
    if (j.contains("compare")) {
      CompareAxis axis;
      axis.lambda_c1 = j.at("compare").at("lambda_c1").get<double>();
      axis.lambda_c2 = j.at("compare").at("lambda_c2").get<double>();
      cfg.compare = axis;
    }
    cfg.validate();
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("experiment config JSON: ") + e.what());
  }
}

ExperimentConfig ExperimentConfig::from_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_json_string(text);
}

namespace {

/// Config with data loaded, epochs translated to iterations, the gamma grid
/// filled in, and the input bound raised to cover the observed features.
struct ResolvedExperiment {
  ExperimentConfig cfg;
  LoadedData data;
  std::string echo;  // "config: {...}" comment payload for result CSVs
};

ResolvedExperiment resolve_experiment(const ExperimentConfig& raw) {
  raw.validate();
  ResolvedExperiment r{raw, load_data(raw.data), ""};
  if (r.cfg.gammas.empty()) r.cfg.gammas = default_gamma_grid();
  if (r.cfg.epochs > 0) {
    const long per_epoch =
        (r.data.train.size() + r.cfg.train.batch_size - 1) / r.cfg.train.batch_size;
    r.cfg.train.iterations = r.cfg.epochs * per_epoch;
  }
  const double observed = std::max(r.data.train.feature_bound, r.data.test.feature_bound);
  if (r.cfg.network.input_bound < observed) r.cfg.network.input_bound = observed;
  if (r.cfg.network.input_dim != r.data.train.dim()) {
    throw ConfigError("network input_dim " + std::to_string(r.cfg.network.input_dim) +
                      " does not match dataset dimension " + std::to_string(r.data.train.dim()));
  }
  if (r.cfg.network.num_classes != r.data.train.num_classes) {
    throw ConfigError("network num_classes does not match the dataset");
  }
  r.echo = "config: " + r.cfg.to_json_string();
  return r;
}

void write_config_sidecar(const std::filesystem::path& dir, const ExperimentConfig& cfg) {
  write_text(dir / "config.json", cfg.to_json_string(2) + "\n");
}

double wall_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// One seeded training run; divergence is recorded, not rethrown.
RunResult execute_run(const NetworkSpec& spec, TrainConfig tcfg, std::uint64_t seed,
                      const LoadedData& data, std::span<const double> gammas,
                      MarginSpace space) {
  tcfg.seed = seed;
  RunResult rr;
  rr.seed = seed;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const TrainResult tr = train(spec, data.train, tcfg, &data.test);
    if (tr.epochs.empty()) {
      rr.train_err = zero_one_error(tr.net, data.train);
      rr.test_err = zero_one_error(tr.net, data.test);
    } else {
      rr.train_err = tr.epochs.back().train_err;
      rr.test_err = tr.epochs.back().test_err;
    }
    rr.curve = margin_curve(tr.net, data.train, gammas, space);
    rr.effective_A = effective_weight_bound(tr.net);
    rr.layer_bounds = per_layer_weight_bounds(tr.net);
  } catch (const DivergenceError& e) {
    rr.diverged = true;
    rr.diverged_iteration = e.iteration();
    rr.train_err = kNaN;
    rr.test_err = kNaN;
    rr.effective_A = kNaN;
  }
  rr.wall_seconds = wall_since(t0);
  return rr;
}

}  // namespace

SummaryRow summarize(const std::vector<RunResult>& runs) {
  SummaryRow s;
  double sum_test = 0.0, sum_train = 0.0, min_test = std::numeric_limits<double>::infinity();
  std::vector<double> tests;
  for (const RunResult& r : runs) {
    if (r.diverged) {
      ++s.diverged_runs;
      continue;
    }
    tests.push_back(r.test_err);
    sum_test += r.test_err;
    sum_train += r.train_err;
    min_test = std::min(min_test, r.test_err);
  }
  const std::size_t n = tests.size();
  if (n == 0) {
    s.mean_test_err = s.min_test_err = s.std_test_err = s.mean_train_err = kNaN;
    return s;
  }
  s.mean_test_err = sum_test / static_cast<double>(n);
  s.mean_train_err = sum_train / static_cast<double>(n);
  s.min_test_err = min_test;
  if (n >= 2) {
    double ss = 0.0;
    for (double t : tests) ss += (t - s.mean_test_err) * (t - s.mean_test_err);
    s.std_test_err = std::sqrt(ss / static_cast<double>(n - 1));
  }
  return s;
}

TrainOutput run_train(const ExperimentConfig& config, const std::filesystem::path& out_dir) {
  const ResolvedExperiment r = resolve_experiment(config);
  std::filesystem::create_directories(out_dir);
  const auto t0 = std::chrono::steady_clock::now();
  TrainOutput out;
  out.detail = train(r.cfg.network, r.data.train, r.cfg.train, &r.data.test);
  out.run.seed = r.cfg.train.seed;
  if (out.detail.epochs.empty()) {
    out.run.train_err = zero_one_error(out.detail.net, r.data.train);
    out.run.test_err = zero_one_error(out.detail.net, r.data.test);
  } else {
    out.run.train_err = out.detail.epochs.back().train_err;
    out.run.test_err = out.detail.epochs.back().test_err;
  }
  out.run.curve = margin_curve(out.detail.net, r.data.train, r.cfg.gammas, r.cfg.margin_space);
  out.run.effective_A = effective_weight_bound(out.detail.net);
  out.run.layer_bounds = per_layer_weight_bounds(out.detail.net);
  out.run.wall_seconds = wall_since(t0);

  write_history_csv(out_dir / "history.csv", out.detail.history, r.echo);
  write_epochs_csv(out_dir / "epochs.csv", out.detail.epochs, r.echo);
  write_config_sidecar(out_dir, r.cfg);
  return out;
}

DepthSweepResult run_depth_sweep(const ExperimentConfig& config,
                                 const std::filesystem::path& out_dir) {
  const ResolvedExperiment r = resolve_experiment(config);
  if (!r.cfg.depth_axis) throw ConfigError("depth sweep needs a depth_axis section");
  if (r.cfg.network.layers.empty() || !r.cfg.network.layers.front().is_dense()) {
    throw ConfigError("depth sweep template must start with a dense layer");
  }
  const Activation hidden_act = r.cfg.network.layers.front().activation;
  std::filesystem::create_directories(out_dir);

  DepthSweepResult result;
  std::string runs_csv = "depth,units,seed,train_err,test_err,effective_A,ra_bound,diverged\n";
  std::string summary_csv =
      "depth,units,mean_test_err,min_test_err,std_test_err,mean_train_err,"
      "mean_effective_A,mean_ra_bound,diverged_runs\n";

  for (int depth : r.cfg.depth_axis->depths) {
    DepthSweepPoint point;
    point.depth = depth;
    point.units_per_layer = allocate_units(r.cfg.depth_axis->total_hidden, depth);
    const std::vector<int> widths(static_cast<std::size_t>(depth - 1), point.units_per_layer);
    const NetworkSpec spec =
        make_mlp_spec(r.cfg.network.input_dim, r.cfg.network.input_bound, widths,
                      r.cfg.network.num_classes, hidden_act, r.cfg.network.use_bias);

    double sum_A = 0.0, sum_ra = 0.0;
    int finished = 0;
    for (std::uint64_t seed : r.cfg.seeds) {
      RunResult rr =
          execute_run(spec, r.cfg.train, seed, r.data, r.cfg.gammas, r.cfg.margin_space);
      double ra = kNaN;
      if (!rr.diverged) {
        RaBoundParams params;
        params.input_bound = spec.input_bound;
        params.input_dim = spec.input_dim;
        params.sample_count = r.data.train.size();
        params.weight_bound = rr.effective_A;
        params.depth = depth;
        ra = ra_upper_bound(params);
        sum_A += rr.effective_A;
        sum_ra += ra;
        ++finished;
        write_curve_csv(out_dir / ("margin_depth" + std::to_string(depth) + "_seed" +
                                   std::to_string(seed) + ".csv"),
                        rr.curve, r.echo);
      }
      runs_csv += std::to_string(depth) + "," + std::to_string(point.units_per_layer) + "," +
                  std::to_string(seed) + "," + g9(rr.train_err) + "," + g9(rr.test_err) + "," +
                  g9(rr.effective_A) + "," + g9(ra) + "," + (rr.diverged ? "1" : "0") + "\n";
      point.runs.push_back(std::move(rr));
    }
    point.summary = summarize(point.runs);
    point.mean_effective_A = finished > 0 ? sum_A / finished : kNaN;
    point.mean_ra_bound = finished > 0 ? sum_ra / finished : kNaN;
    summary_csv += std::to_string(depth) + "," + std::to_string(point.units_per_layer) + "," +
                   g9(point.summary.mean_test_err) + "," + g9(point.summary.min_test_err) + "," +
                   g9(point.summary.std_test_err) + "," + g9(point.summary.mean_train_err) + "," +
                   g9(point.mean_effective_A) + "," + g9(point.mean_ra_bound) + "," +
                   std::to_string(point.summary.diverged_runs) + "\n";
    result.points.push_back(std::move(point));
  }

  write_text(out_dir / "depth_runs.csv", "# " + r.echo + "\n" + runs_csv);
  write_text(out_dir / "depth_summary.csv", "# " + r.echo + "\n" + summary_csv);
  write_config_sidecar(out_dir, r.cfg);
  return result;
}

LambdaSweepResult run_lambda_sweep(const ExperimentConfig& config,
                                   const std::filesystem::path& out_dir) {
  const ResolvedExperiment r = resolve_experiment(config);
  if (!r.cfg.lambda_axis) throw ConfigError("lambda sweep needs a lambda_axis section");
  std::filesystem::create_directories(out_dir);

  LambdaSweepResult result;
  std::string runs_csv = "lambda,seed,train_err,test_err,diverged\n";
  std::string summary_csv =
      "lambda,baseline,mean_test_err,min_test_err,std_test_err,mean_train_err,diverged_runs\n";

  for (double lambda : r.cfg.lambda_axis->lambdas) {
    LambdaSweepPoint point;
    point.lambda = lambda;
    point.baseline = lambda == 0.0;
    TrainConfig tcfg = r.cfg.train;
    tcfg.loss = LossKind{r.cfg.lambda_axis->family, lambda, false};
    for (std::uint64_t seed : r.cfg.seeds) {
      RunResult rr =
          execute_run(r.cfg.network, tcfg, seed, r.data, r.cfg.gammas, r.cfg.margin_space);
      runs_csv += g9(lambda) + "," + std::to_string(seed) + "," + g9(rr.train_err) + "," +
                  g9(rr.test_err) + "," + (rr.diverged ? "1" : "0") + "\n";
      point.runs.push_back(std::move(rr));
    }
    point.summary = summarize(point.runs);
    summary_csv += g9(lambda) + "," + (point.baseline ? "1" : "0") + "," +
                   g9(point.summary.mean_test_err) + "," + g9(point.summary.min_test_err) + "," +
                   g9(point.summary.std_test_err) + "," + g9(point.summary.mean_train_err) + "," +
                   std::to_string(point.summary.diverged_runs) + "\n";
    result.points.push_back(std::move(point));
  }

  write_text(out_dir / "lambda_runs.csv", "# " + r.echo + "\n" + runs_csv);
  write_text(out_dir / "lambda_summary.csv", "# " + r.echo + "\n" + summary_csv);
  write_config_sidecar(out_dir, r.cfg);
  return result;
}

namespace {

MarginCurve median_curve_of(const std::vector<RunResult>& runs, std::span<const double> gammas,
                            MarginSpace space) {
  MarginCurve median;
  median.space = space;
  median.gammas.assign(gammas.begin(), gammas.end());
  std::vector<double> column;
  for (std::size_t g = 0; g < gammas.size(); ++g) {
    column.clear();
    for (const RunResult& r : runs) {
      if (!r.diverged) column.push_back(r.curve.errors[g]);
    }
    if (column.empty()) return MarginCurve{};  // nothing finished
    std::sort(column.begin(), column.end());
    const std::size_t n = column.size();
    median.errors.push_back(n % 2 == 1 ? column[n / 2]
                                       : 0.5 * (column[n / 2 - 1] + column[n / 2]));
  }
  return median;
}

}  // namespace

CompareResult compare_losses(const ExperimentConfig& config,
                             const std::filesystem::path& out_dir) {
  const ResolvedExperiment r = resolve_experiment(config);
  if (!r.cfg.compare) throw ConfigError("loss comparison needs a compare section");
  if (r.cfg.seeds.size() < 3) {
    throw ConfigError("loss comparison needs at least three seeds");
  }
  std::filesystem::create_directories(out_dir);

  const std::pair<std::string, LossKind> kinds[] = {
      {"c", LossKind::cross_entropy()},
      {"c1", LossKind::c1(r.cfg.compare->lambda_c1)},
      {"c2", LossKind::c2(r.cfg.compare->lambda_c2)},
  };

  CompareResult result;
  std::string summary_csv =
      "loss,mean_test_err,std_test_err,min_test_err,mean_train_err,diverged_runs\n";
  for (const auto& [tag, kind] : kinds) {
    ComparePoint point;
    point.kind = kind;
    point.tag = tag;
    TrainConfig tcfg = r.cfg.train;
    tcfg.loss = kind;
    for (std::uint64_t seed : r.cfg.seeds) {
      RunResult rr =
          execute_run(r.cfg.network, tcfg, seed, r.data, r.cfg.gammas, r.cfg.margin_space);
      if (!rr.diverged) {
        write_curve_csv(out_dir / ("margin_" + tag + "_seed" + std::to_string(seed) + ".csv"),
                        rr.curve, r.echo);
      }
      point.runs.push_back(std::move(rr));
    }
    point.summary = summarize(point.runs);
    point.median_curve = median_curve_of(point.runs, r.cfg.gammas, r.cfg.margin_space);
    if (!point.median_curve.gammas.empty()) {
      write_curve_csv(out_dir / ("margin_" + tag + "_median.csv"), point.median_curve, r.echo);
    }
    summary_csv += kind.to_string() + "," + g9(point.summary.mean_test_err) + "," +
                   g9(point.summary.std_test_err) + "," + g9(point.summary.min_test_err) + "," +
                   g9(point.summary.mean_train_err) + "," +
                   std::to_string(point.summary.diverged_runs) + "\n";
    result.points.push_back(std::move(point));
  }

  write_text(out_dir / "loss_summary.csv", "# " + r.echo + "\n" + summary_csv);
  write_config_sidecar(out_dir, r.cfg);
  return result;
}

CurveOutput run_margin_curve(const ExperimentConfig& config,
                             const std::filesystem::path& out_dir) {
  const ResolvedExperiment r = resolve_experiment(config);
  std::filesystem::create_directories(out_dir);
  const TrainResult tr = train(r.cfg.network, r.data.train, r.cfg.train, &r.data.test);
  CurveOutput out;
  out.train_curve = margin_curve(tr.net, r.data.train, r.cfg.gammas, r.cfg.margin_space);
  out.test_curve = margin_curve(tr.net, r.data.test, r.cfg.gammas, r.cfg.margin_space);
  write_curve_csv(out_dir / "margin_train.csv", out.train_curve, r.echo);
  write_curve_csv(out_dir / "margin_test.csv", out.test_curve, r.echo);
  write_config_sidecar(out_dir, r.cfg);
  return out;
}

namespace {

struct SignedEval {
  double loss = 0.0;
  std::vector<int> signature;  // relu branches, pool argmaxes, penalty competitors
};

SignedEval eval_with_signature(const Network& net, const Matrix& batch,
                               std::span<const int> labels, const LossKind& kind) {
  auto [outputs, trace] = forward(net, batch);
  SignedEval ev;
  ev.loss = batch_loss_and_grad(kind, outputs, labels).first.total;
  for (std::size_t l = 0; l < net.spec.layers.size(); ++l) {
    if (net.spec.layers[l].activation == Activation::Relu) {
      const Matrix& pre = trace.pre[l];
      for (std::size_t i = 0; i < pre.size(); ++i) {
        ev.signature.push_back(pre.data()[i] > 0.0 ? 1 : 0);
      }
    }
    if (l < trace.pool_argmax.size()) {
      ev.signature.insert(ev.signature.end(), trace.pool_argmax[l].begin(),
                          trace.pool_argmax[l].end());
    }
  }
  if (kind.family == LossFamily::C1 && kind.lambda > 0.0) {
    std::vector<double> probs;
    for (std::size_t i = 0; i < outputs.rows(); ++i) {
      std::span<const double> space = outputs.row(i);
      if (!kind.penalty_on_raw) {
        probs = softmax(space);
        space = probs;
      }
      int competitor = -1;
      double best = -std::numeric_limits<double>::infinity();
      for (int k = 0; k < static_cast<int>(space.size()); ++k) {
        if (k + 1 == labels[i]) continue;
        if (space[static_cast<std::size_t>(k)] > best) {
          best = space[static_cast<std::size_t>(k)];
          competitor = k;
        }
      }
      ev.signature.push_back(competitor);
    }
  }
  return ev;
}

std::string describe_parameter(const Network& net, std::size_t index) {
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    const Matrix& w = net.weights[l];
    if (index < w.size()) {
      return "layer " + std::to_string(l) + " weight (" + std::to_string(index / w.cols()) +
             "," + std::to_string(index % w.cols()) + ")";
    }
    index -= w.size();
    const std::vector<double>& b = net.biases[l];
    if (index < b.size()) {
      return "layer " + std::to_string(l) + " bias " + std::to_string(index);
    }
    index -= b.size();
  }
  return "parameter " + std::to_string(index);
}

}  // namespace

GradCheckReport gradient_check(const NetworkSpec& spec, const LossKind& kind, std::uint64_t seed,
                               double step) {
  spec.validate();
  kind.validate();
  if (!(step > 0.0)) throw ConfigError("gradient check: step must be positive");
  Network net = build(spec, seed);
  const std::size_t total = net.parameter_count();
  if (total > 500) {
    throw ConfigError("gradient check: " + std::to_string(total) +
                      " parameters exceed the 500-parameter limit");
  }

  constexpr std::size_t kBatch = 5;
  rng::Engine eng(rng::derive(seed, 0x6DC4));
  Matrix batch(kBatch, static_cast<std::size_t>(spec.input_dim));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    batch.data()[i] = rng::uniform(eng, -spec.input_bound, spec.input_bound);
  }
  std::vector<int> labels(kBatch);
  for (std::size_t i = 0; i < kBatch; ++i) {
    labels[i] = static_cast<int>(i % static_cast<std::size_t>(spec.num_classes)) + 1;
  }

  auto [outputs, trace] = forward(net, batch);
  auto [value, output_grad] = batch_loss_and_grad(kind, outputs, labels);
  const std::vector<double> analytic = backward(net, trace, output_grad).flat();

  std::vector<double> theta = net.parameters_flat();
  GradCheckReport report;
  for (std::size_t i = 0; i < total; ++i) {
    const double orig = theta[i];
    theta[i] = orig + step;
    net.set_parameters_flat(theta);
    const SignedEval plus = eval_with_signature(net, batch, labels, kind);
    theta[i] = orig - step;
    net.set_parameters_flat(theta);
    const SignedEval minus = eval_with_signature(net, batch, labels, kind);
    theta[i] = orig;
    net.set_parameters_flat(theta);
    if (plus.signature != minus.signature) {
      ++report.skipped;  // the two evals sit on different subgradient branches
      continue;
    }
    const double fd = (plus.loss - minus.loss) / (2.0 * step);
    const double rel = std::abs(analytic[i] - fd) /
                       std::max({std::abs(analytic[i]), std::abs(fd), 1e-3});
    ++report.checked;
    if (report.checked == 1 || rel > report.max_rel_err) {
      report.max_rel_err = rel;
      report.worst_coordinate = describe_parameter(net, i);
    }
  }
  if (report.checked == 0) report.worst_coordinate = "none (every coordinate straddled a tie)";
  return report;
}

namespace {

std::vector<std::string> matching_sorted(const std::filesystem::path& dir,
                                         const std::string& prefix, const std::string& suffix) {
  std::vector<std::string> names;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (name.size() >= prefix.size() + suffix.size() && name.starts_with(prefix) &&
        name.ends_with(suffix)) {
      names.push_back(name);
    }
  }
  std::sort(names.begin(), names.end());
  return names;
}

std::string plot_preamble(const std::string& output_png) {
  return "set datafile separator \",\"\n"
         "set key autotitle columnhead noenhanced\n"
         "set term pngcairo size 900,600\n"
         "set output \"" +
         output_png + "\"\n";
}

std::string overlay_plot(const std::vector<std::string>& csvs, const std::string& x,
                         const std::string& y) {
  std::string cmd = "plot ";
  for (std::size_t i = 0; i < csvs.size(); ++i) {
    if (i > 0) cmd += ", \\\n     ";
    std::string title = csvs[i].substr(0, csvs[i].size() - 4);  // drop .csv
    cmd += "\"" + csvs[i] + "\" using \"" + x + "\":\"" + y + "\" with linespoints title \"" +
           title + "\"";
  }
  return cmd + "\n";
}

}  // namespace

std::vector<std::filesystem::path> emit_plots(const std::filesystem::path& results_dir) {
  if (!std::filesystem::is_directory(results_dir)) {
    throw DataError("results directory not found: " + results_dir.string());
  }
  std::vector<std::filesystem::path> written;
  const auto exists = [&](const char* name) {
    return std::filesystem::exists(results_dir / name);
  };
  const auto emit = [&](const char* name, const std::string& body) {
    const std::filesystem::path path = results_dir / name;
    write_text(path, body);
    written.push_back(path);
  };

  if (exists("depth_summary.csv")) {
    emit("depth_test_error.gp",
         plot_preamble("depth_test_error.png") +
             "set xlabel \"depth L\"\nset ylabel \"test error\"\n"
             "plot \"depth_summary.csv\" using \"depth\":\"mean_test_err\":\"std_test_err\" "
             "with yerrorlines title \"mean test error\", \\\n"
             "     \"depth_summary.csv\" using \"depth\":\"min_test_err\" "
             "with linespoints title \"min test error\"\n");
  }
  const auto depth_curves = matching_sorted(results_dir, "margin_depth", ".csv");
  if (!depth_curves.empty()) {
    emit("depth_margin_curves.gp",
         plot_preamble("depth_margin_curves.png") +
             "set xlabel \"margin coefficient gamma\"\nset ylabel \"empirical margin error\"\n" +
             overlay_plot(depth_curves, "gamma", "err"));
  }
  if (exists("lambda_summary.csv")) {
    emit("lambda_test_error.gp",
         plot_preamble("lambda_test_error.png") +
             "set xlabel \"lambda\"\nset ylabel \"test error\"\n"
             "plot \"lambda_summary.csv\" using \"lambda\":\"mean_test_err\" "
             "with linespoints title \"mean test error\"\n");
  }
  const auto median_curves = matching_sorted(results_dir, "margin_", "_median.csv");
  if (!median_curves.empty()) {
    emit("loss_margin_curves.gp",
         plot_preamble("loss_margin_curves.png") +
             "set xlabel \"margin coefficient gamma\"\nset ylabel \"empirical margin error\"\n" +
             overlay_plot(median_curves, "gamma", "err"));
  }
  {
    std::vector<std::string> single;
    if (exists("margin_train.csv")) single.push_back("margin_train.csv");
    if (exists("margin_test.csv")) single.push_back("margin_test.csv");
    if (!single.empty()) {
      emit("margin_curve.gp",
           plot_preamble("margin_curve.png") +
               "set xlabel \"margin coefficient gamma\"\nset ylabel \"empirical margin error\"\n" +
               overlay_plot(single, "gamma", "err"));
    }
  }
  if (exists("history.csv")) {
    emit("training_history.gp",
         plot_preamble("training_history.png") +
             "set xlabel \"iteration\"\nset ylabel \"loss\"\n"
             "plot \"history.csv\" using \"iter\":\"loss\" with lines title \"total\", \\\n"
             "     \"history.csv\" using \"iter\":\"base_ce\" with lines title \"cross "
             "entropy\"\n");
  }

  if (written.empty()) {
    throw DataError("no plottable CSVs in " + results_dir.string() +
                    "; expected depth_summary.csv, lambda_summary.csv, margin_depth*.csv, "
                    "margin_*_median.csv, margin_train.csv, margin_test.csv, or history.csv");
  }
  return written;
}

}  // namespace lmdnn
