#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lmdnn/bounds.hpp"
#include "lmdnn/data.hpp"
#include "lmdnn/margin.hpp"
#include "lmdnn/network.hpp"
#include "lmdnn/optim.hpp"

namespace lmdnn {

/// Where an experiment's samples come from. Synthetic kinds generate
/// train+test from one stream so both halves share the same distribution.
struct DataConfig {
  enum class Kind { Blobs, Digits, Mnist };
  Kind kind = Kind::Blobs;
  long train_size = 1000;
  long test_size = 200;  // for mnist, 0 means the full official file
  int dim = 10;          // blobs only
  int num_classes = 3;   // blobs only
  double spread = 0.3;   // blobs only
  std::uint64_t seed = 1;
  bool mean_center = false;
  std::filesystem::path data_dir;  // mnist IDX directory; may come from CLI

  void validate() const;
};

std::string_view to_string(DataConfig::Kind kind);
DataConfig::Kind data_kind_from_string(std::string_view name);

struct LoadedData {
  Dataset train;
  Dataset test;
};

/// Blobs/digits are generated deterministically from the config seed. Mnist
/// resolves the directory (config, then $LMDNN_DATA_DIR, then ./data/mnist)
/// and loads the four official IDX files; missing files throw DataError.
LoadedData load_data(const DataConfig& config);

struct DepthAxis {
  std::vector<int> depths;
  int total_hidden = 0;  // spread evenly over hidden layers at every depth
};

struct LambdaAxis {
  LossFamily family = LossFamily::C1;  // c1 or c2
  std::vector<double> lambdas;         // must contain 0, the plain-CE baseline
};

struct CompareAxis {
  double lambda_c1 = 1.0;
  double lambda_c2 = 1.0;
};

/// One experiment document: base network + training recipe + data source,
/// the seed list (one run per seed), and at most one sweep axis.
struct ExperimentConfig {
  NetworkSpec network;
  TrainConfig train;
  DataConfig data;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  long epochs = 0;             // when > 0, overrides train.iterations per data size
  std::vector<double> gammas;  // empty -> default 19-point grid
  MarginSpace margin_space = MarginSpace::Softmax;
  std::optional<DepthAxis> depth_axis;
  std::optional<LambdaAxis> lambda_axis;
  std::optional<CompareAxis> compare;

  void validate() const;
  std::string to_json_string(int indent = -1) const;
  static ExperimentConfig from_json_string(const std::string& text);
  static ExperimentConfig from_json_file(const std::filesystem::path& path);
};

/// One trained model's scorecard. wall_seconds is reporting-only and never
/// serialized into result CSVs, so reruns stay byte-identical.
struct RunResult {
  std::uint64_t seed = 0;
  double train_err = 0.0;
  double test_err = 0.0;
  MarginCurve curve;  // empirical margin error on the training set
  double effective_A = 0.0;
  std::vector<double> layer_bounds;
  double wall_seconds = 0.0;
  bool diverged = false;
  long diverged_iteration = -1;
};

/// Seed-aggregated statistics (diverged runs excluded; NaN when none finish).
struct SummaryRow {
  double mean_test_err = 0.0;
  double min_test_err = 0.0;
  double std_test_err = 0.0;  // sample standard deviation, 0 when n < 2
  double mean_train_err = 0.0;
  int diverged_runs = 0;
};

SummaryRow summarize(const std::vector<RunResult>& runs);

struct TrainOutput {
  RunResult run;
  TrainResult detail;
};

/// Single training run with config.train.seed. Writes config.json,
/// history.csv, epochs.csv.
TrainOutput run_train(const ExperimentConfig& config, const std::filesystem::path& out_dir);

struct DepthSweepPoint {
  int depth = 0;
  int units_per_layer = 0;
  std::vector<RunResult> runs;
  SummaryRow summary;
  double mean_effective_A = 0.0;
  double mean_ra_bound = 0.0;
};

struct DepthSweepResult {
  std::vector<DepthSweepPoint> points;
};

/// One MLP per (depth, seed) with total_hidden units spread evenly. Writes
/// config.json, depth_summary.csv, depth_runs.csv, and per-run margin curves
/// margin_depth<L>_seed<seed>.csv.
DepthSweepResult run_depth_sweep(const ExperimentConfig& config,
                                 const std::filesystem::path& out_dir);

struct LambdaSweepPoint {
  double lambda = 0.0;
  bool baseline = false;  // the lambda = 0 row
  std::vector<RunResult> runs;
  SummaryRow summary;
};

struct LambdaSweepResult {
  std::vector<LambdaSweepPoint> points;
};

/// Trains the base network once per (lambda, seed). Writes config.json,
/// lambda_summary.csv, lambda_runs.csv.
LambdaSweepResult run_lambda_sweep(const ExperimentConfig& config,
                                   const std::filesystem::path& out_dir);

struct ComparePoint {
  LossKind kind;
  std::string tag;  // "c", "c1", "c2" (file-name stem)
  std::vector<RunResult> runs;
  SummaryRow summary;
  MarginCurve median_curve;  // pointwise median over finished runs
};

struct CompareResult {
  std::vector<ComparePoint> points;
};

/// Trains {plain CE, C1 at lambda_c1, C2 at lambda_c2} with the shared seed
/// list. Writes config.json, loss_summary.csv, per-seed curves
/// margin_<tag>_seed<seed>.csv, and margin_<tag>_median.csv overlays.
CompareResult compare_losses(const ExperimentConfig& config,
                             const std::filesystem::path& out_dir);

struct CurveOutput {
  MarginCurve train_curve;
  MarginCurve test_curve;
};

/// Trains one model, then writes margin_train.csv and margin_test.csv.
CurveOutput run_margin_curve(const ExperimentConfig& config,
                             const std::filesystem::path& out_dir);

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst_coordinate;  // human-readable parameter position
  std::size_t checked = 0;
  std::size_t skipped = 0;  // coordinates whose +-step evals straddle a tie/kink
};

/// Compares analytic parameter gradients of the batch loss against central
/// finite differences, coordinate by coordinate, on a seeded random batch.
/// Networks above 500 parameters are rejected.
GradCheckReport gradient_check(const NetworkSpec& spec, const LossKind& kind, std::uint64_t seed,
                               double step = 1e-5);

/// Writes gnuplot scripts next to the result CSVs found in the directory.
/// Returns the script paths; a directory without any known CSV is an error.
std::vector<std::filesystem::path> emit_plots(const std::filesystem::path& results_dir);

}  // namespace lmdnn
