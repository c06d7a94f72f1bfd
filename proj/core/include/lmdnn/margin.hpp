#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lmdnn/data.hpp"
#include "lmdnn/network.hpp"

namespace lmdnn {

/// Output space in which margins are measured. Softmax is the default:
/// normalized outputs live in [0,1], so 1 is the margin's natural ceiling.
enum class MarginSpace { Raw, Softmax };

std::string_view to_string(MarginSpace space);
MarginSpace margin_space_from_string(std::string_view name);

/// Fraction of samples whose margin is <= gamma, sampled on an ascending
/// grid. The indicator sets are nested, so errors are non-decreasing.
struct MarginCurve {
  std::vector<double> gammas;  // strictly ascending, each in (0,1)
  std::vector<double> errors;  // err at each gamma, in [0,1]
  MarginSpace space = MarginSpace::Softmax;

  void validate() const;  // throws ConfigError on a broken invariant
};

/// True-class output minus the best wrong-class output.
double margin(std::span<const double> outputs, int label);

/// Fraction of margins <= gamma (boundary inclusive).
double empirical_margin_error(std::span<const double> margins, double gamma);

/// 0.05 .. 0.95 in steps of 0.05 (19 points).
std::vector<double> default_gamma_grid();

/// Margin of every sample in the dataset, in the requested space.
std::vector<double> sample_margins(const Network& net, const Dataset& dataset,
                                   MarginSpace space = MarginSpace::Softmax);

MarginCurve margin_curve(const Network& net, const Dataset& dataset,
                         std::span<const double> gammas,
                         MarginSpace space = MarginSpace::Softmax);

/// Fraction of samples whose predicted class (argmax, lowest index on ties)
/// differs from the label.
double zero_one_error(const Network& net, const Dataset& dataset);

/// CSV with header `gamma,err`, one row per grid point, 9 significant digits.
/// A nonempty comment is written first as a single '# ...' line.
void write_curve_csv(const std::filesystem::path& path, const MarginCurve& curve,
                     const std::string& comment = "");

/// Reads a curve written by write_curve_csv. Leading '#' comment lines are
/// skipped; the space column is not stored in the file, so it must be given.
MarginCurve read_curve_csv(const std::filesystem::path& path,
                           MarginSpace space = MarginSpace::Softmax);

}  // namespace lmdnn
