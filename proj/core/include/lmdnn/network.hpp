#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "lmdnn/matrix.hpp"

namespace lmdnn {

enum class Activation { Sigmoid, Tanh, Relu, Identity };

Activation activation_from_string(const std::string& name);
std::string to_string(Activation act);

double apply_activation(Activation act, double pre);
/// Derivative at `pre`, given the already-computed activation value `post`
/// (sigmoid/tanh reuse it). relu'(0) is taken as 0.
double activation_derivative(Activation act, double pre, double post);

enum class PoolMode { Max, Avg };

struct DenseSpec {
  int out_units = 0;

  bool operator==(const DenseSpec&) const = default;
};

/// Per-filter 2-D cross-correlation, valid padding.
struct ConvSpec {
  int filters = 0;
  int kernel_rows = 0;
  int kernel_cols = 0;
  int stride = 1;

  bool operator==(const ConvSpec&) const = default;
};

/// Pooling over non-overlapping contiguous runs of the innermost dimension
/// (length `region`); rows of a spatial input are never straddled because
/// the row width must divide evenly.
struct PoolSpec {
  PoolMode mode = PoolMode::Max;
  int region = 1;

  bool operator==(const PoolSpec&) const = default;
};

struct LayerSpec {
  std::variant<DenseSpec, ConvSpec, PoolSpec> kind;
  Activation activation = Activation::Identity;  // pool layers must keep Identity

  static LayerSpec dense(int out_units, Activation act);
  static LayerSpec conv(int filters, int kernel_rows, int kernel_cols, int stride, Activation act);
  static LayerSpec pool(PoolMode mode, int region);

  bool is_dense() const { return std::holds_alternative<DenseSpec>(kind); }
  bool is_conv() const { return std::holds_alternative<ConvSpec>(kind); }
  bool is_pool() const { return std::holds_alternative<PoolSpec>(kind); }

  bool operator==(const LayerSpec&) const = default;
};

/// Flattened size of a layer output, plus the (channels, rows, cols) spatial
/// layout when one is still meaningful (conv/pool chains).
struct LayerShape {
  long flat = 0;
  bool has_spatial = false;
  int channels = 0, rows = 0, cols = 0;
};

struct NetworkSpec {
  int input_dim = 0;         // d
  double input_bound = 1.0;  // M: inputs live in [-M, M]^d
  /// Spatial layout {channels, rows, cols} of the input, required only when
  /// the first layer is convolutional. Defaults to a single-channel square
  /// when input_dim is a perfect square.
  std::optional<std::array<int, 3>> input_shape;
  std::vector<LayerSpec> layers;
  int num_classes = 0;  // K
  bool use_bias = true;

  /// Paper-style depth L: number of weighted layers. A conv layer and the
  /// pooling that follows it count as one layer.
  int depth() const;

  /// Throws ConfigError when an invariant is broken (last layer must be
  /// Dense{K} with identity activation, shapes must chain, K >= 2, ...).
  void validate() const;
  /// Input shape followed by each layer's output shape (size layers+1).
  std::vector<LayerShape> shape_chain() const;

  std::string to_json_string(int indent = -1) const;
  static NetworkSpec from_json_string(const std::string& text);

  bool operator==(const NetworkSpec&) const = default;
};

/// Hidden-layer width when `total_hidden` units are spread evenly over the
/// L-1 hidden layers of a depth-L network.
int allocate_units(int total_hidden, int depth);

/// Fully connected spec: L-1 hidden layers of equal width, linear output.
NetworkSpec make_mlp_spec(int input_dim, double input_bound, std::span<const int> hidden_widths,
                          int num_classes, Activation hidden_act, bool use_bias = true);

/// A NetworkSpec with instantiated parameters. Pool layers own no parameters
/// (empty weight matrix / bias vector).
///
/// Dense weights are stored fan_in x fan_out; conv weights one filter per
/// row, row length channels*kernel_rows*kernel_cols.
struct Network {
  NetworkSpec spec;
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases;

  std::size_t parameter_count() const;
  std::vector<double> parameters_flat() const;
  void set_parameters_flat(std::span<const double> values);

  bool operator==(const Network&) const = default;
};

/// Weights i.i.d. uniform on [-r, r], r = sqrt(6/(fan_in+fan_out)); biases
/// zero. Bit-identical for equal (spec, seed).
Network build(const NetworkSpec& spec, std::uint64_t seed);

/// Per-layer intermediate state captured by forward() for backward().
struct ForwardTrace {
  Matrix input;
  std::vector<Matrix> pre;   // pre-activation (for pool layers: the pool input)
  std::vector<Matrix> post;  // layer output
  /// For max-pool layers: chosen input flat index per (sample, window),
  /// stored sample-major. Empty for other layers.
  std::vector<std::vector<int>> pool_argmax;
};

/// Batch forward pass; batch is b x d. Entries with |x| > input_bound only
/// warn (once per call) on stderr. Read-only on the network, safe to call
/// concurrently.
std::pair<Matrix, ForwardTrace> forward(const Network& net, const Matrix& batch);

struct Gradients {
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases;
  Matrix input;  // b x d

  std::vector<double> flat() const;
};

/// Exact reverse-mode gradients of sum_i <output_grad_i, f(x_i, .)> with
/// respect to every parameter and the batch input. `trace` must come from
/// forward() on the same network and batch.
Gradients backward(const Network& net, const ForwardTrace& trace, const Matrix& output_grad);

/// max over all units of the L1 norm of the unit's incoming weights
/// (biases excluded). For a conv filter the incoming weights are its taps.
double effective_weight_bound(const Network& net);
/// Same statistic reported per weighted layer (pool layers report 0).
std::vector<double> per_layer_weight_bounds(const Network& net);

}  // namespace lmdnn
