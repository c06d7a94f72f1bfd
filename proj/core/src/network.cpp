#include "lmdnn/network.hpp"

#include <cmath>
#include <cstdio>
#include <string>

#include <nlohmann/json.hpp>

#include "lmdnn/errors.hpp"
#include "lmdnn/rng.hpp"

namespace lmdnn {

using nlohmann::json;

Activation activation_from_string(const std::string& name) {
  if (name == "sigmoid") return Activation::Sigmoid;
  if (name == "tanh") return Activation::Tanh;
  if (name == "relu") return Activation::Relu;
  if (name == "identity") return Activation::Identity;
  throw ConfigError("unknown activation: " + name);
}

std::string to_string(Activation act) {
  switch (act) {
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Tanh: return "tanh";
    case Activation::Relu: return "relu";
    case Activation::Identity: return "identity";
  }
  return "identity";
}

double apply_activation(Activation act, double pre) {
  switch (act) {
    case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-pre));
    case Activation::Tanh: return std::tanh(pre);
    case Activation::Relu: return pre > 0.0 ? pre : 0.0;
    case Activation::Identity: return pre;
  }
  return pre;
}

double activation_derivative(Activation act, double pre, double post) {
  switch (act) {
    case Activation::Sigmoid: return post * (1.0 - post);
    case Activation::Tanh: return 1.0 - post * post;
    case Activation::Relu: return pre > 0.0 ? 1.0 : 0.0;
    case Activation::Identity: return 1.0;
  }
  return 1.0;
}

LayerSpec LayerSpec::dense(int out_units, Activation act) {
  return LayerSpec{DenseSpec{out_units}, act};
}

LayerSpec LayerSpec::conv(int filters, int kernel_rows, int kernel_cols, int stride,
                          Activation act) {
  return LayerSpec{ConvSpec{filters, kernel_rows, kernel_cols, stride}, act};
}

LayerSpec LayerSpec::pool(PoolMode mode, int region) {
  return LayerSpec{PoolSpec{mode, region}, Activation::Identity};
}

namespace {

LayerShape spatial_shape(int channels, int rows, int cols) {
  LayerShape s;
  s.flat = static_cast<long>(channels) * rows * cols;
  s.has_spatial = true;
  s.channels = channels;
  s.rows = rows;
  s.cols = cols;
  return s;
}

LayerShape flat_shape(long n) {
  LayerShape s;
  s.flat = n;
  return s;
}

}  // namespace

int NetworkSpec::depth() const {
  int weighted = 0;
  for (const auto& layer : layers) {
    if (!layer.is_pool()) ++weighted;
  }
  return weighted;
}

std::vector<LayerShape> NetworkSpec::shape_chain() const {
  std::vector<LayerShape> chain;
  chain.reserve(layers.size() + 1);

  LayerShape in = flat_shape(input_dim);
  if (input_shape) {
    const auto& s = *input_shape;
    if (s[0] < 1 || s[1] < 1 || s[2] < 1 ||
        static_cast<long>(s[0]) * s[1] * s[2] != input_dim) {
      throw ConfigError("input_shape does not multiply out to input_dim");
    }
    in = spatial_shape(s[0], s[1], s[2]);
  } else if (!layers.empty() && layers.front().is_conv()) {
    // A leading conv layer needs a spatial layout; infer a single-channel
    // square when possible.
    int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(input_dim))));
    if (static_cast<long>(side) * side != input_dim) {
      throw ConfigError("conv input needs input_shape (input_dim is not a perfect square)");
    }
    in = spatial_shape(1, side, side);
  }
  chain.push_back(in);

  for (std::size_t l = 0; l < layers.size(); ++l) {
    const LayerShape& prev = chain.back();
    const LayerSpec& layer = layers[l];
    const std::string where = "layer " + std::to_string(l);
    if (const auto* d = std::get_if<DenseSpec>(&layer.kind)) {
      if (d->out_units < 1) throw ConfigError(where + ": dense out_units must be >= 1");
      chain.push_back(flat_shape(d->out_units));
    } else if (const auto* c = std::get_if<ConvSpec>(&layer.kind)) {
      if (c->filters < 1 || c->kernel_rows < 1 || c->kernel_cols < 1 || c->stride < 1) {
        throw ConfigError(where + ": conv parameters must be >= 1");
      }
      if (!prev.has_spatial) {
        throw ConfigError(where + ": conv layer needs a spatial input (follows a dense layer?)");
      }
      if (prev.rows < c->kernel_rows || prev.cols < c->kernel_cols) {
        throw ConfigError(where + ": kernel larger than input feature map");
      }
      int oh = (prev.rows - c->kernel_rows) / c->stride + 1;
      int ow = (prev.cols - c->kernel_cols) / c->stride + 1;
      chain.push_back(spatial_shape(c->filters, oh, ow));
    } else {
      const auto& p = std::get<PoolSpec>(layer.kind);
      if (p.region < 1) throw ConfigError(where + ": pool region must be >= 1");
      if (layer.activation != Activation::Identity) {
        throw ConfigError(where + ": pool layers carry the identity activation");
      }
      if (prev.has_spatial) {
        if (prev.cols % p.region != 0) {
          throw ConfigError(where + ": pool region must divide the feature-map width " +
                            std::to_string(prev.cols));
        }
        chain.push_back(spatial_shape(prev.channels, prev.rows, prev.cols / p.region));
      } else {
        if (prev.flat % p.region != 0) {
          throw ConfigError(where + ": pool region must divide the input size " +
                            std::to_string(prev.flat));
        }
        chain.push_back(flat_shape(prev.flat / p.region));
      }
    }
  }
  return chain;
}

void NetworkSpec::validate() const {
  if (input_dim < 1) throw ConfigError("input_dim must be >= 1");
  if (input_bound < 0.0) throw ConfigError("input_bound must be >= 0");
  if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
  if (layers.empty()) throw ConfigError("network needs at least the output layer");
  const LayerSpec& last = layers.back();
  const auto* out = std::get_if<DenseSpec>(&last.kind);
  if (!out || out->out_units != num_classes || last.activation != Activation::Identity) {
    throw ConfigError("last layer must be Dense{num_classes} with identity activation");
  }
  shape_chain();  // throws on any broken link
}

int allocate_units(int total_hidden, int depth) {
  if (depth < 2) throw ConfigError("allocate_units: depth must be >= 2");
  if (total_hidden < depth - 1) {
    throw ConfigError("allocate_units: need at least one unit per hidden layer");
  }
  return total_hidden / (depth - 1);
}

NetworkSpec make_mlp_spec(int input_dim, double input_bound, std::span<const int> hidden_widths,
                          int num_classes, Activation hidden_act, bool use_bias) {
  NetworkSpec spec;
  spec.input_dim = input_dim;
  spec.input_bound = input_bound;
  spec.num_classes = num_classes;
  spec.use_bias = use_bias;
  for (int w : hidden_widths) spec.layers.push_back(LayerSpec::dense(w, hidden_act));
  spec.layers.push_back(LayerSpec::dense(num_classes, Activation::Identity));
  spec.validate();
  return spec;
}

// --- JSON (document layout fixed by the config interface) ---

namespace {

json layer_to_json(const LayerSpec& layer) {
  json j;
  if (const auto* d = std::get_if<DenseSpec>(&layer.kind)) {
    j["kind"] = "dense";
    j["out"] = d->out_units;
    j["activation"] = to_string(layer.activation);
  } else if (const auto* c = std::get_if<ConvSpec>(&layer.kind)) {
    j["kind"] = "conv";
    j["filters"] = c->filters;
    j["kernel"] = {c->kernel_rows, c->kernel_cols};
    j["stride"] = c->stride;
    j["activation"] = to_string(layer.activation);
  } else {
    const auto& p = std::get<PoolSpec>(layer.kind);
    j["kind"] = "pool";
    j["mode"] = p.mode == PoolMode::Max ? "max" : "avg";
    j["region"] = p.region;
  }
  return j;
}

LayerSpec layer_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "dense") {
    return LayerSpec::dense(j.at("out").get<int>(),
                            activation_from_string(j.at("activation").get<std::string>()));
  }
  if (kind == "conv") {
    const auto& k = j.at("kernel");
    if (!k.is_array() || k.size() != 2) throw ConfigError("conv kernel must be [rows, cols]");
    return LayerSpec::conv(j.at("filters").get<int>(), k[0].get<int>(), k[1].get<int>(),
                           j.value("stride", 1),
                           activation_from_string(j.at("activation").get<std::string>()));
  }
  if (kind == "pool") {
    const std::string mode = j.at("mode").get<std::string>();
    if (mode != "max" && mode != "avg") throw ConfigError("pool mode must be max or avg");
    return LayerSpec::pool(mode == "max" ? PoolMode::Max : PoolMode::Avg,
                           j.at("region").get<int>());
  }
  throw ConfigError("unknown layer kind: " + kind);
}

}  // namespace

std::string NetworkSpec::to_json_string(int indent) const {
  json j;
  j["input_dim"] = input_dim;
  j["input_bound"] = input_bound;
  j["use_bias"] = use_bias;
  j["num_classes"] = num_classes;
  if (input_shape) j["input_shape"] = {(*input_shape)[0], (*input_shape)[1], (*input_shape)[2]};
  j["layers"] = json::array();
  for (const auto& layer : layers) j["layers"].push_back(layer_to_json(layer));
  return j.dump(indent);
}

NetworkSpec from_network_json(const json& j) {
  NetworkSpec spec;
  try {
    spec.input_dim = j.at("input_dim").get<int>();
    spec.input_bound = j.value("input_bound", 1.0);
    spec.use_bias = j.value("use_bias", true);
    spec.num_classes = j.at("num_classes").get<int>();
    if (j.contains("input_shape")) {
      const auto& s = j.at("input_shape");
      if (!s.is_array() || s.size() != 3) {
        throw ConfigError("input_shape must be [channels, rows, cols]");
      }
      spec.input_shape = std::array<int, 3>{s[0].get<int>(), s[1].get<int>(), s[2].get<int>()};
    }
    for (const auto& layer : j.at("layers")) spec.layers.push_back(layer_from_json(layer));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad network document: ") + e.what());
  }
  spec.validate();
  return spec;
}

NetworkSpec NetworkSpec::from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad network JSON: ") + e.what());
  }
  return from_network_json(j);
}

// --- parameters ---

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& w : weights) n += w.size();
  for (const auto& b : biases) n += b.size();
  return n;
}

std::vector<double> Network::parameters_flat() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for (std::size_t l = 0; l < weights.size(); ++l) {
    out.insert(out.end(), weights[l].data(), weights[l].data() + weights[l].size());
    out.insert(out.end(), biases[l].begin(), biases[l].end());
  }
  return out;
}

void Network::set_parameters_flat(std::span<const double> values) {
  if (values.size() != parameter_count()) {
    throw ShapeError("set_parameters_flat: wrong parameter count");
  }
  std::size_t at = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    for (std::size_t i = 0; i < weights[l].size(); ++i) weights[l].data()[i] = values[at++];
    for (double& b : biases[l]) b = values[at++];
  }
}

Network build(const NetworkSpec& spec, std::uint64_t seed) {
  spec.validate();
  const auto chain = spec.shape_chain();
  Network net;
  net.spec = spec;
  net.weights.resize(spec.layers.size());
  net.biases.resize(spec.layers.size());
  rng::Engine eng(seed);
  for (std::size_t l = 0; l < spec.layers.size(); ++l) {
    const LayerSpec& layer = spec.layers[l];
    std::size_t fan_in = 0, fan_out = 0, wrows = 0, wcols = 0, nbias = 0;
    if (const auto* d = std::get_if<DenseSpec>(&layer.kind)) {
      wrows = static_cast<std::size_t>(chain[l].flat);
      wcols = static_cast<std::size_t>(d->out_units);
      fan_in = wrows;
      fan_out = wcols;
      nbias = spec.use_bias ? wcols : 0;
    } else if (const auto* c = std::get_if<ConvSpec>(&layer.kind)) {
      wrows = static_cast<std::size_t>(c->filters);
      wcols = static_cast<std::size_t>(chain[l].channels) * c->kernel_rows * c->kernel_cols;
      fan_in = wcols;
      fan_out = static_cast<std::size_t>(c->filters) * c->kernel_rows * c->kernel_cols;
      nbias = spec.use_bias ? wrows : 0;
    } else {
      continue;  // pool: no parameters
    }
    double r = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Matrix w(wrows, wcols);
    for (std::size_t i = 0; i < w.size(); ++i) w.data()[i] = rng::uniform(eng, -r, r);
    net.weights[l] = std::move(w);
    net.biases[l].assign(nbias, 0.0);
  }
  return net;
}

// --- forward ---

namespace {

void dense_forward(const Matrix& x, const Matrix& w, const std::vector<double>& bias,
                   Activation act, Matrix& pre, Matrix& post) {
  pre = matmul(x, w);
  if (!bias.empty()) {
    for (std::size_t i = 0; i < pre.rows(); ++i) {
      auto row = pre.row(i);
      for (std::size_t j = 0; j < row.size(); ++j) row[j] += bias[j];
    }
  }
  post = Matrix(pre.rows(), pre.cols());
  for (std::size_t i = 0; i < pre.size(); ++i) {
    post.data()[i] = apply_activation(act, pre.data()[i]);
  }
}

void conv_forward(const Matrix& x, const LayerShape& in, const ConvSpec& c, const Matrix& w,
                  const std::vector<double>& bias, Activation act, const LayerShape& out,
                  Matrix& pre, Matrix& post) {
  const int oh = out.rows, ow = out.cols;
  const long map = static_cast<long>(in.rows) * in.cols;
  const long omap = static_cast<long>(oh) * ow;
  pre = Matrix(x.rows(), static_cast<std::size_t>(out.flat));
  for (std::size_t b = 0; b < x.rows(); ++b) {
    const double* xs = x.data() + b * x.cols();
    double* ps = pre.data() + b * pre.cols();
    for (int f = 0; f < c.filters; ++f) {
      const double* taps = w.data() + static_cast<std::size_t>(f) * w.cols();
      const double b0 = bias.empty() ? 0.0 : bias[static_cast<std::size_t>(f)];
      for (int oi = 0; oi < oh; ++oi) {
        for (int oj = 0; oj < ow; ++oj) {
          double acc = b0;
          for (int ch = 0; ch < in.channels; ++ch) {
            const double* plane = xs + ch * map;
            const double* tap = taps + ch * c.kernel_rows * c.kernel_cols;
            for (int u = 0; u < c.kernel_rows; ++u) {
              const double* row = plane + (oi * c.stride + u) * in.cols + oj * c.stride;
              for (int v = 0; v < c.kernel_cols; ++v) acc += tap[u * c.kernel_cols + v] * row[v];
            }
          }
          ps[f * omap + oi * ow + oj] = acc;
        }
      }
    }
  }
  post = Matrix(pre.rows(), pre.cols());
  for (std::size_t i = 0; i < pre.size(); ++i) {
    post.data()[i] = apply_activation(act, pre.data()[i]);
  }
}

void pool_forward(const Matrix& x, const PoolSpec& p, long out_flat, Matrix& post,
                  std::vector<int>& argmax) {
  post = Matrix(x.rows(), static_cast<std::size_t>(out_flat));
  if (p.mode == PoolMode::Max) argmax.assign(x.rows() * static_cast<std::size_t>(out_flat), -1);
  for (std::size_t b = 0; b < x.rows(); ++b) {
    const double* xs = x.data() + b * x.cols();
    double* os = post.data() + b * post.cols();
    for (long k = 0; k < out_flat; ++k) {
      const long start = k * p.region;
      if (p.mode == PoolMode::Avg) {
        double acc = 0.0;
        for (int t = 0; t < p.region; ++t) acc += xs[start + t];
        os[k] = acc / p.region;
      } else {
        int best = 0;
        double bv = xs[start];
        for (int t = 1; t < p.region; ++t) {
          if (xs[start + t] > bv) {
            bv = xs[start + t];
            best = t;
          }
        }
        os[k] = bv;
        argmax[b * static_cast<std::size_t>(out_flat) + static_cast<std::size_t>(k)] =
            static_cast<int>(start) + best;
      }
    }
  }
}

}  // namespace

std::pair<Matrix, ForwardTrace> forward(const Network& net, const Matrix& batch) {
  const NetworkSpec& spec = net.spec;
  const auto chain = spec.shape_chain();
  if (batch.cols() != static_cast<std::size_t>(spec.input_dim)) {
    throw ShapeError("forward: batch has " + std::to_string(batch.cols()) +
                     " columns, network expects " + std::to_string(spec.input_dim));
  }
  long outside = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (std::abs(batch.data()[i]) > spec.input_bound + 1e-12) ++outside;
  }
  if (outside > 0) {
    std::fprintf(stderr, "lmdnn: warning: %ld input entries exceed the input bound %g\n", outside,
                 spec.input_bound);
  }

  ForwardTrace trace;
  trace.input = batch;
  trace.pre.resize(spec.layers.size());
  trace.post.resize(spec.layers.size());
  trace.pool_argmax.resize(spec.layers.size());

  const Matrix* x = &trace.input;
  for (std::size_t l = 0; l < spec.layers.size(); ++l) {
    const LayerSpec& layer = spec.layers[l];
    if (const auto* d = std::get_if<DenseSpec>(&layer.kind)) {
      (void)d;
      dense_forward(*x, net.weights[l], net.biases[l], layer.activation, trace.pre[l],
                    trace.post[l]);
    } else if (const auto* c = std::get_if<ConvSpec>(&layer.kind)) {
      conv_forward(*x, chain[l], *c, net.weights[l], net.biases[l], layer.activation,
                   chain[l + 1], trace.pre[l], trace.post[l]);
    } else {
      const auto& p = std::get<PoolSpec>(layer.kind);
      trace.pre[l] = *x;  // pool input, kept for backward
      pool_forward(*x, p, chain[l + 1].flat, trace.post[l], trace.pool_argmax[l]);
    }
    trace.post[l].ensure_finite("forward");
    if (trace.post[l].cols() != static_cast<std::size_t>(chain[l + 1].flat)) {
      throw ShapeError("forward: layer output disagrees with the declared shape chain");
    }
    x = &trace.post[l];
  }
  return {trace.post.back(), std::move(trace)};
}

// --- backward ---

namespace {

Matrix activation_backward(Activation act, const Matrix& pre, const Matrix& post,
                           const Matrix& grad) {
  Matrix out(grad.rows(), grad.cols());
  for (std::size_t i = 0; i < grad.size(); ++i) {
    out.data()[i] = grad.data()[i] * activation_derivative(act, pre.data()[i], post.data()[i]);
  }
  return out;
}

std::vector<double> column_sums(const Matrix& m) {
  std::vector<double> sums(m.cols(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto row = m.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) sums[j] += row[j];
  }
  return sums;
}

void conv_backward(const Matrix& x, const LayerShape& in, const ConvSpec& c, const Matrix& w,
                   const LayerShape& out, const Matrix& gpre, Matrix& dw, std::vector<double>& db,
                   Matrix& dx, bool want_bias) {
  const int oh = out.rows, ow = out.cols;
  const long map = static_cast<long>(in.rows) * in.cols;
  const long omap = static_cast<long>(oh) * ow;
  dw = Matrix(w.rows(), w.cols());
  db.assign(want_bias ? static_cast<std::size_t>(c.filters) : 0, 0.0);
  dx = Matrix(x.rows(), x.cols());
  for (std::size_t b = 0; b < x.rows(); ++b) {
    const double* xs = x.data() + b * x.cols();
    const double* gs = gpre.data() + b * gpre.cols();
    double* dxs = dx.data() + b * dx.cols();
    for (int f = 0; f < c.filters; ++f) {
      const double* taps = w.data() + static_cast<std::size_t>(f) * w.cols();
      double* dtaps = dw.data() + static_cast<std::size_t>(f) * dw.cols();
      for (int oi = 0; oi < oh; ++oi) {
        for (int oj = 0; oj < ow; ++oj) {
          const double g = gs[f * omap + oi * ow + oj];
          if (want_bias) db[static_cast<std::size_t>(f)] += g;
          for (int ch = 0; ch < in.channels; ++ch) {
            const double* plane = xs + ch * map;
            double* dplane = dxs + ch * map;
            const int tbase = ch * c.kernel_rows * c.kernel_cols;
            for (int u = 0; u < c.kernel_rows; ++u) {
              const long off = static_cast<long>(oi * c.stride + u) * in.cols + oj * c.stride;
              for (int v = 0; v < c.kernel_cols; ++v) {
                dtaps[tbase + u * c.kernel_cols + v] += g * plane[off + v];
                dplane[off + v] += g * taps[tbase + u * c.kernel_cols + v];
              }
            }
          }
        }
      }
    }
  }
}

}  // namespace

std::vector<double> Gradients::flat() const {
  std::vector<double> out;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    out.insert(out.end(), weights[l].data(), weights[l].data() + weights[l].size());
    out.insert(out.end(), biases[l].begin(), biases[l].end());
  }
  return out;
}

Gradients backward(const Network& net, const ForwardTrace& trace, const Matrix& output_grad) {
  const NetworkSpec& spec = net.spec;
  const auto chain = spec.shape_chain();
  if (trace.post.size() != spec.layers.size() || trace.pre.size() != spec.layers.size()) {
    throw ShapeError("backward: trace does not match the network layer count");
  }
  if (!output_grad.same_shape(trace.post.back())) {
    throw ShapeError("backward: output_grad shape does not match the traced outputs");
  }

  Gradients grads;
  grads.weights.resize(spec.layers.size());
  grads.biases.resize(spec.layers.size());

  Matrix g = output_grad;  // dJ/d(post[l]) while walking backwards
  for (std::size_t li = spec.layers.size(); li-- > 0;) {
    const LayerSpec& layer = spec.layers[li];
    const Matrix& x = li == 0 ? trace.input : trace.post[li - 1];
    if (!g.same_shape(trace.post[li])) {
      throw ShapeError("backward: stale trace (layer " + std::to_string(li) + ")");
    }
    if (layer.is_dense()) {
      Matrix gpre = activation_backward(layer.activation, trace.pre[li], trace.post[li], g);
      grads.weights[li] = matmul_tn(x, gpre);
      if (!net.biases[li].empty()) grads.biases[li] = column_sums(gpre);
      g = matmul_nt(gpre, net.weights[li]);
    } else if (const auto* c = std::get_if<ConvSpec>(&layer.kind)) {
      Matrix gpre = activation_backward(layer.activation, trace.pre[li], trace.post[li], g);
      Matrix dx;
      conv_backward(x, chain[li], *c, net.weights[li], chain[li + 1], gpre, grads.weights[li],
                    grads.biases[li], dx, !net.biases[li].empty());
      g = std::move(dx);
    } else {
      const auto& p = std::get<PoolSpec>(layer.kind);
      Matrix dx(x.rows(), x.cols());
      const std::size_t out_flat = trace.post[li].cols();
      for (std::size_t b = 0; b < x.rows(); ++b) {
        const double* gs = g.data() + b * g.cols();
        double* dxs = dx.data() + b * dx.cols();
        for (std::size_t k = 0; k < out_flat; ++k) {
          if (p.mode == PoolMode::Max) {
            const int src = trace.pool_argmax[li][b * out_flat + k];
            dxs[src] += gs[k];
          } else {
            const double share = gs[k] / p.region;
            for (int t = 0; t < p.region; ++t) dxs[k * p.region + t] += share;
          }
        }
      }
      g = std::move(dx);
    }
  }
  g.ensure_finite("backward input gradient");
  grads.input = std::move(g);
  return grads;
}

double effective_weight_bound(const Network& net) {
  double best = 0.0;
  for (double v : per_layer_weight_bounds(net)) best = std::max(best, v);
  return best;
}

std::vector<double> per_layer_weight_bounds(const Network& net) {
  std::vector<double> out(net.spec.layers.size(), 0.0);
  for (std::size_t l = 0; l < net.spec.layers.size(); ++l) {
    const LayerSpec& layer = net.spec.layers[l];
    const Matrix& w = net.weights[l];
    double best = 0.0;
    if (layer.is_dense()) {
      for (std::size_t j = 0; j < w.cols(); ++j) {
        double l1 = 0.0;
        for (std::size_t i = 0; i < w.rows(); ++i) l1 += std::abs(w(i, j));
        best = std::max(best, l1);
      }
    } else if (layer.is_conv()) {
      for (std::size_t f = 0; f < w.rows(); ++f) {
        double l1 = 0.0;
        for (std::size_t j = 0; j < w.cols(); ++j) l1 += std::abs(w(f, j));
        best = std::max(best, l1);
      }
    }
    out[l] = best;
  }
  return out;
}

}  // namespace lmdnn
