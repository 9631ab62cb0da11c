#pragma once

// Graph convolutional network for whole-graph binary scoring:
//
//   H0 = X,  H(i+1) = relu(Â Hi Wi + bi),  g = mean over nodes of H_L,
//   score = sigmoid(g · w_h + b_h)
//
// with Â = D^-1/2 (A + I) D^-1/2. Gradients are derived by hand; training is
// plain SGD with per-component clipping, one graph at a time.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "fpgcn/common.hpp"
#include "fpgcn/featurize.hpp"
#include "fpgcn/matrix.hpp"

namespace fpgcn {

struct GcnLayer {
  Matrix weight; // fan_in x fan_out
  std::vector<double> bias;

  bool operator==(const GcnLayer &) const = default;
};

struct GcnModel {
  std::vector<GcnLayer> layers;
  std::vector<double> head_weight;
  double head_bias = 0.0;

  bool operator==(const GcnModel &) const = default;

  // f0, f1, ..., fL
  std::vector<std::size_t> widths() const {
    std::vector<std::size_t> out;
    if (layers.empty())
      return {head_weight.size()};
    out.push_back(layers.front().weight.rows());
    for (const GcnLayer &l : layers)
      out.push_back(l.weight.cols());
    return out;
  }

  std::size_t input_width() const { return widths().front(); }

  static GcnModel zeros(const std::vector<std::size_t> &widths) {
    if (widths.size() < 2 || std::find(widths.begin(), widths.end(), 0) != widths.end())
      throw ValidationError("a GCN needs at least one layer and positive widths");
    GcnModel m;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i)
      m.layers.push_back({Matrix(widths[i], widths[i + 1]), std::vector<double>(widths[i + 1], 0.0)});
    m.head_weight.assign(widths.back(), 0.0);
    return m;
  }

  // Every parameter drawn from uniform(-scale, scale).
  static GcnModel random(const std::vector<std::size_t> &widths, Rng &rng, double scale = 0.1) {
    GcnModel m = zeros(widths);
    m.visit([&](double &p) { p = rng.uniform(-scale, scale); });
    return m;
  }

  // Visits parameters in file order: per layer W row-major then b, then the
  // head weights, then the head bias.
  template <typename Fn> void visit(Fn &&fn) {
    for (GcnLayer &l : layers) {
      for (double &w : l.weight.data())
        fn(w);
      for (double &b : l.bias)
        fn(b);
    }
    for (double &w : head_weight)
      fn(w);
    fn(head_bias);
  }

  template <typename Fn> void visit(Fn &&fn) const {
    const_cast<GcnModel *>(this)->visit([&](double &p) { fn(static_cast<const double &>(p)); });
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    visit([&](const double &) { ++n; });
    return n;
  }

  std::vector<double> flatten() const {
    std::vector<double> out;
    visit([&](const double &p) { out.push_back(p); });
    return out;
  }
};

// Gradients share the model's shape.
using GcnGradients = GcnModel;

struct TrainConfig {
  std::size_t epochs = 400;
  double rate = 0.05;
  std::uint64_t seed = 1;
  std::vector<std::size_t> hidden = {64, 64}; // one width per GCN layer
  double clip = 5.0;

  void validate() const {
    if (epochs < 1 || hidden.empty() || !(rate > 0) || !(clip > 0) ||
        std::find(hidden.begin(), hidden.end(), 0) != hidden.end())
      throw ValidationError("invalid training configuration");
  }
};

inline Matrix normalize_adjacency(const GraphExample &ex) {
  const std::size_t n = ex.node_count();
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    a(i, i) = 1.0;
  for (const auto &[u, v] : ex.adjacency) {
    if (u >= n || v >= n)
      throw ValidationError("edge endpoint out of range in example '" + ex.case_id + "'");
    a(u, v) = 1.0;
    a(v, u) = 1.0;
  }
  std::vector<double> inv_sqrt_deg(n);
  for (std::size_t i = 0; i < n; ++i) {
    double deg = 0;
    for (double x : a.row(i))
      deg += x;
    inv_sqrt_deg[i] = 1.0 / std::sqrt(deg);
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      a(i, j) *= inv_sqrt_deg[i] * inv_sqrt_deg[j];
  return a;
}

struct ForwardCache {
  Matrix adjacency;                // Â
  std::vector<Matrix> inputs;      // H_i, i = 0..L
  std::vector<Matrix> aggregated;  // Â H_i, i < L
  std::vector<Matrix> pre;         // Â H_i W_i + b_i, i < L
  std::vector<double> pooled;      // mean of H_L rows
  double logit = 0.0;
};

struct ForwardPass {
  double score = 0.5;
  ForwardCache cache;
};

inline double sigmoid(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

inline ForwardPass forward(const GcnModel &model, const GraphExample &ex) {
  if (model.layers.empty() || ex.features.cols() != model.input_width())
    throw ValidationError("feature width " + std::to_string(ex.features.cols()) +
                          " does not match model input width " +
                          std::to_string(model.layers.empty() ? 0 : model.input_width()));
  if (ex.node_count() == 0)
    throw ValidationError("example '" + ex.case_id + "' has no nodes");

  ForwardPass pass;
  ForwardCache &c = pass.cache;
  c.adjacency = normalize_adjacency(ex);
  c.inputs.push_back(ex.features);
  for (const GcnLayer &layer : model.layers) {
    c.aggregated.push_back(matmul(c.adjacency, c.inputs.back()));
    Matrix z = matmul(c.aggregated.back(), layer.weight);
    for (std::size_t r = 0; r < z.rows(); ++r)
      for (std::size_t j = 0; j < z.cols(); ++j)
        z(r, j) += layer.bias[j];
    Matrix h = z;
    for (double &x : h.data())
      x = std::max(0.0, x);
    c.pre.push_back(std::move(z));
    c.inputs.push_back(std::move(h));
  }

  const Matrix &top = c.inputs.back();
  c.pooled.assign(top.cols(), 0.0);
  for (std::size_t r = 0; r < top.rows(); ++r)
    for (std::size_t j = 0; j < top.cols(); ++j)
      c.pooled[j] += top(r, j);
  for (double &x : c.pooled)
    x /= static_cast<double>(top.rows());

  c.logit = model.head_bias;
  for (std::size_t j = 0; j < c.pooled.size(); ++j)
    c.logit += c.pooled[j] * model.head_weight[j];
  pass.score = sigmoid(c.logit);
  return pass;
}

inline double predict_score(const GcnModel &model, const GraphExample &ex) {
  return forward(model, ex).score;
}

inline constexpr double kLossEpsilon = 1e-7;

inline double bce_loss(double score, bool label) {
  const double s = std::clamp(score, kLossEpsilon, 1.0 - kLossEpsilon);
  return label ? -std::log(s) : -std::log(1.0 - s);
}

// Gradients of bce_loss(forward(model, ex).score, label). The sigmoid/BCE
// pair contributes d loss / d logit = score - label.
inline GcnGradients backward(const GcnModel &model, const GraphExample &ex, bool label,
                             const ForwardPass &pass) {
  const ForwardCache &c = pass.cache;
  const std::size_t L = model.layers.size();
  const std::size_t n = ex.node_count();
  GcnGradients grad = GcnModel::zeros(model.widths());

  const double dlogit = pass.score - (label ? 1.0 : 0.0);
  grad.head_bias = dlogit;
  for (std::size_t j = 0; j < c.pooled.size(); ++j)
    grad.head_weight[j] = dlogit * c.pooled[j];

  Matrix dh(n, c.pooled.size());
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < dh.cols(); ++j)
      dh(r, j) = dlogit * model.head_weight[j] / static_cast<double>(n);

  for (std::size_t i = L; i-- > 0;) {
    Matrix dz = dh;
    const Matrix &z = c.pre[i];
    for (std::size_t k = 0; k < dz.size(); ++k)
      if (z.data()[k] <= 0.0)
        dz.data()[k] = 0.0;
    grad.layers[i].weight = matmul_tn(c.aggregated[i], dz);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t j = 0; j < dz.cols(); ++j)
        grad.layers[i].bias[j] += dz(r, j);
    if (i > 0)
      dh = matmul(c.adjacency, matmul_nt(dz, model.layers[i].weight)); // Â is symmetric
  }
  return grad;
}

inline GcnModel sgd_step(GcnModel model, const GcnGradients &grad, double rate, double clip) {
  if (model.widths() != grad.widths())
    throw ValidationError("gradient shape does not match model");
  const std::vector<double> g = grad.flatten();
  std::size_t k = 0;
  model.visit([&](double &p) { p -= rate * std::clamp(g[k++], -clip, clip); });
  return model;
}

// Rounds every parameter to single precision, the precision of the model file.
inline void quantize_to_float(GcnModel &model) {
  model.visit([](double &p) { p = static_cast<double>(static_cast<float>(p)); });
}

struct TrainResult {
  GcnModel model;
  std::vector<double> loss_history; // mean training loss per epoch
};

inline TrainResult train(const std::vector<GraphExample> &dataset, const TrainConfig &cfg) {
  cfg.validate();
  if (dataset.empty())
    throw ValidationError("empty training set");
  for (const GraphExample &ex : dataset)
    if (!ex.label)
      throw ValidationError("training example '" + ex.case_id + "' has no label");

  std::vector<std::size_t> widths = {dataset.front().features.cols()};
  widths.insert(widths.end(), cfg.hidden.begin(), cfg.hidden.end());
  Rng rng(cfg.seed);
  TrainResult result{GcnModel::random(widths, rng), {}};

  std::vector<std::size_t> order(dataset.size());
  for (std::size_t i = 0; i < order.size(); ++i)
    order[i] = i;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double total = 0;
    for (std::size_t idx : order) {
      const GraphExample &ex = dataset[idx];
      const ForwardPass pass = forward(result.model, ex);
      total += bce_loss(pass.score, *ex.label);
      const GcnGradients grad = backward(result.model, ex, *ex.label, pass);
      result.model = sgd_step(std::move(result.model), grad, cfg.rate, cfg.clip);
    }
    result.loss_history.push_back(total / static_cast<double>(dataset.size()));
  }
  quantize_to_float(result.model);
  return result;
}

// Largest relative error |a - n| / max(|a|, |n|, 1e-8) between analytic
// gradients and central differences with step h.
inline double gradient_check(const GcnModel &model, const GraphExample &ex, bool label,
                             double h = 1e-4) {
  const GcnGradients analytic = backward(model, ex, label, forward(model, ex));
  const std::vector<double> a = analytic.flatten();
  GcnModel probe = model;
  std::vector<double *> params;
  probe.visit([&](double &p) { params.push_back(&p); });

  double worst = 0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double saved = *params[k];
    *params[k] = saved + h;
    const double up = bce_loss(forward(probe, ex).score, label);
    *params[k] = saved - h;
    const double down = bce_loss(forward(probe, ex).score, label);
    *params[k] = saved;
    const double numeric = (up - down) / (2 * h);
    const double denom = std::max({std::abs(a[k]), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(a[k] - numeric) / denom);
  }
  return worst;
}

inline void write_model(std::ostream &os, const GcnModel &model) {
  const auto widths = model.widths();
  os << "GCN " << model.layers.size();
  for (std::size_t w : widths)
    os << " " << w;
  os << "\n";
  auto write_row = [&](std::span<const double> values) {
    for (std::size_t i = 0; i < values.size(); ++i)
      os << (i ? " " : "") << format_g9(static_cast<float>(values[i]));
    os << "\n";
  };
  for (const GcnLayer &l : model.layers) {
    for (std::size_t r = 0; r < l.weight.rows(); ++r)
      write_row(l.weight.row(r));
    write_row(l.bias);
  }
  write_row(model.head_weight);
  write_row(std::span<const double>(&model.head_bias, 1));
}

inline GcnModel read_model(std::istream &is) {
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(is, line))
    throw ParseError("missing GCN header", lineno);
  std::istringstream header(line);
  std::string magic;
  std::size_t L = 0;
  if (!(header >> magic >> L) || magic != "GCN" || L < 1)
    throw ParseError("malformed GCN header", lineno);
  std::vector<std::size_t> widths(L + 1);
  for (std::size_t &w : widths)
    if (!(header >> w) || w < 1)
      throw ParseError("malformed GCN header widths", lineno);

  GcnModel model = GcnModel::zeros(widths);
  auto read_row = [&](std::span<double> out) {
    ++lineno;
    if (!std::getline(is, line))
      throw ParseError("unexpected end of model file", lineno);
    std::istringstream fields(line);
    std::string num;
    for (double &x : out) {
      float value = 0;
      if (!(fields >> num))
        throw ParseError("expected " + std::to_string(out.size()) + " values", lineno);
      auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), value);
      if (ec != std::errc() || ptr != num.data() + num.size() || !std::isfinite(value))
        throw ParseError("malformed value '" + num + "'", lineno);
      x = value;
    }
    if (fields >> num)
      throw ParseError("too many values", lineno);
  };
  for (GcnLayer &l : model.layers) {
    for (std::size_t r = 0; r < l.weight.rows(); ++r)
      read_row(l.weight.row(r));
    read_row(l.bias);
  }
  read_row(model.head_weight);
  read_row(std::span<double>(&model.head_bias, 1));
  return model;
}

inline void save_model(const std::string &path, const GcnModel &model) {
  std::ofstream os(path, std::ios::binary);
  if (!os)
    throw Error("cannot write " + path);
  write_model(os, model);
}

inline GcnModel load_model(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is)
    throw Error("cannot read " + path);
  return read_model(is);
}

} // namespace fpgcn
