#include "gedfn/network.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "gedfn/errors.hpp"
#include "gedfn/rng.hpp"

namespace gedfn {

namespace {

constexpr double kProbClamp = 1e-12;

using ArrayMap = Eigen::Map<Eigen::ArrayXd>;
using ConstArrayMap = Eigen::Map<const Eigen::ArrayXd>;

ArrayMap as_array(Eigen::MatrixXd& m) { return {m.data(), m.size()}; }
ArrayMap as_array(Eigen::VectorXd& v) { return {v.data(), v.size()}; }
ConstArrayMap as_array(const Eigen::MatrixXd& m) { return {m.data(), m.size()}; }
ConstArrayMap as_array(const Eigen::VectorXd& v) { return {v.data(), v.size()}; }

// Applies f to the matching flat arrays (weight, values, bias) of each layer.
template <typename F>
void zip_arrays(ModelParams& a, const ModelParams& b, F&& f) {
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    auto& la = a.layers[l];
    const auto& lb = b.layers[l];
    f(as_array(la.weight), as_array(lb.weight));
    f(as_array(la.values), as_array(lb.values));
    f(as_array(la.bias), as_array(lb.bias));
  }
}

void softmax2(const Eigen::MatrixXd& mu, Eigen::MatrixXd& probs) {
  probs.resize(mu.rows(), 2);
  for (Eigen::Index i = 0; i < mu.rows(); ++i) {
    const double top = std::max(mu(i, 0), mu(i, 1));
    const double e0 = std::exp(mu(i, 0) - top);
    const double e1 = std::exp(mu(i, 1) - top);
    const double z = e0 + e1;
    probs(i, 1) = e1 / z;
    probs(i, 0) = 1.0 - probs(i, 1);
  }
}

}  // namespace

// ---------------------------------------------------------------------------

NetworkSpec NetworkSpec::graph_embedded(AdjacencyMatrix mask, std::vector<int> rest) {
  NetworkSpec s;
  s.input_dim = mask.size();
  s.hidden.push_back(mask.size());
  s.hidden.insert(s.hidden.end(), rest.begin(), rest.end());
  s.mask = std::move(mask);
  return s;
}

NetworkSpec NetworkSpec::dense(int p, std::vector<int> hidden) {
  NetworkSpec s;
  s.input_dim = p;
  s.hidden = std::move(hidden);
  return s;
}

std::vector<int> NetworkSpec::widths() const {
  std::vector<int> w{input_dim};
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(kOutputDim);
  return w;
}

void NetworkSpec::validate() const {
  if (input_dim <= 0) throw ContractError("network: input dimension must be positive");
  for (int h : hidden) {
    if (h <= 0) throw ContractError("network: layer widths must be positive");
  }
  if (mask) {
    if (hidden.empty()) throw ContractError("network: a masked layer must be a hidden layer");
    if (mask->size() != input_dim || hidden.front() != input_dim) {
      throw ContractError("network: mask requires h_in == p and a p x p mask");
    }
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw ContractError("network: dropout rate must lie in [0,1)");
  }
}

ModelParams ModelParams::zeros_like() const {
  ModelParams z;
  z.layers.reserve(layers.size());
  for (const auto& l : layers) {
    z.layers.push_back({Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()),
                        Eigen::VectorXd::Zero(l.values.size()),
                        Eigen::VectorXd::Zero(l.bias.size())});
  }
  return z;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) {
    n += static_cast<std::size_t>(l.weight.size() + l.values.size() + l.bias.size());
  }
  return n;
}

bool ModelParams::operator==(const ModelParams& other) const {
  if (layers.size() != other.layers.size()) return false;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& a = layers[l];
    const auto& b = other.layers[l];
    if (a.weight.rows() != b.weight.rows() || a.weight.cols() != b.weight.cols() ||
        a.values.size() != b.values.size() || a.bias.size() != b.bias.size()) {
      return false;
    }
    if (a.weight != b.weight || a.values != b.values || a.bias != b.bias) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------

Network::Network(NetworkSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  if (spec_.mask) {
    sparse_ = spec_.input_dim > kSparseThreshold && spec_.mask->density() < kSparseDensity;
    if (!sparse_) dense_mask_ = spec_.mask->dense();
  }
}

ModelParams Network::init_params(std::uint64_t seed) const {
  Rng rng(seed);
  const auto w = spec_.widths();
  ModelParams params;
  params.layers.resize(w.size() - 1);
  for (std::size_t l = 0; l + 1 < w.size(); ++l) {
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / w[l]));
    auto& layer = params.layers[l];
    layer.bias = Eigen::VectorXd::Zero(w[l + 1]);
    if (l == 0 && sparse_) {
      layer.values.resize(static_cast<Eigen::Index>(spec_.mask->nnz()));
      for (Eigen::Index k = 0; k < layer.values.size(); ++k) layer.values(k) = normal(rng);
      continue;
    }
    layer.weight.resize(w[l], w[l + 1]);
    for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
      for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) layer.weight(r, c) = normal(rng);
    }
    if (l == 0 && masked()) layer.weight.array() *= dense_mask_.array();
  }
  return params;
}

void Network::check_params(const ModelParams& params) const {
  const auto w = spec_.widths();
  if (params.layers.size() + 1 != w.size()) throw ContractError("params: wrong layer count");
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& layer = params.layers[l];
    const bool sparse = l == 0 && sparse_;
    const bool ok =
        layer.bias.size() == w[l + 1] &&
        (sparse ? layer.values.size() == static_cast<Eigen::Index>(spec_.mask->nnz()) &&
                      layer.weight.size() == 0
                : layer.weight.rows() == w[l] && layer.weight.cols() == w[l + 1] &&
                      layer.values.size() == 0);
    if (!ok) throw ContractError("params: shape mismatch in layer " + std::to_string(l));
  }
}

Eigen::MatrixXd Network::layer_preactivation(const ModelParams& params, int layer,
                                             const Eigen::MatrixXd& input) const {
  const auto& lp = params.layers[layer];
  Eigen::MatrixXd out;
  if (layer == 0 && sparse_) {
    const auto& mask = *spec_.mask;
    out = Eigen::MatrixXd::Zero(input.rows(), spec_.hidden.front());
    for (int i = 0; i < mask.size(); ++i) {
      const std::size_t begin = mask.offsets()[i];
      auto cols = mask.row(i);
      for (std::size_t k = 0; k < cols.size(); ++k) {
        out.col(cols[k]).noalias() += lp.values(static_cast<Eigen::Index>(begin + k)) * input.col(i);
      }
    }
  } else if (layer == 0 && masked()) {
    out.noalias() = input * lp.weight.cwiseProduct(dense_mask_);
  } else {
    out.noalias() = input * lp.weight;
  }
  out.rowwise() += lp.bias.transpose();
  return out;
}

ForwardTrace Network::forward(const ModelParams& params, const Eigen::MatrixXd& X, Mode mode,
                              std::uint64_t seed) const {
  if (X.cols() != spec_.input_dim) {
    throw ContractError("forward: input has " + std::to_string(X.cols()) +
                        " columns, network expects " + std::to_string(spec_.input_dim));
  }
  check_params(params);
  const int layers = spec_.layer_count();
  const bool drop = mode == Mode::train && spec_.dropout_rate > 0.0;
  Rng rng(seed);
  std::bernoulli_distribution keep(1.0 - spec_.dropout_rate);
  const double scale = drop ? 1.0 / (1.0 - spec_.dropout_rate) : 1.0;

  ForwardTrace t;
  t.input = X;
  t.pre.reserve(static_cast<std::size_t>(layers));
  t.activations.reserve(static_cast<std::size_t>(layers - 1));
  t.dropout.resize(static_cast<std::size_t>(layers - 1));
  for (int l = 0; l < layers; ++l) {
    const Eigen::MatrixXd& in = l == 0 ? X : t.activations.back();
    t.pre.push_back(layer_preactivation(params, l, in));
    if (l + 1 == layers) break;
    Eigen::MatrixXd z = t.pre.back().cwiseMax(0.0);
    if (drop) {
      Eigen::MatrixXd m(z.rows(), z.cols());
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = keep(rng) ? scale : 0.0;
      }
      z.array() *= m.array();
      t.dropout[l] = std::move(m);
    }
    t.activations.push_back(std::move(z));
  }
  softmax2(t.pre.back(), t.probabilities);
  return t;
}

Gradients Network::backward(const ModelParams& params, const ForwardTrace& trace,
                            std::span<const int> y) const {
  const auto n = trace.probabilities.rows();
  if (static_cast<Eigen::Index>(y.size()) != n) {
    throw ContractError("backward: label count does not match trace");
  }
  const int layers = spec_.layer_count();
  Gradients g = params.zeros_like();

  // d loss / d mu_out for softmax + mean cross-entropy.
  Eigen::MatrixXd delta = trace.probabilities;
  for (Eigen::Index i = 0; i < n; ++i) delta(i, y[i] == 1 ? 1 : 0) -= 1.0;
  delta /= static_cast<double>(n);

  for (int l = layers - 1; l >= 0; --l) {
    const Eigen::MatrixXd& in = l == 0 ? trace.input : trace.activations[l - 1];
    auto& gl = g.layers[l];
    gl.bias = delta.colwise().sum().transpose();
    if (l == 0 && sparse_) {
      const auto& mask = *spec_.mask;
      for (int i = 0; i < mask.size(); ++i) {
        const std::size_t begin = mask.offsets()[i];
        auto cols = mask.row(i);
        for (std::size_t k = 0; k < cols.size(); ++k) {
          gl.values(static_cast<Eigen::Index>(begin + k)) = in.col(i).dot(delta.col(cols[k]));
        }
      }
    } else {
      gl.weight.noalias() = in.transpose() * delta;
      if (l == 0 && masked()) gl.weight.array() *= dense_mask_.array();
    }
    if (l == 0) break;

    Eigen::MatrixXd upstream = delta * params.layers[l].weight.transpose();
    if (trace.dropout[l - 1].size() > 0) upstream.array() *= trace.dropout[l - 1].array();
    // ReLU'(0) is taken as 0.
    delta = (trace.pre[l - 1].array() > 0.0).select(upstream, 0.0);
  }
  return g;
}

Eigen::VectorXd Network::predict(const ModelParams& params, const Eigen::MatrixXd& X) const {
  return forward(params, X, Mode::eval).positive();
}

Eigen::VectorXd Network::positive_from(const ModelParams& params, int layer,
                                       Eigen::MatrixXd pre) const {
  const int layers = spec_.layer_count();
  for (int l = layer + 1; l < layers; ++l) {
    pre = layer_preactivation(params, l, pre.cwiseMax(0.0));
  }
  Eigen::MatrixXd probs;
  softmax2(pre, probs);
  return probs.col(1);
}

std::vector<std::pair<int, double>> Network::first_layer_fanout(const ModelParams& params,
                                                                int j) const {
  std::vector<std::pair<int, double>> out;
  const auto& lp = params.layers.front();
  if (sparse_) {
    const std::size_t begin = spec_.mask->offsets()[j];
    auto cols = spec_.mask->row(j);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      double w = lp.values(static_cast<Eigen::Index>(begin + k));
      if (w != 0.0) out.emplace_back(cols[k], w);
    }
  } else if (masked()) {
    for (int c : spec_.mask->row(j)) {
      double w = lp.weight(j, c);
      if (w != 0.0) out.emplace_back(c, w);
    }
  } else {
    for (Eigen::Index c = 0; c < lp.weight.cols(); ++c) {
      double w = lp.weight(j, c);
      if (w != 0.0) out.emplace_back(static_cast<int>(c), w);
    }
  }
  return out;
}

Eigen::MatrixXd Network::effective_first_weight(const ModelParams& params) const {
  const auto& lp = params.layers.front();
  if (sparse_) {
    const auto& mask = *spec_.mask;
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(spec_.input_dim, spec_.hidden.front());
    for (int i = 0; i < mask.size(); ++i) {
      const std::size_t begin = mask.offsets()[i];
      auto cols = mask.row(i);
      for (std::size_t k = 0; k < cols.size(); ++k) {
        w(i, cols[k]) = lp.values(static_cast<Eigen::Index>(begin + k));
      }
    }
    return w;
  }
  if (masked()) return lp.weight.cwiseProduct(dense_mask_);
  return lp.weight;
}

// ---------------------------------------------------------------------------

double cross_entropy(const Eigen::VectorXd& positive, std::span<const int> y) {
  if (static_cast<Eigen::Index>(y.size()) != positive.size() || y.empty()) {
    throw ContractError("loss: label count does not match predictions");
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < positive.size(); ++i) {
    const double p = std::clamp(positive(i), kProbClamp, 1.0 - kProbClamp);
    total += y[i] == 1 ? std::log(p) : std::log1p(-p);
  }
  return -total / static_cast<double>(positive.size());
}

double loss(const ForwardTrace& trace, std::span<const int> y) {
  return cross_entropy(trace.positive(), y);
}

void add_l2_gradient(Gradients& grads, const ModelParams& params, double penalty) {
  if (penalty == 0.0) return;
  for (std::size_t l = 0; l < grads.layers.size(); ++l) {
    grads.layers[l].weight += penalty * params.layers[l].weight;
    grads.layers[l].values += penalty * params.layers[l].values;
  }
}

AdamState AdamState::zeros_like(const ModelParams& params) {
  return {params.zeros_like(), params.zeros_like(), 0};
}

void adam_step(ModelParams& params, const Gradients& grads, AdamState& state,
               const AdamHyper& hyper, std::size_t t) {
  if (t < 1) throw ContractError("adam_step: step index must be >= 1");
  const double c1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(t));
  const double step = hyper.lr / c1;
  const double root_c2 = std::sqrt(c2);

  zip_arrays(state.m, grads, [&](ArrayMap m, ConstArrayMap g) {
    m = hyper.beta1 * m + (1.0 - hyper.beta1) * g;
  });
  zip_arrays(state.v, grads, [&](ArrayMap v, ConstArrayMap g) {
    v = hyper.beta2 * v + (1.0 - hyper.beta2) * g.square();
  });
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    auto update = [&](ArrayMap theta, ConstArrayMap m, ConstArrayMap v) {
      // lr * m_hat / (sqrt(v_hat) + eps)
      theta -= step * m / (v.sqrt() / root_c2 + hyper.eps);
    };
    auto& p = params.layers[l];
    const auto& m = state.m.layers[l];
    const auto& v = state.v.layers[l];
    update(as_array(p.weight), as_array(m.weight), as_array(v.weight));
    update(as_array(p.values), as_array(m.values), as_array(v.values));
    update(as_array(p.bias), as_array(m.bias), as_array(v.bias));
  }
  state.step = t;
}

}  // namespace gedfn
