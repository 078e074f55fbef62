#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gedfn/graph.hpp"

namespace gedfn {

/// Architecture of a binary feedforward classifier:
/// input(p) -> hidden[0] -> ... -> hidden[k-1] -> 2 (softmax).
/// With a mask present the first layer is graph-embedded: hidden[0] == p and
/// the effective first weight is W (.) A.
struct NetworkSpec {
  int input_dim = 0;
  std::vector<int> hidden;
  std::optional<AdjacencyMatrix> mask;
  double dropout_rate = 0.0;

  static constexpr int kOutputDim = 2;

  /// p -> p (masked) -> rest... -> 2
  static NetworkSpec graph_embedded(AdjacencyMatrix mask, std::vector<int> rest = {64, 16});
  /// p -> hidden... -> 2, fully connected
  static NetworkSpec dense(int p, std::vector<int> hidden);

  /// Widths of every layer boundary: [p, hidden..., 2].
  std::vector<int> widths() const;
  int layer_count() const noexcept { return static_cast<int>(hidden.size()) + 1; }
  /// Throws ContractError if the spec is inconsistent.
  void validate() const;
};

/// Weights of one affine layer, stored in x out. A masked first layer above
/// the sparse-storage threshold keeps one value per mask nonzero in `values`
/// (mask row order) and leaves `weight` empty.
struct LayerParams {
  Eigen::MatrixXd weight;
  Eigen::VectorXd values;
  Eigen::VectorXd bias;
};

struct ModelParams {
  std::vector<LayerParams> layers;

  /// Same shapes, all zeros.
  ModelParams zeros_like() const;
  std::size_t parameter_count() const;
  bool operator==(const ModelParams& other) const;
};

using Gradients = ModelParams;

enum class Mode { train, eval };

struct ForwardTrace {
  Eigen::MatrixXd input;
  std::vector<Eigen::MatrixXd> pre;          // mu per layer
  std::vector<Eigen::MatrixXd> activations;  // post-ReLU (and dropout) per hidden layer
  std::vector<Eigen::MatrixXd> dropout;      // scaled keep masks; empty when inactive
  Eigen::MatrixXd probabilities;             // n x 2, rows sum to 1

  /// Column of class-1 probabilities.
  Eigen::VectorXd positive() const { return probabilities.col(1); }
};

/// A validated NetworkSpec together with the index structures its masked
/// layer needs. All operations are const and deterministic.
class Network {
 public:
  /// Masked layers switch to sparse storage above this input dimension
  /// (provided the mask density is below kSparseDensity).
  static constexpr int kSparseThreshold = 2000;
  static constexpr double kSparseDensity = 0.1;

  explicit Network(NetworkSpec spec);

  const NetworkSpec& spec() const noexcept { return spec_; }
  bool masked() const noexcept { return spec_.mask.has_value(); }
  bool sparse_first_layer() const noexcept { return sparse_; }

  /// Normal(0, sqrt(2 / in_dim)) weights, zero biases; masked-out entries
  /// are exactly zero.
  ModelParams init_params(std::uint64_t seed) const;

  ForwardTrace forward(const ModelParams& params, const Eigen::MatrixXd& X,
                       Mode mode = Mode::eval, std::uint64_t seed = 0) const;

  /// Exact gradient of the mean cross-entropy loss of `trace` w.r.t. every
  /// parameter. The masked-layer gradient is zero wherever A == 0.
  Gradients backward(const ModelParams& params, const ForwardTrace& trace,
                     std::span<const int> y) const;

  /// Class-1 probabilities in eval mode.
  Eigen::VectorXd predict(const ModelParams& params, const Eigen::MatrixXd& X) const;

  /// input * W_eff + b for a single layer.
  Eigen::MatrixXd layer_preactivation(const ModelParams& params, int layer,
                                      const Eigen::MatrixXd& input) const;
  /// Eval-mode continuation: given the pre-activation of `layer`, returns the
  /// class-1 probabilities at the output.
  Eigen::VectorXd positive_from(const ModelParams& params, int layer, Eigen::MatrixXd pre) const;

  /// Nonzero effective first-layer weights leaving input feature j, as
  /// (hidden unit, weight) pairs.
  std::vector<std::pair<int, double>> first_layer_fanout(const ModelParams& params, int j) const;

  /// Dense W (.) A (or W for an unmasked first layer).
  Eigen::MatrixXd effective_first_weight(const ModelParams& params) const;

  /// Checks shapes of `params` against the spec; throws ContractError.
  void check_params(const ModelParams& params) const;

 private:
  NetworkSpec spec_;
  bool sparse_ = false;
  Eigen::MatrixXd dense_mask_;
};

/// Mean binary cross-entropy of the class-1 probabilities, clamped to
/// [1e-12, 1 - 1e-12].
double loss(const ForwardTrace& trace, std::span<const int> y);
double cross_entropy(const Eigen::VectorXd& positive, std::span<const int> y);

/// Adds penalty * W to every weight gradient (biases excluded).
void add_l2_gradient(Gradients& grads, const ModelParams& params, double penalty);

struct AdamHyper {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  ModelParams m;
  ModelParams v;
  std::size_t step = 0;

  static AdamState zeros_like(const ModelParams& params);
};

/// One bias-corrected Adam update with step index t >= 1.
void adam_step(ModelParams& params, const Gradients& grads, AdamState& state,
               const AdamHyper& hyper, std::size_t t);

}  // namespace gedfn
