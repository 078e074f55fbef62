#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace gedfn {

using Edge = std::pair<int, int>;

/// Undirected simple graph over `p` feature vertices. Edges are stored once
/// with the smaller endpoint first; self-connections are never stored here
/// (they are imposed by AdjacencyMatrix).
class FeatureGraph {
 public:
  FeatureGraph() = default;

  /// Throws ParameterError on self-edges, duplicates or out-of-range ids.
  FeatureGraph(int p, std::span<const Edge> edges);

  int vertex_count() const noexcept { return p_; }
  std::size_t edge_count() const noexcept { return edges_.size(); }
  const std::vector<Edge>& edges() const noexcept { return edges_; }

  /// Sorted neighbor list of `v`.
  std::span<const int> neighbors(int v) const;
  int degree(int v) const { return static_cast<int>(neighbors(v).size()); }
  std::vector<int> degrees() const;

  bool has_edge(int u, int v) const;
  bool is_connected() const;

  /// Subgraph induced by `keep` (old vertex ids); vertex k of the result is
  /// keep[k].
  FeatureGraph induced(std::span<const int> keep) const;

 private:
  int p_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::size_t> offsets_;
  std::vector<int> adjacency_;
};

/// Binary p x p matrix with A_ij = 1 iff (i,j) is an edge or i == j.
/// Stored row-compressed; every row is sorted and contains its diagonal.
class AdjacencyMatrix {
 public:
  AdjacencyMatrix() = default;

  static AdjacencyMatrix from_graph(const FeatureGraph& graph);
  /// All-ones mask, i.e. the adjacency of the complete graph.
  static AdjacencyMatrix full(int p);
  /// Rebuilds from stored row structure (checkpoint loading). Validates the
  /// symmetry / unit diagonal invariants.
  static AdjacencyMatrix from_rows(int p, std::vector<std::size_t> offsets,
                                   std::vector<int> columns);

  int size() const noexcept { return p_; }
  std::size_t nnz() const noexcept { return columns_.size(); }
  double density() const noexcept;

  int operator()(int i, int j) const;
  std::span<const int> row(int i) const;

  const std::vector<std::size_t>& offsets() const noexcept { return offsets_; }
  const std::vector<int>& columns() const noexcept { return columns_; }

  Eigen::MatrixXd dense() const;

  /// FNV-1a content hash over dimension and nonzero structure.
  std::uint64_t fingerprint() const noexcept;

 private:
  int p_ = 0;
  std::vector<std::size_t> offsets_;
  std::vector<int> columns_;
};

/// Hop counts between every vertex pair; `kUnreachable` marks disconnected
/// pairs.
class DistanceMatrix {
 public:
  static constexpr std::int32_t kUnreachable = -1;

  DistanceMatrix() = default;
  explicit DistanceMatrix(int p) : p_(p), d_(static_cast<std::size_t>(p) * p, kUnreachable) {}

  int size() const noexcept { return p_; }
  std::int32_t operator()(int i, int j) const { return d_[index(i, j)]; }
  std::int32_t& at(int i, int j) { return d_[index(i, j)]; }
  bool reachable(int i, int j) const { return (*this)(i, j) != kUnreachable; }

 private:
  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(i) * static_cast<std::size_t>(p_) + static_cast<std::size_t>(j);
  }
  int p_ = 0;
  std::vector<std::int32_t> d_;
};

struct PredictorSet {
  std::vector<int> cores;           // subset of clique_members
  std::vector<int> clique_members;  // cores first, then selected neighbors
  std::vector<int> singletons;

  std::size_t size() const noexcept { return clique_members.size() + singletons.size(); }
  /// Clique members followed by singletons.
  std::vector<int> all() const;
};

/// Preferential-attachment (Barabasi-Albert) graph. Starts from a star on the
/// first m+1 vertices; each later vertex attaches to m distinct earlier
/// vertices with probability proportional to their degree.
FeatureGraph generate_ba_graph(int p, int m, std::uint64_t seed);

AdjacencyMatrix adjacency(const FeatureGraph& graph);

/// BFS from every vertex.
DistanceMatrix all_pairs_distances(const FeatureGraph& graph);

/// Picks p0 true predictors: round(singleton_fraction * p0) scattered
/// singletons and the rest as cliques around `n_cores` high-degree cores.
///
/// Cores are drawn uniformly from the top decile of vertices by degree. Each
/// core receives an even share of the clique quota, filled with its own
/// random neighbors; any shortfall is drawn first from the pooled unused
/// neighbors of all cores and then from their 2-hop neighbors. Singletons are
/// drawn from vertices that are neither clique members nor adjacent to a core.
PredictorSet select_predictors(const FeatureGraph& graph, int p0, int n_cores,
                               double singleton_fraction, std::uint64_t seed);

}  // namespace gedfn
