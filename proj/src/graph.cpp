#include "gedfn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <string>

#include "gedfn/errors.hpp"
#include "gedfn/hash.hpp"
#include "gedfn/rng.hpp"

namespace gedfn {

namespace {

void build_csr(int p, const std::vector<Edge>& edges, bool with_diagonal,
               std::vector<std::size_t>& offsets, std::vector<int>& columns) {
  std::vector<std::size_t> counts(static_cast<std::size_t>(p), with_diagonal ? 1 : 0);
  for (const auto& [u, v] : edges) {
    ++counts[u];
    ++counts[v];
  }
  offsets.assign(static_cast<std::size_t>(p) + 1, 0);
  for (int i = 0; i < p; ++i) offsets[i + 1] = offsets[i] + counts[i];
  columns.assign(offsets.back(), 0);
  std::vector<std::size_t> cursor(offsets.begin(), offsets.end() - 1);
  if (with_diagonal) {
    for (int i = 0; i < p; ++i) columns[cursor[i]++] = i;
  }
  for (const auto& [u, v] : edges) {
    columns[cursor[u]++] = v;
    columns[cursor[v]++] = u;
  }
  for (int i = 0; i < p; ++i) {
    std::sort(columns.begin() + static_cast<std::ptrdiff_t>(offsets[i]),
              columns.begin() + static_cast<std::ptrdiff_t>(offsets[i + 1]));
  }
}

// Random sample of k distinct items from `pool` (order of the draw retained).
std::vector<int> sample_without_replacement(std::vector<int> pool, std::size_t k, Rng& rng) {
  k = std::min(k, pool.size());
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(k);
  return pool;
}

}  // namespace

FeatureGraph::FeatureGraph(int p, std::span<const Edge> edges) : p_(p) {
  if (p < 0) throw ParameterError("vertex count must be non-negative");
  edges_.reserve(edges.size());
  for (auto [u, v] : edges) {
    if (u < 0 || v < 0 || u >= p || v >= p) {
      throw ParameterError("edge (" + std::to_string(u) + "," + std::to_string(v) +
                           ") out of range for p=" + std::to_string(p));
    }
    if (u == v) throw ParameterError("self-edge on vertex " + std::to_string(u));
    if (u > v) std::swap(u, v);
    edges_.emplace_back(u, v);
  }
  std::sort(edges_.begin(), edges_.end());
  auto dup = std::adjacent_find(edges_.begin(), edges_.end());
  if (dup != edges_.end()) {
    throw ParameterError("duplicate edge (" + std::to_string(dup->first) + "," +
                         std::to_string(dup->second) + ")");
  }
  build_csr(p_, edges_, false, offsets_, adjacency_);
}

std::span<const int> FeatureGraph::neighbors(int v) const {
  return {adjacency_.data() + offsets_[v], offsets_[v + 1] - offsets_[v]};
}

std::vector<int> FeatureGraph::degrees() const {
  std::vector<int> d(static_cast<std::size_t>(p_));
  for (int v = 0; v < p_; ++v) d[v] = degree(v);
  return d;
}

bool FeatureGraph::has_edge(int u, int v) const {
  auto nb = neighbors(u);
  return std::binary_search(nb.begin(), nb.end(), v);
}

bool FeatureGraph::is_connected() const {
  if (p_ <= 1) return true;
  std::vector<char> seen(static_cast<std::size_t>(p_), 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  int visited = 1;
  while (!stack.empty()) {
    int u = stack.back();
    stack.pop_back();
    for (int w : neighbors(u)) {
      if (!seen[w]) {
        seen[w] = 1;
        ++visited;
        stack.push_back(w);
      }
    }
  }
  return visited == p_;
}

FeatureGraph FeatureGraph::induced(std::span<const int> keep) const {
  std::vector<int> remap(static_cast<std::size_t>(p_), -1);
  for (std::size_t k = 0; k < keep.size(); ++k) {
    if (keep[k] < 0 || keep[k] >= p_) throw ParameterError("induced: vertex out of range");
    remap[keep[k]] = static_cast<int>(k);
  }
  std::vector<Edge> kept;
  for (const auto& [u, v] : edges_) {
    if (remap[u] >= 0 && remap[v] >= 0) kept.emplace_back(remap[u], remap[v]);
  }
  return FeatureGraph(static_cast<int>(keep.size()), kept);
}

// ---------------------------------------------------------------------------

AdjacencyMatrix AdjacencyMatrix::from_graph(const FeatureGraph& graph) {
  AdjacencyMatrix a;
  a.p_ = graph.vertex_count();
  build_csr(a.p_, graph.edges(), true, a.offsets_, a.columns_);
  return a;
}

AdjacencyMatrix AdjacencyMatrix::full(int p) {
  AdjacencyMatrix a;
  a.p_ = p;
  a.offsets_.resize(static_cast<std::size_t>(p) + 1);
  a.columns_.reserve(static_cast<std::size_t>(p) * p);
  for (int i = 0; i < p; ++i) {
    a.offsets_[i] = a.columns_.size();
    for (int j = 0; j < p; ++j) a.columns_.push_back(j);
  }
  a.offsets_[p] = a.columns_.size();
  return a;
}

AdjacencyMatrix AdjacencyMatrix::from_rows(int p, std::vector<std::size_t> offsets,
                                           std::vector<int> columns) {
  if (p < 0 || offsets.size() != static_cast<std::size_t>(p) + 1 || offsets.front() != 0 ||
      offsets.back() != columns.size()) {
    throw ParameterError("adjacency rows: inconsistent offsets");
  }
  AdjacencyMatrix a;
  a.p_ = p;
  a.offsets_ = std::move(offsets);
  a.columns_ = std::move(columns);
  for (int i = 0; i < p; ++i) {
    if (a.offsets_[i] > a.offsets_[i + 1]) throw ParameterError("adjacency rows: bad offsets");
    auto r = a.row(i);
    if (!std::is_sorted(r.begin(), r.end()) ||
        std::adjacent_find(r.begin(), r.end()) != r.end()) {
      throw ParameterError("adjacency rows: row " + std::to_string(i) + " not strictly sorted");
    }
    if (!std::binary_search(r.begin(), r.end(), i)) {
      throw ParameterError("adjacency rows: missing diagonal at " + std::to_string(i));
    }
    for (int j : r) {
      if (j < 0 || j >= p || a(j, i) != 1) {
        throw ParameterError("adjacency rows: not symmetric at row " + std::to_string(i));
      }
    }
  }
  return a;
}

double AdjacencyMatrix::density() const noexcept {
  if (p_ == 0) return 0.0;
  return static_cast<double>(columns_.size()) / (static_cast<double>(p_) * p_);
}

int AdjacencyMatrix::operator()(int i, int j) const {
  auto r = row(i);
  return std::binary_search(r.begin(), r.end(), j) ? 1 : 0;
}

std::span<const int> AdjacencyMatrix::row(int i) const {
  return {columns_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
}

Eigen::MatrixXd AdjacencyMatrix::dense() const {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(p_, p_);
  for (int i = 0; i < p_; ++i) {
    for (int j : row(i)) m(i, j) = 1.0;
  }
  return m;
}

std::uint64_t AdjacencyMatrix::fingerprint() const noexcept {
  Fnv1a h;
  h.u64(static_cast<std::uint64_t>(p_));
  for (auto o : offsets_) h.u64(o);
  for (int c : columns_) h.u64(static_cast<std::uint64_t>(c));
  return h.value();
}

std::vector<int> PredictorSet::all() const {
  std::vector<int> v = clique_members;
  v.insert(v.end(), singletons.begin(), singletons.end());
  return v;
}

// ---------------------------------------------------------------------------

FeatureGraph generate_ba_graph(int p, int m, std::uint64_t seed) {
  if (p < 2) throw ParameterError("generate_ba_graph: p must be >= 2, got " + std::to_string(p));
  if (m < 1 || m >= p) {
    throw ParameterError("generate_ba_graph: need 1 <= m < p, got m=" + std::to_string(m));
  }
  Rng rng(seed);
  std::vector<Edge> edges;
  edges.reserve(static_cast<std::size_t>(m) * static_cast<std::size_t>(p - m));
  // Each vertex id appears once per incident edge end, so a uniform draw from
  // `ends` is a degree-proportional draw.
  std::vector<int> ends;
  ends.reserve(2 * edges.capacity());
  for (int leaf = 1; leaf <= m; ++leaf) {
    edges.emplace_back(0, leaf);
    ends.push_back(0);
    ends.push_back(leaf);
  }
  std::vector<int> targets;
  for (int v = m + 1; v < p; ++v) {
    targets.clear();
    std::uniform_int_distribution<std::size_t> pick(0, ends.size() - 1);
    while (static_cast<int>(targets.size()) < m) {
      int t = ends[pick(rng)];
      if (std::find(targets.begin(), targets.end(), t) == targets.end()) targets.push_back(t);
    }
    for (int t : targets) {
      edges.emplace_back(t, v);
      ends.push_back(t);
      ends.push_back(v);
    }
  }
  return FeatureGraph(p, edges);
}

AdjacencyMatrix adjacency(const FeatureGraph& graph) { return AdjacencyMatrix::from_graph(graph); }

DistanceMatrix all_pairs_distances(const FeatureGraph& graph) {
  const int p = graph.vertex_count();
  DistanceMatrix d(p);
  std::vector<int> queue(static_cast<std::size_t>(p));
  for (int s = 0; s < p; ++s) {
    std::size_t head = 0, tail = 0;
    queue[tail++] = s;
    d.at(s, s) = 0;
    while (head < tail) {
      int u = queue[head++];
      std::int32_t du = d(s, u);
      for (int w : graph.neighbors(u)) {
        if (d(s, w) == DistanceMatrix::kUnreachable) {
          d.at(s, w) = du + 1;
          queue[tail++] = w;
        }
      }
    }
  }
  return d;
}

PredictorSet select_predictors(const FeatureGraph& graph, int p0, int n_cores,
                               double singleton_fraction, std::uint64_t seed) {
  const int p = graph.vertex_count();
  if (p0 < 0 || p0 > p) {
    throw ParameterError("select_predictors: p0 must lie in [0, p], got " + std::to_string(p0));
  }
  if (!(singleton_fraction >= 0.0 && singleton_fraction <= 1.0)) {
    throw ParameterError("select_predictors: singleton_fraction must lie in [0,1]");
  }
  const int n_single = static_cast<int>(std::lround(singleton_fraction * p0));
  const int n_clique = p0 - n_single;

  Rng rng(seed);
  PredictorSet set;
  std::vector<char> taken(static_cast<std::size_t>(p), 0);
  std::vector<char> near_core(static_cast<std::size_t>(p), 0);

  if (n_clique > 0) {
    if (n_cores < 1) throw ParameterError("select_predictors: need at least one core");
    if (n_cores > n_clique) {
      throw ParameterError("select_predictors: more cores than clique predictors");
    }
    std::vector<int> order(static_cast<std::size_t>(p));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return graph.degree(a) > graph.degree(b); });
    const auto decile = static_cast<std::size_t>(std::ceil(p / 10.0));
    order.resize(std::max<std::size_t>(decile, 1));
    if (static_cast<std::size_t>(n_cores) > order.size()) {
      throw GenerationError("select_predictors: top-degree decile has only " +
                            std::to_string(order.size()) + " vertices for " +
                            std::to_string(n_cores) + " cores");
    }
    set.cores = sample_without_replacement(order, static_cast<std::size_t>(n_cores), rng);
    for (int c : set.cores) {
      taken[c] = 1;
      near_core[c] = 1;
      for (int w : graph.neighbors(c)) near_core[w] = 1;
    }
    set.clique_members = set.cores;

    auto untaken = [&](std::span<const int> pool) {
      std::vector<int> out;
      for (int v : pool) {
        if (!taken[v]) out.push_back(v);
      }
      return out;
    };
    auto take = [&](const std::vector<int>& chosen) {
      for (int v : chosen) {
        taken[v] = 1;
        set.clique_members.push_back(v);
      }
    };

    for (int k = 0; k < n_cores; ++k) {
      int quota = n_clique / n_cores + (k < n_clique % n_cores ? 1 : 0);
      auto own = untaken(graph.neighbors(set.cores[k]));
      take(sample_without_replacement(own, static_cast<std::size_t>(quota - 1), rng));
    }

    auto shortfall = [&] { return static_cast<std::size_t>(n_clique) - set.clique_members.size(); };
    if (shortfall() > 0) {
      std::vector<int> pool;
      for (int v = 0; v < p; ++v) {
        if (near_core[v] && !taken[v]) pool.push_back(v);
      }
      take(sample_without_replacement(pool, shortfall(), rng));
    }
    if (shortfall() > 0) {
      std::vector<char> two_hop(static_cast<std::size_t>(p), 0);
      for (int c : set.cores) {
        for (int w : graph.neighbors(c)) {
          for (int x : graph.neighbors(w)) two_hop[x] = 1;
        }
      }
      std::vector<int> pool;
      for (int v = 0; v < p; ++v) {
        if (two_hop[v] && !taken[v]) pool.push_back(v);
      }
      take(sample_without_replacement(pool, shortfall(), rng));
    }
    if (shortfall() > 0) {
      throw GenerationError("select_predictors: core neighborhoods (2 hops) supply only " +
                            std::to_string(set.clique_members.size()) + " of " +
                            std::to_string(n_clique) + " clique predictors");
    }
  }

  if (n_single > 0) {
    std::vector<int> pool;
    for (int v = 0; v < p; ++v) {
      if (!taken[v] && !near_core[v]) pool.push_back(v);
    }
    if (pool.size() < static_cast<std::size_t>(n_single)) {
      throw GenerationError("select_predictors: only " + std::to_string(pool.size()) +
                            " vertices available for " + std::to_string(n_single) + " singletons");
    }
    set.singletons = sample_without_replacement(pool, static_cast<std::size_t>(n_single), rng);
  }
  return set;
}

}  // namespace gedfn
