#include "ideation/comparison_ranking.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "ideation/rng.hpp"

namespace ideation::ranking {

using nlohmann::json;

namespace {

std::string describe(const std::vector<Edge>& edges) {
  std::string out;
  for (std::size_t k = 0; k < edges.size(); ++k) {
    if (k == 8) {
      out += ", ... (" + std::to_string(edges.size()) + " total)";
      break;
    }
    if (k) out += ", ";
    out += "(" + std::to_string(edges[k].a) + "," + std::to_string(edges[k].b) + ")";
  }
  return out;
}

// Union-find with path halving.
struct Components {
  explicit Components(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[std::max(a, b)] = std::min(a, b);
    return true;
  }
  std::vector<std::size_t> parent;
};

}  // namespace

IncompleteTallyError::IncompleteTallyError(std::vector<Edge> edges)
    : Error("incomplete tally: " + std::to_string(edges.size()) + " edge(s) without comparisons: " +
            describe(edges)),
      edges_(std::move(edges)) {}

bool is_connected(std::size_t node_count, std::span<const Edge> edges) {
  if (node_count == 0) return false;
  Components c(node_count);
  std::size_t merges = 0;
  for (const auto& e : edges) merges += c.unite(e.a, e.b);
  return merges + 1 == node_count;
}

ComparisonGraph ComparisonGraph::from_edges(std::size_t node_count, std::vector<Edge> edges) {
  if (node_count < 2) throw ValidationError("nodes", "a comparison graph needs at least 2 nodes");
  for (auto& e : edges) {
    if (e.a == e.b) throw ValidationError("edges", "self loop at node " + std::to_string(e.a));
    if (e.a > e.b) std::swap(e.a, e.b);
    if (e.b >= node_count) throw ValidationError("edges", "node " + std::to_string(e.b) + " out of range");
  }
  std::sort(edges.begin(), edges.end());
  if (auto dup = std::adjacent_find(edges.begin(), edges.end()); dup != edges.end()) {
    throw ValidationError("edges", "duplicate edge (" + std::to_string(dup->a) + "," + std::to_string(dup->b) + ")");
  }
  if (!is_connected(node_count, edges)) throw ValidationError("edges", "comparison graph is not connected");

  ComparisonGraph g;
  g.node_count_ = node_count;
  g.edges_ = std::move(edges);
  g.degree_.assign(node_count, 0);
  g.index_.assign(node_count * node_count, -1);
  for (std::size_t k = 0; k < g.edges_.size(); ++k) {
    const auto [a, b] = g.edges_[k];
    ++g.degree_[a];
    ++g.degree_[b];
    g.index_[a * node_count + b] = g.index_[b * node_count + a] = static_cast<std::int64_t>(k);
  }
  g.max_degree_ = *std::max_element(g.degree_.begin(), g.degree_.end());
  return g;
}

std::optional<std::size_t> ComparisonGraph::edge_index(Node i, Node j) const {
  if (i >= node_count_ || j >= node_count_) return std::nullopt;
  const auto k = index_[i * node_count_ + j];
  if (k < 0) return std::nullopt;
  return static_cast<std::size_t>(k);
}

std::vector<std::uint8_t> ComparisonGraph::adjacency() const {
  std::vector<std::uint8_t> a(node_count_ * node_count_, 0);
  for (const auto& e : edges_) a[e.a * node_count_ + e.b] = a[e.b * node_count_ + e.a] = 1;
  return a;
}

double edge_probability(std::size_t node_count, double oversampling) {
  const double n = static_cast<double>(node_count);
  return std::min(1.0, oversampling * std::log(n) / n);
}

ComparisonGraph sample_connected_graph(std::size_t node_count, double edge_prob, std::uint64_t seed,
                                       std::size_t max_attempts) {
  if (node_count < 2) throw ValidationError("nodes", "need at least 2 nodes");
  if (!(edge_prob > 0.0 && edge_prob <= 1.0)) throw ValidationError("edge_prob", "must be in (0, 1]");
  std::vector<Edge> edges;
  for (std::size_t attempt = 0; attempt < max_attempts; ++attempt) {
    Rng rng(derive_seed(seed, {0x6772617068ULL, attempt}));
    edges.clear();
    for (Node i = 0; i < node_count; ++i) {
      for (Node j = i + 1; j < node_count; ++j) {
        if (rng.bernoulli(edge_prob)) edges.push_back({i, j});
      }
    }
    if (is_connected(node_count, edges)) return ComparisonGraph::from_edges(node_count, std::move(edges));
  }
  throw StateError("no connected comparison graph after " + std::to_string(max_attempts) +
                   " samples; the oversampling constant is too small");
}

ComparisonGraph build_comparison_graph(std::size_t node_count, double oversampling, std::uint64_t seed) {
  if (node_count < 2) throw ValidationError("nodes", "need at least 2 nodes");
  if (!(oversampling > 1.0)) throw ValidationError("c", "oversampling constant must exceed 1");
  return sample_connected_graph(node_count, edge_probability(node_count, oversampling), seed);
}

// ---------------------------------------------------------------------------

ComparisonTally::ComparisonTally(const ComparisonGraph& graph)
    : graph_(graph), counts_(graph.edges().size(), {0, 0}) {}

void ComparisonTally::record(Node i, Node j, Node winner) {
  const auto k = graph_.edge_index(i, j);
  if (!k) {
    throw ValidationError("pair", "(" + std::to_string(i) + "," + std::to_string(j) +
                                      ") is not an edge of the comparison graph");
  }
  if (winner != i && winner != j) {
    throw ValidationError("winner", std::to_string(winner) + " is not part of the compared pair");
  }
  const auto& e = graph_.edges()[*k];
  ++counts_[*k][winner == e.b ? 0 : 1];
  ++total_;
}

std::uint32_t ComparisonTally::wins(Node i, Node j) const {
  const auto k = graph_.edge_index(i, j);
  if (!k) return 0;
  // j beating i: slot 0 means "b beat a".
  return graph_.edges()[*k].b == j ? counts_[*k][0] : counts_[*k][1];
}

std::uint32_t ComparisonTally::trials(Node i, Node j) const {
  const auto k = graph_.edge_index(i, j);
  if (!k) return 0;
  return counts_[*k][0] + counts_[*k][1];
}

PairFractions aggregate_fractions(const ComparisonTally& tally) {
  const auto& g = tally.graph();
  std::vector<Edge> missing;
  PairFractions t(g.node_count());
  for (const auto& e : g.edges()) {
    const auto n = tally.trials(e.a, e.b);
    if (n == 0) {
      missing.push_back(e);
      continue;
    }
    const double t_ab = static_cast<double>(tally.wins(e.a, e.b)) / n;
    t(e.a, e.b) = t_ab;
    t(e.b, e.a) = 1.0 - t_ab;
  }
  if (!missing.empty()) throw IncompleteTallyError(std::move(missing));
  return t;
}

TransitionMatrix build_transition_matrix(const ComparisonGraph& graph, const PairFractions& t) {
  const auto n = graph.node_count();
  const double d = static_cast<double>(graph.max_degree());
  TransitionMatrix T(n);
  std::vector<double> out_mass(n, 0.0);
  for (const auto& e : graph.edges()) {
    T(e.a, e.b) = t(e.a, e.b) / d;
    T(e.b, e.a) = t(e.b, e.a) / d;
    out_mass[e.a] += t(e.a, e.b);
    out_mass[e.b] += t(e.b, e.a);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double diag = 1.0 - out_mass[i] / d;
    if (diag < -1e-12) {
      throw Error("transition matrix row " + std::to_string(i) + " has negative diagonal " + std::to_string(diag));
    }
    T(i, i) = std::max(0.0, diag);
  }
  return T;
}

namespace {

// Solves u (T - I) = 0 with sum(u) = 1 by Gaussian elimination on the
// transposed system, replacing the last equation with the normalization.
std::vector<double> solve_stationary(const TransitionMatrix& T) {
  const auto n = T.size();
  std::vector<double> a(n * (n + 1), 0.0);
  auto at = [&](std::size_t r, std::size_t c) -> double& { return a[r * (n + 1) + c]; };
  for (std::size_t r = 0; r + 1 < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) at(r, c) = T(c, r) - (r == c ? 1.0 : 0.0);
  }
  for (std::size_t c = 0; c < n; ++c) at(n - 1, c) = 1.0;
  at(n - 1, n) = 1.0;

  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(at(r, col)) > std::abs(at(pivot, col))) pivot = r;
    }
    if (std::abs(at(pivot, col)) < 1e-300) throw StateError("stationary system is singular");
    if (pivot != col) {
      for (std::size_t c = 0; c <= n; ++c) std::swap(at(col, c), at(pivot, c));
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = at(r, col) / at(col, col);
      if (f == 0.0) continue;
      for (std::size_t c = col; c <= n; ++c) at(r, c) -= f * at(col, c);
    }
  }
  std::vector<double> u(n);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    u[i] = std::max(0.0, at(i, n) / at(i, i));
    sum += u[i];
  }
  for (auto& v : u) v /= sum;
  return u;
}

}  // namespace

StationaryResult stationary_distribution(const TransitionMatrix& T, const StationaryOptions& options) {
  const auto n = T.size();
  if (n == 0) throw ValidationError("T", "empty matrix");
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (!(T(i, j) >= 0.0)) {
        throw ValidationError("T", "negative or NaN entry at (" + std::to_string(i) + "," + std::to_string(j) + ")");
      }
      s += T(i, j);
    }
    if (std::abs(s - 1.0) > 1e-9) throw ValidationError("T", "row " + std::to_string(i) + " does not sum to 1");
  }

  StationaryResult result;
  std::vector<double> u(n, 1.0 / static_cast<double>(n));
  std::vector<double> next(n);
  double prev_diff = std::numeric_limits<double>::infinity();
  for (std::size_t it = 1; it <= options.max_iterations; ++it) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double ui = u[i];
      if (ui == 0.0) continue;
      const auto row = T.row(i);
      for (std::size_t j = 0; j < n; ++j) next[j] += ui * row[j];
    }
    double diff = 0.0;
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      diff = std::max(diff, std::abs(next[j] - u[j]));
      sum += next[j];
    }
    for (auto& v : next) v /= sum;
    u.swap(next);
    // Geometric tail bound diff * rho / (1 - rho) on the remaining distance.
    const double rho = prev_diff > 0.0 ? diff / prev_diff : 0.0;
    const double remaining = rho < 1.0 ? diff * rho / (1.0 - rho) : std::numeric_limits<double>::infinity();
    prev_diff = diff;
    if (diff <= options.tolerance && remaining <= options.tolerance) {
      result.u = std::move(u);
      result.iterations = it;
      return result;
    }
  }
  result.u = solve_stationary(T);
  result.iterations = options.max_iterations;
  result.direct_solve = true;
  return result;
}

std::vector<Node> top_k(std::span<const double> u, std::size_t k) {
  if (k < 1 || k > u.size()) {
    throw ValidationError("K", "must be in 1.." + std::to_string(u.size()) + ", got " + std::to_string(k));
  }
  // Scores are compared on a 1e-12 grid so solver round-off does not break ties.
  std::vector<std::int64_t> key(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) key[i] = std::llround(u[i] * 1e12);
  std::vector<Node> order(u.size());
  std::iota(order.begin(), order.end(), Node{0});
  std::stable_sort(order.begin(), order.end(), [&](Node a, Node b) { return key[a] > key[b]; });
  order.resize(k);
  return order;
}

RankScores rank_centrality(const ComparisonTally& tally, const StationaryOptions& options) {
  const auto t = aggregate_fractions(tally);
  const auto T = build_transition_matrix(tally.graph(), t);
  RankScores scores;
  scores.u = stationary_distribution(T, options).u;
  scores.order = top_k(scores.u, scores.u.size());
  return scores;
}

// ---------------------------------------------------------------------------

json graph_to_json(const ComparisonGraph& g) {
  json edges = json::array();
  for (const auto& e : g.edges()) edges.push_back({e.a, e.b});
  return json{{"nodes", g.node_count()}, {"max_degree", g.max_degree()}, {"edges", edges}};
}

ComparisonGraph graph_from_json(const json& j) {
  std::vector<Edge> edges;
  for (const auto& e : j.at("edges")) {
    if (e.is_array()) {
      edges.push_back({e.at(0).get<Node>(), e.at(1).get<Node>()});
    } else {
      edges.push_back({e.at("i").get<Node>(), e.at("j").get<Node>()});
    }
  }
  return ComparisonGraph::from_edges(j.at("nodes").get<std::size_t>(), std::move(edges));
}

json tally_to_json(const ComparisonTally& t) {
  json edges = json::array();
  for (const auto& e : t.graph().edges()) {
    edges.push_back({{"i", e.a}, {"j", e.b}, {"j_beats_i", t.wins(e.a, e.b)}, {"i_beats_j", t.wins(e.b, e.a)}});
  }
  return json{{"nodes", t.graph().node_count()}, {"edges", edges}};
}

ComparisonTally tally_from_json(const json& j) {
  ComparisonTally tally(graph_from_json(j));
  for (const auto& e : j.at("edges")) {
    const auto a = e.at("i").get<Node>();
    const auto b = e.at("j").get<Node>();
    const auto b_wins = e.value("j_beats_i", 0u);
    const auto a_wins = e.value("i_beats_j", 0u);
    for (unsigned k = 0; k < b_wins; ++k) tally.record(a, b, b);
    for (unsigned k = 0; k < a_wins; ++k) tally.record(a, b, a);
  }
  return tally;
}

}  // namespace ideation::ranking
