#pragma once

// Importance ranking from pairwise comparisons (Rank Centrality): an
// Erdos-Renyi comparison graph, per-edge win tallies, the Markov chain built
// from the win fractions, and top-K selection by its stationary distribution.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ideation/error.hpp"

namespace ideation::ranking {

using Node = std::size_t;

/// Unordered pair stored with a < b.
struct Edge {
  Node a = 0;
  Node b = 0;
  bool operator==(const Edge&) const = default;
  auto operator<=>(const Edge&) const = default;
};

class IncompleteTallyError : public Error {
 public:
  explicit IncompleteTallyError(std::vector<Edge> edges);
  const std::vector<Edge>& edges() const noexcept { return edges_; }

 private:
  std::vector<Edge> edges_;
};

/// Connected undirected simple graph over nodes 0..N-1.
class ComparisonGraph {
 public:
  /// Validates the edge list (no self loops, no duplicates, in range) and
  /// connectivity; throws ValidationError otherwise.
  static ComparisonGraph from_edges(std::size_t node_count, std::vector<Edge> edges);

  std::size_t node_count() const noexcept { return node_count_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  std::size_t max_degree() const noexcept { return max_degree_; }
  std::size_t degree(Node i) const { return degree_.at(i); }
  bool adjacent(Node i, Node j) const { return edge_index(i, j).has_value(); }
  /// Position of {i, j} in edges(), if present.
  std::optional<std::size_t> edge_index(Node i, Node j) const;
  /// Dense 0/1 adjacency, row-major N*N.
  std::vector<std::uint8_t> adjacency() const;

 private:
  ComparisonGraph() = default;

  std::size_t node_count_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::size_t> degree_;
  std::size_t max_degree_ = 0;
  std::vector<std::int64_t> index_;  // N*N, -1 for non-edges
};

bool is_connected(std::size_t node_count, std::span<const Edge> edges);

/// c * ln(N) / N, capped at 1.
double edge_probability(std::size_t node_count, double oversampling);

/// Samples G(N, edge_prob) until connected. Attempt k draws from a stream
/// derived from (seed, k). Throws StateError after `max_attempts` failures.
ComparisonGraph sample_connected_graph(std::size_t node_count, double edge_prob, std::uint64_t seed,
                                       std::size_t max_attempts = 1000);

/// G(N, c ln(N)/N) conditioned on connectivity. Requires N >= 2 and c > 1.
ComparisonGraph build_comparison_graph(std::size_t node_count, double oversampling, std::uint64_t seed);

/// Per-edge outcome counts. wins(i, j) counts comparisons of {i, j} that j won,
/// so wins(i, j) + wins(j, i) == trials(i, j).
class ComparisonTally {
 public:
  explicit ComparisonTally(const ComparisonGraph& graph);

  void record(Node i, Node j, Node winner);

  std::uint32_t wins(Node i, Node j) const;
  std::uint32_t trials(Node i, Node j) const;
  std::uint64_t total_trials() const noexcept { return total_; }

  const ComparisonGraph& graph() const noexcept { return graph_; }

  bool operator==(const ComparisonTally& other) const {
    return graph_.edges() == other.graph_.edges() && counts_ == other.counts_;
  }

 private:
  ComparisonGraph graph_;
  // counts_[e] = {times b beat a, times a beat b} for edges()[e] = {a, b}.
  std::vector<std::array<std::uint32_t, 2>> counts_;
  std::uint64_t total_ = 0;
};

/// Win fractions t_ij for every ordered pair along an edge.
class PairFractions {
 public:
  explicit PairFractions(std::size_t n) : n_(n), t_(n * n, 0.0) {}
  std::size_t node_count() const noexcept { return n_; }
  double operator()(Node i, Node j) const { return t_[i * n_ + j]; }
  double& operator()(Node i, Node j) { return t_[i * n_ + j]; }

 private:
  std::size_t n_;
  std::vector<double> t_;
};

/// t_ij = wins(i, j) / trials(i, j), with t_ji = 1 - t_ij so each pair sums to
/// exactly one. Throws IncompleteTallyError when an edge has no trials.
PairFractions aggregate_fractions(const ComparisonTally& tally);

class TransitionMatrix {
 public:
  explicit TransitionMatrix(std::size_t n) : n_(n), p_(n * n, 0.0) {}
  std::size_t size() const noexcept { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return p_[i * n_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return p_[i * n_ + j]; }
  std::span<const double> row(std::size_t i) const { return {p_.data() + i * n_, n_}; }

 private:
  std::size_t n_;
  std::vector<double> p_;
};

/// T_ij = t_ij / d on edges, T_ii = 1 - (1/d) sum_k t_ik A_ik, zero elsewhere,
/// where d is the maximum degree.
TransitionMatrix build_transition_matrix(const ComparisonGraph& graph, const PairFractions& t);

struct StationaryOptions {
  double tolerance = 1e-10;
  std::size_t max_iterations = 100000;
};

struct StationaryResult {
  std::vector<double> u;
  std::size_t iterations = 0;
  bool direct_solve = false;  // power iteration hit max_iterations
};

/// Left Perron vector of a row-stochastic matrix, by power iteration from the
/// uniform vector until ||uT - u||_inf <= tolerance and the geometric estimate
/// of the remaining error is below tolerance too, falling back to a direct
/// linear solve. Throws ValidationError for a non-stochastic input.
StationaryResult stationary_distribution(const TransitionMatrix& T, const StationaryOptions& options = {});

/// The K nodes with largest score, descending; ties (scores equal to 1e-12)
/// go to the lower index.
std::vector<Node> top_k(std::span<const double> u, std::size_t k);

struct RankScores {
  std::vector<double> u;
  std::vector<Node> order;  // full ranking, best first
};

RankScores rank_centrality(const ComparisonTally& tally, const StationaryOptions& options = {});

nlohmann::json graph_to_json(const ComparisonGraph& g);
ComparisonGraph graph_from_json(const nlohmann::json& j);
nlohmann::json tally_to_json(const ComparisonTally& t);
ComparisonTally tally_from_json(const nlohmann::json& j);

}  // namespace ideation::ranking
