#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nsbm/tensor.hpp"

namespace nsbm {

using NodeId = std::uint32_t;

struct Edge {
  NodeId src = 0;
  NodeId dst = 0;
  double weight = 1.0;
  bool operator==(const Edge&) const = default;
};

struct Neighbor {
  NodeId node = 0;
  double weight = 1.0;
};

/// Static graph with dense ids 0..n-1. Undirected graphs store each edge once
/// (src < dst) and index it from both endpoints. Node attributes, token lists
/// and ground-truth labels are optional side tables.
class Graph {
 public:
  Graph() = default;
  /// Duplicate edges collapse by summing weights; self-loops, out-of-range
  /// ids and non-finite weights throw ConfigError.
  Graph(std::size_t num_nodes, std::vector<Edge> edges, bool directed = false);

  std::size_t num_nodes() const noexcept { return num_nodes_; }
  std::size_t num_edges() const noexcept { return edges_.size(); }
  bool directed() const noexcept { return directed_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }

  /// Out-neighbors sorted by id (all neighbors when undirected).
  std::span<const Neighbor> neighbors(NodeId v) const;
  /// In-neighbors sorted by id (same as neighbors() when undirected).
  std::span<const Neighbor> in_neighbors(NodeId v) const;
  std::size_t degree(NodeId v) const { return neighbors(v).size(); }
  /// Sum of incident edge weights.
  double strength(NodeId v) const;
  /// Weight of edge u->v, 0 when absent.
  double edge_weight(NodeId u, NodeId v) const;
  bool has_edge(NodeId u, NodeId v) const { return edge_weight(u, v) != 0.0; }
  double total_weight() const;
  double max_weight() const;

  /// Dense weighted adjacency among `nodes` (in the given order).
  Tensor adjacency(std::span<const NodeId> nodes) const;
  /// Nodes in ascending id order with their induced edges; ids remapped to 0..k-1.
  Graph induced(std::span<const NodeId> nodes) const;

  // Side tables.
  std::vector<std::string> ids;                 ///< original id per dense node
  std::optional<Tensor> features;               ///< n x d numeric attributes
  std::vector<std::vector<std::string>> tokens;  ///< per-node text tokens (empty = none)
  std::vector<std::vector<int>> labels;         ///< per-node ground-truth communities

  bool has_labels() const { return !labels.empty(); }
  /// Largest label + 1 (0 without labels).
  int num_labels() const;
  /// Original id of v, falling back to its dense index.
  std::string id_of(NodeId v) const;

 private:
  std::size_t num_nodes_ = 0;
  bool directed_ = false;
  std::vector<Edge> edges_;
  std::vector<std::size_t> out_offsets_, in_offsets_;
  std::vector<Neighbor> out_, in_;
};

// ------------------------------------------------------------------- io ---

/// Tab-separated `src<TAB>dst[<TAB>weight]` with `#` comments. Ids are
/// arbitrary strings, mapped to dense indices (numeric order when every id is
/// an integer, lexicographic otherwise); a `# nodes: N` comment declares ids
/// 0..N-1 so isolated nodes survive a round trip.
Graph load_edge_list(const std::string& path, bool directed = false, bool weighted = false);
Graph parse_edge_list(std::istream& in, bool directed = false, bool weighted = false);
void save_edge_list(const Graph& g, const std::string& path, bool weighted = true);
void write_edge_list(const Graph& g, std::ostream& out, bool weighted = true);

/// `node<TAB>label1,label2,...`; labels are non-negative integers.
void load_labels(Graph& g, const std::string& path);
void save_labels(const Graph& g, const std::string& path);

/// CSV with a header row; first column is the node id, the rest numeric.
void load_features(Graph& g, const std::string& path);
void save_features(const Graph& g, const std::string& path);

/// Numeric CSV with a header row (rows = samples). Returns the matrix and the
/// column names.
std::pair<Tensor, std::vector<std::string>> load_matrix_csv(const std::string& path);
void save_matrix_csv(const Tensor& m, const std::vector<std::string>& header, const std::string& path);

}  // namespace nsbm
