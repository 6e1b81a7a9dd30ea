#include "nsbm/graph.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "nsbm/error.hpp"

namespace nsbm {
namespace {

void build_index(std::size_t n, const std::vector<Edge>& edges, bool directed, bool incoming,
                 std::vector<std::size_t>& offsets, std::vector<Neighbor>& out) {
  offsets.assign(n + 1, 0);
  for (const auto& e : edges) {
    if (directed) {
      ++offsets[(incoming ? e.dst : e.src) + 1];
    } else {
      ++offsets[e.src + 1];
      ++offsets[e.dst + 1];
    }
  }
  for (std::size_t i = 0; i < n; ++i) offsets[i + 1] += offsets[i];
  out.assign(offsets[n], Neighbor{});
  std::vector<std::size_t> fill(offsets.begin(), offsets.end() - 1);
  for (const auto& e : edges) {
    if (directed) {
      if (incoming) out[fill[e.dst]++] = {e.src, e.weight};
      else out[fill[e.src]++] = {e.dst, e.weight};
    } else {
      out[fill[e.src]++] = {e.dst, e.weight};
      out[fill[e.dst]++] = {e.src, e.weight};
    }
  }
  for (std::size_t v = 0; v < n; ++v) {
    std::sort(out.begin() + static_cast<std::ptrdiff_t>(offsets[v]),
              out.begin() + static_cast<std::ptrdiff_t>(offsets[v + 1]),
              [](const Neighbor& a, const Neighbor& b) { return a.node < b.node; });
  }
}

}  // namespace

Graph::Graph(std::size_t num_nodes, std::vector<Edge> edges, bool directed)
    : num_nodes_(num_nodes), directed_(directed) {
  for (auto& e : edges) {
    if (e.src >= num_nodes || e.dst >= num_nodes) {
      throw ConfigError("edge (" + std::to_string(e.src) + "," + std::to_string(e.dst) +
                        ") out of range for " + std::to_string(num_nodes) + " nodes");
    }
    if (e.src == e.dst) throw ConfigError("self-loop on node " + std::to_string(e.src));
    if (!std::isfinite(e.weight)) throw ConfigError("non-finite edge weight");
    if (!directed && e.src > e.dst) std::swap(e.src, e.dst);
  }
  std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
    return a.src != b.src ? a.src < b.src : a.dst < b.dst;
  });
  for (const auto& e : edges) {
    if (!edges_.empty() && edges_.back().src == e.src && edges_.back().dst == e.dst) {
      edges_.back().weight += e.weight;
    } else {
      edges_.push_back(e);
    }
  }
  build_index(num_nodes_, edges_, directed_, false, out_offsets_, out_);
  if (directed_) build_index(num_nodes_, edges_, true, true, in_offsets_, in_);
}

std::span<const Neighbor> Graph::neighbors(NodeId v) const {
  if (v >= num_nodes_) throw ConfigError("node " + std::to_string(v) + " out of range");
  return {out_.data() + out_offsets_[v], out_offsets_[v + 1] - out_offsets_[v]};
}

std::span<const Neighbor> Graph::in_neighbors(NodeId v) const {
  if (!directed_) return neighbors(v);
  if (v >= num_nodes_) throw ConfigError("node " + std::to_string(v) + " out of range");
  return {in_.data() + in_offsets_[v], in_offsets_[v + 1] - in_offsets_[v]};
}

double Graph::strength(NodeId v) const {
  double s = 0.0;
  for (const auto& nb : neighbors(v)) s += nb.weight;
  return s;
}

double Graph::edge_weight(NodeId u, NodeId v) const {
  auto nb = neighbors(u);
  auto it = std::lower_bound(nb.begin(), nb.end(), v,
                             [](const Neighbor& a, NodeId id) { return a.node < id; });
  return it != nb.end() && it->node == v ? it->weight : 0.0;
}

double Graph::total_weight() const {
  double s = 0.0;
  for (const auto& e : edges_) s += e.weight;
  return s;
}

double Graph::max_weight() const {
  double m = 0.0;
  for (const auto& e : edges_) m = std::max(m, e.weight);
  return m;
}

Tensor Graph::adjacency(std::span<const NodeId> nodes) const {
  const std::size_t k = nodes.size();
  Tensor a(k, k);
  std::vector<std::ptrdiff_t> pos(num_nodes_, -1);
  for (std::size_t i = 0; i < k; ++i) pos[nodes[i]] = static_cast<std::ptrdiff_t>(i);
  for (std::size_t i = 0; i < k; ++i) {
    for (const auto& nb : neighbors(nodes[i])) {
      if (pos[nb.node] >= 0) a(i, static_cast<std::size_t>(pos[nb.node])) = nb.weight;
    }
  }
  return a;
}

Graph Graph::induced(std::span<const NodeId> nodes) const {
  std::vector<NodeId> sorted(nodes.begin(), nodes.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  std::vector<std::ptrdiff_t> pos(num_nodes_, -1);
  for (std::size_t i = 0; i < sorted.size(); ++i) pos[sorted[i]] = static_cast<std::ptrdiff_t>(i);
  std::vector<Edge> edges;
  for (const auto& e : edges_) {
    if (pos[e.src] >= 0 && pos[e.dst] >= 0) {
      edges.push_back({static_cast<NodeId>(pos[e.src]), static_cast<NodeId>(pos[e.dst]), e.weight});
    }
  }
  Graph g(sorted.size(), std::move(edges), directed_);
  for (NodeId v : sorted) {
    g.ids.push_back(id_of(v));
    if (has_labels()) g.labels.push_back(labels[v]);
    if (!tokens.empty()) g.tokens.push_back(tokens[v]);
  }
  if (features) {
    Tensor f(sorted.size(), features->cols());
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      std::copy_n(features->row(sorted[i]).data(), f.cols(), f.row(i).data());
    }
    g.features = std::move(f);
  }
  return g;
}

int Graph::num_labels() const {
  int k = 0;
  for (const auto& ls : labels)
    for (int l : ls) k = std::max(k, l + 1);
  return k;
}

std::string Graph::id_of(NodeId v) const {
  return v < ids.size() ? ids[v] : std::to_string(v);
}

}  // namespace nsbm
