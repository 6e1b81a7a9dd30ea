#include <algorithm>

#include "nsbm/community.hpp"
#include "nsbm/error.hpp"
#include "nsbm/rng.hpp"

namespace nsbm {

AssignmentList init_assignment(const Graph& g, int K, bool pseudo) {
  if (K < 1) throw ConfigError("init_assignment: K must be >= 1");
  const std::size_t n = g.num_nodes();
  AssignmentList a(n, -1);
  std::vector<double> into(n, 0.0);  // edge weight from a node into the growing community
  std::vector<std::size_t> sizes(static_cast<std::size_t>(K), 0);

  auto take = [&](NodeId v, int k, std::vector<NodeId>& touched) {
    a[v] = k;
    ++sizes[static_cast<std::size_t>(k)];
    for (const auto& nb : g.neighbors(v)) {
      if (into[nb.node] == 0.0) touched.push_back(nb.node);
      into[nb.node] += nb.weight;
    }
    if (g.directed()) {
      for (const auto& nb : g.in_neighbors(v)) {
        if (into[nb.node] == 0.0) touched.push_back(nb.node);
        into[nb.node] += nb.weight;
      }
    }
  };

  for (int k = 0; k < K; ++k) {
    NodeId seed = 0;
    std::size_t best = 0;
    for (NodeId v = 0; v < n; ++v) {
      if (a[v] < 0 && g.degree(v) > best) {
        best = g.degree(v);
        seed = v;
      }
    }
    if (best == 0) break;
    std::vector<NodeId> touched;
    take(seed, k, touched);
    for (const auto& nb : g.neighbors(seed))
      if (a[nb.node] < 0) take(nb.node, k, touched);
    bool grew = true;
    while (grew) {
      grew = false;
      std::sort(touched.begin(), touched.end());
      touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
      const std::vector<NodeId> frontier = touched;
      for (NodeId u : frontier) {
        if (a[u] >= 0) continue;
        double total = g.strength(u);
        if (g.directed())
          for (const auto& nb : g.in_neighbors(u)) total += nb.weight;
        if (total > 0.0 && into[u] >= 0.5 * total) {
          take(u, k, touched);
          grew = true;
        }
      }
    }
    for (NodeId u : touched) into[u] = 0.0;
  }
  for (NodeId v = 0; v < n; ++v) {
    if (a[v] >= 0) continue;
    if (pseudo) {
      a[v] = K;
    } else {
      const auto k = static_cast<int>(std::min_element(sizes.begin(), sizes.end()) - sizes.begin());
      a[v] = k;
      ++sizes[static_cast<std::size_t>(k)];
    }
  }
  return a;
}

std::vector<NodeId> sample_batch(const AssignmentList& assignments, int num_groups, std::size_t c,
                                 std::size_t batch_size, Rng& rng) {
  if (c == 0) throw ConfigError("sample_batch: c must be >= 1");
  std::vector<std::vector<NodeId>> groups(static_cast<std::size_t>(num_groups));
  for (NodeId v = 0; v < assignments.size(); ++v) {
    const int g = assignments[v];
    if (g < 0 || g >= num_groups) throw ConfigError("sample_batch: assignment out of range");
    groups[static_cast<std::size_t>(g)].push_back(v);
  }
  std::vector<std::size_t> nonempty;
  for (std::size_t i = 0; i < groups.size(); ++i)
    if (!groups[i].empty()) nonempty.push_back(i);
  std::vector<NodeId> pool;
  for (std::size_t pick : rng.sample_without_replacement(nonempty.size(), c)) {
    const auto& grp = groups[nonempty[pick]];
    pool.insert(pool.end(), grp.begin(), grp.end());
  }
  std::vector<NodeId> batch;
  for (std::size_t i : rng.sample_without_replacement(pool.size(), batch_size)) batch.push_back(pool[i]);
  std::sort(batch.begin(), batch.end());
  return batch;
}

std::vector<int> argmax_rows(const Tensor& Z) {
  std::vector<int> out(Z.rows(), 0);
  for (std::size_t r = 0; r < Z.rows(); ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < Z.cols(); ++c)
      if (Z(r, c) > Z(r, best)) best = c;
    out[r] = static_cast<int>(best);
  }
  return out;
}

void update_assignment(AssignmentList& assignments, std::span<const NodeId> batch, const Tensor& Z) {
  if (Z.rows() != batch.size()) throw ShapeError("update_assignment: Z rows do not match the batch");
  const auto best = argmax_rows(Z);
  for (std::size_t i = 0; i < batch.size(); ++i) assignments[batch[i]] = best[i];
}

}  // namespace nsbm
