#include <algorithm>
#include <cmath>
#include <limits>

#include "doctest.h"
#include "nsbm/classic_sbm.hpp"
#include "nsbm/error.hpp"
#include "nsbm/rng.hpp"

using namespace nsbm;

namespace {

Graph four_node() { return Graph(4, {{0, 1, 1.0}, {2, 3, 1.0}, {0, 2, 1.0}}); }

Graph two_cliques(std::size_t size) {
  std::vector<Edge> e;
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < size; ++i)
      for (std::size_t j = i + 1; j < size; ++j)
        e.push_back({static_cast<NodeId>(c * size + i), static_cast<NodeId>(c * size + j), 1.0});
  return Graph(2 * size, std::move(e));
}

Graph planted(std::size_t n, int K, double p_in, double p_out, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Edge> e;
  for (NodeId u = 0; u < n; ++u)
    for (NodeId v = u + 1; v < n; ++v) {
      const bool same = (u % K) == (v % K);
      if (rng.bernoulli(same ? p_in : p_out)) e.push_back({u, v, 1.0});
    }
  return Graph(n, std::move(e));
}

// Independent oracle: profile likelihood straight from node pairs.
double naive_profile_ll(const Graph& g, const Labeling& z, int K) {
  std::vector<double> e(K * K, 0.0), n(K * K, 0.0);
  for (NodeId u = 0; u < g.num_nodes(); ++u)
    for (NodeId v = u + 1; v < g.num_nodes(); ++v) {
      int a = std::min(z[u], z[v]), b = std::max(z[u], z[v]);
      n[a * K + b] += 1;
      if (g.has_edge(u, v)) e[a * K + b] += 1;
    }
  double ll = 0;
  for (int i = 0; i < K * K; ++i) {
    if (n[i] == 0) continue;
    const double p = e[i] / n[i];
    if (e[i] > 0) ll += e[i] * std::log(p);
    if (n[i] - e[i] > 0) ll += (n[i] - e[i]) * std::log(1 - p);
  }
  return ll;
}

bool same_partition(const Labeling& a, const Labeling& b) {
  for (std::size_t u = 0; u < a.size(); ++u)
    for (std::size_t v = 0; v < a.size(); ++v)
      if ((a[u] == a[v]) != (b[u] == b[v])) return false;
  return true;
}

}  // namespace

TEST_CASE("block counts of the 4-node example") {
  const Labeling z{0, 0, 1, 1};
  auto b = count_blocks(four_node(), z, 2);
  CHECK(b.C == Tensor::from_rows({{1, 1}, {1, 1}}));
  CHECK(b.N == Tensor::from_rows({{1, 4}, {4, 1}}));
  CHECK(b.n == std::vector<double>{2, 2});
}

TEST_CASE("complete graph in one community saturates the count") {
  Graph k4(4, {{0, 1, 1}, {0, 2, 1}, {0, 3, 1}, {1, 2, 1}, {1, 3, 1}, {2, 3, 1}});
  auto b = count_blocks(k4, Labeling{0, 0, 0, 0}, 1);
  CHECK(b.C(0, 0) == 6);
  CHECK(b.N(0, 0) == 6);
  auto empty = count_blocks(Graph(4, {}), Labeling{0, 1, 0, 1}, 2);
  for (double c : empty.C.values()) CHECK(c == 0);
}

TEST_CASE("maximum-likelihood block matrix") {
  auto b = count_blocks(four_node(), Labeling{0, 0, 1, 1}, 2);
  CHECK(ml_block_matrix(b) == Tensor::from_rows({{1, 0.25}, {0.25, 1}}));
  BlockCounts full{Tensor(2, 2, 3.0), Tensor(2, 2, 3.0), {3, 3}, false};
  CHECK(ml_block_matrix(full) == Tensor(2, 2, 1.0));
  BlockCounts none{Tensor(2, 2, 0.0), Tensor(2, 2, 3.0), {3, 3}, false};
  CHECK(ml_block_matrix(none) == Tensor(2, 2, 0.0));
}

TEST_CASE("exact log-likelihood of the 4-node example") {
  const Labeling z{0, 0, 1, 1};
  auto b = count_blocks(four_node(), z, 2);
  const double ll = exact_log_likelihood(b, ml_block_matrix(b));
  CHECK(std::abs(ll - (std::log(0.25) + 3 * std::log(0.75))) <= 1e-12);
  CHECK(std::abs(ll - (-2.249340)) <= 1e-6);
}

TEST_CASE("empty graph and half-probability likelihoods") {
  Graph g(5, {});
  Labeling z(5, 0);
  auto b = count_blocks(g, z, 1);
  CHECK(exact_log_likelihood(b, ml_block_matrix(b)) == 0.0);
  Graph h = planted(8, 2, 0.5, 0.5, 3);
  Labeling y{0, 1, 0, 1, 0, 1, 0, 1};
  CHECK(exact_log_likelihood(h, y, 2, Tensor(2, 2, 0.5)) == doctest::Approx(28 * std::log(0.5)).epsilon(1e-14));
}

TEST_CASE("impossible counts give the negative-infinity sentinel") {
  auto b = count_blocks(four_node(), Labeling{0, 0, 1, 1}, 2);
  Tensor P = Tensor::from_rows({{1, 0}, {0, 1}});
  CHECK(exact_log_likelihood(b, P) == -std::numeric_limits<double>::infinity());
  Tensor Q = Tensor::from_rows({{1, 1}, {1, 1}});
  CHECK(exact_log_likelihood(b, Q) == -std::numeric_limits<double>::infinity());
}

TEST_CASE("likelihood is invariant under label permutation") {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const int K = 2 + static_cast<int>(rng.below(4));
    Graph g = planted(15, K, 0.6, 0.1, trial);
    Labeling z(15);
    for (auto& l : z) l = static_cast<int>(rng.below(K));
    std::vector<int> perm(K);
    for (int i = 0; i < K; ++i) perm[i] = i;
    rng.shuffle(perm);
    Labeling zp(15);
    for (std::size_t v = 0; v < 15; ++v) zp[v] = perm[z[v]];
    auto b = count_blocks(g, z, K);
    auto bp = count_blocks(g, zp, K);
    Tensor P(K, K), Pp(K, K);
    for (int i = 0; i < K; ++i)
      for (int j = i; j < K; ++j) {
        const double p = rng.uniform(0.05, 0.95);
        P(i, j) = P(j, i) = p;
        Pp(perm[i], perm[j]) = Pp(perm[j], perm[i]) = p;
      }
    CHECK(exact_log_likelihood(b, P) == doctest::Approx(exact_log_likelihood(bp, Pp)).epsilon(1e-12));
  }
}

TEST_CASE("count totals over unordered pairs equal the edge count") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const int K = 1 + static_cast<int>(rng.below(5));
    Graph g = planted(20, 3, rng.uniform(), rng.uniform(), trial);
    Labeling z(20);
    for (auto& l : z) l = static_cast<int>(rng.below(K));
    auto b = count_blocks(g, z, K);
    double total = 0;
    for (int i = 0; i < K; ++i)
      for (int j = i; j < K; ++j) {
        total += b.C(i, j);
        CHECK(b.C(i, j) <= b.N(i, j));
        CHECK(b.C(i, j) == b.C(j, i));
      }
    CHECK(total == static_cast<double>(g.num_edges()));
  }
}

TEST_CASE("profile likelihood matches the pairwise oracle") {
  Rng rng(6);
  for (int trial = 0; trial < 30; ++trial) {
    const int K = 1 + static_cast<int>(rng.below(4));
    Graph g = planted(14, 2, 0.7, 0.2, 100 + trial);
    Labeling z(14);
    for (auto& l : z) l = static_cast<int>(rng.below(K));
    CHECK(profile_log_likelihood(count_blocks(g, z, K)) == doctest::Approx(naive_profile_ll(g, z, K)).epsilon(1e-12));
  }
}

TEST_CASE("greedy sweeps recover two disjoint 5-cliques from any start") {
  Graph g = two_cliques(5);
  const Labeling truth{0, 0, 0, 0, 0, 1, 1, 1, 1, 1};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    auto fit = fit_sbm(g, 2, rng);
    CHECK(same_partition(fit.z, truth));
  }
}

TEST_CASE("a single start can stall; every start ends in a local optimum") {
  Graph g = two_cliques(5);
  // All nodes together: moving any one node out leaves the likelihood
  // unchanged, so the tie rule keeps the start.
  Labeling together(10, 0);
  Rng rng(0);
  auto stalled = fit_sbm(g, 2, rng, 100, &together);
  CHECK(stalled.moves == 0);
  int recovered = 0;
  for (int mask = 0; mask < 1024; ++mask) {
    Labeling init(10);
    for (int v = 0; v < 10; ++v) init[v] = (mask >> v) & 1;
    Rng r(static_cast<std::uint64_t>(mask));
    auto fit = fit_sbm(g, 2, r, 100, &init);
    recovered += same_partition(fit.z, {0, 0, 0, 0, 0, 1, 1, 1, 1, 1}) ? 1 : 0;
    // No single relabeling improves the result.
    const double ll = naive_profile_ll(g, fit.z, 2);
    for (int v = 0; v < 10; ++v) {
      Labeling moved = fit.z;
      moved[v] = 1 - moved[v];
      REQUIRE(naive_profile_ll(g, moved, 2) <= ll + 1e-9);
    }
  }
  CHECK(recovered > 0);
}

TEST_CASE("K=1 never moves") {
  Graph g = two_cliques(4);
  Rng rng(1);
  auto fit = fit_sbm(g, 1, rng, 100, nullptr, 1);
  CHECK(fit.moves == 0);
  CHECK(fit.sweeps == 1);
  for (int l : fit.z) CHECK(l == 0);
}

TEST_CASE("too many communities is an error") {
  Rng rng(1);
  CHECK_THROWS_AS(fit_sbm(Graph(3, {}), 4, rng), ConfigError);
  CHECK_THROWS_AS(fit_sbm(Graph(3, {}), 0, rng), ConfigError);
}

TEST_CASE("likelihood trace never decreases") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Graph g = planted(30, 3, 0.5, 0.1, seed);
    Rng rng(seed);
    auto fit = fit_sbm(g, 3, rng);
    for (std::size_t i = 1; i < fit.trace.size(); ++i) CHECK(fit.trace[i] >= fit.trace[i - 1] - 1e-9);
  }
}

TEST_CASE("12-node planted partition agrees with exhaustive search") {
  for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    CAPTURE(seed);
    Graph g = planted(12, 2, 0.9, 0.05, seed);
    double best = -std::numeric_limits<double>::infinity();
    Labeling best_z;
    for (int mask = 0; mask < (1 << 12); ++mask) {
      Labeling z(12);
      for (int v = 0; v < 12; ++v) z[v] = (mask >> v) & 1;
      const double ll = naive_profile_ll(g, z, 2);
      if (ll > best) {
        best = ll;
        best_z = z;
      }
    }
    Rng rng(seed);
    auto fit = fit_sbm(g, 2, rng);
    CHECK(fit.log_likelihood == doctest::Approx(best).epsilon(1e-12));
    CHECK(same_partition(fit.z, best_z));
  }
}

TEST_CASE("directed counts use ordered pairs") {
  Graph g(3, {{0, 1, 1}, {1, 0, 1}, {1, 2, 1}}, true);
  auto b = count_blocks(g, Labeling{0, 0, 1}, 2);
  CHECK(b.C == Tensor::from_rows({{2, 1}, {0, 0}}));
  CHECK(b.N == Tensor::from_rows({{2, 2}, {2, 0}}));
}
