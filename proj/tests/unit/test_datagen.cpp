#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "nsbm/anomaly.hpp"
#include "nsbm/datagen.hpp"
#include "nsbm/error.hpp"

using namespace nsbm;

namespace {

std::set<std::pair<NodeId, NodeId>> edge_set(const Graph& g) {
  std::set<std::pair<NodeId, NodeId>> s;
  for (const auto& e : g.edges()) s.insert({std::min(e.src, e.dst), std::max(e.src, e.dst)});
  return s;
}

}  // namespace

TEST_CASE("p_in 1 and p_out 0 give disjoint cliques") {
  PlantedPartitionSpec ps;
  ps.K = 3;
  ps.sizes = {4, 5, 6};
  ps.p_in = 1.0;
  ps.p_out = 0.0;
  ps.seed = 9;
  const Graph g = planted_partition(ps);
  REQUIRE(g.num_nodes() == 15);
  CHECK(g.num_edges() == 6 + 10 + 15);
  for (NodeId u = 0; u < 15; ++u)
    for (NodeId v = u + 1; v < 15; ++v) CHECK(g.has_edge(u, v) == (g.labels[u] == g.labels[v]));
}

TEST_CASE("labels cover every node exactly once and follow the block layout") {
  PlantedPartitionSpec ps;
  ps.K = 4;
  ps.community_size = 7;
  const Graph g = planted_partition(ps);
  REQUIRE(g.labels.size() == 28);
  for (NodeId v = 0; v < 28; ++v) {
    REQUIRE(g.labels[v].size() == 1);
    CHECK(g.labels[v][0] == static_cast<int>(v / 7));
  }
  REQUIRE(g.features.has_value());
  CHECK(g.features->rows() == 28);
  CHECK(g.features->cols() == ps.attribute_dim);
}

TEST_CASE("intra-community edge counts stay in the binomial band") {
  const std::size_t n = 30;
  const double p = 0.2;
  const double pairs = n * (n - 1) / 2.0;
  const double mean = p * pairs, sd = std::sqrt(pairs * p * (1 - p));
  double total = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    PlantedPartitionSpec ps;
    ps.K = 2;
    ps.community_size = n;
    ps.p_in = p;
    ps.p_out = 0.01;
    ps.attribute_dim = 0;
    ps.seed = seed;
    const Graph g = planted_partition(ps);
    std::size_t intra = 0;
    for (const auto& e : g.edges())
      if (e.src < n && e.dst < n) ++intra;
    CHECK(std::abs(static_cast<double>(intra) - mean) <= 4 * sd);
    total += static_cast<double>(intra);
  }
  // Mean of 100 draws: 3 standard errors.
  CHECK(std::abs(total / 100 - mean) <= 3 * sd / 10);
}

TEST_CASE("planted partition is seed-deterministic and validates probabilities") {
  PlantedPartitionSpec ps;
  ps.seed = 5;
  ps.K = 3;
  ps.community_size = 10;
  const Graph a = planted_partition(ps), b = planted_partition(ps);
  CHECK(edge_set(a) == edge_set(b));
  CHECK(std::ranges::equal(a.features->values(), b.features->values()));
  ps.p_out = 0.2;
  ps.p_in = 0.2;
  CHECK_THROWS_AS(planted_partition(ps), ConfigError);
  ps.p_in = 1.1;
  CHECK_THROWS_AS(planted_partition(ps), ConfigError);
}

TEST_CASE("flip probability 0 gives an exact relabeled copy") {
  AlignmentPairSpec spec;
  spec.base.K = 4;
  spec.base.community_size = 15;
  spec.base.p_in = 0.3;
  spec.base.seed = 2;
  spec.flip_probability = 0.0;
  const auto pair = perturb_pair(spec);
  CHECK(pair.flips == 0);
  std::set<std::pair<NodeId, NodeId>> mapped;
  for (const auto& [u, v] : edge_set(pair.g1)) {
    const NodeId a = pair.truth[u], b = pair.truth[v];
    mapped.insert({std::min(a, b), std::max(a, b)});
  }
  CHECK(mapped == edge_set(pair.g2));
  for (NodeId v = 0; v < pair.g1.num_nodes(); ++v) {
    CHECK(pair.g2.labels[pair.truth[v]] == pair.g1.labels[v]);
    for (std::size_t c = 0; c < pair.g1.features->cols(); ++c)
      CHECK((*pair.g2.features)(pair.truth[v], c) == (*pair.g1.features)(v, c));
  }
  std::vector<NodeId> sorted = pair.truth;
  std::sort(sorted.begin(), sorted.end());
  for (NodeId v = 0; v < sorted.size(); ++v) CHECK(sorted[v] == v);
}

TEST_CASE("flip probability 0.05 on about 500 edges flips 25 +- 15") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    AlignmentPairSpec spec;
    spec.base.K = 5;
    spec.base.community_size = 20;
    spec.base.p_in = 0.5;
    spec.base.p_out = 0.0;
    spec.base.seed = seed;
    spec.permutation_seed = seed + 100;
    spec.flip_probability = 0.05;
    const auto pair = perturb_pair(spec);
    const double expected = 0.05 * static_cast<double>(pair.g1.num_edges());
    INFO("edges " << pair.g1.num_edges());
    CHECK(pair.g1.num_edges() >= 400);
    CHECK(pair.g1.num_edges() <= 600);
    CHECK(std::abs(static_cast<double>(pair.flips) - expected) <= 15.0);
    // Every flip is one removal or one addition.
    std::set<std::pair<NodeId, NodeId>> back;
    std::vector<NodeId> inverse(pair.truth.size());
    for (NodeId v = 0; v < pair.truth.size(); ++v) inverse[pair.truth[v]] = v;
    for (const auto& [u, v] : edge_set(pair.g2)) back.insert({std::min(inverse[u], inverse[v]), std::max(inverse[u], inverse[v])});
    const auto e1 = edge_set(pair.g1);
    std::vector<std::pair<NodeId, NodeId>> diff;
    std::set_symmetric_difference(e1.begin(), e1.end(), back.begin(), back.end(), std::back_inserter(diff));
    CHECK(diff.size() == pair.flips);
  }
  AlignmentPairSpec bad;
  bad.flip_probability = 0.5;
  CHECK_THROWS_AS(perturb_pair(bad), ConfigError);
}

TEST_CASE("latent-factor sets reach the planted correlation") {
  AnomalyScenario sc = AnomalyScenario::preset(ScenarioKind::large);
  sc.num_features = 40;
  sc.samples = 1000;
  sc.set_sizes = {10};
  sc.strength = 0.8;
  sc.seed = 4;
  const AnomalyWindow w = synth_window(sc, 0, true);
  REQUIRE(w.sets.size() == 1);
  const Tensor corr = pearson_correlation(w.data);
  const auto& set = w.sets[0];
  REQUIRE(set.size() == 10);
  for (std::size_t i = 0; i < set.size(); ++i)
    for (std::size_t j = i + 1; j < set.size(); ++j) CHECK(std::abs(corr(set[i], set[j]) - 0.8) <= 0.05);

  sc.strength = 1.0;
  const AnomalyWindow one = synth_window(sc, 1, true);
  const Tensor c1 = pearson_correlation(one.data);
  for (std::size_t i = 0; i < one.sets[0].size(); ++i)
    for (std::size_t j = i + 1; j < one.sets[0].size(); ++j) CHECK(c1(one.sets[0][i], one.sets[0][j]) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("window streams follow the injection rate and leave clean windows clean") {
  AnomalyScenario sc = AnomalyScenario::preset(ScenarioKind::small);
  sc.num_features = 60;
  sc.set_sizes = {6};
  sc.num_windows = 40;
  sc.seed = 8;
  const auto windows = synth_anomaly_windows(sc);
  REQUIRE(windows.size() == 40);
  std::size_t injected = 0;
  for (const auto& w : windows) {
    CHECK(w.data.rows() == sc.samples);
    CHECK(w.data.cols() == sc.num_features);
    if (w.injected) {
      ++injected;
      CHECK(w.sets.size() == 1);
    } else {
      CHECK(w.sets.empty());
    }
  }
  CHECK(injected == 4);
  const auto again = synth_anomaly_windows(sc);
  for (std::size_t i = 0; i < windows.size(); ++i) {
    CHECK(again[i].injected == windows[i].injected);
    CHECK(std::ranges::equal(again[i].data.values(), windows[i].data.values()));
  }
}

TEST_CASE("scenario presets respect their size ranges") {
  for (ScenarioKind k : {ScenarioKind::large, ScenarioKind::small, ScenarioKind::hidden}) {
    const auto sc = AnomalyScenario::preset(k);
    std::size_t total = 0;
    for (auto s : sc.set_sizes) total += s;
    const double frac = static_cast<double>(total) / static_cast<double>(sc.num_features);
    switch (k) {
      case ScenarioKind::large:
        CHECK(frac >= 0.2);
        CHECK(frac <= 0.5);
        break;
      case ScenarioKind::small:
        CHECK(frac >= 0.05);
        CHECK(frac <= 0.2);
        break;
      case ScenarioKind::hidden:
        CHECK(sc.num_features > 2000);
        CHECK(total >= 20);
        CHECK(total <= 200);
        break;
    }
    CHECK(parse_scenario_kind(to_string(k)) == k);
  }
  CHECK_THROWS_AS(parse_scenario_kind("medium"), ConfigError);
  AnomalyScenario bad = AnomalyScenario::preset(ScenarioKind::large);
  bad.set_sizes = {10};
  CHECK_THROWS_AS(synth_anomaly_windows(bad), ConfigError);
}

TEST_CASE("hidden windows hide the set from whole-window PCA") {
  AnomalyScenario sc = AnomalyScenario::preset(ScenarioKind::hidden);
  sc.seed = 3;
  for (std::size_t i = 0; i < 2; ++i) {
    const AnomalyWindow w = synth_window(sc, i, true);
    CHECK(window_principal_score(w.data) < 0.7);
    const Tensor corr = pearson_correlation(w.data);
    for (const auto& set : w.sets) CHECK(exact_principal_score(principal_submatrix(corr, set)) > 0.7);
  }
}
