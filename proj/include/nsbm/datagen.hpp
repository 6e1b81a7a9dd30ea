#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nsbm/graph.hpp"
#include "nsbm/tensor.hpp"

namespace nsbm {

struct PlantedPartitionSpec {
  int K = 10;
  std::vector<std::size_t> sizes;  ///< per community; empty = K x community_size
  std::size_t community_size = 60;
  double p_in = 0.15;
  double p_out = 0.01;
  std::size_t attribute_dim = 16;  ///< 0 = no attributes
  double attribute_separation = 1.0;  ///< stddev of the community means
  double attribute_noise = 1.0;       ///< stddev of the per-node noise
  std::uint64_t seed = 0;

  std::vector<std::size_t> resolved_sizes() const;
};

/// Graph with ground-truth labels in Graph::labels (one per node) and, when
/// attribute_dim > 0, features = community mean + Gaussian noise. Nodes are
/// numbered community by community.
Graph planted_partition(const PlantedPartitionSpec& spec);

struct AlignmentPairSpec {
  PlantedPartitionSpec base;
  std::uint64_t permutation_seed = 1;
  double flip_probability = 0.05;
  double attribute_jitter = 0.0;
};

struct AlignmentPair {
  Graph g1;
  Graph g2;
  std::vector<NodeId> truth;  ///< truth[v1] = partner in g2
  std::size_t flips = 0;
};

/// g2 is a node-permuted copy of g1. Each edge of g1 is flipped with the
/// given probability: the flip either drops the edge or adds a uniformly
/// chosen non-edge (fair coin). Features are permuted and jittered.
AlignmentPair perturb_pair(const AlignmentPairSpec& spec);

enum class ScenarioKind { large, small, hidden };

struct AnomalyScenario {
  ScenarioKind kind = ScenarioKind::large;
  std::size_t num_features = 300;
  std::size_t samples = 60;  ///< time samples per window
  std::size_t num_windows = 200;
  double injection_rate = 0.1;
  std::vector<std::size_t> set_sizes{90};  ///< anomaly sets per injected window
  double strength = 0.85;                  ///< pairwise correlation inside a set
  std::uint64_t seed = 0;
  std::size_t max_rejections = 1000;

  static AnomalyScenario preset(ScenarioKind kind);
};

ScenarioKind parse_scenario_kind(const std::string& name);
std::string to_string(ScenarioKind kind);

struct AnomalyWindow {
  Tensor data;  ///< samples x features
  bool injected = false;
  std::vector<std::vector<std::size_t>> sets;  ///< feature indices, sorted
  std::size_t rejections = 0;                  ///< resamples spent on the hidden-scenario check
};

/// Background features are i.i.d. standard normal. A set gets
/// x_i = sqrt(s) f + sqrt(1 - s) e_i with a shared factor f. Injected windows
/// are chosen as the first round(rate * windows) of a seeded shuffle. In the
/// hidden scenario an injected window is resampled until the full window's
/// principal score is below 0.7 and every planted set's is above it.
std::vector<AnomalyWindow> synth_anomaly_windows(const AnomalyScenario& scenario);

/// Same generator for one window (used by tests and the CLI).
AnomalyWindow synth_window(const AnomalyScenario& scenario, std::size_t index, bool injected);

}  // namespace nsbm
