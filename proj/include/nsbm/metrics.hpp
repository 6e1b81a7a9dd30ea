#pragma once

#include <cstdint>
#include <vector>

#include "nsbm/graph.hpp"
#include "nsbm/tensor.hpp"

namespace nsbm {

class Rng;

/// Minimum-cost assignment on a rectangular cost matrix (rows x cols).
/// Returns, for each row, its column or -1 when rows outnumber columns.
std::vector<int> hungarian(const Tensor& cost);

struct CommunityEvalResult {
  double avg_precision = 0.0;
  double macro_f1 = 0.0;
  double nmi = 0.0;
  std::vector<double> precision;  ///< per truth community
  std::vector<double> recall;
  std::vector<double> f1;
  std::vector<int> matching;  ///< truth community -> predicted column (-1 unmatched)
};

/// Predicted communities of a node are the top-k columns of its Z row, k the
/// number of its truth labels (1 when it has none); ties rank lower index
/// first. Truth and predicted communities are paired by maximum overlap.
/// Precision is averaged over truth communities whose matched prediction is
/// non-empty; F1 over all truth communities.
CommunityEvalResult community_metrics(const Tensor& Z, const std::vector<std::vector<int>>& truth);

/// Convenience for single-label truth.
CommunityEvalResult community_metrics(const Tensor& Z, const std::vector<int>& truth);

/// Normalized mutual information (arithmetic-mean normalization).
double nmi(const std::vector<int>& a, const std::vector<int>& b);

/// Mean silhouette under Euclidean distance. Nodes in singleton clusters
/// score 0; a single cluster gives 0.
double silhouette(const Tensor& X, const std::vector<int>& labels);

/// k-means++ seeding followed by Lloyd iterations; the run with the lowest
/// within-cluster sum of squares out of `restarts` is kept.
std::vector<int> kmeans(const Tensor& X, int K, Rng& rng, std::size_t max_iters = 100, std::size_t restarts = 10);

/// Hard labels as a one-hot matrix with `K` columns.
Tensor one_hot(const std::vector<int>& labels, int K);

/// Fraction of truth pairs (g1, g2) whose g1 node's top-1 match is g2.
/// `top1[g1]` is the matched g2 node.
double alignment_accuracy(const std::vector<NodeId>& top1, const std::vector<std::pair<NodeId, NodeId>>& truth);

struct WindowOutcome {
  bool alarmed = false;
  std::vector<std::size_t> detected;  ///< union of members of alarmed sets
};

struct WindowTruth {
  bool injected = false;
  std::vector<std::size_t> members;  ///< union of injected sets
};

struct AnomalyEvalResult {
  double alert_recall = 0.0;
  double anomaly_recall = 0.0;
  double accuracy = 0.0;  ///< true members among detected members
  std::size_t false_alarms = 0;
  std::size_t injected = 0;
  std::size_t clean = 0;
};

AnomalyEvalResult anomaly_metrics(const std::vector<WindowOutcome>& reports, const std::vector<WindowTruth>& truth);

}  // namespace nsbm
