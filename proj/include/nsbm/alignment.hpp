#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "nsbm/model.hpp"

namespace nsbm {

/// Projection heads for aligning two graphs. With `tied`, L2 is L1.
struct AlignmentHead {
  Linear l1;
  Linear l2;
  double alpha = 16.0;

  static AlignmentHead create(ParameterStore& store, std::size_t in_dim, std::size_t out_dim, double alpha,
                              bool tied, Rng& rng, const std::string& prefix = "align");
};

/// Row-stochastic |X1| x |X2| matrix: softmax over G2 candidates of
/// alpha * cos(L1 x1, L2 x2).
Var alignment_scores(Tape& tape, Var X1, Var X2, const AlignmentHead& head);

/// Mean squared Euclidean distance between the rows of L1(X1) and
/// P L2(X2), plus `entropy_weight` times the mean row entropy of P.
Var alignment_loss(Tape& tape, Var X1, Var X2, Var P, const AlignmentHead& head, double entropy_weight = 1.0);

struct AlignmentTrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 64;
  std::size_t c = 2;  ///< G1 communities per batch, and matched G2 communities per G1 community
  std::size_t negatives = 5;
  double lr = 1e-3;
  LossWeights weights;          ///< community-detection terms on each side
  double align_weight = 1.0;    ///< node- and community-level alignment loss
  double entropy_weight = 1.0;  ///< inside alignment_loss
  double label_weight = 1.0;    ///< negative-sampling classification on labeled pairs
  std::uint64_t seed = 0;
};

struct AlignmentStep {
  std::size_t step = 0;
  bool community_only = false;
  double community_align = 0.0;
  double node_align = 0.0;
  double labels = 0.0;
  LossBreakdown g1;
  LossBreakdown g2;
  double total = 0.0;
};

/// Both views share `model`. Every step computes community embeddings on both
/// graphs, a community-level alignment loss, and a node-level alignment loss
/// between a batch from c sampled G1 communities and a batch from their top-c
/// matched G2 communities, plus the community-detection losses of each batch.
/// Each epoch ends with one community-only step (detection losses off).
/// `labels` holds known (g1, g2) pairs; empty means unsupervised.
class AlignmentTrainer {
 public:
  AlignmentTrainer(NsbmModel& model, AlignmentHead& head, GraphView& v1, GraphView& v2, ParameterStore& store,
                   const AlignmentTrainConfig& config, std::vector<std::pair<NodeId, NodeId>> labels = {});

  std::size_t steps_per_epoch() const;
  std::size_t total_steps() const { return (steps_per_epoch() + 1) * config_.epochs; }
  std::size_t step_count() const noexcept { return step_; }

  AlignmentStep step();
  void run(const std::function<void(const AlignmentStep&)>& on_step = {});

  Adam& optimizer() noexcept { return adam_; }

 private:
  NsbmModel& model_;
  AlignmentHead& head_;
  GraphView& v1_;
  GraphView& v2_;
  ParameterStore& store_;
  AlignmentTrainConfig config_;
  std::vector<std::pair<NodeId, NodeId>> labels_;
  Adam adam_;
  std::size_t step_ = 0;
};

/// Projected embeddings L(X) of every node of a view.
Tensor project(const NsbmModel& model, const GraphView& view, const Linear& l);

struct Match {
  NodeId node = 0;
  double distance = 0.0;  ///< Euclidean
};

/// Per G1 row, up to k nearest G2 rows ordered by (distance, id).
using Matching = std::vector<std::vector<Match>>;

enum class SearchMethod { kd_tree, linear };

/// Exact k-nearest-neighbor search; both methods return identical results.
Matching match_nodes(const Tensor& P1, const Tensor& P2, std::size_t k, SearchMethod method = SearchMethod::kd_tree);

/// First match of every row.
std::vector<NodeId> top1(const Matching& m);

/// `g1_node<TAB>g2_node<TAB>distance` for each row's first match, original ids.
void save_matching(const Matching& m, const Graph& g1, const Graph& g2, const std::string& path);
/// `g1_node<TAB>g2_node` pairs, resolved against the graphs' original ids.
std::vector<std::pair<NodeId, NodeId>> load_alignment_truth(const std::string& path, const Graph& g1,
                                                            const Graph& g2);
void save_alignment_truth(const std::vector<std::pair<NodeId, NodeId>>& truth, const Graph& g1, const Graph& g2,
                          const std::string& path);

}  // namespace nsbm
