#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "nsbm/attributes.hpp"
#include "nsbm/community.hpp"
#include "nsbm/embedder.hpp"
#include "nsbm/optim.hpp"
#include "nsbm/rng.hpp"

namespace nsbm {

/// How the sbm term is scaled inside the joint loss.
enum class SbmScale {
  /// C rescaled by b^2 / (1^T M 1), M the node similarity of the batch, so the
  /// mean similarity is 1; loss divided by b^2.
  /// Invariant to a uniform scaling of the similarity, so embeddings are not
  /// rewarded for inflating every similarity at once.
  density,
  /// Literal: sbm_loss(C) / b.
  batch,
};

struct ModelConfig {
  int K = 10;
  bool pseudo = true;
  AttributeEncoderConfig attributes{0, 0, 16};
  EmbedderConfig embedder;
  ReprKey repr_key = ReprKey::degree_difference;
  std::size_t link_dim = 64;
  double alpha = 16.0;
  double theta_z = 0.1;
  std::size_t attention_hidden = 32;
  SimilarityOptions similarity;
  SbmScale sbm_scale = SbmScale::density;

  std::size_t columns() const { return static_cast<std::size_t>(K) + (pseudo ? 1 : 0); }
};

/// Per-graph inputs: raw attribute encoder and repr sequences. A model can be
/// applied to several views (alignment, anomaly windows).
struct GraphView {
  const Graph* graph = nullptr;
  AttributeEncoder encoder;
  std::vector<NodeRepr> repr;

  std::size_t num_nodes() const { return graph->num_nodes(); }
};

/// Encoder free-table parameters (if any) go into `store` under `prefix`.
/// To restore a checkpoint, rebuild views and model in the same order and
/// then load over the store.
GraphView make_view(const Graph& g, const ModelConfig& config, ParameterStore& store, Rng& rng,
                    const std::string& prefix = "attr");

/// Shared parameters: sequence embedder, membership layer, link projections
/// and community attention.
class NsbmModel {
 public:
  NsbmModel() = default;
  NsbmModel(std::size_t in_dim, const ModelConfig& config, ParameterStore& store, Rng& rng);

  const ModelConfig& config() const noexcept { return config_; }
  const SequenceEmbedder& embedder() const noexcept { return embedder_; }
  const Linear& member_layer() const noexcept { return member_; }
  const Linear& link1() const noexcept { return link1_; }
  const Linear& link2() const noexcept { return link2_; }
  const CommunityAttention& attention() const noexcept { return attention_; }

  /// Embeddings of `nodes` (rows in the given order).
  Var embed(Tape& tape, const GraphView& view, std::span<const NodeId> nodes) const;
  Var membership(Tape& tape, Var X) const { return nsbm::membership(tape, X, member_); }

  /// Joint loss over one batch; `total` receives the weighted sum on the tape.
  /// Label loss is added when `use_labels` and the graph carries labels.
  LossBreakdown joint_loss(Tape& tape, const GraphView& view, std::span<const NodeId> batch,
                           const LossWeights& weights, std::size_t negatives, Rng& rng, bool use_labels,
                           Var& total, Var* Z_out = nullptr) const;

  /// Forward-only embeddings and memberships of every node.
  Tensor embeddings(const GraphView& view) const;
  Tensor embeddings(const GraphView& view, std::span<const NodeId> nodes) const;
  Tensor memberships(const GraphView& view) const;

 private:
  ModelConfig config_;
  SequenceEmbedder embedder_;
  Linear member_, link1_, link2_;
  CommunityAttention attention_;
};

/// Sets the membership layer so that Z starts as a soft nearest-centroid
/// assignment to the clusters `labels` (values in [0, K)) of the current
/// embeddings: logit_k = beta (mu_k . x - |mu_k|^2 / 2), with beta =
/// sharpness / mean squared distance to the own centroid. The pseudo column,
/// if present, gets zero weights and a bias below every other one.
void init_membership_from_clusters(NsbmModel& model, const GraphView& view, const std::vector<int>& labels,
                                   double sharpness = 2.0);

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 256;
  std::size_t c = 4;  ///< communities sampled per batch
  std::size_t negatives = 5;
  double lr = 1e-3;
  LossWeights weights;
  bool use_labels = false;
  std::uint64_t seed = 0;
};

struct StepRecord {
  std::size_t step = 0;
  LossBreakdown loss;
};

/// Batch training loop. Every step draws from its own Rng stream keyed by
/// (seed, step), so a run resumed from a checkpoint continues identically.
class Trainer {
 public:
  Trainer(NsbmModel& model, GraphView& view, ParameterStore& store, const TrainConfig& config);

  std::size_t steps_per_epoch() const;
  std::size_t total_steps() const { return steps_per_epoch() * config_.epochs; }
  std::size_t step_count() const noexcept { return step_; }

  /// One batch: sample, evaluate, update parameters and assignments. Throws
  /// NumericalError naming the step when the loss is not finite.
  StepRecord step();
  /// Runs until total_steps(), calling `on_step` after each one.
  void run(const std::function<void(const StepRecord&)>& on_step = {});

  const AssignmentList& assignments() const noexcept { return assignments_; }
  Adam& optimizer() noexcept { return adam_; }

  nlohmann::json state() const;
  void restore(const nlohmann::json& state);

 private:
  NsbmModel& model_;
  GraphView& view_;
  ParameterStore& store_;
  TrainConfig config_;
  Adam adam_;
  AssignmentList assignments_;
  std::size_t step_ = 0;
};

/// CSV header and one row per step for the loss curve.
std::string loss_csv_header();
std::string loss_csv_row(const StepRecord& r);

}  // namespace nsbm
