#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nsbm/autodiff.hpp"
#include "nsbm/graph.hpp"

namespace nsbm {

class Rng;

// ------------------------------------------------------------ membership ---

/// Z = softmax(L(X)); the layer has K columns, or K+1 with the
/// pseudo-community last.
Var membership(Tape& tape, Var X, const Linear& layer);

/// Z without its pseudo-community column (a no-op when there is none).
Var drop_pseudo(Var Z, std::size_t K);

struct SimilarityOptions {
  /// Compare node embeddings by cosine (row-normalized X) instead of raw dot products.
  bool normalize_embeddings = true;
  /// Zero negative embedding similarities so C stays non-negative.
  bool clip_negative = true;
  /// Let the similarity term back-propagate into the embeddings. When false
  /// X X^T enters C as a constant and only Z carries the gradient.
  bool embedding_gradient = true;
};

/// C = Z^T (S + A A^T) Z with S = X X^T (see SimilarityOptions). Z must not
/// carry the pseudo column.
Var community_similarity(Tape& tape, Var Z, Var X, const Tensor& A, const SimilarityOptions& options = {});

/// -[sum C ln C - sum_i ln n_i rowsum_i - sum_j colsum_j ln n_j] with every
/// log guarded as ln(x + 1e-12). `sizes` is 1 x K.
Var sbm_loss(Var C, Var sizes);

/// alpha * cos(x1, x2); 0 when either vector is zero.
double scaled_cosine(std::span<const double> x1, std::span<const double> x2, double alpha = 16.0);

/// Row index pairs into the batch embedding matrix.
struct PairList {
  std::vector<std::size_t> first;
  std::vector<std::size_t> second;
  std::vector<double> weight;  ///< per pair; positives only

  std::size_t size() const { return first.size(); }
  void push(std::size_t a, std::size_t b, double w = 1.0) {
    first.push_back(a);
    second.push_back(b);
    weight.push_back(w);
  }
};

/// Every edge inside `nodes` as a pair of batch rows. Weighted graphs get
/// weights divided by the batch maximum; unweighted edges keep weight 1.
PairList batch_edges(const Graph& g, std::span<const NodeId> nodes);
/// `per_positive` uniform non-adjacent, non-identical batch pairs for each positive.
PairList sample_negatives(const Graph& g, std::span<const NodeId> nodes, std::size_t count, Rng& rng);

/// Scaled-cosine link score s = alpha * cos(L1 x_a, L2 x_b) as an n x 1 column.
Var link_scores(Tape& tape, Var X, const PairList& pairs, const Linear& l1, const Linear& l2, double alpha);

/// Mean over positive and negative terms of -w ln sigma(s) (positives) and
/// -ln(1 - sigma(s)) (negatives).
Var link_loss(Tape& tape, Var X, const PairList& positives, const PairList& negatives, const Linear& l1,
              const Linear& l2, double alpha = 16.0);

/// Mean over rows of -sum_k Z ln Z (all columns).
Var entropy_loss(Var Z);

/// Mean over labeled rows of the mean -ln Z(v, l) over the row's labels.
/// Rows with an empty label list are skipped; out-of-range labels throw.
Var label_loss(Tape& tape, Var Z, const std::vector<std::vector<int>>& labels);

struct LossWeights {
  double sbm = 1.0;
  double entropy = 1.0;
  double link = 1.0;
  double labels = 1.0;
};

struct LossBreakdown {
  double sbm = 0.0;
  double entropy = 0.0;
  double link = 0.0;
  std::optional<double> labels;
  double total = 0.0;
};

// ------------------------------------------------- community embeddings ---

/// Attention over community members: scores = w2^T tanh(L(X~)).
struct CommunityAttention {
  Linear hidden;
  Parameter* score = nullptr;  ///< width x 1

  static CommunityAttention create(ParameterStore& store, std::size_t dim, std::size_t hidden_dim, Rng& rng,
                                   const std::string& prefix);
  static CommunityAttention attach(ParameterStore& store, const std::string& prefix);
  /// Unnormalized per-row scores (rows x 1).
  Var scores(Tape& tape, Var Xt) const;
};

struct CommunityEmbeddings {
  double threshold = 0.1;
  std::vector<std::vector<std::size_t>> members;  ///< rows of X per community
  std::vector<std::vector<double>> weights;       ///< Z(v, k) of each member
  std::vector<bool> empty;
  Var vectors;    ///< K x d community embeddings (zero rows when empty)
  Var attention;  ///< softmax weights, one row per (community, member), grouped by community
  Offsets offsets;
};

/// Member set of k: rows with Z(v,k) >= threshold; X~_k = diag(Z(:,k)) X on
/// those rows; x~_k = attention-weighted sum of X~_k rows.
CommunityEmbeddings community_embeddings(Tape& tape, Var Z, Var X, std::size_t K, double threshold,
                                         const CommunityAttention& attention);

// ----------------------------------------------------------- assignments ---

/// Major community per node; value K means the pseudo-community.
using AssignmentList = std::vector<int>;

/// Greedy seeded growth. Seed = highest-degree unassigned node (lowest id on
/// ties) together with its unassigned neighbors; then frontier nodes whose
/// edge weight into the community is at least half their total weight are
/// absorbed until none is left. Nodes without edges never seed. Leftovers go
/// to the pseudo-community (K), or round-robin to the smallest communities
/// when pseudo is disabled.
AssignmentList init_assignment(const Graph& g, int K, bool pseudo);

/// Uniformly picks c non-empty groups (pseudo included as a group), then
/// batch_size distinct nodes from their union (all when fewer). Returned in
/// ascending id order.
std::vector<NodeId> sample_batch(const AssignmentList& assignments, int num_groups, std::size_t c,
                                 std::size_t batch_size, Rng& rng);

/// Sets each batch node's entry to the argmax of its Z row (lowest index on ties).
void update_assignment(AssignmentList& assignments, std::span<const NodeId> batch, const Tensor& Z);

/// Argmax per row, lowest index on ties.
std::vector<int> argmax_rows(const Tensor& Z);

}  // namespace nsbm
