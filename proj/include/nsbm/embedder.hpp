#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nsbm/autodiff.hpp"
#include "nsbm/graph.hpp"

namespace nsbm {

class Rng;

enum class ReprSource { neighborhood, walk };

/// Ordered node sequence fed to the sequence embedder. In neighborhood mode
/// the center node comes first.
struct NodeRepr {
  std::vector<NodeId> nodes;
  ReprSource source = ReprSource::neighborhood;

  NodeId center() const { return nodes.front(); }
};

enum class ReprKey {
  degree_difference,  ///< ascending |deg(u) - deg(v)|
  jaccard,            ///< descending Jaccard index of neighbor sets
  weight,             ///< descending edge weight to the center
};

/// v followed by up to m-1 neighbors ordered by `key`; ties go to the lower id.
NodeRepr build_repr(const Graph& g, NodeId v, std::size_t m, ReprKey key = ReprKey::degree_difference);
std::vector<NodeRepr> build_all_repr(const Graph& g, std::size_t m, ReprKey key = ReprKey::degree_difference);

/// Second-order biased walk starting at v (return parameter p, in-out
/// parameter q), weighted by edge weights. Stops early at a node without
/// out-neighbors.
NodeRepr sample_walk(const Graph& g, NodeId v, std::size_t length, double p, double q, Rng& rng);

/// Walk cache: little-endian u64 count, u64 length, then count*length u32
/// node ids, with short walks padded by 0xFFFFFFFF.
void save_walks(const std::vector<NodeRepr>& walks, const std::string& path);
std::vector<NodeRepr> load_walks(const std::string& path);

enum class Pooling { mean, attention };

struct EmbedderConfig {
  std::size_t width = 64;
  std::size_t max_len = 16;  ///< position table size (repr budget m)
  bool position_encoding = true;
  Pooling pooling = Pooling::mean;
};

/// Input projection, position table, one single-head self-attention layer
/// with a residual connection, then mean or attention pooling.
class SequenceEmbedder {
 public:
  SequenceEmbedder() = default;
  SequenceEmbedder(std::size_t in_dim, const EmbedderConfig& config, ParameterStore& store, Rng& rng,
                   const std::string& prefix = "emb");
  /// Rebinds to parameters already present in `store` (e.g. after a checkpoint load).
  static SequenceEmbedder attach(const EmbedderConfig& config, ParameterStore& store,
                                 const std::string& prefix = "emb");

  std::size_t in_dim() const { return input_.in_dim(); }
  std::size_t out_dim() const { return config_.width; }
  const EmbedderConfig& config() const noexcept { return config_; }

  /// One output row per sequence. `raw` holds a row per node id.
  Var embed(Tape& tape, Var raw, std::span<const NodeRepr> batch) const;
  /// Forward-only convenience over every sequence.
  Tensor embed_values(const Tensor& raw, std::span<const NodeRepr> batch) const;

 private:
  EmbedderConfig config_;
  Linear input_, query_, key_, value_, pool_hidden_;
  Parameter* positions_ = nullptr;
  Parameter* pool_score_ = nullptr;
};

/// Skip-gram with negative sampling over (center, context) pairs within
/// `window` of each other in every walk. Per pair: -ln s(x_c . x_o) minus
/// ln(1 - s(x_c . x_neg)) over `num_negatives` uniform nodes; mean over pairs.
Var skipgram_loss(Tape& tape, std::span<const NodeRepr> walks, std::size_t window, std::size_t num_negatives,
                  Var X, Rng& rng);

}  // namespace nsbm
