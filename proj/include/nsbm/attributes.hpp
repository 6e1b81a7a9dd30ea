#pragma once

#include <cstdint>
#include <string_view>

#include "nsbm/autodiff.hpp"
#include "nsbm/graph.hpp"

namespace nsbm {

class Rng;

struct AttributeEncoderConfig {
  std::size_t token_buckets = 0;  ///< hashed bag-of-words width
  std::size_t numeric_dim = 0;    ///< leading columns of Graph::features passed through
  std::size_t free_dim = 0;       ///< trainable per-node table width

  std::size_t total() const { return token_buckets + numeric_dim + free_dim; }
};

/// Deterministic 64-bit FNV-1a; bucket of a token is fnv1a(token) % buckets.
std::uint64_t fnv1a(std::string_view s);

/// Raw node embeddings: per node [L2-normalized hashed token counts,
/// numeric features, trainable free embedding].
class AttributeEncoder {
 public:
  AttributeEncoder() = default;
  /// Builds the fixed part from the graph and registers "<prefix>.free"
  /// (N(0, 0.01) init) in `store` when free_dim > 0. Throws ConfigError naming
  /// the first node that lacks a required attribute.
  AttributeEncoder(const Graph& g, const AttributeEncoderConfig& config, ParameterStore& store, Rng& rng,
                   const std::string& prefix = "attr");

  const AttributeEncoderConfig& config() const noexcept { return config_; }
  std::size_t dim() const noexcept { return config_.total(); }
  std::size_t num_nodes() const noexcept { return num_nodes_; }

  /// Full n x dim raw embedding on the tape.
  Var raw(Tape& tape) const;
  /// Current values without a tape.
  Tensor values() const;
  const Tensor& fixed() const noexcept { return fixed_; }
  Parameter* free_table() const noexcept { return free_; }

 private:
  AttributeEncoderConfig config_;
  std::size_t num_nodes_ = 0;
  Tensor fixed_;
  Parameter* free_ = nullptr;
};

}  // namespace nsbm
