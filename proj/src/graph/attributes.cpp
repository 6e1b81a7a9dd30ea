#include "nsbm/attributes.hpp"

#include <cmath>

#include "nsbm/error.hpp"
#include "nsbm/rng.hpp"

namespace nsbm {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

AttributeEncoder::AttributeEncoder(const Graph& g, const AttributeEncoderConfig& config, ParameterStore& store,
                                   Rng& rng, const std::string& prefix)
    : config_(config), num_nodes_(g.num_nodes()) {
  if (config.total() == 0) throw ConfigError("attribute encoder: total raw-embedding dimension is 0");
  const std::size_t n = g.num_nodes();
  const std::size_t fixed_dim = config.token_buckets + config.numeric_dim;
  fixed_ = Tensor(n, fixed_dim);
  if (config.token_buckets > 0) {
    for (NodeId v = 0; v < n; ++v) {
      if (v >= g.tokens.size() || g.tokens[v].empty()) {
        throw ConfigError("attribute encoder: node '" + g.id_of(v) + "' has no text tokens");
      }
      auto row = fixed_.row(v);
      for (const auto& tok : g.tokens[v]) row[fnv1a(tok) % config.token_buckets] += 1.0;
      double norm = 0.0;
      for (std::size_t b = 0; b < config.token_buckets; ++b) norm += row[b] * row[b];
      norm = std::sqrt(norm);
      for (std::size_t b = 0; b < config.token_buckets; ++b) row[b] /= norm;
    }
  }
  if (config.numeric_dim > 0) {
    if (!g.features || g.features->cols() < config.numeric_dim) {
      throw ConfigError("attribute encoder: node '" + g.id_of(0) + "' lacks " +
                        std::to_string(config.numeric_dim) + " numeric features");
    }
    for (NodeId v = 0; v < n; ++v) {
      for (std::size_t c = 0; c < config.numeric_dim; ++c) {
        const double x = (*g.features)(v, c);
        if (!std::isfinite(x)) {
          throw ConfigError("attribute encoder: node '" + g.id_of(v) + "' is missing numeric feature " +
                            std::to_string(c));
        }
        fixed_(v, config.token_buckets + c) = x;
      }
    }
  }
  if (config.free_dim > 0) {
    Tensor t(n, config.free_dim);
    for (auto& x : t.values()) x = rng.normal(0.0, 0.01);
    free_ = &store.add(prefix + ".free", std::move(t));
  }
}

Var AttributeEncoder::raw(Tape& tape) const {
  const bool has_fixed = fixed_.cols() > 0;
  if (free_ == nullptr) return tape.constant(fixed_);
  Var f = tape.param(*free_);
  return has_fixed ? ops::concat_cols(tape.constant(fixed_), f) : f;
}

Tensor AttributeEncoder::values() const {
  Tape t;
  return raw(t).value();
}

}  // namespace nsbm
