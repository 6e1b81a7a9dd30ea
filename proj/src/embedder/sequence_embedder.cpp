#include <algorithm>
#include <cmath>

#include "nsbm/embedder.hpp"
#include "nsbm/error.hpp"
#include "nsbm/rng.hpp"

namespace nsbm {

SequenceEmbedder::SequenceEmbedder(std::size_t in_dim, const EmbedderConfig& config, ParameterStore& store,
                                   Rng& rng, const std::string& prefix)
    : config_(config) {
  if (in_dim == 0 || config.width == 0 || config.max_len == 0) {
    throw ConfigError("embedder: dimensions must be positive");
  }
  const std::size_t w = config.width;
  input_ = make_linear(store, prefix + ".in", in_dim, w, rng);
  query_ = make_linear(store, prefix + ".q", w, w, rng, false);
  key_ = make_linear(store, prefix + ".k", w, w, rng, false);
  value_ = make_linear(store, prefix + ".v", w, w, rng, false);
  if (config.position_encoding) {
    Tensor pos(config.max_len, w);
    for (auto& x : pos.values()) x = rng.normal(0.0, 0.1);
    positions_ = &store.add(prefix + ".pos", std::move(pos));
  }
  if (config.pooling == Pooling::attention) {
    pool_hidden_ = make_linear(store, prefix + ".pool", w, w, rng);
    Tensor s(w, 1);
    const double bound = 1.0 / std::sqrt(static_cast<double>(w));
    for (auto& x : s.values()) x = rng.uniform(-bound, bound);
    pool_score_ = &store.add(prefix + ".pool_score", std::move(s));
  }
}

SequenceEmbedder SequenceEmbedder::attach(const EmbedderConfig& config, ParameterStore& store,
                                          const std::string& prefix) {
  SequenceEmbedder e;
  e.config_ = config;
  e.input_ = find_linear(store, prefix + ".in");
  e.query_ = find_linear(store, prefix + ".q");
  e.key_ = find_linear(store, prefix + ".k");
  e.value_ = find_linear(store, prefix + ".v");
  if (config.position_encoding) e.positions_ = &store.get(prefix + ".pos");
  if (config.pooling == Pooling::attention) {
    e.pool_hidden_ = find_linear(store, prefix + ".pool");
    e.pool_score_ = &store.get(prefix + ".pool_score");
  }
  if (e.input_.out_dim() != config.width) throw ConfigError("embedder: stored width differs from config");
  return e;
}

Var SequenceEmbedder::embed(Tape& tape, Var raw, std::span<const NodeRepr> batch) const {
  if (raw.cols() != in_dim()) {
    throw ShapeError("embed: raw embeddings " + raw.value().shape_string() + " but embedder expects " +
                     std::to_string(in_dim()) + " columns");
  }
  if (batch.empty()) return tape.constant(Tensor(0, config_.width));
  std::vector<std::size_t> ids, pos_idx;
  Offsets offsets{0};
  for (const auto& r : batch) {
    if (r.nodes.empty()) throw ConfigError("embed: empty sequence");
    for (std::size_t i = 0; i < r.nodes.size(); ++i) {
      if (r.nodes[i] >= raw.rows()) {
        throw ConfigError("embed: node " + std::to_string(r.nodes[i]) + " has no raw embedding");
      }
      ids.push_back(r.nodes[i]);
      pos_idx.push_back(std::min(i, config_.max_len - 1));
    }
    offsets.push_back(ids.size());
  }
  Var h = input_(tape, ops::gather_rows(raw, ids));
  if (positions_ != nullptr) h = ops::add(h, ops::gather_rows(tape.param(*positions_), pos_idx));
  Var att = ops::segment_attention(query_(tape, h), key_(tape, h), value_(tape, h), offsets);
  h = ops::add(h, att);

  Tensor weights(ids.size(), 1);
  Var w;
  if (config_.pooling == Pooling::mean) {
    for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
      const double inv = 1.0 / static_cast<double>(offsets[s + 1] - offsets[s]);
      for (std::size_t i = offsets[s]; i < offsets[s + 1]; ++i) weights[i] = inv;
    }
    w = tape.constant(std::move(weights));
  } else {
    Var scores = ops::matmul(ops::tanh(pool_hidden_(tape, h)), tape.param(*pool_score_));
    w = ops::segment_softmax(scores, offsets);
  }
  return ops::segment_weighted_sum(h, w, offsets);
}

Tensor SequenceEmbedder::embed_values(const Tensor& raw, std::span<const NodeRepr> batch) const {
  Tape tape;
  return embed(tape, tape.constant(raw), batch).value();
}

Var skipgram_loss(Tape& tape, std::span<const NodeRepr> walks, std::size_t window, std::size_t num_negatives,
                  Var X, Rng& rng) {
  if (walks.empty()) throw ConfigError("skipgram_loss: no walks");
  std::vector<std::size_t> centers, contexts, neg_centers, negatives;
  const auto n = static_cast<std::uint64_t>(X.rows());
  for (const auto& w : walks) {
    for (std::size_t i = 0; i < w.nodes.size(); ++i) {
      const std::size_t lo = i >= window ? i - window : 0;
      const std::size_t hi = std::min(w.nodes.size(), i + window + 1);
      for (std::size_t j = lo; j < hi; ++j) {
        if (j == i) continue;
        centers.push_back(w.nodes[i]);
        contexts.push_back(w.nodes[j]);
        for (std::size_t k = 0; k < num_negatives; ++k) {
          neg_centers.push_back(w.nodes[i]);
          negatives.push_back(static_cast<std::size_t>(rng.below(n)));
        }
      }
    }
  }
  if (centers.empty()) return tape.constant(Tensor::scalar(0.0));
  const double pairs = static_cast<double>(centers.size());
  auto dots = [&](const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
    return ops::sum_rows(ops::mul(ops::gather_rows(X, a), ops::gather_rows(X, b)));
  };
  Var loss = ops::neg(ops::sum(ops::log_eps(ops::sigmoid(dots(centers, contexts)))));
  if (!negatives.empty()) {
    Var neg = ops::sigmoid(ops::neg(dots(neg_centers, negatives)));
    loss = ops::sub(loss, ops::sum(ops::log_eps(neg)));
  }
  return ops::scale(loss, 1.0 / pairs);
}

}  // namespace nsbm
