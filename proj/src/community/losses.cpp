#include <algorithm>
#include <cmath>

#include "nsbm/community.hpp"
#include "nsbm/error.hpp"
#include "nsbm/rng.hpp"

namespace nsbm {

Var membership(Tape& tape, Var X, const Linear& layer) { return ops::softmax_rows(layer(tape, X)); }

Var drop_pseudo(Var Z, std::size_t K) {
  if (Z.cols() == K) return Z;
  if (Z.cols() != K + 1) {
    throw ShapeError("drop_pseudo: membership " + Z.value().shape_string() + " for K=" + std::to_string(K));
  }
  return ops::slice_cols(Z, 0, K);
}

Var community_similarity(Tape& tape, Var Z, Var X, const Tensor& A, const SimilarityOptions& options) {
  if (A.rows() != Z.rows() || A.cols() != Z.rows() || X.rows() != Z.rows()) {
    throw ShapeError("community_similarity: Z " + Z.value().shape_string() + ", X " + X.value().shape_string() +
                     ", A " + A.shape_string());
  }
  if (!options.embedding_gradient) X = tape.constant(X.value());
  Var Xs = options.normalize_embeddings ? ops::normalize_rows(X) : X;
  Var S = ops::matmul_nt(Xs, Xs);
  if (options.clip_negative) S = ops::clip_below(S, 0.0);
  Var M = ops::add(S, tape.constant(nsbm::matmul_nt(A, A)));
  return ops::matmul(ops::transpose(Z), ops::matmul(M, Z));
}

Var sbm_loss(Var C, Var sizes) {
  if (C.rows() != C.cols() || sizes.rows() != 1 || sizes.cols() != C.cols()) {
    throw ShapeError("sbm_loss: C " + C.value().shape_string() + " vs sizes " + sizes.value().shape_string());
  }
  // Ordered sums keep the value bit-identical when communities are relabeled.
  Var c_ln_c = ops::sum_ordered(ops::mul(C, ops::log_eps(C)));
  Var ln_n = ops::transpose(ops::log_eps(sizes));
  Var rows = ops::sum_ordered(ops::mul(ln_n, ops::sum_rows_ordered(C)));
  Var cols = ops::sum_ordered(ops::mul(ops::sum_rows_ordered(ops::transpose(C)), ln_n));
  return ops::neg(ops::sub(ops::sub(c_ln_c, rows), cols));
}

double scaled_cosine(std::span<const double> x1, std::span<const double> x2, double alpha) {
  if (x1.size() != x2.size()) throw ShapeError("scaled_cosine: lengths differ");
  double d = 0, n1 = 0, n2 = 0;
  for (std::size_t i = 0; i < x1.size(); ++i) {
    d += x1[i] * x2[i];
    n1 += x1[i] * x1[i];
    n2 += x2[i] * x2[i];
  }
  if (n1 == 0.0 || n2 == 0.0) return 0.0;
  return alpha * d / (std::sqrt(n1) * std::sqrt(n2));
}

PairList batch_edges(const Graph& g, std::span<const NodeId> nodes) {
  std::vector<std::ptrdiff_t> pos(g.num_nodes(), -1);
  for (std::size_t i = 0; i < nodes.size(); ++i) pos[nodes[i]] = static_cast<std::ptrdiff_t>(i);
  PairList out;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    for (const auto& nb : g.neighbors(nodes[i])) {
      const auto j = pos[nb.node];
      if (j < 0) continue;
      if (!g.directed() && nb.node < nodes[i]) continue;
      out.push(i, static_cast<std::size_t>(j), nb.weight);
    }
  }
  double mx = 0.0;
  for (double w : out.weight) mx = std::max(mx, w);
  bool unit = true;
  for (double w : out.weight) unit = unit && w == 1.0;
  if (!unit && mx > 0.0)
    for (double& w : out.weight) w /= mx;
  return out;
}

PairList sample_negatives(const Graph& g, std::span<const NodeId> nodes, std::size_t count, Rng& rng) {
  PairList out;
  const std::size_t b = nodes.size();
  if (b < 2) return out;
  const std::size_t attempts = 20 * count + 100;
  for (std::size_t t = 0; t < attempts && out.size() < count; ++t) {
    const auto i = static_cast<std::size_t>(rng.below(b));
    const auto j = static_cast<std::size_t>(rng.below(b));
    if (i == j || g.has_edge(nodes[i], nodes[j]) || g.has_edge(nodes[j], nodes[i])) continue;
    out.push(i, j, 1.0);
  }
  return out;
}

Var link_scores(Tape& tape, Var X, const PairList& pairs, const Linear& l1, const Linear& l2, double alpha) {
  Var a = l1(tape, ops::gather_rows(X, pairs.first));
  Var b = l2(tape, ops::gather_rows(X, pairs.second));
  return ops::scale(ops::cosine_rowwise(a, b), alpha);
}

Var link_loss(Tape& tape, Var X, const PairList& positives, const PairList& negatives, const Linear& l1,
              const Linear& l2, double alpha) {
  const std::size_t terms = positives.size() + negatives.size();
  if (terms == 0) return tape.constant(Tensor::scalar(0.0));
  Var total = tape.constant(Tensor::scalar(0.0));
  if (positives.size() > 0) {
    Var s = link_scores(tape, X, positives, l1, l2, alpha);
    Var w = tape.constant(Tensor::column(positives.weight));
    total = ops::add(total, ops::sum(ops::mul(w, ops::log_eps(ops::sigmoid(s)))));
  }
  if (negatives.size() > 0) {
    Var s = link_scores(tape, X, negatives, l1, l2, alpha);
    total = ops::add(total, ops::sum(ops::log_eps(ops::sigmoid(ops::neg(s)))));
  }
  return ops::scale(total, -1.0 / static_cast<double>(terms));
}

Var entropy_loss(Var Z) {
  return ops::neg(ops::mean(ops::sum_rows_ordered(ops::mul(Z, ops::log_eps(Z)))));
}

Var label_loss(Tape& tape, Var Z, const std::vector<std::vector<int>>& labels) {
  if (labels.size() != Z.rows()) {
    throw ShapeError("label_loss: " + std::to_string(labels.size()) + " label rows for Z " +
                     Z.value().shape_string());
  }
  std::vector<std::size_t> rows, cols;
  std::vector<double> w;
  std::size_t labeled = 0;
  for (std::size_t v = 0; v < labels.size(); ++v) {
    if (labels[v].empty()) continue;
    ++labeled;
    for (int l : labels[v]) {
      if (l < 0 || static_cast<std::size_t>(l) >= Z.cols()) {
        throw ConfigError("label_loss: label " + std::to_string(l) + " out of range for " +
                          std::to_string(Z.cols()) + " columns");
      }
      rows.push_back(v);
      cols.push_back(static_cast<std::size_t>(l));
      w.push_back(1.0 / static_cast<double>(labels[v].size()));
    }
  }
  if (labeled == 0) return tape.constant(Tensor::scalar(0.0));
  Var picked = ops::log_eps(ops::gather_elements(Z, rows, cols));
  Var weighted = ops::mul(picked, tape.constant(Tensor::column(w)));
  return ops::scale(ops::sum(weighted), -1.0 / static_cast<double>(labeled));
}

// ------------------------------------------------- community embeddings ---

CommunityAttention CommunityAttention::create(ParameterStore& store, std::size_t dim, std::size_t hidden_dim,
                                              Rng& rng, const std::string& prefix) {
  CommunityAttention a;
  a.hidden = make_linear(store, prefix + ".hidden", dim, hidden_dim, rng);
  Tensor s(hidden_dim, 1);
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  for (auto& x : s.values()) x = rng.uniform(-bound, bound);
  a.score = &store.add(prefix + ".score", std::move(s));
  return a;
}

CommunityAttention CommunityAttention::attach(ParameterStore& store, const std::string& prefix) {
  CommunityAttention a;
  a.hidden = find_linear(store, prefix + ".hidden");
  a.score = &store.get(prefix + ".score");
  return a;
}

Var CommunityAttention::scores(Tape& tape, Var Xt) const {
  return ops::matmul(ops::tanh(hidden(tape, Xt)), tape.param(*score));
}

CommunityEmbeddings community_embeddings(Tape& tape, Var Z, Var X, std::size_t K, double threshold,
                                         const CommunityAttention& attention) {
  if (Z.rows() != X.rows() || Z.cols() < K) {
    throw ShapeError("community_embeddings: Z " + Z.value().shape_string() + " vs X " + X.value().shape_string());
  }
  if (threshold < 0.0 || threshold >= 1.0) throw ConfigError("community_embeddings: threshold must be in [0,1)");
  CommunityEmbeddings ce;
  ce.threshold = threshold;
  ce.members.resize(K);
  ce.weights.resize(K);
  ce.empty.assign(K, true);
  ce.offsets.push_back(0);
  const Tensor& z = Z.value();
  std::vector<std::size_t> rows, cols;
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t v = 0; v < z.rows(); ++v) {
      if (z(v, k) >= threshold) {
        ce.members[k].push_back(v);
        ce.weights[k].push_back(z(v, k));
        rows.push_back(v);
        cols.push_back(k);
      }
    }
    ce.empty[k] = ce.members[k].empty();
    ce.offsets.push_back(rows.size());
  }
  Var xt = ops::mul_col(ops::gather_rows(X, rows), ops::gather_elements(Z, rows, cols));
  ce.attention = ops::segment_softmax(attention.scores(tape, xt), ce.offsets);
  ce.vectors = ops::segment_weighted_sum(xt, ce.attention, ce.offsets);
  return ce;
}

}  // namespace nsbm
