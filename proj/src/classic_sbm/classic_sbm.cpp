#include "nsbm/classic_sbm.hpp"

#include <cmath>
#include <limits>

#include "nsbm/error.hpp"
#include "nsbm/rng.hpp"

namespace nsbm {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double xlogy(double x, double y) { return x == 0.0 ? 0.0 : x * std::log(y); }

double pair_ll(double e, double n, double p) {
  if (n == 0.0) return 0.0;
  if ((p <= 0.0 && e > 0.0) || (p >= 1.0 && e < n)) return kNegInf;
  return xlogy(e, p) + xlogy(n - e, 1.0 - p);
}

double ml_pair_ll(double e, double n) { return n == 0.0 ? 0.0 : pair_ll(e, n, e / n); }

double possible(double ni, double nj, bool same, bool directed) {
  if (!same) return ni * nj;
  return directed ? ni * (ni - 1.0) : ni * (ni - 1.0) / 2.0;
}

void check_labels(std::span<const int> z, std::size_t n, int K) {
  if (z.size() != n) {
    throw ConfigError("labeling has " + std::to_string(z.size()) + " entries for " + std::to_string(n) + " nodes");
  }
  for (std::size_t v = 0; v < z.size(); ++v) {
    if (z[v] < 0 || z[v] >= K) {
      throw ConfigError("label " + std::to_string(z[v]) + " of node " + std::to_string(v) + " outside [0," +
                        std::to_string(K) + ")");
    }
  }
}

}  // namespace

BlockCounts count_blocks(const Graph& g, std::span<const int> z, int K) {
  if (K < 1) throw ConfigError("count_blocks: K must be >= 1");
  check_labels(z, g.num_nodes(), K);
  const auto k = static_cast<std::size_t>(K);
  BlockCounts b{Tensor(k, k), Tensor(k, k), std::vector<double>(k, 0.0), g.directed()};
  for (int l : z) b.n[static_cast<std::size_t>(l)] += 1.0;
  for (const auto& e : g.edges()) {
    const auto i = static_cast<std::size_t>(z[e.src]);
    const auto j = static_cast<std::size_t>(z[e.dst]);
    b.C(i, j) += e.weight;
    if (!g.directed() && i != j) b.C(j, i) += e.weight;
  }
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) b.N(i, j) = possible(b.n[i], b.n[j], i == j, b.directed);
  return b;
}

Tensor ml_block_matrix(const BlockCounts& counts) {
  Tensor P(counts.C.rows(), counts.C.cols());
  for (std::size_t i = 0; i < P.size(); ++i) P[i] = counts.N[i] == 0.0 ? 0.0 : counts.C[i] / counts.N[i];
  return P;
}

double exact_log_likelihood(const BlockCounts& counts, const Tensor& P) {
  require_same_shape(counts.C, P, "exact_log_likelihood");
  const auto k = static_cast<std::size_t>(counts.K());
  double ll = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = counts.directed ? 0 : i; j < k; ++j) {
      const double t = pair_ll(counts.C(i, j), counts.N(i, j), P(i, j));
      if (t == kNegInf) return kNegInf;
      ll += t;
    }
  }
  return ll;
}

double exact_log_likelihood(const Graph& g, std::span<const int> z, int K, const Tensor& P) {
  return exact_log_likelihood(count_blocks(g, z, K), P);
}

double profile_log_likelihood(const BlockCounts& counts) {
  return exact_log_likelihood(counts, ml_block_matrix(counts));
}

namespace {

// Incrementally maintained counts for the greedy sweeps.
class SweepState {
 public:
  SweepState(const Graph& g, Labeling z, int K)
      : g_(g), z_(std::move(z)), k_(static_cast<std::size_t>(K)), counts_(count_blocks(g, z_, K)),
        w_out_(k_), w_in_(k_) {}

  const Labeling& labels() const { return z_; }
  const BlockCounts& counts() const { return counts_; }

  // Edge weight from v into each community (and into v from each community).
  void load_node_weights(NodeId v) {
    std::fill(w_out_.begin(), w_out_.end(), 0.0);
    std::fill(w_in_.begin(), w_in_.end(), 0.0);
    for (const auto& nb : g_.neighbors(v)) w_out_[static_cast<std::size_t>(z_[nb.node])] += nb.weight;
    if (g_.directed()) {
      for (const auto& nb : g_.in_neighbors(v)) w_in_[static_cast<std::size_t>(z_[nb.node])] += nb.weight;
    }
  }

  void apply(NodeId v, std::size_t label, double sign) {
    auto& C = counts_.C;
    const std::size_t b = label;
    if (g_.directed()) {
      for (std::size_t j = 0; j < k_; ++j) {
        C(b, j) += sign * w_out_[j];
        C(j, b) += sign * w_in_[j];
      }
    } else {
      for (std::size_t j = 0; j < k_; ++j) {
        if (j == b) {
          C(b, b) += sign * w_out_[b];
        } else {
          C(b, j) += sign * w_out_[j];
          C(j, b) += sign * w_out_[j];
        }
      }
    }
    counts_.n[b] += sign;
    for (std::size_t j = 0; j < k_; ++j) {
      counts_.N(b, j) = possible(counts_.n[b], counts_.n[j], b == j, counts_.directed);
      counts_.N(j, b) = possible(counts_.n[j], counts_.n[b], b == j, counts_.directed);
    }
    if (sign > 0) z_[v] = static_cast<int>(b);
  }

  // Likelihood of every pair touching community b.
  double touching(std::size_t b) const {
    const auto& C = counts_.C;
    const auto& N = counts_.N;
    double ll = 0.0;
    for (std::size_t j = 0; j < k_; ++j) {
      ll += ml_pair_ll(C(b, j), N(b, j));
      if (counts_.directed && j != b) ll += ml_pair_ll(C(j, b), N(j, b));
    }
    return ll;
  }

  // Greedy move for v; returns true when the label changed.
  bool move(NodeId v) {
    const auto a = static_cast<std::size_t>(z_[v]);
    load_node_weights(v);
    apply(v, a, -1.0);
    std::size_t best = a;
    std::vector<double> gain(k_);
    for (std::size_t b = 0; b < k_; ++b) {
      const double before = touching(b);
      apply(v, b, +1.0);
      gain[b] = touching(b) - before;
      apply(v, b, -1.0);
    }
    // Pairs not touching b are unchanged by adding v to b; compare gains
    // relative to the removed state. Ties keep the current label.
    double best_gain = gain[a];
    for (std::size_t b = 0; b < k_; ++b) {
      if (gain[b] > best_gain + 1e-12 * (1.0 + std::abs(best_gain))) {
        best_gain = gain[b];
        best = b;
      }
    }
    apply(v, best, +1.0);
    return best != a;
  }

 private:
  const Graph& g_;
  Labeling z_;
  std::size_t k_;
  BlockCounts counts_;
  std::vector<double> w_out_, w_in_;
};

}  // namespace

namespace {

SbmFit run_sweeps(const Graph& g, int K, Rng& rng, int max_sweeps, Labeling z) {
  SweepState state(g, std::move(z), K);
  SbmFit fit;
  fit.trace.push_back(profile_log_likelihood(state.counts()));
  std::vector<NodeId> order(g.num_nodes());
  for (NodeId v = 0; v < order.size(); ++v) order[v] = v;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    rng.shuffle(order);
    int moved = 0;
    for (NodeId v : order) moved += state.move(v) ? 1 : 0;
    ++fit.sweeps;
    fit.moves += moved;
    fit.trace.push_back(profile_log_likelihood(state.counts()));
    if (moved == 0) break;
  }
  fit.z = state.labels();
  // Recount from scratch to drop incremental rounding.
  const BlockCounts final_counts = count_blocks(g, fit.z, K);
  fit.P = ml_block_matrix(final_counts);
  fit.log_likelihood = exact_log_likelihood(final_counts, fit.P);
  return fit;
}

}  // namespace

SbmFit fit_sbm(const Graph& g, int K, Rng& rng, int max_sweeps, const Labeling* init, int restarts) {
  if (K < 1) throw ConfigError("fit_sbm: K must be >= 1");
  if (static_cast<std::size_t>(K) > g.num_nodes()) {
    throw ConfigError("fit_sbm: K=" + std::to_string(K) + " exceeds " + std::to_string(g.num_nodes()) + " nodes");
  }
  if (init != nullptr) {
    check_labels(*init, g.num_nodes(), K);
    return run_sweeps(g, K, rng, max_sweeps, *init);
  }
  SbmFit best;
  for (int r = 0; r < std::max(restarts, 1); ++r) {
    Labeling z(g.num_nodes());
    for (auto& l : z) l = static_cast<int>(rng.below(static_cast<std::uint64_t>(K)));
    SbmFit fit = run_sweeps(g, K, rng, max_sweeps, std::move(z));
    fit.restart = r;
    if (r == 0 || fit.log_likelihood > best.log_likelihood) best = std::move(fit);
  }
  return best;
}

}  // namespace nsbm
