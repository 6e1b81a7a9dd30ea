#pragma once

#include <span>
#include <vector>

#include "nsbm/graph.hpp"
#include "nsbm/tensor.hpp"

namespace nsbm {

class Rng;

/// Hard community index per node, 0-based (community k is printed as k+1 in reports).
using Labeling = std::vector<int>;

struct BlockCounts {
  Tensor C;               ///< K x K edge counts (edge weights summed)
  Tensor N;               ///< K x K possible-edge counts
  std::vector<double> n;  ///< community sizes
  bool directed = false;

  int K() const { return static_cast<int>(n.size()); }
};

/// e_ij from edges; n_ij = n_i n_j off the diagonal and n_i(n_i-1)/2 on it
/// (n_i(n_i-1) when directed). Throws ConfigError on labels outside [0, K).
BlockCounts count_blocks(const Graph& g, std::span<const int> z, int K);

/// P(i,j) = e_ij / n_ij, 0 where n_ij = 0.
Tensor ml_block_matrix(const BlockCounts& counts);

/// Sum over community pairs (unordered when undirected) of
/// e ln P + (n - e) ln(1 - P) with 0 ln 0 = 0. Returns -infinity when an
/// observed count is impossible under P.
double exact_log_likelihood(const BlockCounts& counts, const Tensor& P);
double exact_log_likelihood(const Graph& g, std::span<const int> z, int K, const Tensor& P);

/// Log-likelihood at the maximum-likelihood P of `counts`.
double profile_log_likelihood(const BlockCounts& counts);

struct SbmFit {
  Labeling z;
  Tensor P;
  double log_likelihood = 0.0;
  std::vector<double> trace;  ///< likelihood before the first sweep and after each sweep
  int sweeps = 0;
  int moves = 0;
  int restart = 0;  ///< which restart produced the result
};

/// Greedy label sweeps: every node in a fresh random order moves to the label
/// with the highest profile likelihood; ties keep the current label. Stops
/// after a sweep without moves or after max_sweeps. Starts from uniform random
/// labels unless `init` is given.
///
/// Single-node moves stall in local optima, so the sweeps are repeated from
/// `restarts` random starts and the most likely result is kept (restarts are
/// ignored when `init` is given). Throws ConfigError when K < 1 or K > |V|.
SbmFit fit_sbm(const Graph& g, int K, Rng& rng, int max_sweeps = 100, const Labeling* init = nullptr,
               int restarts = 16);

}  // namespace nsbm
