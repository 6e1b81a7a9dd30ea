#pragma once

#include <optional>
#include <span>
#include <vector>

#include "nsbm/autodiff.hpp"
#include "nsbm/community.hpp"
#include "nsbm/graph.hpp"

namespace nsbm {

/// Pearson correlation of the columns of `window` (samples x features).
/// Zero-variance features correlate 0 with everything (diagonal included).
/// Throws ConfigError with fewer than 2 samples.
Tensor pearson_correlation(const Tensor& window);

/// Columns shifted to zero mean and scaled to unit sample variance
/// (zero-variance columns become 0).
Tensor standardize_columns(const Tensor& window);

struct CorrelationGraph {
  Tensor corr;  ///< clipped; diagonal kept at 1 (0 for zero-variance features)
  double threshold = 0.0;

  std::size_t size() const { return corr.rows(); }
  /// Weighted undirected graph of the surviving off-diagonal entries.
  Graph graph() const;
};

/// Off-diagonal correlations below `threshold` (negatives included) become 0.
CorrelationGraph clipped_correlation(const Tensor& window, double threshold);

/// factor x mean absolute off-diagonal correlation of a calibration window.
double calibrate_threshold(const Tensor& window, double factor = 1.5);

struct PowerResult {
  double eigenvalue = 0.0;
  std::vector<double> vector;  ///< unit norm
  std::size_t iterations = 0;
  double residual = 0.0;  ///< ||M v - lambda v||
};

/// Dominant eigenpair of a symmetric matrix. Stops when the Rayleigh quotient
/// changes by at most tol * max(1, |lambda|); throws NumericalError with the
/// residual after max_iters.
PowerResult power_iteration(const Tensor& M, double tol = 1e-9, std::size_t max_iters = 10000);

/// Top eigenvalue of `M` divided by `size`.
double exact_principal_score(const Tensor& M, std::size_t size);
double exact_principal_score(const Tensor& M);

struct PrincipalComponent {
  double score = 0.0;             ///< top eigenvalue / number of features
  std::vector<double> loadings;   ///< unit-norm top eigenvector over features
};

/// Top eigenpair of the unclipped correlation of a whole window, computed on
/// the smaller of the feature and sample Gram matrices.
PrincipalComponent window_principal_component(const Tensor& window);
double window_principal_score(const Tensor& window);

/// M restricted to rows and columns `idx`.
Tensor principal_submatrix(const Tensor& M, std::span<const std::size_t> idx);

/// alpha^T corr alpha / m with alpha rescaled to unit norm. Returns nullopt
/// for an empty set or a zero alpha.
std::optional<double> approx_principal_score(std::span<const double> alpha, const Tensor& corr);

/// Unnormalized attention weights w2^T tanh(L(X~)) (m x 1).
Var attention_weights(Tape& tape, Var member_embeddings, const CommunityAttention& attention);

/// -var(S alpha) + 50 (alpha^T alpha - 1)^2, where S holds the standardized
/// member series (samples x m). A single sample gives variance 0.
Var pca_loss(Tape& tape, const Tensor& standardized, Var alpha);

}  // namespace nsbm
