#include <algorithm>
#include <cmath>

#include "nsbm/anomaly.hpp"
#include "nsbm/error.hpp"
#include "nsbm/simd.hpp"

namespace nsbm {

Tensor standardize_columns(const Tensor& window) {
  const std::size_t n = window.rows(), d = window.cols();
  if (n < 2) throw ConfigError("correlation: need at least 2 samples, got " + std::to_string(n));
  Tensor s(n, d);
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += window(i, j);
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) ss += (window(i, j) - mean) * (window(i, j) - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    if (sd == 0.0 || !std::isfinite(sd)) continue;
    for (std::size_t i = 0; i < n; ++i) s(i, j) = (window(i, j) - mean) / sd;
  }
  return s;
}

Tensor pearson_correlation(const Tensor& window) {
  const Tensor s = standardize_columns(window);
  const Tensor st = s.transposed();  // features x samples, rows contiguous
  const std::size_t d = st.rows(), n = st.cols();
  const auto& k = simd::kernels();
  Tensor c(d, d);
  const double inv = 1.0 / static_cast<double>(n - 1);
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = a; b < d; ++b) {
      const double r = std::clamp(k.dot(st.row(a).data(), st.row(b).data(), n) * inv, -1.0, 1.0);
      c(a, b) = r;
      c(b, a) = r;
    }
  }
  return c;
}

Graph CorrelationGraph::graph() const {
  std::vector<Edge> edges;
  for (std::size_t a = 0; a < corr.rows(); ++a)
    for (std::size_t b = a + 1; b < corr.cols(); ++b)
      if (corr(a, b) > 0.0) edges.push_back({static_cast<NodeId>(a), static_cast<NodeId>(b), corr(a, b)});
  return Graph(corr.rows(), std::move(edges));
}

CorrelationGraph clipped_correlation(const Tensor& window, double threshold) {
  if (!(threshold >= 0.0) || threshold > 1.0) throw ConfigError("clipped_correlation: threshold must be in [0,1]");
  CorrelationGraph g;
  g.threshold = threshold;
  g.corr = pearson_correlation(window);
  for (std::size_t a = 0; a < g.corr.rows(); ++a)
    for (std::size_t b = 0; b < g.corr.cols(); ++b) {
      if (a == b) continue;
      double& r = g.corr(a, b);
      if (r < threshold || r <= 0.0) r = 0.0;
    }
  return g;
}

double calibrate_threshold(const Tensor& window, double factor) {
  const Tensor c = pearson_correlation(window);
  const std::size_t d = c.rows();
  if (d < 2) throw ConfigError("calibrate_threshold: need at least 2 features");
  double s = 0.0;
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = a + 1; b < d; ++b) s += std::abs(c(a, b));
  return std::min(1.0, factor * s / (static_cast<double>(d) * static_cast<double>(d - 1) / 2.0));
}

PowerResult power_iteration(const Tensor& M, double tol, std::size_t max_iters) {
  const std::size_t n = M.rows();
  if (n == 0 || M.cols() != n) throw ShapeError("power_iteration: matrix must be square and non-empty");
  const auto& k = simd::kernels();
  std::vector<double> v(n), w(n);
  // Deterministic start, away from exact orthogonality with structured eigenvectors.
  for (std::size_t i = 0; i < n; ++i) v[i] = 1.0 + 0.01 * std::sin(static_cast<double>(i) + 1.0);
  auto normalize = [&](std::vector<double>& x) {
    const double nrm = std::sqrt(k.dot(x.data(), x.data(), n));
    if (nrm == 0.0) return false;
    k.scale(x.data(), 1.0 / nrm, n);
    return true;
  };
  normalize(v);
  auto apply = [&](const std::vector<double>& x, std::vector<double>& y) {
    for (std::size_t i = 0; i < n; ++i) y[i] = k.dot(M.row(i).data(), x.data(), n);
  };
  PowerResult r;
  double lambda = 0.0;
  apply(v, w);
  lambda = k.dot(v.data(), w.data(), n);
  for (std::size_t it = 1; it <= max_iters; ++it) {
    std::vector<double> next = w;
    if (!normalize(next)) {
      // v lies in the null space: eigenvalue 0.
      r.eigenvalue = 0.0;
      r.vector = v;
      r.iterations = it;
      return r;
    }
    v.swap(next);
    apply(v, w);
    const double updated = k.dot(v.data(), w.data(), n);
    const bool done = std::abs(updated - lambda) <= tol * std::max(1.0, std::abs(updated));
    lambda = updated;
    if (done) {
      double res = 0.0;
      for (std::size_t i = 0; i < n; ++i) res += (w[i] - lambda * v[i]) * (w[i] - lambda * v[i]);
      r.eigenvalue = lambda;
      r.vector = v;
      r.iterations = it;
      r.residual = std::sqrt(res);
      return r;
    }
  }
  double res = 0.0;
  for (std::size_t i = 0; i < n; ++i) res += (w[i] - lambda * v[i]) * (w[i] - lambda * v[i]);
  throw NumericalError("power_iteration: no convergence after " + std::to_string(max_iters) +
                       " iterations (residual " + std::to_string(std::sqrt(res)) + ")");
}

double exact_principal_score(const Tensor& M, std::size_t size) {
  if (size == 0) throw ConfigError("exact_principal_score: empty set");
  return power_iteration(M).eigenvalue / static_cast<double>(size);
}

double exact_principal_score(const Tensor& M) { return exact_principal_score(M, M.rows()); }

PrincipalComponent window_principal_component(const Tensor& window) {
  const std::size_t n = window.rows(), d = window.cols();
  if (d == 0) throw ConfigError("window_principal_component: no features");
  if (n < 2) throw ConfigError("window_principal_component: need at least 2 samples");
  const Tensor s = standardize_columns(window);
  const double inv = 1.0 / static_cast<double>(n - 1);
  PrincipalComponent out;
  if (n < d) {
    // Non-zero spectrum of S^T S equals that of S S^T; map the eigenvector back with S^T.
    Tensor gram = matmul_nt(s, s);
    for (auto& x : gram.values()) x *= inv;
    const PowerResult pr = power_iteration(gram);
    out.score = pr.eigenvalue / static_cast<double>(d);
    out.loadings.assign(d, 0.0);
    double nrm = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      double v = 0.0;
      for (std::size_t r = 0; r < n; ++r) v += s(r, c) * pr.vector[r];
      out.loadings[c] = v;
      nrm += v * v;
    }
    nrm = std::sqrt(nrm);
    if (nrm > 0.0)
      for (double& v : out.loadings) v /= nrm;
  } else {
    Tensor gram = matmul_tn(s, s);
    for (auto& x : gram.values()) x *= inv;
    PowerResult pr = power_iteration(gram);
    out.score = pr.eigenvalue / static_cast<double>(d);
    out.loadings = std::move(pr.vector);
  }
  return out;
}

double window_principal_score(const Tensor& window) { return window_principal_component(window).score; }

Tensor principal_submatrix(const Tensor& M, std::span<const std::size_t> idx) {
  Tensor out(idx.size(), idx.size());
  for (std::size_t a = 0; a < idx.size(); ++a)
    for (std::size_t b = 0; b < idx.size(); ++b) out(a, b) = M(idx[a], idx[b]);
  return out;
}

std::optional<double> approx_principal_score(std::span<const double> alpha, const Tensor& corr) {
  const std::size_t m = alpha.size();
  if (m == 0 || corr.rows() != m || corr.cols() != m) {
    if (m == 0) return std::nullopt;
    throw ShapeError("approx_principal_score: alpha has " + std::to_string(m) + " entries, corr is " +
                     corr.shape_string());
  }
  double nrm = 0.0;
  for (double a : alpha) nrm += a * a;
  if (nrm == 0.0) return std::nullopt;
  double q = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < m; ++j) row += corr(i, j) * alpha[j];
    q += alpha[i] * row;
  }
  return q / nrm / static_cast<double>(m);
}

Var attention_weights(Tape& tape, Var member_embeddings, const CommunityAttention& attention) {
  return attention.scores(tape, member_embeddings);
}

Var pca_loss(Tape& tape, const Tensor& standardized, Var alpha) {
  if (alpha.cols() != 1 || alpha.rows() != standardized.cols()) {
    throw ShapeError("pca_loss: alpha " + alpha.value().shape_string() + " for series " +
                     standardized.shape_string());
  }
  Var norm2 = ops::sum(ops::square(alpha));
  Var penalty = ops::scale(ops::square(ops::add_scalar(norm2, -1.0)), 50.0);
  const std::size_t n = standardized.rows();
  if (n < 2) return penalty;
  Var x = ops::matmul(tape.constant(standardized), alpha);
  // Sample variance: sum (x - mean)^2 / (n - 1).
  Var dev = ops::sub(x, ops::matmul(tape.constant(Tensor(n, 1, 1.0)), ops::mean(x)));
  Var var = ops::scale(ops::sum(ops::square(dev)), 1.0 / static_cast<double>(n - 1));
  return ops::sub(penalty, var);
}

}  // namespace nsbm
