#include "nsbm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "nsbm/error.hpp"
#include "nsbm/rng.hpp"

namespace nsbm {

std::vector<int> hungarian(const Tensor& cost) {
  const std::size_t rows = cost.rows(), cols = cost.cols();
  const std::size_t n = std::max(rows, cols);
  if (n == 0) return {};
  // Square padding with zero cost; potentials method, 1-based.
  auto a = [&](std::size_t i, std::size_t j) { return (i <= rows && j <= cols) ? cost(i - 1, j - 1) : 0.0; };
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = a(i0, j) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> out(rows, -1);
  for (std::size_t j = 1; j <= n; ++j) {
    if (p[j] >= 1 && p[j] <= rows && j <= cols) out[p[j] - 1] = static_cast<int>(j - 1);
  }
  return out;
}

namespace {

// Indices of the k largest entries of a row, ties to the lower index.
std::vector<int> top_k(std::span<const double> row, std::size_t k) {
  std::vector<int> idx(row.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return row[a] > row[b]; });
  idx.resize(std::min(k, idx.size()));
  return idx;
}

}  // namespace

CommunityEvalResult community_metrics(const Tensor& Z, const std::vector<std::vector<int>>& truth) {
  if (truth.size() != Z.rows()) {
    throw ShapeError("community_metrics: " + std::to_string(truth.size()) + " truth rows for Z " + Z.shape_string());
  }
  int T = 0;
  for (const auto& ls : truth)
    for (int l : ls) {
      if (l < 0) throw ConfigError("community_metrics: negative truth label");
      T = std::max(T, l + 1);
    }
  const std::size_t P = Z.cols();
  std::vector<double> pred_size(P, 0.0), truth_size(static_cast<std::size_t>(T), 0.0);
  Tensor overlap(static_cast<std::size_t>(T), P);
  for (std::size_t v = 0; v < Z.rows(); ++v) {
    const auto picks = top_k(Z.row(v), std::max<std::size_t>(1, truth[v].size()));
    for (int p : picks) {
      pred_size[static_cast<std::size_t>(p)] += 1.0;
      for (int t : truth[v]) overlap(static_cast<std::size_t>(t), static_cast<std::size_t>(p)) += 1.0;
    }
    for (int t : truth[v]) truth_size[static_cast<std::size_t>(t)] += 1.0;
  }
  // Columns enter the matching in an order fixed by their content, so equal
  // columns tie-break the same way however predicted indices are permuted.
  std::vector<std::size_t> order(P);
  std::iota(order.begin(), order.end(), 0);
  auto key = [&](std::size_t p) {
    std::vector<double> k{pred_size[p]};
    for (std::size_t t = 0; t < overlap.rows(); ++t) k.push_back(overlap(t, p));
    return k;
  };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key(a) < key(b); });
  Tensor cost(overlap.rows(), overlap.cols());
  for (std::size_t t = 0; t < cost.rows(); ++t)
    for (std::size_t j = 0; j < P; ++j) cost(t, j) = -overlap(t, order[j]);

  CommunityEvalResult r;
  r.matching = hungarian(cost);
  for (int& m : r.matching)
    if (m >= 0) m = static_cast<int>(order[static_cast<std::size_t>(m)]);
  r.precision.assign(static_cast<std::size_t>(T), 0.0);
  r.recall.assign(static_cast<std::size_t>(T), 0.0);
  r.f1.assign(static_cast<std::size_t>(T), 0.0);
  double prec_sum = 0.0;
  std::size_t prec_count = 0;
  for (std::size_t t = 0; t < static_cast<std::size_t>(T); ++t) {
    const int p = r.matching[t];
    if (p < 0 || pred_size[static_cast<std::size_t>(p)] == 0.0) continue;
    const double hit = overlap(t, static_cast<std::size_t>(p));
    r.precision[t] = hit / pred_size[static_cast<std::size_t>(p)];
    r.recall[t] = truth_size[t] > 0.0 ? hit / truth_size[t] : 0.0;
    const double pr = r.precision[t] + r.recall[t];
    r.f1[t] = pr > 0.0 ? 2.0 * r.precision[t] * r.recall[t] / pr : 0.0;
    prec_sum += r.precision[t];
    ++prec_count;
  }
  r.avg_precision = prec_count > 0 ? prec_sum / static_cast<double>(prec_count) : 0.0;
  r.macro_f1 = T > 0 ? std::accumulate(r.f1.begin(), r.f1.end(), 0.0) / T : 0.0;

  // NMI between the first truth label and the top-1 prediction.
  std::vector<int> a, b;
  for (std::size_t v = 0; v < Z.rows(); ++v) {
    if (truth[v].empty()) continue;
    a.push_back(truth[v].front());
    b.push_back(top_k(Z.row(v), 1).front());
  }
  r.nmi = a.empty() ? 0.0 : nmi(a, b);
  return r;
}

CommunityEvalResult community_metrics(const Tensor& Z, const std::vector<int>& truth) {
  std::vector<std::vector<int>> t(truth.size());
  for (std::size_t v = 0; v < truth.size(); ++v) t[v] = {truth[v]};
  return community_metrics(Z, t);
}

double nmi(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) throw ShapeError("nmi: label vectors differ in length");
  if (a.empty()) return 0.0;
  const int na = *std::max_element(a.begin(), a.end()) + 1;
  const int nb = *std::max_element(b.begin(), b.end()) + 1;
  std::vector<double> joint(static_cast<std::size_t>(na * nb), 0.0), pa(na, 0.0), pb(nb, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[static_cast<std::size_t>(a[i] * nb + b[i])] += 1.0;
    pa[a[i]] += 1.0;
    pb[b[i]] += 1.0;
  }
  const double n = static_cast<double>(a.size());
  // Terms are added in sorted order so relabeling either side is exact.
  auto sorted_sum = [](std::vector<double> terms) {
    std::sort(terms.begin(), terms.end());
    return std::accumulate(terms.begin(), terms.end(), 0.0);
  };
  auto entropy = [&](const std::vector<double>& c) {
    std::vector<double> terms;
    for (double x : c)
      if (x > 0) terms.push_back(-x / n * std::log(x / n));
    return sorted_sum(std::move(terms));
  };
  std::vector<double> terms;
  for (int i = 0; i < na; ++i)
    for (int j = 0; j < nb; ++j) {
      const double x = joint[static_cast<std::size_t>(i * nb + j)];
      if (x > 0) terms.push_back(x / n * std::log(x * n / (pa[i] * pb[j])));
    }
  const double mi = sorted_sum(std::move(terms));
  const double ha = entropy(pa), hb = entropy(pb);
  if (ha + hb == 0.0) return 1.0;
  return std::clamp(2.0 * mi / (ha + hb), 0.0, 1.0);
}

double silhouette(const Tensor& X, const std::vector<int>& labels) {
  if (labels.size() != X.rows()) throw ShapeError("silhouette: label count differs from rows");
  const std::size_t n = X.rows();
  if (n == 0) return 0.0;
  const int K = *std::max_element(labels.begin(), labels.end()) + 1;
  std::vector<double> count(K, 0.0);
  for (int l : labels) count[l] += 1.0;
  std::size_t nonempty = 0;
  for (double c : count) nonempty += c > 0 ? 1 : 0;
  if (nonempty < 2) return 0.0;
  double total = 0.0;
  std::vector<double> dist(K);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(dist.begin(), dist.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      double d = 0.0;
      for (std::size_t c = 0; c < X.cols(); ++c) {
        const double x = X(i, c) - X(j, c);
        d += x * x;
      }
      dist[labels[j]] += std::sqrt(d);
    }
    const int own = labels[i];
    if (count[own] <= 1.0) continue;
    const double a = dist[own] / (count[own] - 1.0);
    double b = std::numeric_limits<double>::infinity();
    for (int k = 0; k < K; ++k)
      if (k != own && count[k] > 0) b = std::min(b, dist[k] / count[k]);
    const double m = std::max(a, b);
    total += m > 0.0 ? (b - a) / m : 0.0;
  }
  return total / static_cast<double>(n);
}

namespace {

std::vector<int> kmeans_once(const Tensor& X, int K, Rng& rng, std::size_t max_iters, double& inertia) {
  const std::size_t n = X.rows(), d = X.cols();
  if (K < 1) throw ConfigError("kmeans: K must be >= 1");
  if (n == 0) return {};
  auto sq = [&](std::size_t i, const Tensor& C, std::size_t k) {
    double s = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      const double x = X(i, c) - C(k, c);
      s += x * x;
    }
    return s;
  };
  const std::size_t k_eff = std::min<std::size_t>(static_cast<std::size_t>(K), n);
  Tensor C(static_cast<std::size_t>(K), d);
  std::vector<double> best(n, std::numeric_limits<double>::infinity());
  const auto first = static_cast<std::size_t>(rng.below(n));
  for (std::size_t c = 0; c < d; ++c) C(0, c) = X(first, c);
  for (std::size_t k = 1; k < k_eff; ++k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      best[i] = std::min(best[i], sq(i, C, k - 1));
      total += best[i];
    }
    std::size_t pick = n - 1;
    if (total > 0.0) {
      double r = rng.uniform() * total;
      for (std::size_t i = 0; i < n; ++i) {
        r -= best[i];
        if (r < 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<std::size_t>(rng.below(n));
    }
    for (std::size_t c = 0; c < d; ++c) C(k, c) = X(pick, c);
  }
  std::vector<int> labels(n, -1);
  for (std::size_t it = 0; it < max_iters; ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      int arg = 0;
      double bd = sq(i, C, 0);
      for (std::size_t k = 1; k < k_eff; ++k) {
        const double v = sq(i, C, k);
        if (v < bd) {
          bd = v;
          arg = static_cast<int>(k);
        }
      }
      if (labels[i] != arg) {
        labels[i] = arg;
        changed = true;
      }
    }
    if (!changed) break;
    Tensor sum(static_cast<std::size_t>(K), d);
    std::vector<double> cnt(static_cast<std::size_t>(K), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      cnt[static_cast<std::size_t>(labels[i])] += 1.0;
      for (std::size_t c = 0; c < d; ++c) sum(static_cast<std::size_t>(labels[i]), c) += X(i, c);
    }
    for (std::size_t k = 0; k < k_eff; ++k)
      if (cnt[k] > 0)
        for (std::size_t c = 0; c < d; ++c) C(k, c) = sum(k, c) / cnt[k];
  }
  inertia = 0.0;
  for (std::size_t i = 0; i < n; ++i) inertia += sq(i, C, static_cast<std::size_t>(labels[i]));
  return labels;
}

}  // namespace

std::vector<int> kmeans(const Tensor& X, int K, Rng& rng, std::size_t max_iters, std::size_t restarts) {
  std::vector<int> best;
  double best_inertia = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < std::max<std::size_t>(restarts, 1); ++r) {
    double inertia = 0.0;
    auto labels = kmeans_once(X, K, rng, max_iters, inertia);
    if (inertia < best_inertia) {
      best_inertia = inertia;
      best = std::move(labels);
    }
  }
  return best;
}

Tensor one_hot(const std::vector<int>& labels, int K) {
  Tensor Z(labels.size(), static_cast<std::size_t>(K));
  for (std::size_t v = 0; v < labels.size(); ++v) {
    if (labels[v] < 0 || labels[v] >= K) throw ConfigError("one_hot: label out of range");
    Z(v, static_cast<std::size_t>(labels[v])) = 1.0;
  }
  return Z;
}

double alignment_accuracy(const std::vector<NodeId>& top1, const std::vector<std::pair<NodeId, NodeId>>& truth) {
  if (truth.empty()) throw ConfigError("alignment_accuracy: empty ground truth");
  std::size_t hit = 0;
  for (const auto& [a, b] : truth)
    if (a < top1.size() && top1[a] == b) ++hit;
  return static_cast<double>(hit) / static_cast<double>(truth.size());
}

AnomalyEvalResult anomaly_metrics(const std::vector<WindowOutcome>& reports, const std::vector<WindowTruth>& truth) {
  if (reports.size() != truth.size()) throw ShapeError("anomaly_metrics: report and truth counts differ");
  AnomalyEvalResult r;
  std::size_t alerted_injected = 0;
  double true_members = 0.0, found_members = 0.0, detected = 0.0, detected_true = 0.0;
  for (std::size_t w = 0; w < reports.size(); ++w) {
    const auto& rep = reports[w];
    const auto& tr = truth[w];
    std::vector<std::size_t> members = tr.members;
    std::sort(members.begin(), members.end());
    std::size_t hits = 0;
    for (std::size_t f : rep.detected)
      if (std::binary_search(members.begin(), members.end(), f)) ++hits;
    if (tr.injected) {
      ++r.injected;
      if (rep.alarmed) {
        ++alerted_injected;
        true_members += static_cast<double>(members.size());
        found_members += static_cast<double>(hits);
      }
    } else {
      ++r.clean;
      if (rep.alarmed) ++r.false_alarms;
    }
    if (rep.alarmed) {
      detected += static_cast<double>(rep.detected.size());
      detected_true += static_cast<double>(hits);
    }
  }
  r.alert_recall = r.injected > 0 ? static_cast<double>(alerted_injected) / static_cast<double>(r.injected) : 0.0;
  r.anomaly_recall = true_members > 0 ? found_members / true_members : 0.0;
  r.accuracy = detected > 0 ? detected_true / detected : 0.0;
  return r;
}

}  // namespace nsbm
