#include "nsbm/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "nsbm/anomaly.hpp"
#include "nsbm/error.hpp"
#include "nsbm/rng.hpp"

namespace nsbm {

std::vector<std::size_t> PlantedPartitionSpec::resolved_sizes() const {
  if (!sizes.empty()) {
    if (sizes.size() != static_cast<std::size_t>(K)) {
      throw ConfigError("planted_partition: " + std::to_string(sizes.size()) + " sizes for K=" + std::to_string(K));
    }
    return sizes;
  }
  return std::vector<std::size_t>(static_cast<std::size_t>(std::max(K, 0)), community_size);
}

Graph planted_partition(const PlantedPartitionSpec& spec) {
  if (spec.K < 1) throw ConfigError("planted_partition: K must be >= 1");
  if (!(spec.p_out >= 0.0 && spec.p_out < spec.p_in && spec.p_in <= 1.0)) {
    throw ConfigError("planted_partition: need 0 <= p_out < p_in <= 1");
  }
  if (spec.attribute_noise < 0.0 || spec.attribute_separation < 0.0) {
    throw ConfigError("planted_partition: attribute scales must be non-negative");
  }
  const auto sizes = spec.resolved_sizes();
  std::vector<int> label;
  for (std::size_t k = 0; k < sizes.size(); ++k) label.insert(label.end(), sizes[k], static_cast<int>(k));
  const std::size_t n = label.size();

  Rng edge_rng(spec.seed, 1);
  std::vector<Edge> edges;
  for (NodeId u = 0; u < n; ++u)
    for (NodeId v = u + 1; v < n; ++v)
      if (edge_rng.bernoulli(label[u] == label[v] ? spec.p_in : spec.p_out)) edges.push_back({u, v, 1.0});
  Graph g(n, std::move(edges));
  g.labels.resize(n);
  for (std::size_t v = 0; v < n; ++v) g.labels[v] = {label[v]};

  if (spec.attribute_dim > 0) {
    Rng attr_rng(spec.seed, 2);
    Tensor means(sizes.size(), spec.attribute_dim);
    for (auto& x : means.values()) x = attr_rng.normal(0.0, spec.attribute_separation);
    Tensor f(n, spec.attribute_dim);
    for (std::size_t v = 0; v < n; ++v)
      for (std::size_t c = 0; c < spec.attribute_dim; ++c)
        f(v, c) = means(static_cast<std::size_t>(label[v]), c) + attr_rng.normal(0.0, spec.attribute_noise);
    g.features = std::move(f);
  }
  return g;
}

AlignmentPair perturb_pair(const AlignmentPairSpec& spec) {
  if (!(spec.flip_probability >= 0.0 && spec.flip_probability < 0.5)) {
    throw ConfigError("perturb_pair: flip probability must be in [0, 0.5)");
  }
  if (spec.attribute_jitter < 0.0) throw ConfigError("perturb_pair: attribute jitter must be non-negative");
  AlignmentPair out;
  out.g1 = planted_partition(spec.base);
  const Graph& g1 = out.g1;
  const std::size_t n = g1.num_nodes();

  Rng perm_rng(spec.permutation_seed, 3);
  std::vector<NodeId> perm(n);
  for (NodeId v = 0; v < n; ++v) perm[v] = v;
  perm_rng.shuffle(perm);
  out.truth = perm;

  Rng flip_rng(spec.permutation_seed, 4);
  std::set<std::pair<NodeId, NodeId>> present;
  for (const auto& e : g1.edges()) present.insert({e.src, e.dst});
  std::vector<Edge> kept;
  std::set<std::pair<NodeId, NodeId>> added;
  for (const auto& e : g1.edges()) {
    if (!flip_rng.bernoulli(spec.flip_probability)) {
      kept.push_back(e);
      continue;
    }
    ++out.flips;
    if (flip_rng.bernoulli(0.5)) continue;  // dropped
    kept.push_back(e);
    if (n < 2) continue;
    for (int attempt = 0; attempt < 1000; ++attempt) {
      auto a = static_cast<NodeId>(flip_rng.below(n));
      auto b = static_cast<NodeId>(flip_rng.below(n));
      if (a == b) continue;
      if (a > b) std::swap(a, b);
      if (present.count({a, b}) || added.count({a, b})) continue;
      added.insert({a, b});
      kept.push_back({a, b, 1.0});
      break;
    }
  }
  std::vector<Edge> mapped;
  mapped.reserve(kept.size());
  for (const auto& e : kept) mapped.push_back({perm[e.src], perm[e.dst], e.weight});
  out.g2 = Graph(n, std::move(mapped));

  Rng jitter_rng(spec.permutation_seed, 5);
  if (g1.has_labels()) {
    out.g2.labels.resize(n);
    for (NodeId v = 0; v < n; ++v) out.g2.labels[perm[v]] = g1.labels[v];
  }
  if (g1.features) {
    Tensor f(n, g1.features->cols());
    for (NodeId v = 0; v < n; ++v)
      for (std::size_t c = 0; c < f.cols(); ++c)
        f(perm[v], c) = (*g1.features)(v, c) + (spec.attribute_jitter > 0.0 ? jitter_rng.normal(0.0, spec.attribute_jitter) : 0.0);
    out.g2.features = std::move(f);
  }
  return out;
}

AnomalyScenario AnomalyScenario::preset(ScenarioKind kind) {
  AnomalyScenario s;
  s.kind = kind;
  switch (kind) {
    case ScenarioKind::large:
      s.num_features = 300;
      s.samples = 60;
      s.set_sizes = {90};
      break;
    case ScenarioKind::small:
      s.num_features = 300;
      s.samples = 60;
      s.set_sizes = {30};
      break;
    case ScenarioKind::hidden:
      s.num_features = 2200;
      s.samples = 30;
      s.set_sizes = {30};
      break;
  }
  return s;
}

ScenarioKind parse_scenario_kind(const std::string& name) {
  if (name == "large") return ScenarioKind::large;
  if (name == "small") return ScenarioKind::small;
  if (name == "hidden") return ScenarioKind::hidden;
  throw ConfigError("unknown anomaly scenario '" + name + "' (expected large, small or hidden)");
}

std::string to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::large:
      return "large";
    case ScenarioKind::small:
      return "small";
    case ScenarioKind::hidden:
      return "hidden";
  }
  return "?";
}

namespace {

void validate(const AnomalyScenario& s) {
  std::size_t total = 0;
  for (std::size_t m : s.set_sizes) {
    if (m < 2) throw ConfigError("anomaly scenario: sets need at least 2 features");
    total += m;
  }
  if (s.set_sizes.empty()) throw ConfigError("anomaly scenario: no anomaly sets");
  if (total > s.num_features) throw ConfigError("anomaly scenario: sets exceed the feature count");
  if (s.samples < 2) throw ConfigError("anomaly scenario: need at least 2 samples per window");
  if (!(s.strength >= 0.0 && s.strength <= 1.0)) throw ConfigError("anomaly scenario: strength must be in [0,1]");
  if (!(s.injection_rate >= 0.0 && s.injection_rate <= 1.0)) {
    throw ConfigError("anomaly scenario: injection rate must be in [0,1]");
  }
  const double frac = static_cast<double>(total) / static_cast<double>(s.num_features);
  switch (s.kind) {
    case ScenarioKind::large:
      if (frac < 0.2 || frac > 0.5) throw ConfigError("anomaly scenario: 'large' needs anomalies in 20%-50% of features");
      break;
    case ScenarioKind::small:
      if (frac < 0.05 || frac > 0.2) throw ConfigError("anomaly scenario: 'small' needs anomalies in 5%-20% of features");
      break;
    case ScenarioKind::hidden:
      if (total < 20 || total > 200 || s.num_features <= 2000) {
        throw ConfigError("anomaly scenario: 'hidden' needs 20-200 anomalies in windows over 2000 features");
      }
      break;
  }
}

Tensor select_columns(const Tensor& m, std::span<const std::size_t> cols) {
  Tensor out(m.rows(), cols.size());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j) out(i, j) = m(i, cols[j]);
  return out;
}

AnomalyWindow draw(const AnomalyScenario& s, Rng& rng, bool injected) {
  AnomalyWindow w;
  w.injected = injected;
  w.data = Tensor(s.samples, s.num_features);
  for (auto& x : w.data.values()) x = rng.normal();
  if (!injected) return w;
  std::size_t total = 0;
  for (std::size_t m : s.set_sizes) total += m;
  auto picks = rng.sample_without_replacement(s.num_features, total);
  std::size_t at = 0;
  const double a = std::sqrt(s.strength), b = std::sqrt(1.0 - s.strength);
  for (std::size_t m : s.set_sizes) {
    std::vector<std::size_t> set(picks.begin() + static_cast<std::ptrdiff_t>(at),
                                 picks.begin() + static_cast<std::ptrdiff_t>(at + m));
    at += m;
    std::sort(set.begin(), set.end());
    for (std::size_t t = 0; t < s.samples; ++t) {
      const double f = rng.normal();
      for (std::size_t j : set) w.data(t, j) = a * f + b * w.data(t, j);
    }
    w.sets.push_back(std::move(set));
  }
  return w;
}

}  // namespace

AnomalyWindow synth_window(const AnomalyScenario& scenario, std::size_t index, bool injected) {
  validate(scenario);
  const Rng base(scenario.seed, 0xA0000 + index);
  for (std::size_t attempt = 0;; ++attempt) {
    Rng rng = base.derive(attempt);
    AnomalyWindow w = draw(scenario, rng, injected);
    w.rejections = attempt;
    if (scenario.kind != ScenarioKind::hidden || !injected) return w;
    bool ok = window_principal_score(w.data) < 0.7;
    for (const auto& set : w.sets) {
      if (!ok) break;
      ok = exact_principal_score(pearson_correlation(select_columns(w.data, set))) > 0.7;
    }
    if (ok) return w;
    if (attempt + 1 >= scenario.max_rejections) {
      throw NumericalError("synth_anomaly_windows: hidden-scenario precondition not met after " +
                           std::to_string(scenario.max_rejections) + " draws for window " + std::to_string(index));
    }
  }
}

std::vector<AnomalyWindow> synth_anomaly_windows(const AnomalyScenario& scenario) {
  validate(scenario);
  const auto injected_count = static_cast<std::size_t>(
      std::llround(scenario.injection_rate * static_cast<double>(scenario.num_windows)));
  std::vector<bool> injected(scenario.num_windows, false);
  Rng pick(scenario.seed, 7);
  for (std::size_t i : pick.sample_without_replacement(scenario.num_windows, injected_count)) injected[i] = true;
  std::vector<AnomalyWindow> out;
  out.reserve(scenario.num_windows);
  for (std::size_t i = 0; i < scenario.num_windows; ++i) out.push_back(synth_window(scenario, i, injected[i]));
  return out;
}

}  // namespace nsbm
