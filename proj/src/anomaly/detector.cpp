#include "nsbm/detector.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nsbm/error.hpp"
#include "nsbm/optim.hpp"

namespace nsbm {

Tensor correlation_node_features(const CorrelationGraph& cg) {
  const std::size_t d = cg.size();
  Tensor f(d, kCorrelationFeatureDim);
  const double log_size = std::log1p(static_cast<double>(std::max<std::size_t>(d, 2) - 1));
  std::vector<double> w;
  for (std::size_t i = 0; i < d; ++i) {
    w.clear();
    for (std::size_t j = 0; j < d; ++j)
      if (j != i && cg.corr(i, j) > 0.0) w.push_back(cg.corr(i, j));
    std::sort(w.begin(), w.end(), std::greater<>());
    const double deg = static_cast<double>(w.size());
    double strong = 0.0, very_strong = 0.0;
    for (double x : w) {
      strong += x >= 0.5 ? 1.0 : 0.0;
      very_strong += x >= 0.7 ? 1.0 : 0.0;
    }
    double top = 0.0;
    for (std::size_t t = 0; t < std::min<std::size_t>(5, w.size()); ++t) top += w[t];
    f(i, 0) = d > 1 ? deg / static_cast<double>(d - 1) : 0.0;
    f(i, 1) = w.empty() ? 0.0 : std::accumulate(w.begin(), w.end(), 0.0) / deg;
    f(i, 2) = w.empty() ? 0.0 : w.front();
    f(i, 3) = top / 5.0;
    f(i, 4) = std::log1p(strong) / log_size;
    f(i, 5) = std::log1p(very_strong) / log_size;
  }
  return f;
}

ModelConfig DetectorConfig::model_config() const {
  ModelConfig mc;
  mc.K = K;
  mc.pseudo = true;
  mc.attributes = {0, kCorrelationFeatureDim, 0};
  mc.embedder.width = width;
  mc.embedder.max_len = max_len;
  mc.repr_key = ReprKey::weight;
  mc.link_dim = link_dim;
  mc.alpha = alpha;
  mc.attention_hidden = attention_hidden;
  return mc;
}

bool AnomalyReport::alarmed() const {
  return std::any_of(sets.begin(), sets.end(), [](const AnomalySetReport& s) { return s.alarm; });
}

std::vector<std::size_t> AnomalyReport::detected() const {
  std::vector<std::size_t> out;
  for (const auto& s : sets)
    if (s.alarm) out.insert(out.end(), s.members.begin(), s.members.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

AnomalyDetector::AnomalyDetector(const DetectorConfig& config, ParameterStore& store, Rng& rng) : config_(config) {
  if (config.K < 1) throw ConfigError("detector: K must be >= 1");
  if (config.min_set_size < 1) throw ConfigError("detector: min_set_size must be >= 1");
  model_ = NsbmModel(kCorrelationFeatureDim, config.model_config(), store, rng);
}

void AnomalyDetector::calibrate(const std::vector<const Tensor*>& windows) {
  if (windows.empty()) throw ConfigError("detector: no calibration windows");
  double sum = 0.0;
  for (const Tensor* w : windows) sum += calibrate_threshold(*w, config_.clip_factor);
  theta_corr_ = sum / static_cast<double>(windows.size());
}

CorrelationGraph AnomalyDetector::correlate(const Tensor& window) const {
  return clipped_correlation(window, theta_corr_);
}

Graph AnomalyDetector::feature_graph(const CorrelationGraph& cg) const {
  Graph g = cg.graph();
  g.features = correlation_node_features(cg);
  return g;
}

namespace {

GraphView detector_view(const Graph& g, const ModelConfig& mc) {
  ParameterStore none;
  Rng rng(0);
  return make_view(g, mc, none, rng);
}

std::vector<double> attention_alpha(const NsbmModel& model, const GraphView& view,
                                    const std::vector<std::size_t>& members) {
  Tape tape;
  std::vector<NodeId> nodes(members.begin(), members.end());
  Var X = model.embed(tape, view, nodes);
  const Tensor a = attention_weights(tape, X, model.attention()).value();
  return {a.values().begin(), a.values().end()};
}

}  // namespace

AnomalyReport AnomalyDetector::monitor(const Tensor& window, bool oracle) const {
  const CorrelationGraph cg = correlate(window);
  const Graph g = feature_graph(cg);
  const GraphView view = detector_view(g, model_.config());
  const Tensor Z = model_.memberships(view);

  AnomalyReport rep;
  rep.theta_anomaly = config_.theta_anomaly;
  rep.theta_corr = theta_corr_;
  rep.labels = argmax_rows(Z);
  rep.sets.resize(static_cast<std::size_t>(config_.K));
  for (int k = 0; k < config_.K; ++k) rep.sets[static_cast<std::size_t>(k)].label = k;
  for (std::size_t v = 0; v < rep.labels.size(); ++v)
    if (rep.labels[v] < config_.K) rep.sets[static_cast<std::size_t>(rep.labels[v])].members.push_back(v);

  for (auto& set : rep.sets) {
    if (set.members.size() < config_.min_set_size) continue;
    const Tensor sub = principal_submatrix(cg.corr, set.members);
    set.approx = approx_principal_score(attention_alpha(model_, view, set.members), sub);
    if (oracle) set.exact = exact_principal_score(sub);
    set.alarm = set.approx && *set.approx > config_.theta_anomaly;
  }
  return rep;
}

namespace {

struct PreparedWindow {
  Graph graph;
  GraphView view;
  Tensor standardized;
  std::vector<std::vector<std::size_t>> sets;
  std::vector<std::size_t> background;
};

void prepare(const AnomalyDetector& det, const AnomalyWindow& w, PreparedWindow& out) {
  const CorrelationGraph cg = det.correlate(w.data);
  out.graph = det.feature_graph(cg);
  const auto K = det.config().K;
  const std::size_t d = w.data.cols();
  out.graph.labels.assign(d, {K});
  std::vector<bool> member(d, false);
  for (std::size_t j = 0; j < w.sets.size(); ++j)
    for (std::size_t f : w.sets[j]) {
      if (f >= d) throw ShapeError("train_detector: set member " + std::to_string(f) + " outside the window");
      out.graph.labels[f] = {static_cast<int>(j % static_cast<std::size_t>(K))};
      member[f] = true;
    }
  out.background.clear();
  for (std::size_t f = 0; f < d; ++f)
    if (!member[f]) out.background.push_back(f);
  out.sets = w.sets;
  out.standardized = standardize_columns(w.data);
  out.view = detector_view(out.graph, det.model().config());
}

Tensor select_columns(const Tensor& m, std::span<const std::size_t> cols) {
  Tensor out(m.rows(), cols.size());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < cols.size(); ++c) out(r, c) = m(r, cols[c]);
  return out;
}

}  // namespace

std::size_t train_detector(AnomalyDetector& detector, ParameterStore& store, const std::vector<AnomalyWindow>& windows,
                           const DetectorTrainConfig& config,
                           const std::function<void(const DetectorStep&)>& on_step) {
  if (windows.empty()) throw ConfigError("train_detector: no training windows");
  if (config.batch_size < 2) throw ConfigError("train_detector: batch_size must be >= 2");
  std::vector<const Tensor*> clean;
  for (const auto& w : windows)
    if (!w.injected) clean.push_back(&w.data);
  if (clean.empty())
    for (const auto& w : windows) clean.push_back(&w.data);
  detector.calibrate(clean);

  Adam adam(AdamConfig{config.lr});
  PreparedWindow current;
  std::size_t loaded = windows.size();
  const NsbmModel& model = detector.model();
  for (std::size_t step = 0; step < config.steps; ++step) {
    const std::size_t wi = step % windows.size();
    if (wi != loaded) {
      prepare(detector, windows[wi], current);
      loaded = wi;
    }
    Rng rng = Rng(config.seed, 0xD7).derive(step);

    // Up to half the batch from planted members, the rest background.
    std::vector<std::size_t> members;
    for (const auto& s : current.sets) members.insert(members.end(), s.begin(), s.end());
    std::sort(members.begin(), members.end());
    members.erase(std::unique(members.begin(), members.end()), members.end());
    const std::size_t n_members = std::min(members.size(), config.batch_size / 2);
    std::vector<NodeId> batch;
    for (std::size_t i : rng.sample_without_replacement(members.size(), n_members))
      batch.push_back(static_cast<NodeId>(members[i]));
    const std::size_t n_bg = std::min(current.background.size(), config.batch_size - n_members);
    for (std::size_t i : rng.sample_without_replacement(current.background.size(), n_bg))
      batch.push_back(static_cast<NodeId>(current.background[i]));
    std::sort(batch.begin(), batch.end());

    store.zero_grad();
    Tape tape;
    Var total;
    DetectorStep rec;
    rec.step = step;
    rec.window = wi;
    try {
      rec.loss = model.joint_loss(tape, current.view, batch, config.weights, config.negatives, rng, true, total);
      for (const auto& set : current.sets) {
        std::vector<std::size_t> in_batch;
        for (std::size_t f : set)
          if (std::binary_search(batch.begin(), batch.end(), static_cast<NodeId>(f))) in_batch.push_back(f);
        if (in_batch.size() < 2) continue;
        std::vector<NodeId> nodes(in_batch.begin(), in_batch.end());
        // The scoring head learns on frozen embeddings; its gradient would
        // otherwise compete with the membership terms inside the embedder.
        Var X = tape.constant(model.embeddings(current.view, nodes));
        Var alpha = attention_weights(tape, X, model.attention());
        Var pl = ops::scale(pca_loss(tape, select_columns(current.standardized, in_batch), alpha),
                            config.pca_weight / static_cast<double>(in_batch.size()));
        rec.pca += pl.item();
        total = ops::add(total, pl);
      }
    } catch (const NumericalError& e) {
      throw NumericalError("train_detector: step " + std::to_string(step) + ": " + e.what());
    }
    rec.loss.total = total.item();
    if (!std::isfinite(rec.loss.total)) {
      throw NumericalError("train_detector: non-finite loss at step " + std::to_string(step));
    }
    tape.backward(total);
    adam.step(store);
    if (on_step) on_step(rec);
  }
  return adam.step_count();
}

AnomalyReport pca_baseline(const Tensor& window, double theta_anomaly, double mass) {
  if (!(mass > 0.0 && mass <= 1.0)) throw ConfigError("pca_baseline: mass must be in (0, 1]");
  const PrincipalComponent pc = window_principal_component(window);
  const std::size_t d = pc.loadings.size();
  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return pc.loadings[a] * pc.loadings[a] > pc.loadings[b] * pc.loadings[b];
  });
  double total = 0.0;
  for (double l : pc.loadings) total += l * l;
  AnomalyReport rep;
  rep.theta_anomaly = theta_anomaly;
  rep.labels.assign(d, 1);
  AnomalySetReport set;
  double acc = 0.0;
  for (std::size_t i : order) {
    if (total > 0.0 && acc >= mass * total) break;
    set.members.push_back(i);
    acc += pc.loadings[i] * pc.loadings[i];
  }
  std::sort(set.members.begin(), set.members.end());
  for (std::size_t f : set.members) rep.labels[f] = 0;
  if (!set.members.empty()) {
    set.exact = exact_principal_score(pearson_correlation(select_columns(window, set.members)));
    set.alarm = *set.exact > theta_anomaly;
  }
  rep.sets.push_back(std::move(set));
  return rep;
}

}  // namespace nsbm
