#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "nsbm/anomaly.hpp"
#include "nsbm/datagen.hpp"
#include "nsbm/model.hpp"

namespace nsbm {

/// Per-feature structural attributes of a correlation graph, one row per
/// feature: degree fraction, mean / max / top-5 mean edge weight, and
/// log counts of edges at or above 0.5 and 0.7 (scaled by log of the size).
Tensor correlation_node_features(const CorrelationGraph& cg);
inline constexpr std::size_t kCorrelationFeatureDim = 6;

struct DetectorConfig {
  int K = 2;
  double theta_anomaly = 0.7;
  double clip_factor = 1.5;  ///< theta_corr = clip_factor x mean |offdiag| of clean history
  std::size_t min_set_size = 5;
  std::size_t width = 16;
  std::size_t max_len = 8;
  std::size_t link_dim = 16;
  std::size_t attention_hidden = 8;
  double alpha = 16.0;

  ModelConfig model_config() const;
};

struct AnomalySetReport {
  int label = 0;
  std::vector<std::size_t> members;  ///< feature indices, ascending
  std::optional<double> approx;      ///< attention-weighted score; none below min_set_size
  std::optional<double> exact;       ///< top eigenvalue / size, oracle mode only
  bool alarm = false;
};

struct AnomalyReport {
  std::vector<AnomalySetReport> sets;  ///< one per anomaly label 0..K-1
  std::vector<int> labels;             ///< per feature; K = not anomalous
  double theta_anomaly = 0.7;
  double theta_corr = 0.0;

  bool alarmed() const;
  /// Union of members of alarmed sets, ascending.
  std::vector<std::size_t> detected() const;
};

/// Feature-graph community model with a pseudo-community for normal
/// features and K anomaly sets.
class AnomalyDetector {
 public:
  AnomalyDetector(const DetectorConfig& config, ParameterStore& store, Rng& rng);

  const DetectorConfig& config() const noexcept { return config_; }
  NsbmModel& model() noexcept { return model_; }
  const NsbmModel& model() const noexcept { return model_; }

  double theta_corr() const noexcept { return theta_corr_; }
  void set_theta_corr(double t) { theta_corr_ = t; }
  /// clip_factor x mean |offdiag| correlation averaged over `windows`.
  void calibrate(const std::vector<const Tensor*>& windows);

  CorrelationGraph correlate(const Tensor& window) const;
  /// Correlation graph with node features attached.
  Graph feature_graph(const CorrelationGraph& cg) const;

  AnomalyReport monitor(const Tensor& window, bool oracle = false) const;

 private:
  DetectorConfig config_;
  NsbmModel model_;
  double theta_corr_ = 0.3;
};

struct DetectorTrainConfig {
  std::size_t steps = 300;
  std::size_t batch_size = 256;
  std::size_t negatives = 5;
  double lr = 1e-2;
  LossWeights weights;
  double pca_weight = 1.0;  ///< applied to pca_loss / set size
  std::uint64_t seed = 0;
};

struct DetectorStep {
  std::size_t step = 0;
  std::size_t window = 0;
  LossBreakdown loss;
  double pca = 0.0;
};

/// Calibrates theta_corr on the clean windows, then trains on labeled
/// windows: set j members get label j mod K, every other feature the
/// pseudo label. Each step uses one window, cycling in order, with a batch of
/// up to half planted members and the rest background. Returns the final
/// optimizer step count.
std::size_t train_detector(AnomalyDetector& detector, ParameterStore& store, const std::vector<AnomalyWindow>& windows,
                           const DetectorTrainConfig& config,
                           const std::function<void(const DetectorStep&)>& on_step = {});

/// Classical detector: top principal component of the whole window; members
/// are the fewest features (by squared loading) holding `mass` of it; alarm
/// when the members' exact principal score exceeds theta_anomaly.
AnomalyReport pca_baseline(const Tensor& window, double theta_anomaly = 0.7, double mass = 0.9);

}  // namespace nsbm
