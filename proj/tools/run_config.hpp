#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "nsbm/alignment.hpp"
#include "nsbm/datagen.hpp"
#include "nsbm/detector.hpp"
#include "nsbm/model.hpp"

namespace nsbm::cli {

/// Every tunable of a run. Text form is one `key = value` per line with `#`
/// comments; unknown keys are rejected.
struct RunConfig {
  std::uint64_t seed = 0;

  // Dataset generation.
  std::string data_kind = "planted";  ///< planted | alignment | anomaly
  std::uint64_t data_seed = 0;
  int data_K = 10;
  std::size_t data_community_size = 60;
  double data_p_in = 0.15;
  double data_p_out = 0.01;
  std::size_t data_attribute_dim = 16;
  double data_attribute_separation = 1.0;
  double data_attribute_noise = 1.0;
  double data_flip_probability = 0.05;
  double data_attribute_jitter = 0.0;
  std::uint64_t data_permutation_seed = 1;
  std::string data_scenario = "large";
  std::size_t data_num_windows = 200;
  double data_injection_rate = 0.1;

  // Community model.
  int model_K = 10;
  bool model_pseudo = true;
  double model_theta_z = 0.1;
  double model_alpha = 16.0;
  std::size_t model_width = 64;
  std::size_t model_max_len = 16;
  std::size_t model_link_dim = 64;
  std::size_t model_attention_hidden = 32;
  std::size_t model_token_buckets = 0;
  std::size_t model_free_dim = 0;
  std::string model_repr_key = "degree_difference";
  std::string model_sbm_scale = "density";

  // Community training.
  std::size_t train_epochs = 20;
  std::size_t train_warmup_epochs = 0;
  std::size_t train_batch_size = 256;
  std::size_t train_c = 4;
  std::size_t train_negatives = 5;
  double train_lr = 1e-3;
  bool train_use_labels = false;
  double loss_sbm = 1.0;
  double loss_entropy = 1.0;
  double loss_link = 1.0;
  double loss_labels = 1.0;

  // Alignment head.
  std::size_t align_dim = 32;
  bool align_tied = true;
  std::size_t align_epochs = 10;
  std::size_t align_batch_size = 64;
  std::size_t align_c = 2;
  double align_lr = 1e-3;
  double align_weight = 1.0;
  double align_entropy_weight = 1.0;
  double align_label_weight = 1.0;
  double align_label_fraction = 0.0;
  std::size_t align_k = 1;

  // Anomaly detector.
  int anomaly_K = 2;
  double anomaly_theta = 0.7;
  double anomaly_clip_factor = 1.5;
  std::size_t anomaly_min_set_size = 5;
  std::size_t anomaly_width = 16;
  std::size_t anomaly_max_len = 8;
  std::size_t anomaly_link_dim = 16;
  std::size_t anomaly_attention_hidden = 8;
  std::size_t anomaly_steps = 300;
  std::size_t anomaly_batch_size = 256;
  double anomaly_lr = 1e-2;
  double anomaly_pca_weight = 1.0;
  double anomaly_pca_mass = 0.9;

  // Locations; left out of report echoes.
  std::string paths_data;
  std::string paths_checkpoint;
  std::string paths_out;

  /// Sets one field from its text form. ConfigError on an unknown key or a
  /// malformed value.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  static const std::vector<std::string>& keys();

  std::string to_text() const;
  static RunConfig from_text(const std::string& text);
  void save(const std::string& path) const;
  static RunConfig load(const std::string& path);

  /// key -> value text of every non-path field.
  nlohmann::json echo() const;

  ModelConfig model_config(std::size_t numeric_dim) const;
  TrainConfig train_config() const;
  AlignmentTrainConfig align_config() const;
  DetectorConfig detector_config() const;
  DetectorTrainConfig detector_train_config() const;
  PlantedPartitionSpec planted_spec() const;
  AlignmentPairSpec alignment_spec() const;
  AnomalyScenario anomaly_scenario() const;
};

bool operator==(const RunConfig& a, const RunConfig& b);

}  // namespace nsbm::cli
