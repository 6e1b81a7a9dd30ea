#include "run_config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>
#include <type_traits>

#include "nsbm/error.hpp"

namespace nsbm::cli {

namespace {

struct Field {
  std::string key;
  std::string comment;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

// Shortest text that parses back to the same double.
std::string format(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const std::string& why) {
  throw ConfigError("config: " + key + " = '" + value + "': " + why);
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) bad_value(key, value, "not a valid number");
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(out)) bad_value(key, value, "must be finite");
  }
  return out;
}

template <class T>
Field make(std::string key, T RunConfig::*m, std::string comment) {
  Field f;
  f.key = key;
  f.comment = std::move(comment);
  f.get = [m](const RunConfig& c) -> std::string {
    if constexpr (std::is_same_v<T, bool>) {
      return c.*m ? "true" : "false";
    } else if constexpr (std::is_same_v<T, std::string>) {
      return c.*m;
    } else if constexpr (std::is_floating_point_v<T>) {
      return format(c.*m);
    } else {
      return std::to_string(c.*m);
    }
  };
  f.set = [m, key](RunConfig& c, const std::string& v) {
    if constexpr (std::is_same_v<T, bool>) {
      if (v == "true" || v == "1") c.*m = true;
      else if (v == "false" || v == "0") c.*m = false;
      else bad_value(key, v, "expected true or false");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (v.find_first_of("#\n\r") != std::string::npos) bad_value(key, v, "may not contain '#' or newlines");
      c.*m = v;
    } else {
      c.*m = parse_number<T>(key, v);
    }
  };
  return f;
}

Field choice(std::string key, std::string RunConfig::*m, std::vector<std::string> allowed, std::string comment) {
  Field f = make(key, m, comment);
  auto plain = f.set;
  f.set = [plain, allowed, key](RunConfig& c, const std::string& v) {
    if (std::find(allowed.begin(), allowed.end(), v) == allowed.end()) {
      std::string list;
      for (const auto& a : allowed) list += (list.empty() ? "" : "|") + a;
      bad_value(key, v, "expected " + list);
    }
    plain(c, v);
  };
  return f;
}

const std::vector<Field>& fields() {
  using R = RunConfig;
  static const std::vector<Field> table = {
      make("seed", &R::seed, "training and evaluation seed"),

      choice("data.kind", &R::data_kind, {"planted", "alignment", "anomaly"}, "dataset produced by generate"),
      make("data.seed", &R::data_seed, "generator seed"),
      make("data.K", &R::data_K, "planted communities"),
      make("data.community_size", &R::data_community_size, "nodes per community"),
      make("data.p_in", &R::data_p_in, "edge probability inside a community"),
      make("data.p_out", &R::data_p_out, "edge probability across communities"),
      make("data.attribute_dim", &R::data_attribute_dim, "numeric attribute columns (0 = none)"),
      make("data.attribute_separation", &R::data_attribute_separation, "stddev of community attribute means"),
      make("data.attribute_noise", &R::data_attribute_noise, "stddev of per-node attribute noise"),
      make("data.flip_probability", &R::data_flip_probability, "alignment: per-edge flip probability"),
      make("data.attribute_jitter", &R::data_attribute_jitter, "alignment: stddev of G2 attribute jitter"),
      make("data.permutation_seed", &R::data_permutation_seed, "alignment: node permutation seed"),
      choice("data.scenario", &R::data_scenario, {"large", "small", "hidden"}, "anomaly scenario preset"),
      make("data.num_windows", &R::data_num_windows, "anomaly windows"),
      make("data.injection_rate", &R::data_injection_rate, "fraction of windows with injected sets"),

      make("model.K", &R::model_K, "communities"),
      make("model.pseudo", &R::model_pseudo, "extra pseudo-community column"),
      make("model.theta_z", &R::model_theta_z, "membership threshold for community embeddings"),
      make("model.alpha", &R::model_alpha, "cosine scale"),
      make("model.width", &R::model_width, "embedding width"),
      make("model.max_len", &R::model_max_len, "neighbor sequence length, node included"),
      make("model.link_dim", &R::model_link_dim, "link projection width"),
      make("model.attention_hidden", &R::model_attention_hidden, "community attention hidden width"),
      make("model.token_buckets", &R::model_token_buckets, "hashed bag-of-words width (0 = none)"),
      make("model.free_dim", &R::model_free_dim, "trainable per-node embedding width"),
      choice("model.repr_key", &R::model_repr_key, {"degree_difference", "jaccard", "weight"},
             "neighbor sorting key"),
      choice("model.sbm_scale", &R::model_sbm_scale, {"density", "batch"}, "sbm term scaling"),

      make("train.epochs", &R::train_epochs, "epochs of joint training"),
      make("train.warmup_epochs", &R::train_warmup_epochs,
           "link-only epochs before joint training, then k-means initialized memberships (0 = off)"),
      make("train.batch_size", &R::train_batch_size, "nodes per batch"),
      make("train.c", &R::train_c, "communities sampled per batch"),
      make("train.negatives", &R::train_negatives, "negative samples per positive pair"),
      make("train.lr", &R::train_lr, "Adam learning rate"),
      make("train.use_labels", &R::train_use_labels, "add the label loss when labels are present"),
      make("loss.sbm", &R::loss_sbm, "weight"),
      make("loss.entropy", &R::loss_entropy, "weight"),
      make("loss.link", &R::loss_link, "weight"),
      make("loss.labels", &R::loss_labels, "weight"),

      make("align.dim", &R::align_dim, "projection width"),
      make("align.tied", &R::align_tied, "share one projection between the graphs"),
      make("align.epochs", &R::align_epochs, "epochs"),
      make("align.batch_size", &R::align_batch_size, "nodes per batch and side"),
      make("align.c", &R::align_c, "communities per batch"),
      make("align.lr", &R::align_lr, "Adam learning rate"),
      make("align.weight", &R::align_weight, "alignment loss weight"),
      make("align.entropy_weight", &R::align_entropy_weight, "entropy weight inside the alignment loss"),
      make("align.label_weight", &R::align_label_weight, "labeled-pair classification weight"),
      make("align.label_fraction", &R::align_label_fraction, "fraction of truth pairs used as labels"),
      make("align.k", &R::align_k, "neighbors kept per node in the matching"),

      make("anomaly.K", &R::anomaly_K, "anomaly sets per window"),
      make("anomaly.theta", &R::anomaly_theta, "alarm threshold on the principal score"),
      make("anomaly.clip_factor", &R::anomaly_clip_factor, "correlation clip = factor x mean |offdiag|"),
      make("anomaly.min_set_size", &R::anomaly_min_set_size, "smallest scored set"),
      make("anomaly.width", &R::anomaly_width, "embedding width"),
      make("anomaly.max_len", &R::anomaly_max_len, "neighbor sequence length"),
      make("anomaly.link_dim", &R::anomaly_link_dim, "link projection width"),
      make("anomaly.attention_hidden", &R::anomaly_attention_hidden, "attention hidden width"),
      make("anomaly.steps", &R::anomaly_steps, "training steps"),
      make("anomaly.batch_size", &R::anomaly_batch_size, "features per batch"),
      make("anomaly.lr", &R::anomaly_lr, "Adam learning rate"),
      make("anomaly.pca_weight", &R::anomaly_pca_weight, "weight of the principal-score loss"),
      make("anomaly.pca_mass", &R::anomaly_pca_mass, "PCA baseline: loading mass of the member set"),

      make("paths.data", &R::paths_data, "dataset directory"),
      make("paths.checkpoint", &R::paths_checkpoint, "checkpoint file"),
      make("paths.out", &R::paths_out, "output directory"),
  };
  return table;
}

const Field& find(const std::string& key) {
  for (const auto& f : fields())
    if (f.key == key) return f;
  throw ConfigError("config: unknown key '" + key + "'");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) { find(key).set(*this, value); }

std::string RunConfig::get(const std::string& key) const { return find(key).get(*this); }

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> k = [] {
    std::vector<std::string> out;
    for (const auto& f : fields()) out.push_back(f.key);
    return out;
  }();
  return k;
}

std::string RunConfig::to_text() const {
  std::ostringstream out;
  std::string section;
  for (const auto& f : fields()) {
    const auto dot = f.key.find('.');
    const std::string s = dot == std::string::npos ? "" : f.key.substr(0, dot);
    if (s != section) {
      out << '\n';
      section = s;
    }
    out << f.key << " = " << f.get(*this) << "  # " << f.comment << '\n';
  }
  return out.str();
}

RunConfig RunConfig::from_text(const std::string& text) {
  RunConfig c;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    c.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return c;
}

void RunConfig::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write config " + path);
  out << "# nsbm run configuration\n" << to_text();
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str());
}

nlohmann::json RunConfig::echo() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& f : fields())
    if (f.key.rfind("paths.", 0) != 0) j[f.key] = f.get(*this);
  return j;
}

bool operator==(const RunConfig& a, const RunConfig& b) {
  for (const auto& k : RunConfig::keys())
    if (a.get(k) != b.get(k)) return false;
  return true;
}

ModelConfig RunConfig::model_config(std::size_t numeric_dim) const {
  ModelConfig mc;
  mc.K = model_K;
  mc.pseudo = model_pseudo;
  mc.theta_z = model_theta_z;
  mc.alpha = model_alpha;
  mc.attributes = {model_token_buckets, numeric_dim, model_free_dim};
  mc.embedder.width = model_width;
  mc.embedder.max_len = model_max_len;
  mc.link_dim = model_link_dim;
  mc.attention_hidden = model_attention_hidden;
  mc.repr_key = model_repr_key == "jaccard" ? ReprKey::jaccard
                : model_repr_key == "weight" ? ReprKey::weight
                                             : ReprKey::degree_difference;
  mc.sbm_scale = model_sbm_scale == "batch" ? SbmScale::batch : SbmScale::density;
  return mc;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig tc;
  tc.epochs = train_epochs;
  tc.batch_size = train_batch_size;
  tc.c = train_c;
  tc.negatives = train_negatives;
  tc.lr = train_lr;
  tc.weights = {loss_sbm, loss_entropy, loss_link, loss_labels};
  tc.use_labels = train_use_labels;
  tc.seed = seed;
  return tc;
}

AlignmentTrainConfig RunConfig::align_config() const {
  AlignmentTrainConfig ac;
  ac.epochs = align_epochs;
  ac.batch_size = align_batch_size;
  ac.c = align_c;
  ac.negatives = train_negatives;
  ac.lr = align_lr;
  ac.weights = {loss_sbm, loss_entropy, loss_link, loss_labels};
  ac.align_weight = align_weight;
  ac.entropy_weight = align_entropy_weight;
  ac.label_weight = align_label_weight;
  ac.seed = seed;
  return ac;
}

DetectorConfig RunConfig::detector_config() const {
  DetectorConfig dc;
  dc.K = anomaly_K;
  dc.theta_anomaly = anomaly_theta;
  dc.clip_factor = anomaly_clip_factor;
  dc.min_set_size = anomaly_min_set_size;
  dc.width = anomaly_width;
  dc.max_len = anomaly_max_len;
  dc.link_dim = anomaly_link_dim;
  dc.attention_hidden = anomaly_attention_hidden;
  dc.alpha = model_alpha;
  return dc;
}

DetectorTrainConfig RunConfig::detector_train_config() const {
  DetectorTrainConfig dt;
  dt.steps = anomaly_steps;
  dt.batch_size = anomaly_batch_size;
  dt.negatives = train_negatives;
  dt.lr = anomaly_lr;
  dt.weights = {loss_sbm, loss_entropy, loss_link, loss_labels};
  dt.pca_weight = anomaly_pca_weight;
  dt.seed = seed;
  return dt;
}

PlantedPartitionSpec RunConfig::planted_spec() const {
  PlantedPartitionSpec ps;
  ps.K = data_K;
  ps.community_size = data_community_size;
  ps.p_in = data_p_in;
  ps.p_out = data_p_out;
  ps.attribute_dim = data_attribute_dim;
  ps.attribute_separation = data_attribute_separation;
  ps.attribute_noise = data_attribute_noise;
  ps.seed = data_seed;
  return ps;
}

AlignmentPairSpec RunConfig::alignment_spec() const {
  AlignmentPairSpec as;
  as.base = planted_spec();
  as.permutation_seed = data_permutation_seed;
  as.flip_probability = data_flip_probability;
  as.attribute_jitter = data_attribute_jitter;
  return as;
}

AnomalyScenario RunConfig::anomaly_scenario() const {
  AnomalyScenario sc = AnomalyScenario::preset(parse_scenario_kind(data_scenario));
  sc.num_windows = data_num_windows;
  sc.injection_rate = data_injection_rate;
  sc.seed = data_seed;
  return sc;
}

}  // namespace nsbm::cli
