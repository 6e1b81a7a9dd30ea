#include "nsbm/model.hpp"

#include <cmath>
#include <cstdio>

#include "nsbm/error.hpp"

namespace nsbm {

GraphView make_view(const Graph& g, const ModelConfig& config, ParameterStore& store, Rng& rng,
                    const std::string& prefix) {
  GraphView view;
  view.graph = &g;
  view.encoder = AttributeEncoder(g, config.attributes, store, rng, prefix);
  view.repr = build_all_repr(g, config.embedder.max_len, config.repr_key);
  return view;
}

NsbmModel::NsbmModel(std::size_t in_dim, const ModelConfig& config, ParameterStore& store, Rng& rng)
    : config_(config) {
  if (config.K < 1) throw ConfigError("model: K must be >= 1");
  embedder_ = SequenceEmbedder(in_dim, config.embedder, store, rng, "emb");
  const std::size_t w = config.embedder.width;
  member_ = make_linear(store, "member", w, config.columns(), rng);
  link1_ = make_linear(store, "link1", w, config.link_dim, rng);
  link2_ = make_linear(store, "link2", w, config.link_dim, rng);
  attention_ = CommunityAttention::create(store, w, config.attention_hidden, rng, "catt");
}

Var NsbmModel::embed(Tape& tape, const GraphView& view, std::span<const NodeId> nodes) const {
  std::vector<NodeRepr> seqs;
  seqs.reserve(nodes.size());
  for (NodeId v : nodes) seqs.push_back(view.repr.at(v));
  return embedder_.embed(tape, view.encoder.raw(tape), seqs);
}

LossBreakdown NsbmModel::joint_loss(Tape& tape, const GraphView& view, std::span<const NodeId> batch,
                                    const LossWeights& weights, std::size_t negatives, Rng& rng, bool use_labels,
                                    Var& total, Var* Z_out) const {
  const Graph& g = *view.graph;
  Var X = embed(tape, view, batch);
  Var Z = membership(tape, X);
  if (Z_out != nullptr) *Z_out = Z;
  Var Zc = drop_pseudo(Z, static_cast<std::size_t>(config_.K));
  const Tensor A = g.adjacency(batch);
  Var C = community_similarity(tape, Zc, X, A, config_.similarity);
  const double b = static_cast<double>(std::max<std::size_t>(batch.size(), 1));

  Var sbm;
  if (config_.sbm_scale == SbmScale::density) {
    // C * b^2 / (1^T M 1), the total node-similarity mass of the batch; the
    // scalar is broadcast through a 1x1 matmul. Without a pseudo column this
    // equals sum(C).
    Var ones = tape.constant(Tensor(batch.size(), 1, 1.0));
    Var mass = community_similarity(tape, ones, X, A, config_.similarity);
    Var inv_mass = ops::scale(ops::exp(ops::neg(ops::log_eps(mass))), b * b);
    const std::size_t k = C.rows();
    Var ones_col = tape.constant(Tensor(k, 1, 1.0));
    Var ones_row = tape.constant(Tensor(1, k, 1.0));
    Var scaled = ops::mul(C, ops::matmul(ones_col, ops::matmul(inv_mass, ones_row)));
    sbm = ops::scale(sbm_loss(scaled, ops::sum_cols(Zc)), weights.sbm / (b * b));
  } else {
    sbm = ops::scale(sbm_loss(C, ops::sum_cols(Zc)), weights.sbm / b);
  }
  Var ent = ops::scale(entropy_loss(Z), weights.entropy);
  const PairList pos = batch_edges(g, batch);
  const PairList neg = sample_negatives(g, batch, negatives * pos.size(), rng);
  Var link = ops::scale(link_loss(tape, X, pos, neg, link1_, link2_, config_.alpha), weights.link);

  LossBreakdown out;
  out.sbm = sbm.item();
  out.entropy = ent.item();
  out.link = link.item();
  total = ops::add(ops::add(sbm, ent), link);
  if (use_labels && g.has_labels()) {
    std::vector<std::vector<int>> labels;
    labels.reserve(batch.size());
    for (NodeId v : batch) labels.push_back(v < g.labels.size() ? g.labels[v] : std::vector<int>{});
    Var lab = ops::scale(label_loss(tape, Z, labels), weights.labels);
    out.labels = lab.item();
    total = ops::add(total, lab);
  }
  out.total = total.item();
  return out;
}

Tensor NsbmModel::embeddings(const GraphView& view) const {
  std::vector<NodeId> all(view.num_nodes());
  for (NodeId v = 0; v < all.size(); ++v) all[v] = v;
  Tape tape;
  return embed(tape, view, all).value();
}

Tensor NsbmModel::embeddings(const GraphView& view, std::span<const NodeId> nodes) const {
  Tape tape;
  return embed(tape, view, nodes).value();
}

Tensor NsbmModel::memberships(const GraphView& view) const {
  std::vector<NodeId> all(view.num_nodes());
  for (NodeId v = 0; v < all.size(); ++v) all[v] = v;
  Tape tape;
  return membership(tape, embed(tape, view, all)).value();
}

void init_membership_from_clusters(NsbmModel& model, const GraphView& view, const std::vector<int>& labels,
                                   double sharpness) {
  const Tensor X = model.embeddings(view);
  const auto K = static_cast<std::size_t>(model.config().K);
  if (labels.size() != X.rows()) throw ShapeError("init_membership_from_clusters: label count differs from nodes");
  if (!(sharpness > 0.0)) throw ConfigError("init_membership_from_clusters: sharpness must be > 0");
  const std::size_t d = X.cols();
  Tensor mu(K, d);
  std::vector<double> count(K, 0.0);
  for (std::size_t v = 0; v < X.rows(); ++v) {
    if (labels[v] < 0 || static_cast<std::size_t>(labels[v]) >= K) {
      throw ConfigError("init_membership_from_clusters: label out of range at node " + std::to_string(v));
    }
    const auto k = static_cast<std::size_t>(labels[v]);
    count[k] += 1.0;
    for (std::size_t c = 0; c < d; ++c) mu(k, c) += X(v, c);
  }
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t c = 0; c < d; ++c) mu(k, c) /= std::max(1.0, count[k]);
  double spread = 0.0;
  for (std::size_t v = 0; v < X.rows(); ++v)
    for (std::size_t c = 0; c < d; ++c) {
      const double x = X(v, c) - mu(static_cast<std::size_t>(labels[v]), c);
      spread += x * x;
    }
  spread /= std::max<std::size_t>(1, X.rows());
  const double beta = sharpness / std::max(spread, 1e-12);

  const Linear& L = model.member_layer();
  Tensor& W = L.weight->value;
  Tensor& b = L.bias->value;
  W.fill(0.0);
  double lowest = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    double n2 = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      W(c, k) = beta * mu(k, c);
      n2 += mu(k, c) * mu(k, c);
    }
    b(0, k) = -beta * n2 / 2.0;
    lowest = k == 0 ? b(0, k) : std::min(lowest, b(0, k));
  }
  if (W.cols() > K) b(0, K) = lowest - sharpness;
}

// ---------------------------------------------------------------- Trainer ---

Trainer::Trainer(NsbmModel& model, GraphView& view, ParameterStore& store, const TrainConfig& config)
    : model_(model), view_(view), store_(store), config_(config), adam_(AdamConfig{config.lr}) {
  if (config.batch_size == 0) throw ConfigError("train: batch_size must be >= 1");
  if (config.c == 0) throw ConfigError("train: c must be >= 1");
  assignments_ = init_assignment(*view.graph, model.config().K, model.config().pseudo);
}

std::size_t Trainer::steps_per_epoch() const {
  const std::size_t n = view_.num_nodes();
  return std::max<std::size_t>(1, (n + config_.batch_size - 1) / config_.batch_size);
}

StepRecord Trainer::step() {
  Rng rng = Rng(config_.seed, 0x7121).derive(step_);
  const auto groups = static_cast<int>(model_.config().columns());
  const auto batch = sample_batch(assignments_, groups, config_.c, config_.batch_size, rng);

  store_.zero_grad();
  Tape tape;
  Var total, Z;
  StepRecord rec;
  rec.step = step_;
  try {
    rec.loss = model_.joint_loss(tape, view_, batch, config_.weights, config_.negatives, rng, config_.use_labels,
                                 total, &Z);
  } catch (const NumericalError& e) {
    throw NumericalError("train: step " + std::to_string(step_) + ": " + e.what());
  }
  if (!std::isfinite(rec.loss.total)) {
    throw NumericalError("train: non-finite loss at step " + std::to_string(step_));
  }
  tape.backward(total);
  try {
    adam_.step(store_);
  } catch (const NumericalError& e) {
    throw NumericalError("train: step " + std::to_string(step_) + ": " + e.what());
  }
  update_assignment(assignments_, batch, Z.value());
  ++step_;
  return rec;
}

void Trainer::run(const std::function<void(const StepRecord&)>& on_step) {
  while (step_ < total_steps()) {
    const StepRecord r = step();
    if (on_step) on_step(r);
  }
}

nlohmann::json Trainer::state() const { return {{"step", step_}, {"assignments", assignments_}}; }

void Trainer::restore(const nlohmann::json& state) {
  step_ = state.at("step").get<std::size_t>();
  auto a = state.at("assignments").get<AssignmentList>();
  if (a.size() != assignments_.size()) throw ShapeError("train: stored assignments cover a different graph");
  assignments_ = std::move(a);
}

std::string loss_csv_header() { return "step,sbm,entropy,link,labels,total"; }

std::string loss_csv_row(const StepRecord& r) {
  char buf[256];
  char labels[32] = "";
  if (r.loss.labels) std::snprintf(labels, sizeof labels, "%.17g", *r.loss.labels);
  std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%s,%.17g", r.step, r.loss.sbm, r.loss.entropy, r.loss.link,
                labels, r.loss.total);
  return buf;
}

}  // namespace nsbm
