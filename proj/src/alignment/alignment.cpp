#include "nsbm/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "nsbm/error.hpp"

namespace nsbm {

AlignmentHead AlignmentHead::create(ParameterStore& store, std::size_t in_dim, std::size_t out_dim, double alpha,
                                    bool tied, Rng& rng, const std::string& prefix) {
  AlignmentHead h;
  h.alpha = alpha;
  h.l1 = make_linear(store, prefix + ".l1", in_dim, out_dim, rng);
  h.l2 = tied ? h.l1 : make_linear(store, prefix + ".l2", in_dim, out_dim, rng);
  return h;
}

Var alignment_scores(Tape& tape, Var X1, Var X2, const AlignmentHead& head) {
  if (X1.rows() == 0 || X2.rows() == 0) throw ShapeError("alignment_scores: empty embedding set");
  Var a = head.l1(tape, X1);
  Var b = head.l2(tape, X2);
  return ops::softmax_rows(ops::scale(ops::cosine_pairwise(a, b), head.alpha));
}

Var alignment_loss(Tape& tape, Var X1, Var X2, Var P, const AlignmentHead& head, double entropy_weight) {
  if (P.rows() != X1.rows() || P.cols() != X2.rows()) {
    throw ShapeError("alignment_loss: P is " + P.value().shape_string() + " for " + std::to_string(X1.rows()) +
                     " x " + std::to_string(X2.rows()) + " embeddings");
  }
  Var a = head.l1(tape, X1);
  Var mixed = ops::matmul(P, head.l2(tape, X2));
  Var dist = ops::mean(ops::sum_rows(ops::square(ops::sub(a, mixed))));
  Var ent = ops::neg(ops::mean(ops::sum_rows(ops::mul(P, ops::log_eps(P)))));
  return ops::add(dist, ops::scale(ent, entropy_weight));
}

// ------------------------------------------------------------- training ---

AlignmentTrainer::AlignmentTrainer(NsbmModel& model, AlignmentHead& head, GraphView& v1, GraphView& v2,
                                   ParameterStore& store, const AlignmentTrainConfig& config,
                                   std::vector<std::pair<NodeId, NodeId>> labels)
    : model_(model),
      head_(head),
      v1_(v1),
      v2_(v2),
      store_(store),
      config_(config),
      labels_(std::move(labels)),
      adam_(AdamConfig{config.lr}) {
  if (config.batch_size == 0) throw ConfigError("align: batch_size must be >= 1");
  if (config.c == 0) throw ConfigError("align: c must be >= 1");
  for (const auto& [a, b] : labels_) {
    if (a >= v1.num_nodes() || b >= v2.num_nodes()) throw ConfigError("align: labeled pair outside the graphs");
  }
}

std::size_t AlignmentTrainer::steps_per_epoch() const {
  return std::max<std::size_t>(1, (v1_.num_nodes() + config_.batch_size - 1) / config_.batch_size);
}

namespace {

std::vector<NodeId> all_nodes(std::size_t n) {
  std::vector<NodeId> v(n);
  std::iota(v.begin(), v.end(), NodeId{0});
  return v;
}

// Up to `count` distinct nodes whose label is in `groups` (every node when no
// label matches), ascending.
std::vector<NodeId> pick_nodes(const std::vector<int>& labels, const std::vector<int>& groups, std::size_t count,
                               Rng& rng) {
  std::vector<NodeId> pool;
  for (NodeId v = 0; v < labels.size(); ++v)
    if (std::find(groups.begin(), groups.end(), labels[v]) != groups.end()) pool.push_back(v);
  if (pool.empty()) pool = all_nodes(labels.size());
  std::vector<NodeId> out;
  for (std::size_t i : rng.sample_without_replacement(pool.size(), count)) out.push_back(pool[i]);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

AlignmentStep AlignmentTrainer::step() {
  const std::size_t spe = steps_per_epoch();
  AlignmentStep rec;
  rec.step = step_;
  rec.community_only = step_ % (spe + 1) == spe;
  Rng rng = Rng(config_.seed, 0xA11).derive(step_);
  const auto K = static_cast<std::size_t>(model_.config().K);
  const double theta = model_.config().theta_z;

  store_.zero_grad();
  Tape tape;
  const auto n1 = all_nodes(v1_.num_nodes()), n2 = all_nodes(v2_.num_nodes());
  Var X1 = model_.embed(tape, v1_, n1);
  Var X2 = model_.embed(tape, v2_, n2);
  Var Z1 = model_.membership(tape, X1);
  Var Z2 = model_.membership(tape, X2);
  const auto ce1 = community_embeddings(tape, Z1, X1, K, theta, model_.attention());
  const auto ce2 = community_embeddings(tape, Z2, X2, K, theta, model_.attention());
  Var Pc = alignment_scores(tape, ce1.vectors, ce2.vectors, head_);
  Var community = alignment_loss(tape, ce1.vectors, ce2.vectors, Pc, head_, config_.entropy_weight);
  rec.community_align = community.item();
  Var total = ops::scale(community, config_.align_weight);

  if (!rec.community_only) {
    const auto lab1 = argmax_rows(Z1.value());
    const auto lab2 = argmax_rows(Z2.value());
    std::vector<int> nonempty;
    for (std::size_t k = 0; k < K; ++k)
      if (std::find(lab1.begin(), lab1.end(), static_cast<int>(k)) != lab1.end()) nonempty.push_back(static_cast<int>(k));
    std::vector<int> groups1, groups2;
    for (std::size_t i : rng.sample_without_replacement(nonempty.size(), config_.c)) groups1.push_back(nonempty[i]);
    const Tensor& pc = Pc.value();
    for (int k : groups1) {
      std::vector<int> order(K);
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return pc(static_cast<std::size_t>(k), static_cast<std::size_t>(a)) >
               pc(static_cast<std::size_t>(k), static_cast<std::size_t>(b));
      });
      for (std::size_t j = 0; j < std::min(config_.c, K); ++j)
        if (std::find(groups2.begin(), groups2.end(), order[j]) == groups2.end()) groups2.push_back(order[j]);
    }
    const auto b1 = pick_nodes(lab1, groups1, config_.batch_size, rng);
    const auto b2 = pick_nodes(lab2, groups2, config_.batch_size, rng);

    Var Xb1 = ops::gather_rows(X1, std::vector<std::size_t>(b1.begin(), b1.end()));
    Var Xb2 = ops::gather_rows(X2, std::vector<std::size_t>(b2.begin(), b2.end()));
    Var P = alignment_scores(tape, Xb1, Xb2, head_);
    Var node = alignment_loss(tape, Xb1, Xb2, P, head_, config_.entropy_weight);
    rec.node_align = node.item();
    total = ops::add(total, ops::scale(node, config_.align_weight));

    Var t1, t2;
    rec.g1 = model_.joint_loss(tape, v1_, b1, config_.weights, config_.negatives, rng, false, t1);
    rec.g2 = model_.joint_loss(tape, v2_, b2, config_.weights, config_.negatives, rng, false, t2);
    total = ops::add(total, ops::add(t1, t2));

    if (!labels_.empty() && config_.label_weight != 0.0) {
      // Logistic classification of labeled pairs against random G2 partners.
      std::vector<std::size_t> rows1, rows2, neg1, neg2;
      for (std::size_t i : rng.sample_without_replacement(labels_.size(), config_.batch_size)) {
        const auto [a, b] = labels_[i];
        rows1.push_back(a);
        rows2.push_back(b);
        for (std::size_t s = 0; s < config_.negatives && v2_.num_nodes() > 1; ++s) {
          auto other = static_cast<std::size_t>(rng.below(v2_.num_nodes() - 1));
          if (other >= b) ++other;
          neg1.push_back(a);
          neg2.push_back(other);
        }
      }
      auto scores = [&](const std::vector<std::size_t>& r1, const std::vector<std::size_t>& r2) {
        Var a = head_.l1(tape, ops::gather_rows(X1, r1));
        Var b = head_.l2(tape, ops::gather_rows(X2, r2));
        return ops::scale(ops::cosine_rowwise(a, b), head_.alpha);
      };
      Var pos = ops::sum(ops::log_eps(ops::sigmoid(scores(rows1, rows2))));
      Var lab = ops::neg(pos);
      if (!neg1.empty()) lab = ops::sub(lab, ops::sum(ops::log_eps(ops::sigmoid(ops::neg(scores(neg1, neg2))))));
      lab = ops::scale(lab, 1.0 / static_cast<double>(rows1.size() + neg1.size()));
      rec.labels = lab.item();
      total = ops::add(total, ops::scale(lab, config_.label_weight));
    }
  }

  rec.total = total.item();
  if (!std::isfinite(rec.total)) throw NumericalError("align: non-finite loss at step " + std::to_string(step_));
  tape.backward(total);
  adam_.step(store_);
  ++step_;
  return rec;
}

void AlignmentTrainer::run(const std::function<void(const AlignmentStep&)>& on_step) {
  while (step_ < total_steps()) {
    const AlignmentStep r = step();
    if (on_step) on_step(r);
  }
}

Tensor project(const NsbmModel& model, const GraphView& view, const Linear& l) {
  Tape tape;
  return l(tape, model.embed(tape, view, all_nodes(view.num_nodes()))).value();
}

// ------------------------------------------------------------- matching ---

namespace {

double sq_dist(const Tensor& A, std::size_t i, const Tensor& B, std::size_t j) {
  double s = 0.0;
  for (std::size_t c = 0; c < A.cols(); ++c) {
    const double d = A(i, c) - B(j, c);
    s += d * d;
  }
  return s;
}

struct Candidate {
  double d2;
  NodeId id;
  bool operator<(const Candidate& o) const { return d2 < o.d2 || (d2 == o.d2 && id < o.id); }
};

class KdTree {
 public:
  explicit KdTree(const Tensor& pts) : pts_(pts) {
    idx_.resize(pts.rows());
    std::iota(idx_.begin(), idx_.end(), NodeId{0});
    if (!idx_.empty()) root_ = build(0, idx_.size());
  }

  std::vector<Candidate> query(const Tensor& Q, std::size_t row, std::size_t k) const {
    std::vector<Candidate> heap;  // max-heap under Candidate ordering
    if (root_ >= 0) search(root_, Q, row, k, heap);
    std::sort_heap(heap.begin(), heap.end());
    return heap;
  }

 private:
  struct Node {
    std::size_t begin, end;  // leaf range into idx_
    std::size_t dim = 0;
    double split = 0.0;
    int left = -1, right = -1;
  };
  static constexpr std::size_t kLeaf = 8;

  int build(std::size_t begin, std::size_t end) {
    Node node{begin, end};
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back(node);
    if (end - begin <= kLeaf) return id;
    std::size_t best_dim = 0;
    double best_spread = -1.0;
    for (std::size_t c = 0; c < pts_.cols(); ++c) {
      double lo = INFINITY, hi = -INFINITY;
      for (std::size_t i = begin; i < end; ++i) {
        lo = std::min(lo, pts_(idx_[i], c));
        hi = std::max(hi, pts_(idx_[i], c));
      }
      if (hi - lo > best_spread) best_spread = hi - lo, best_dim = c;
    }
    if (best_spread <= 0.0) return id;
    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(idx_.begin() + static_cast<long>(begin), idx_.begin() + static_cast<long>(mid),
                     idx_.begin() + static_cast<long>(end),
                     [&](NodeId a, NodeId b) { return pts_(a, best_dim) < pts_(b, best_dim); });
    nodes_[static_cast<std::size_t>(id)].dim = best_dim;
    nodes_[static_cast<std::size_t>(id)].split = pts_(idx_[mid], best_dim);
    const int l = build(begin, mid);
    const int r = build(mid, end);
    nodes_[static_cast<std::size_t>(id)].left = l;
    nodes_[static_cast<std::size_t>(id)].right = r;
    return id;
  }

  void offer(std::vector<Candidate>& heap, std::size_t k, Candidate c) const {
    if (heap.size() < k) {
      heap.push_back(c);
      std::push_heap(heap.begin(), heap.end());
    } else if (c < heap.front()) {
      std::pop_heap(heap.begin(), heap.end());
      heap.back() = c;
      std::push_heap(heap.begin(), heap.end());
    }
  }

  void search(int id, const Tensor& Q, std::size_t row, std::size_t k, std::vector<Candidate>& heap) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.left < 0) {
      for (std::size_t i = n.begin; i < n.end; ++i) offer(heap, k, {sq_dist(Q, row, pts_, idx_[i]), idx_[i]});
      return;
    }
    // Points equal to the split value can sit on either side, so both
    // sides stay candidates until the plane distance exceeds the worst kept.
    const double diff = Q(row, n.dim) - n.split;
    const int near = diff < 0 ? n.left : n.right;
    const int far = diff < 0 ? n.right : n.left;
    search(near, Q, row, k, heap);
    if (heap.size() < k || diff * diff <= heap.front().d2) search(far, Q, row, k, heap);
  }

  const Tensor& pts_;
  std::vector<NodeId> idx_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

}  // namespace

Matching match_nodes(const Tensor& P1, const Tensor& P2, std::size_t k, SearchMethod method) {
  if (P1.cols() != P2.cols()) {
    throw ShapeError("match_nodes: projected widths differ (" + P1.shape_string() + " vs " + P2.shape_string() + ")");
  }
  k = std::min(k, P2.rows());
  Matching out(P1.rows());
  if (method == SearchMethod::kd_tree) {
    const KdTree tree(P2);
    for (std::size_t i = 0; i < P1.rows(); ++i)
      for (const auto& c : tree.query(P1, i, k)) out[i].push_back({c.id, std::sqrt(c.d2)});
  } else {
    std::vector<Candidate> all(P2.rows());
    for (std::size_t i = 0; i < P1.rows(); ++i) {
      for (NodeId j = 0; j < P2.rows(); ++j) all[j] = {sq_dist(P1, i, P2, j), j};
      std::partial_sort(all.begin(), all.begin() + static_cast<long>(k), all.end());
      for (std::size_t t = 0; t < k; ++t) out[i].push_back({all[t].id, std::sqrt(all[t].d2)});
    }
  }
  return out;
}

std::vector<NodeId> top1(const Matching& m) {
  std::vector<NodeId> out(m.size(), 0);
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m[i].empty()) throw ConfigError("top1: row " + std::to_string(i) + " has no candidates");
    out[i] = m[i].front().node;
  }
  return out;
}

// ------------------------------------------------------------------- io ---

namespace {

std::unordered_map<std::string, NodeId> id_index(const Graph& g) {
  std::unordered_map<std::string, NodeId> m;
  for (NodeId v = 0; v < g.num_nodes(); ++v) m.emplace(g.id_of(v), v);
  return m;
}

}  // namespace

void save_matching(const Matching& m, const Graph& g1, const Graph& g2, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("save_matching: cannot open " + path);
  out << "# g1_node\tg2_node\tdistance\n";
  char buf[32];
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m[i].empty()) continue;
    std::snprintf(buf, sizeof buf, "%.17g", m[i].front().distance);
    out << g1.id_of(static_cast<NodeId>(i)) << '\t' << g2.id_of(m[i].front().node) << '\t' << buf << '\n';
  }
}

std::vector<std::pair<NodeId, NodeId>> load_alignment_truth(const std::string& path, const Graph& g1,
                                                            const Graph& g2) {
  std::ifstream in(path);
  if (!in) throw Error("load_alignment_truth: cannot open " + path);
  const auto i1 = id_index(g1), i2 = id_index(g2);
  std::vector<std::pair<NodeId, NodeId>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string a, b;
    if (!(ls >> a >> b)) throw ParseError(path + ":" + std::to_string(lineno) + ": expected two node ids");
    const auto ia = i1.find(a), ib = i2.find(b);
    if (ia == i1.end() || ib == i2.end()) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": unknown node id '" + (ia == i1.end() ? a : b) + "'");
    }
    out.emplace_back(ia->second, ib->second);
  }
  return out;
}

void save_alignment_truth(const std::vector<std::pair<NodeId, NodeId>>& truth, const Graph& g1, const Graph& g2,
                          const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("save_alignment_truth: cannot open " + path);
  out << "# g1_node\tg2_node\n";
  for (const auto& [a, b] : truth) out << g1.id_of(a) << '\t' << g2.id_of(b) << '\n';
}

}  // namespace nsbm
