#include "nsbm/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "nsbm/error.hpp"
#include "nsbm/rng.hpp"
#include "nsbm/simd.hpp"

namespace nsbm {

// ------------------------------------------------------------ parameters ---

Parameter& ParameterStore::add(std::string name, Tensor init, bool requires_grad) {
  if (index_.contains(name)) throw ConfigError("parameter '" + name + "' registered twice");
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->value = std::move(init);
  p->requires_grad = requires_grad;
  p->zero_grad();
  index_.emplace(std::move(name), params_.size());
  params_.push_back(std::move(p));
  return *params_.back();
}

Parameter& ParameterStore::get(std::string_view name) {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw ConfigError("unknown parameter '" + std::string(name) + "'");
  return *params_[it->second];
}

const Parameter& ParameterStore::get(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw ConfigError("unknown parameter '" + std::string(name) + "'");
  return *params_[it->second];
}

bool ParameterStore::contains(std::string_view name) const {
  return index_.contains(std::string(name));
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->value.size();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

// ------------------------------------------------------------------ tape ---

const Tensor& Var::value() const {
  if (tape_ == nullptr) throw Error("use of an empty Var");
  return tape_->value(*this);
}

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, nullptr, false, "constant"});
  return Var(this, nodes_.size() - 1);
}

Var Tape::param(Parameter& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var(this, it->second);
  nodes_.push_back(Node{p.value, {}, {}, &p, p.requires_grad, "param"});
  param_nodes_.emplace(&p, nodes_.size() - 1);
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::span<const Var> inputs, Backward backward,
                 std::string_view op) {
  bool needs = false;
  for (const auto& in : inputs) {
    if (in.tape() != this) throw Error(std::string(op) + ": operand recorded on another tape");
    needs = needs || nodes_[in.id()].needs_grad;
  }
  nodes_.push_back(Node{std::move(value), {}, needs ? std::move(backward) : Backward{}, nullptr,
                        needs, op});
  return Var(this, nodes_.size() - 1);
}

const Tensor& Tape::value(const Var& v) const { return nodes_.at(v.id()).value; }

bool Tape::needs_grad(const Var& v) const { return nodes_.at(v.id()).needs_grad; }

Tensor& Tape::grad(const Var& v) {
  Node& n = nodes_.at(v.id());
  if (n.grad.empty() && !n.value.empty()) n.grad = Tensor(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::backward(Var root) {
  if (done_) throw Error("Tape::backward called twice");
  if (root.tape() != this) throw Error("backward: root recorded on another tape");
  Node& r = nodes_.at(root.id());
  if (r.value.rows() != 1 || r.value.cols() != 1) {
    throw ShapeError("backward: terminal node must be scalar, got " + r.value.shape_string());
  }
  done_ = true;
  if (!r.needs_grad) return;
  r.grad = Tensor::scalar(1.0);
  for (std::size_t id = root.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.needs_grad || n.grad.empty() || !n.backward) continue;
    n.backward(*this, n.value, n.grad);
  }
  for (auto& [param, id] : param_nodes_) {
    Node& n = nodes_[id];
    if (n.grad.empty()) continue;
    auto* p = const_cast<Parameter*>(param);
    if (!p->grad.same_shape(p->value)) p->zero_grad();
    simd::axpy(p->grad.data(), 1.0, n.grad.data(), n.grad.size());
  }
}

double evaluate_with_gradients(const std::function<Var(Tape&)>& build, ParameterStore& params) {
  params.zero_grad();
  Tape tape;
  Var loss = build(tape);
  const double value = loss.item();
  tape.backward(loss);
  return value;
}

double evaluate(const std::function<Var(Tape&)>& build) {
  Tape tape;
  return build(tape).item();
}

// ------------------------------------------------------------------- ops ---

namespace ops {
namespace {

Tape& tape_of(const Var& a) {
  if (!a.valid()) throw Error("operation on an empty Var");
  return *a.tape();
}

void check_same(const Var& a, const Var& b, const char* op) {
  require_same_shape(a.value(), b.value(), op);
}

void add_into(Tensor& dst, const Tensor& src, double s = 1.0) {
  simd::axpy(dst.data(), s, src.data(), src.size());
}

template <class F, class G>
Var unary(Var a, const char* op, F forward, G derivative) {
  Tape& t = tape_of(a);
  const Tensor& av = a.value();
  Tensor out(av.rows(), av.cols());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = forward(av[i]);
  const Var in[] = {a};
  return t.record(std::move(out), in,
                  [a, derivative](Tape& tp, const Tensor& y, const Tensor& g) {
                    const Tensor& x = tp.value(a);
                    Tensor& ga = tp.grad(a);
                    for (std::size_t i = 0; i < x.size(); ++i) ga[i] += g[i] * derivative(x[i], y[i]);
                  },
                  op);
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a);
  Tensor out = nsbm::matmul(a.value(), b.value());
  const Var in[] = {a, b};
  return t.record(std::move(out), in,
                  [a, b](Tape& tp, const Tensor&, const Tensor& g) {
                    if (tp.needs_grad(a)) matmul_nt_acc(g, tp.value(b), tp.grad(a));
                    if (tp.needs_grad(b)) matmul_tn_acc(tp.value(a), g, tp.grad(b));
                  },
                  "matmul");
}

Var matmul_nt(Var a, Var b) {
  Tape& t = tape_of(a);
  Tensor out = nsbm::matmul_nt(a.value(), b.value());
  const Var in[] = {a, b};
  return t.record(std::move(out), in,
                  [a, b](Tape& tp, const Tensor&, const Tensor& g) {
                    if (tp.needs_grad(a)) matmul_acc(g, tp.value(b), tp.grad(a));
                    if (tp.needs_grad(b)) matmul_tn_acc(g, tp.value(a), tp.grad(b));
                  },
                  "matmul_nt");
}

Var transpose(Var a) {
  Tape& t = tape_of(a);
  const Var in[] = {a};
  return t.record(a.value().transposed(), in,
                  [a](Tape& tp, const Tensor&, const Tensor& g) {
                    Tensor& ga = tp.grad(a);
                    for (std::size_t r = 0; r < g.rows(); ++r)
                      for (std::size_t c = 0; c < g.cols(); ++c) ga(c, r) += g(r, c);
                  },
                  "transpose");
}

Var add(Var a, Var b) {
  check_same(a, b, "add");
  Tape& t = tape_of(a);
  Tensor out = a.value();
  add_into(out, b.value());
  const Var in[] = {a, b};
  return t.record(std::move(out), in,
                  [a, b](Tape& tp, const Tensor&, const Tensor& g) {
                    if (tp.needs_grad(a)) add_into(tp.grad(a), g);
                    if (tp.needs_grad(b)) add_into(tp.grad(b), g);
                  },
                  "add");
}

Var sub(Var a, Var b) {
  check_same(a, b, "sub");
  Tape& t = tape_of(a);
  Tensor out = a.value();
  add_into(out, b.value(), -1.0);
  const Var in[] = {a, b};
  return t.record(std::move(out), in,
                  [a, b](Tape& tp, const Tensor&, const Tensor& g) {
                    if (tp.needs_grad(a)) add_into(tp.grad(a), g);
                    if (tp.needs_grad(b)) add_into(tp.grad(b), g, -1.0);
                  },
                  "sub");
}

Var mul(Var a, Var b) {
  check_same(a, b, "mul");
  Tape& t = tape_of(a);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor out(av.rows(), av.cols());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * bv[i];
  const Var in[] = {a, b};
  return t.record(std::move(out), in,
                  [a, b](Tape& tp, const Tensor&, const Tensor& g) {
                    const Tensor& x = tp.value(a);
                    const Tensor& y = tp.value(b);
                    if (tp.needs_grad(a)) {
                      Tensor& ga = tp.grad(a);
                      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i];
                    }
                    if (tp.needs_grad(b)) {
                      Tensor& gb = tp.grad(b);
                      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * x[i];
                    }
                  },
                  "mul");
}

Var add_row(Var a, Var row) {
  const Tensor& av = a.value();
  const Tensor& rv = row.value();
  if (rv.rows() != 1 || rv.cols() != av.cols()) {
    throw ShapeError("add_row: shape mismatch " + av.shape_string() + " vs " + rv.shape_string());
  }
  Tape& t = tape_of(a);
  Tensor out = av;
  for (std::size_t r = 0; r < out.rows(); ++r) simd::axpy(out.row(r).data(), 1.0, rv.data(), rv.cols());
  const Var in[] = {a, row};
  return t.record(std::move(out), in,
                  [a, row](Tape& tp, const Tensor&, const Tensor& g) {
                    if (tp.needs_grad(a)) add_into(tp.grad(a), g);
                    if (tp.needs_grad(row)) {
                      Tensor& gr = tp.grad(row);
                      for (std::size_t r = 0; r < g.rows(); ++r)
                        simd::axpy(gr.data(), 1.0, g.row(r).data(), g.cols());
                    }
                  },
                  "add_row");
}

Var mul_col(Var a, Var col) {
  const Tensor& av = a.value();
  const Tensor& cv = col.value();
  if (cv.cols() != 1 || cv.rows() != av.rows()) {
    throw ShapeError("mul_col: shape mismatch " + av.shape_string() + " vs " + cv.shape_string());
  }
  Tape& t = tape_of(a);
  Tensor out = av;
  for (std::size_t r = 0; r < out.rows(); ++r) simd::scale(out.row(r).data(), cv[r], out.cols());
  const Var in[] = {a, col};
  return t.record(std::move(out), in,
                  [a, col](Tape& tp, const Tensor&, const Tensor& g) {
                    const Tensor& x = tp.value(a);
                    const Tensor& c = tp.value(col);
                    if (tp.needs_grad(a)) {
                      Tensor& ga = tp.grad(a);
                      for (std::size_t r = 0; r < g.rows(); ++r)
                        simd::axpy(ga.row(r).data(), c[r], g.row(r).data(), g.cols());
                    }
                    if (tp.needs_grad(col)) {
                      Tensor& gc = tp.grad(col);
                      for (std::size_t r = 0; r < g.rows(); ++r)
                        gc[r] += simd::dot(g.row(r).data(), x.row(r).data(), g.cols());
                    }
                  },
                  "mul_col");
}

Var scale(Var a, double s) {
  return unary(a, "scale", [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Var add_scalar(Var a, double s) {
  return unary(a, "add_scalar", [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Var neg(Var a) { return scale(a, -1.0); }

Var log(Var a) {
  const Tensor& av = a.value();
  for (std::size_t i = 0; i < av.size(); ++i) {
    if (!(av[i] > 0.0)) {
      throw NumericalError("log: non-positive input " + std::to_string(av[i]) + " at entry " +
                           std::to_string(i) + " of " + av.shape_string() +
                           " (guard the argument with an epsilon)");
    }
  }
  return unary(a, "log", [](double x) { return std::log(x); },
               [](double x, double) { return 1.0 / x; });
}

Var log_eps(Var a) { return log(add_scalar(a, kLogEps)); }

Var exp(Var a) {
  return unary(a, "exp", [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var tanh(Var a) {
  return unary(a, "tanh", [](double x) { return std::tanh(x); },
               [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(Var a) {
  return unary(
      a, "sigmoid",
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var square(Var a) {
  return unary(a, "square", [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var clip_below(Var a, double threshold) {
  return unary(a, "clip_below", [threshold](double x) { return x >= threshold ? x : 0.0; },
               [threshold](double x, double) { return x >= threshold ? 1.0 : 0.0; });
}

Var softmax_rows(Var a) {
  Tape& t = tape_of(a);
  const Tensor& av = a.value();
  Tensor out(av.rows(), av.cols());
  for (std::size_t r = 0; r < av.rows(); ++r) {
    auto x = av.row(r);
    auto y = out.row(r);
    const double mx = *std::max_element(x.begin(), x.end());
    double z = 0.0;
    for (std::size_t c = 0; c < x.size(); ++c) {
      y[c] = std::exp(x[c] - mx);
      z += y[c];
    }
    for (auto& v : y) v /= z;
  }
  const Var in[] = {a};
  return t.record(std::move(out), in,
                  [a](Tape& tp, const Tensor& y, const Tensor& g) {
                    Tensor& ga = tp.grad(a);
                    for (std::size_t r = 0; r < y.rows(); ++r) {
                      const double dotp = simd::dot(y.row(r).data(), g.row(r).data(), y.cols());
                      for (std::size_t c = 0; c < y.cols(); ++c) ga(r, c) += y(r, c) * (g(r, c) - dotp);
                    }
                  },
                  "softmax_rows");
}

Var sum(Var a) {
  Tape& t = tape_of(a);
  const Tensor& av = a.value();
  const Var in[] = {a};
  return t.record(Tensor::scalar(simd::sum(av.data(), av.size())), in,
                  [a](Tape& tp, const Tensor&, const Tensor& g) {
                    Tensor& ga = tp.grad(a);
                    for (auto& v : ga.values()) v += g[0];
                  },
                  "sum");
}

Var mean(Var a) {
  const std::size_t n = a.value().size();
  if (n == 0) throw ShapeError("mean: empty operand");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var sum_rows(Var a) {
  Tape& t = tape_of(a);
  const Tensor& av = a.value();
  Tensor out(av.rows(), 1);
  for (std::size_t r = 0; r < av.rows(); ++r) out[r] = simd::sum(av.row(r).data(), av.cols());
  const Var in[] = {a};
  return t.record(std::move(out), in,
                  [a](Tape& tp, const Tensor&, const Tensor& g) {
                    Tensor& ga = tp.grad(a);
                    for (std::size_t r = 0; r < ga.rows(); ++r)
                      for (auto& v : ga.row(r)) v += g[r];
                  },
                  "sum_rows");
}

namespace {

double ascending_sum(std::span<const double> xs, std::vector<double>& scratch) {
  scratch.assign(xs.begin(), xs.end());
  std::sort(scratch.begin(), scratch.end());
  double s = 0.0;
  for (double x : scratch) s += x;
  return s;
}

}  // namespace

Var sum_ordered(Var a) {
  Tape& t = tape_of(a);
  std::vector<double> scratch;
  const double s = ascending_sum(a.value().values(), scratch);
  const Var in[] = {a};
  return t.record(Tensor::scalar(s), in,
                  [a](Tape& tp, const Tensor&, const Tensor& g) {
                    for (auto& v : tp.grad(a).values()) v += g[0];
                  },
                  "sum_ordered");
}

Var sum_rows_ordered(Var a) {
  Tape& t = tape_of(a);
  const Tensor& av = a.value();
  Tensor out(av.rows(), 1);
  std::vector<double> scratch;
  for (std::size_t r = 0; r < av.rows(); ++r) out[r] = ascending_sum(av.row(r), scratch);
  const Var in[] = {a};
  return t.record(std::move(out), in,
                  [a](Tape& tp, const Tensor&, const Tensor& g) {
                    Tensor& ga = tp.grad(a);
                    for (std::size_t r = 0; r < ga.rows(); ++r)
                      for (auto& v : ga.row(r)) v += g[r];
                  },
                  "sum_rows_ordered");
}

Var sum_cols(Var a) {
  Tape& t = tape_of(a);
  const Tensor& av = a.value();
  Tensor out(1, av.cols());
  for (std::size_t r = 0; r < av.rows(); ++r) simd::axpy(out.data(), 1.0, av.row(r).data(), av.cols());
  const Var in[] = {a};
  return t.record(std::move(out), in,
                  [a](Tape& tp, const Tensor&, const Tensor& g) {
                    Tensor& ga = tp.grad(a);
                    for (std::size_t r = 0; r < ga.rows(); ++r)
                      simd::axpy(ga.row(r).data(), 1.0, g.data(), g.cols());
                  },
                  "sum_cols");
}

Var row_norms(Var a) {
  Tape& t = tape_of(a);
  const Tensor& av = a.value();
  Tensor out(av.rows(), 1);
  for (std::size_t r = 0; r < av.rows(); ++r) {
    out[r] = std::sqrt(simd::dot(av.row(r).data(), av.row(r).data(), av.cols()));
  }
  const Var in[] = {a};
  return t.record(std::move(out), in,
                  [a](Tape& tp, const Tensor& y, const Tensor& g) {
                    const Tensor& x = tp.value(a);
                    Tensor& ga = tp.grad(a);
                    for (std::size_t r = 0; r < x.rows(); ++r) {
                      if (y[r] == 0.0) continue;
                      simd::axpy(ga.row(r).data(), g[r] / y[r], x.row(r).data(), x.cols());
                    }
                  },
                  "row_norms");
}

Var normalize_rows(Var a) {
  Tape& t = tape_of(a);
  const Tensor& av = a.value();
  Tensor out = av;
  for (std::size_t r = 0; r < av.rows(); ++r) {
    const double n = std::sqrt(simd::dot(av.row(r).data(), av.row(r).data(), av.cols()));
    if (n > 0.0) simd::scale(out.row(r).data(), 1.0 / n, av.cols());
  }
  const Var in[] = {a};
  return t.record(std::move(out), in,
                  [a](Tape& tp, const Tensor& y, const Tensor& g) {
                    const Tensor& x = tp.value(a);
                    Tensor& ga = tp.grad(a);
                    const std::size_t d = x.cols();
                    for (std::size_t r = 0; r < x.rows(); ++r) {
                      const double n = std::sqrt(simd::dot(x.row(r).data(), x.row(r).data(), d));
                      if (n == 0.0) continue;
                      const double yg = simd::dot(y.row(r).data(), g.row(r).data(), d);
                      simd::axpy(ga.row(r).data(), 1.0 / n, g.row(r).data(), d);
                      simd::axpy(ga.row(r).data(), -yg / n, y.row(r).data(), d);
                    }
                  },
                  "normalize_rows");
}

Var cosine_pairwise(Var a, Var b) { return matmul_nt(normalize_rows(a), normalize_rows(b)); }

Var cosine_rowwise(Var a, Var b) {
  check_same(a, b, "cosine_rowwise");
  return sum_rows(mul(normalize_rows(a), normalize_rows(b)));
}

Var gather_rows(Var a, std::span<const std::size_t> rows) {
  Tape& t = tape_of(a);
  const Tensor& av = a.value();
  const std::size_t d = av.cols();
  Tensor out(rows.size(), d);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= av.rows()) {
      throw ShapeError("gather_rows: index " + std::to_string(rows[i]) + " out of range for " +
                       av.shape_string());
    }
    std::copy_n(av.row(rows[i]).data(), d, out.row(i).data());
  }
  const Var in[] = {a};
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return t.record(std::move(out), in,
                  [a, idx = std::move(idx)](Tape& tp, const Tensor&, const Tensor& g) {
                    Tensor& ga = tp.grad(a);
                    for (std::size_t i = 0; i < idx.size(); ++i)
                      simd::axpy(ga.row(idx[i]).data(), 1.0, g.row(i).data(), g.cols());
                  },
                  "gather_rows");
}

Var gather_elements(Var a, std::span<const std::size_t> rows, std::span<const std::size_t> cols) {
  if (rows.size() != cols.size()) throw ShapeError("gather_elements: index lists differ in length");
  Tape& t = tape_of(a);
  const Tensor& av = a.value();
  Tensor out(rows.size(), 1);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= av.rows() || cols[i] >= av.cols()) {
      throw ShapeError("gather_elements: index out of range for " + av.shape_string());
    }
    out[i] = av(rows[i], cols[i]);
  }
  const Var in[] = {a};
  std::vector<std::size_t> ri(rows.begin(), rows.end());
  std::vector<std::size_t> ci(cols.begin(), cols.end());
  return t.record(std::move(out), in,
                  [a, ri = std::move(ri), ci = std::move(ci)](Tape& tp, const Tensor&,
                                                              const Tensor& g) {
                    Tensor& ga = tp.grad(a);
                    for (std::size_t i = 0; i < ri.size(); ++i) ga(ri[i], ci[i]) += g[i];
                  },
                  "gather_elements");
}

Var concat_cols(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rows() != bv.rows()) {
    throw ShapeError("concat_cols: shape mismatch " + av.shape_string() + " vs " + bv.shape_string());
  }
  Tape& t = tape_of(a);
  Tensor out(av.rows(), av.cols() + bv.cols());
  for (std::size_t r = 0; r < av.rows(); ++r) {
    std::copy_n(av.row(r).data(), av.cols(), out.row(r).data());
    std::copy_n(bv.row(r).data(), bv.cols(), out.row(r).data() + av.cols());
  }
  const Var in[] = {a, b};
  const std::size_t split = av.cols();
  return t.record(std::move(out), in,
                  [a, b, split](Tape& tp, const Tensor&, const Tensor& g) {
                    const std::size_t rest = g.cols() - split;
                    if (tp.needs_grad(a)) {
                      Tensor& ga = tp.grad(a);
                      for (std::size_t r = 0; r < g.rows(); ++r)
                        simd::axpy(ga.row(r).data(), 1.0, g.row(r).data(), split);
                    }
                    if (tp.needs_grad(b)) {
                      Tensor& gb = tp.grad(b);
                      for (std::size_t r = 0; r < g.rows(); ++r)
                        simd::axpy(gb.row(r).data(), 1.0, g.row(r).data() + split, rest);
                    }
                  },
                  "concat_cols");
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  const Tensor& av = a.value();
  if (begin > end || end > av.cols()) {
    throw ShapeError("slice_cols: range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") out of " + av.shape_string());
  }
  Tape& t = tape_of(a);
  const std::size_t w = end - begin;
  Tensor out(av.rows(), w);
  for (std::size_t r = 0; r < av.rows(); ++r) std::copy_n(av.row(r).data() + begin, w, out.row(r).data());
  const Var in[] = {a};
  return t.record(std::move(out), in,
                  [a, begin, w](Tape& tp, const Tensor&, const Tensor& g) {
                    Tensor& ga = tp.grad(a);
                    for (std::size_t r = 0; r < g.rows(); ++r)
                      simd::axpy(ga.row(r).data() + begin, 1.0, g.row(r).data(), w);
                  },
                  "slice_cols");
}

namespace {

void check_offsets(const Offsets& offsets, std::size_t rows, const char* op) {
  if (offsets.empty() || offsets.front() != 0 || offsets.back() != rows ||
      !std::is_sorted(offsets.begin(), offsets.end())) {
    throw ShapeError(std::string(op) + ": segment offsets do not partition " +
                     std::to_string(rows) + " rows");
  }
}

}  // namespace

Var segment_softmax(Var scores, const Offsets& offsets) {
  const Tensor& sv = scores.value();
  if (sv.cols() != 1) throw ShapeError("segment_softmax: scores must be a column, got " + sv.shape_string());
  check_offsets(offsets, sv.rows(), "segment_softmax");
  Tape& t = tape_of(scores);
  Tensor out(sv.rows(), 1);
  for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
    const std::size_t a = offsets[s], b = offsets[s + 1];
    if (a == b) continue;
    double mx = sv[a];
    for (std::size_t i = a; i < b; ++i) mx = std::max(mx, sv[i]);
    double z = 0.0;
    for (std::size_t i = a; i < b; ++i) z += out[i] = std::exp(sv[i] - mx);
    for (std::size_t i = a; i < b; ++i) out[i] /= z;
  }
  const Var in[] = {scores};
  return t.record(std::move(out), in,
                  [scores, offsets](Tape& tp, const Tensor& y, const Tensor& g) {
                    Tensor& gs = tp.grad(scores);
                    for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
                      const std::size_t a = offsets[s], b = offsets[s + 1];
                      double dotp = 0.0;
                      for (std::size_t i = a; i < b; ++i) dotp += y[i] * g[i];
                      for (std::size_t i = a; i < b; ++i) gs[i] += y[i] * (g[i] - dotp);
                    }
                  },
                  "segment_softmax");
}

Var segment_weighted_sum(Var h, Var weights, const Offsets& offsets) {
  const Tensor& hv = h.value();
  const Tensor& wv = weights.value();
  if (wv.cols() != 1 || wv.rows() != hv.rows()) {
    throw ShapeError("segment_weighted_sum: shape mismatch " + hv.shape_string() + " vs " +
                     wv.shape_string());
  }
  check_offsets(offsets, hv.rows(), "segment_weighted_sum");
  Tape& t = tape_of(h);
  const std::size_t segs = offsets.size() - 1;
  const std::size_t d = hv.cols();
  Tensor out(segs, d);
  for (std::size_t s = 0; s < segs; ++s)
    for (std::size_t i = offsets[s]; i < offsets[s + 1]; ++i)
      simd::axpy(out.row(s).data(), wv[i], hv.row(i).data(), d);
  const Var in[] = {h, weights};
  return t.record(std::move(out), in,
                  [h, weights, offsets](Tape& tp, const Tensor&, const Tensor& g) {
                    const Tensor& x = tp.value(h);
                    const Tensor& w = tp.value(weights);
                    const std::size_t dd = x.cols();
                    const bool gh = tp.needs_grad(h), gw = tp.needs_grad(weights);
                    for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
                      for (std::size_t i = offsets[s]; i < offsets[s + 1]; ++i) {
                        if (gh) simd::axpy(tp.grad(h).row(i).data(), w[i], g.row(s).data(), dd);
                        if (gw) tp.grad(weights)[i] += simd::dot(x.row(i).data(), g.row(s).data(), dd);
                      }
                    }
                  },
                  "segment_weighted_sum");
}

Var segment_attention(Var q, Var k, Var v, const Offsets& offsets) {
  const Tensor& qv = q.value();
  const Tensor& kv = k.value();
  const Tensor& vv = v.value();
  if (!qv.same_shape(kv) || qv.rows() != vv.rows()) {
    throw ShapeError("segment_attention: shape mismatch " + qv.shape_string() + " vs " +
                     kv.shape_string() + " vs " + vv.shape_string());
  }
  check_offsets(offsets, qv.rows(), "segment_attention");
  Tape& t = tape_of(q);
  const std::size_t d = qv.cols();
  const std::size_t dv = vv.cols();
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(d, 1)));
  Tensor out(qv.rows(), dv);
  std::vector<double> p;
  for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
    const std::size_t a = offsets[s], b = offsets[s + 1], len = b - a;
    p.assign(len, 0.0);
    for (std::size_t i = a; i < b; ++i) {
      double mx = -1e300;
      for (std::size_t j = a; j < b; ++j) {
        p[j - a] = inv_sqrt * simd::dot(qv.row(i).data(), kv.row(j).data(), d);
        mx = std::max(mx, p[j - a]);
      }
      double z = 0.0;
      for (auto& x : p) z += x = std::exp(x - mx);
      for (std::size_t j = a; j < b; ++j) simd::axpy(out.row(i).data(), p[j - a] / z, vv.row(j).data(), dv);
    }
  }
  const Var in[] = {q, k, v};
  return t.record(
      std::move(out), in,
      [q, k, v, offsets, inv_sqrt](Tape& tp, const Tensor&, const Tensor& g) {
        const Tensor& Q = tp.value(q);
        const Tensor& K = tp.value(k);
        const Tensor& V = tp.value(v);
        const std::size_t dq = Q.cols(), dvv = V.cols();
        const bool gq = tp.needs_grad(q), gk = tp.needs_grad(k), gv = tp.needs_grad(v);
        std::vector<double> p, gp;
        for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
          const std::size_t a = offsets[s], b = offsets[s + 1], len = b - a;
          p.assign(len, 0.0);
          gp.assign(len, 0.0);
          for (std::size_t i = a; i < b; ++i) {
            double mx = -1e300;
            for (std::size_t j = a; j < b; ++j) {
              p[j - a] = inv_sqrt * simd::dot(Q.row(i).data(), K.row(j).data(), dq);
              mx = std::max(mx, p[j - a]);
            }
            double z = 0.0;
            for (auto& x : p) z += x = std::exp(x - mx);
            for (auto& x : p) x /= z;
            // dL/dP_ij = g_i . v_j ; softmax backward within row i.
            double pg = 0.0;
            for (std::size_t j = a; j < b; ++j) {
              gp[j - a] = simd::dot(g.row(i).data(), V.row(j).data(), dvv);
              pg += p[j - a] * gp[j - a];
              if (gv) simd::axpy(tp.grad(v).row(j).data(), p[j - a], g.row(i).data(), dvv);
            }
            for (std::size_t j = a; j < b; ++j) {
              const double gs = p[j - a] * (gp[j - a] - pg) * inv_sqrt;
              if (gs == 0.0) continue;
              if (gq) simd::axpy(tp.grad(q).row(i).data(), gs, K.row(j).data(), dq);
              if (gk) simd::axpy(tp.grad(k).row(j).data(), gs, Q.row(i).data(), dq);
            }
          }
        }
      },
      "segment_attention");
}

}  // namespace ops

// ---------------------------------------------------------------- linear ---

Var Linear::operator()(Tape& tape, Var x) const {
  Var y = ops::matmul(x, tape.param(*weight));
  if (bias != nullptr) y = ops::add_row(y, tape.param(*bias));
  return y;
}

Linear make_linear(ParameterStore& store, const std::string& prefix, std::size_t in,
                   std::size_t out, Rng& rng, bool bias) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(in, 1)));
  Tensor w(in, out);
  for (auto& v : w.values()) v = rng.uniform(-bound, bound);
  Linear layer;
  layer.weight = &store.add(prefix + ".W", std::move(w));
  if (bias) layer.bias = &store.add(prefix + ".b", Tensor(1, out));
  return layer;
}

Linear find_linear(ParameterStore& store, const std::string& prefix) {
  Linear layer;
  layer.weight = &store.get(prefix + ".W");
  if (store.contains(prefix + ".b")) layer.bias = &store.get(prefix + ".b");
  return layer;
}

}  // namespace nsbm
