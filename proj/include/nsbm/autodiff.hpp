#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "nsbm/tensor.hpp"

namespace nsbm {

/// Guard added inside every logarithm taken by the loss code: ln(x + kLogEps).
inline constexpr double kLogEps = 1e-12;

/// A named learnable array with its accumulated gradient.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool requires_grad = true;

  void zero_grad() { grad = Tensor(value.rows(), value.cols()); }
};

/// Insertion-ordered collection of parameters. Addresses are stable.
class ParameterStore {
 public:
  Parameter& add(std::string name, Tensor init, bool requires_grad = true);
  Parameter& get(std::string_view name);
  const Parameter& get(std::string_view name) const;
  bool contains(std::string_view name) const;

  std::size_t size() const noexcept { return params_.size(); }
  /// Total number of scalar entries.
  std::size_t scalar_count() const;
  void zero_grad();

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.cbegin(); }
  auto end() const { return params_.cend(); }

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

class Tape;

/// Handle to a value recorded on a Tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  double item() const { return value().item(); }
  bool valid() const noexcept { return tape_ != nullptr; }
  Tape* tape() const noexcept { return tape_; }
  std::size_t id() const noexcept { return id_; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode recording of one forward evaluation. Single use: build the
/// forward graph, call backward() once on a scalar, then discard.
class Tape {
 public:
  /// Called during backward with the node's own value and the gradient
  /// flowing into it.
  using Backward =
      std::function<void(Tape&, const Tensor& out_value, const Tensor& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// Leaf bound to a parameter; repeated calls return the same node.
  Var param(Parameter& p);

  /// Record an operation result. The backward closure is kept only if some
  /// input needs a gradient.
  Var record(Tensor value, std::span<const Var> inputs, Backward backward, std::string_view op);

  /// Seeds d(root)/d(root) = 1 and propagates to every reachable node, then
  /// adds leaf gradients into their parameters' grad.
  void backward(Var root);

  const Tensor& value(const Var& v) const;
  bool needs_grad(const Var& v) const;
  /// Gradient buffer of an input, allocated on first use. Only valid for
  /// inputs that need a gradient.
  Tensor& grad(const Var& v);
  std::size_t node_count() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    Backward backward;
    Parameter* param = nullptr;
    bool needs_grad = false;
    std::string_view op;
  };
  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> param_nodes_;
  bool done_ = false;
};

/// Builds the loss on a fresh tape, zeroes parameter gradients, back-propagates
/// and returns the loss value.
double evaluate_with_gradients(const std::function<Var(Tape&)>& build, ParameterStore& params);

/// Forward-only evaluation (no gradients touched).
double evaluate(const std::function<Var(Tape&)>& build);

/// Segment layout shared by the segment ops: segment s spans rows
/// [offsets[s], offsets[s+1]). Empty segments are allowed.
using Offsets = std::vector<std::size_t>;

namespace ops {

Var matmul(Var a, Var b);
/// a * b^T
Var matmul_nt(Var a, Var b);
Var transpose(Var a);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
/// a + row broadcast over rows; row is 1 x cols(a).
Var add_row(Var a, Var row);
/// Scales row i of a by col(i); col is rows(a) x 1.
Var mul_col(Var a, Var col);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var neg(Var a);

/// Natural log; throws NumericalError on any entry <= 0.
Var log(Var a);
/// ln(a + kLogEps), the guarded log used by all losses.
Var log_eps(Var a);
Var exp(Var a);
Var tanh(Var a);
Var sigmoid(Var a);
Var square(Var a);
/// Entries below threshold become 0; others pass through.
Var clip_below(Var a, double threshold);

/// Softmax across each row.
Var softmax_rows(Var a);

Var sum(Var a);
Var mean(Var a);
/// rows x 1: sum over columns of each row.
Var sum_rows(Var a);
/// 1 x cols: sum over rows of each column.
Var sum_cols(Var a);
/// Like sum / sum_rows but adds entries in ascending order, so the result is
/// bit-identical under any reordering of the summed entries.
Var sum_ordered(Var a);
Var sum_rows_ordered(Var a);

/// rows x 1 Euclidean row norms.
Var row_norms(Var a);
/// Rows scaled to unit norm; zero rows stay zero.
Var normalize_rows(Var a);
/// rows(a) x rows(b) cosine similarities (0 where either row is zero).
Var cosine_pairwise(Var a, Var b);
/// rows x 1 cosine between matching rows of a and b.
Var cosine_rowwise(Var a, Var b);

Var gather_rows(Var a, std::span<const std::size_t> rows);
/// Selected entries a(rows[i], cols[i]) as an n x 1 column.
Var gather_elements(Var a, std::span<const std::size_t> rows, std::span<const std::size_t> cols);
Var concat_cols(Var a, Var b);
Var slice_cols(Var a, std::size_t begin, std::size_t end);

/// Softmax of an n x 1 score column within each segment.
Var segment_softmax(Var scores, const Offsets& offsets);
/// Per segment sum_t w(t) * h.row(t); output segments x cols(h).
Var segment_weighted_sum(Var h, Var weights, const Offsets& offsets);
/// Single-head scaled dot-product attention restricted to each segment.
Var segment_attention(Var q, Var k, Var v, const Offsets& offsets);

}  // namespace ops

/// Affine layer x W + b stored as "<prefix>.W" (in x out) and "<prefix>.b" (1 x out).
struct Linear {
  Parameter* weight = nullptr;
  Parameter* bias = nullptr;

  std::size_t in_dim() const { return weight->value.rows(); }
  std::size_t out_dim() const { return weight->value.cols(); }
  Var operator()(Tape& tape, Var x) const;
};

class Rng;
/// Registers a linear layer with uniform(-1/sqrt(in), 1/sqrt(in)) weights and zero bias.
Linear make_linear(ParameterStore& store, const std::string& prefix, std::size_t in,
                   std::size_t out, Rng& rng, bool bias = true);
/// Looks up an already registered layer.
Linear find_linear(ParameterStore& store, const std::string& prefix);

}  // namespace nsbm
