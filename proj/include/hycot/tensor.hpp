#pragma once

// Dense 64-bit tensors with tape-based reverse-mode differentiation.
//
// A Tensor is a shared handle: copies alias the same storage, clone() makes
// a deep copy. Operations are free functions that take the Graph they record
// into. A node is recorded only if the graph is recording and at least one
// input requires a gradient; otherwise the op is a plain forward evaluation,
// which is what inference uses.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace hycot {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor filled(Shape shape, double value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  std::uint64_t id() const;

  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> values() const;
  std::span<double> values_mut() const;
  double item() const;

  bool requires_grad() const;
  void set_requires_grad(bool on);

  bool has_grad() const;
  std::span<const double> grad() const;
  /// Allocates a zero gradient on first use. Const because Tensor is a handle:
  /// backward closures hold const copies and still accumulate into them.
  std::span<double> grad_mut() const;
  void zero_grad();
  void clear_grad();

  Tensor clone() const;

 private:
  struct Impl {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;
    bool requires_grad = false;
    std::uint64_t id = 0;
  };
  std::shared_ptr<Impl> impl_;
};

class Graph {
 public:
  struct Node {
    std::vector<std::uint64_t> inputs;
    std::uint64_t output;
    Tensor output_tensor;
    std::function<void()> backward;
  };

  explicit Graph(bool recording = true) : recording_(recording) {}

  bool recording() const { return recording_; }
  std::span<const Node> nodes() const { return nodes_; }

  /// Registers `out` as produced from `inputs` if any input needs a gradient.
  /// `rule` must read out.grad() and accumulate into the inputs' gradients.
  void record(Tensor& out, std::initializer_list<const Tensor*> inputs,
              std::function<void()> rule);

  /// Seeds d(loss)/d(loss) = 1 and replays the tape in reverse. Intermediate
  /// gradients are reset first, so leaves accumulate across repeated calls.
  void backward(const Tensor& loss);

 private:
  bool recording_;
  std::vector<Node> nodes_;
};

// ---- differentiable operations -------------------------------------------

/// [m x p] * [p x n]
Tensor matmul(Graph& g, const Tensor& a, const Tensor& b);

/// Batched product over the leading axis: [B x m x p] * [B x p x n], or with
/// transpose_b, [B x m x p] * [B x n x p]^T.
Tensor bmm(Graph& g, const Tensor& a, const Tensor& b, bool transpose_b = false);

/// x[... x in] * W[in x out] + bias[out]. `bias` may be undefined.
Tensor linear(Graph& g, const Tensor& x, const Tensor& w, const Tensor& bias);

Tensor add(Graph& g, const Tensor& a, const Tensor& b);
Tensor mul(Graph& g, const Tensor& a, const Tensor& b);
/// x + y where y's shape equals the trailing axes of x.
Tensor add_trailing(Graph& g, const Tensor& x, const Tensor& y);
Tensor scale(Graph& g, const Tensor& x, double factor);

/// Softmax over the last axis, stabilized by row-max subtraction.
Tensor softmax_rows(Graph& g, const Tensor& x);

/// Normalizes the last axis (population variance) then applies gain/bias.
Tensor layer_norm(Graph& g, const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps = 1e-5);

Tensor leaky_relu(Graph& g, const Tensor& x, double slope);
Tensor sigmoid(Graph& g, const Tensor& x);
/// Exact (erf-based) GELU.
Tensor gelu(Graph& g, const Tensor& x);

/// Sum of all elements, shape [1].
Tensor sum(Graph& g, const Tensor& x);
/// Mean of squared differences, shape [1].
Tensor mse(Graph& g, const Tensor& prediction, const Tensor& target);

Tensor reshape(Graph& g, const Tensor& x, Shape shape);
/// Columns [offset, offset + length) of the last axis.
Tensor slice_last(Graph& g, const Tensor& x, std::size_t offset, std::size_t length);
/// [B x n x heads*dh] -> [B*heads x n x dh]
Tensor split_heads(Graph& g, const Tensor& x, std::size_t heads);
/// [B*heads x n x dh] -> [B x n x heads*dh]
Tensor merge_heads(Graph& g, const Tensor& x, std::size_t heads);
/// [B x n x d] -> [B x d], token `index` of every sequence.
Tensor select_token(Graph& g, const Tensor& x, std::size_t index);
/// token[d], x[B x n x d] -> [B x (n+1) x d] with token at position 0.
Tensor prepend_token(Graph& g, const Tensor& token, const Tensor& x);

}  // namespace hycot
