#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace relic {

using Shape = std::vector<std::size_t>;

struct TensorImpl {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until backward first touches it
  bool requires_grad = false;
};

// Value-semantics handle onto shared f64 storage. Copying a Tensor aliases
// the buffer. Ops never mutate their inputs; the only in-place writers are
// the optimizer and the EMA update, which run between tapes.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double v);
  static Tensor from(Shape shape, std::vector<double> value, bool requires_grad = false);
  static Tensor scalar(double v);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t size() const { return impl_->value.size(); }
  // 2-d views: a 1-d tensor of n elements counts as one row of n columns.
  std::size_t rows() const;
  std::size_t cols() const;

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool b) { impl_->requires_grad = b; }

  std::span<double> value() { return impl_->value; }
  std::span<const double> value() const { return impl_->value; }
  double& at(std::size_t r, std::size_t c);
  double at(std::size_t r, std::size_t c) const;

  bool has_grad() const { return !impl_->grad.empty(); }
  // Allocates a zeroed buffer on first access.
  std::span<double> grad();
  std::span<const double> grad_or_empty() const { return impl_->grad; }
  void zero_grad();

  // Value of a single-element tensor.
  double item() const;

  TensorImpl* impl() const { return impl_.get(); }

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<TensorImpl> impl_;
};

// Records one step's compute graph. Ops evaluate eagerly; when an input
// requires grad the op appends a backward closure. backward() replays the
// closures in reverse creation order, which is a valid topological order
// because every input tensor exists before the op that consumes it, so each
// node is visited exactly once.
//
// Single-threaded: a tape must not be shared across threads. Intended use is
// one tape per training step, dropped after backward().
class Tape {
 public:
  // [m,k] x [k,n] -> [m,n]
  Tensor matmul(const Tensor& a, const Tensor& b);
  // [m,k] x [n,k]^T -> [m,n]; saves an explicit transpose for similarity
  // matrices between row-stacked embeddings.
  Tensor matmul_nt(const Tensor& a, const Tensor& b);
  // Same shape, or b a single row broadcast over a's rows (bias add).
  Tensor add(const Tensor& a, const Tensor& b);
  // Elementwise product, same shape.
  Tensor mul(const Tensor& a, const Tensor& b);
  Tensor scale(const Tensor& a, double c);
  Tensor add_scalar(const Tensor& a, double c);
  Tensor relu(const Tensor& a);
  // Row-wise x / ||x||. A vanishing row yields a zero row rather than NaN.
  Tensor l2_normalize(const Tensor& a);
  // Row-wise log softmax via max subtraction.
  Tensor log_softmax(const Tensor& a);
  Tensor gather_rows(const Tensor& a, std::vector<std::size_t> rows);
  Tensor gather_cols(const Tensor& a, std::vector<std::size_t> cols);
  Tensor sum(const Tensor& a);
  Tensor mean(const Tensor& a);
  // Identity on values; blocks gradient flow entirely.
  Tensor stop_gradient(const Tensor& a);

  // loss must be a single-element tensor with finite value (NumericError
  // otherwise). May be called once per tape.
  void backward(const Tensor& loss);

  std::size_t node_count() const { return nodes_.size(); }

 private:
  Tensor record(Tensor out, std::function<void()> back, bool any_input_grad);

  struct Node {
    std::function<void()> back;
  };
  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

}  // namespace relic
