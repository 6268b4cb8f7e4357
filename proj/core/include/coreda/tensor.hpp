#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace coreda {

namespace detail {

// One entry on the define-by-run tape. Nodes form a DAG through `parents`;
// `id` is a global creation counter, so ascending id is a topological order
// and backward can run in a canonical sequence independent of graph shape.
struct Node {
  std::vector<std::size_t> shape;
  std::vector<double> data;
  std::vector<double> grad;  // allocated (zeroed) iff grad_enabled
  bool grad_enabled = false;
  bool backward_done = false;
  std::uint64_t id = 0;
  std::uint64_t visit_epoch = 0;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;  // accumulates self.grad into parents

  std::size_t size() const { return data.size(); }
};

std::shared_ptr<Node> make_node(std::vector<std::size_t> shape, std::vector<double> data,
                                bool grad_enabled);

}  // namespace detail

std::string shape_str(const std::vector<std::size_t>& shape);

/// Dense tensor of doubles participating in a reverse-mode tape.
/// Copies are shallow: they alias the same tape node.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<std::size_t> shape, bool grad_enabled = false);
  static Tensor from_data(std::vector<std::size_t> shape, std::vector<double> data,
                          bool grad_enabled = false);
  static Tensor scalar(double value, bool grad_enabled = false);
  static Tensor vector(std::vector<double> values, bool grad_enabled = false);

  bool defined() const { return n_ != nullptr; }
  const std::vector<std::size_t>& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t size() const;
  bool grad_enabled() const;

  std::span<const double> data() const;
  std::span<double> mutable_data();  // in-place edits; meant for leaves between steps
  double item() const;               // size-1 tensors only

  std::span<const double> grad() const;  // throws StateError when grad is absent
  std::span<double> mutable_grad();
  void zero_grad();

  std::shared_ptr<detail::Node> node() const { return n_; }
  explicit Tensor(std::shared_ptr<detail::Node> n) : n_(std::move(n)) {}

 private:
  std::shared_ptr<detail::Node> n_;
};

// ---- differentiable operations ------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor tanh(const Tensor& a);
Tensor sum(const Tensor& a);

// X[m x n] + row vector b[n], broadcast over rows
Tensor add_rowvec(const Tensor& x, const Tensor& b);

// mean over the leading (temporal) axis of X[K x d] -> [d]
Tensor gap_temporal(const Tensor& x);

Tensor concat_vec(const Tensor& a, const Tensor& b);

// (1/B) * sum_i (pred_i - target_i)^2
Tensor mse(const Tensor& pred, const Tensor& target);

// value-identical tensor with the gradient path severed
Tensor detach(const Tensor& x);

Tensor reshape(const Tensor& x, std::vector<std::size_t> new_shape);

// stack n equal-shape tensors along a new leading axis
Tensor stack(std::span<const Tensor> xs);

// Extension hook: a node with caller-supplied forward data and backward rule.
// The backward_fn sees the output node; inputs are reachable via its parents.
Tensor custom_op(std::vector<Tensor> inputs, std::vector<std::size_t> shape,
                 std::vector<double> data, std::function<void(detail::Node&)> backward_fn);

/// Reverse-mode sweep from a scalar root. Populates `grad` on every
/// grad-enabled tensor reachable from the root, accumulating into leaves.
/// Calling it twice on the same root is a StateError.
void backward(const Tensor& root);

void zero_grads(std::span<const Tensor> params);

}  // namespace coreda
