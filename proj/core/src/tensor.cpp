#include "coreda/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>

#include "coreda/errors.hpp"

namespace coreda {

namespace detail {

namespace {
std::atomic<std::uint64_t> g_node_counter{0};

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}
}  // namespace

std::shared_ptr<Node> make_node(std::vector<std::size_t> shape, std::vector<double> data,
                                bool grad_enabled) {
  if (shape_numel(shape) != data.size()) {
    throw DimensionError("tensor data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_str(shape));
  }
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->data = std::move(data);
  n->grad_enabled = grad_enabled;
  if (grad_enabled) n->grad.assign(n->data.size(), 0.0);
  n->id = g_node_counter.fetch_add(1, std::memory_order_relaxed);
  return n;
}

}  // namespace detail

std::string shape_str(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

using detail::Node;

std::atomic<std::uint64_t> g_visit_epoch{0};

const std::vector<std::size_t> kEmptyShape{};

Node& req(const std::shared_ptr<Node>& n) {
  if (!n) throw StateError("operation on an undefined tensor");
  return *n;
}

// Output node of an op: grad flows iff any input carries grad. Parents and
// the backward rule are recorded only in that case, so pure evaluation on
// frozen data builds no tape.
Tensor make_op(std::vector<std::size_t> shape, std::vector<double> data,
               std::initializer_list<Tensor> inputs,
               std::function<void(Node&)> backward_fn) {
  bool needs_grad = false;
  for (const auto& t : inputs) needs_grad = needs_grad || t.grad_enabled();
  auto n = detail::make_node(std::move(shape), std::move(data), needs_grad);
  if (needs_grad) {
    n->parents.reserve(inputs.size());
    for (const auto& t : inputs) n->parents.push_back(t.node());
    n->backward_fn = std::move(backward_fn);
  }
  return Tensor(std::move(n));
}

void check_rank(const Tensor& t, std::size_t r, const char* op) {
  if (t.rank() != r) {
    throw DimensionError(std::string(op) + ": expected rank-" + std::to_string(r) +
                         " tensor, got shape " + shape_str(t.shape()));
  }
}

// matmul kernels; all accumulate into c
void mm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
           std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    double* ci = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

// c[m x n] += a[m x k] * b[n x k]^T
void mm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
           std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    double* ci = c + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const double* bj = b + j * k;
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
      ci[j] += acc;
    }
  }
}

// c[k x n] += a[m x k]^T * b[m x n]
void mm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
           std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    const double* bi = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      double* cp = c + p * n;
      for (std::size_t j = 0; j < n; ++j) cp[j] += av * bi[j];
    }
  }
}

}  // namespace

// ---- Tensor ---------------------------------------------------------------

Tensor Tensor::zeros(std::vector<std::size_t> shape, bool grad_enabled) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return Tensor(detail::make_node(std::move(shape), std::vector<double>(n, 0.0), grad_enabled));
}

Tensor Tensor::from_data(std::vector<std::size_t> shape, std::vector<double> data,
                         bool grad_enabled) {
  return Tensor(detail::make_node(std::move(shape), std::move(data), grad_enabled));
}

Tensor Tensor::scalar(double value, bool grad_enabled) {
  return Tensor(detail::make_node({}, {value}, grad_enabled));
}

Tensor Tensor::vector(std::vector<double> values, bool grad_enabled) {
  std::vector<std::size_t> shape{values.size()};
  return Tensor(detail::make_node(std::move(shape), std::move(values), grad_enabled));
}

const std::vector<std::size_t>& Tensor::shape() const {
  if (!n_) return kEmptyShape;
  return n_->shape;
}

std::size_t Tensor::size() const { return n_ ? n_->size() : 0; }

bool Tensor::grad_enabled() const { return n_ && n_->grad_enabled; }

std::span<const double> Tensor::data() const {
  auto& n = req(n_);
  return {n.data.data(), n.data.size()};
}

std::span<double> Tensor::mutable_data() {
  auto& n = req(n_);
  return {n.data.data(), n.data.size()};
}

double Tensor::item() const {
  auto& n = req(n_);
  if (n.size() != 1) {
    throw ContractError("item(): tensor of shape " + shape_str(n.shape) + " is not a scalar");
  }
  return n.data[0];
}

std::span<const double> Tensor::grad() const {
  auto& n = req(n_);
  if (!n.grad_enabled) throw StateError("grad(): tensor does not track gradients");
  return {n.grad.data(), n.grad.size()};
}

std::span<double> Tensor::mutable_grad() {
  auto& n = req(n_);
  if (!n.grad_enabled) throw StateError("grad(): tensor does not track gradients");
  return {n.grad.data(), n.grad.size()};
}

void Tensor::zero_grad() {
  auto& n = req(n_);
  if (n.grad_enabled) std::fill(n.grad.begin(), n.grad.end(), 0.0);
}

// ---- ops --------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_rank(a, 2, "matmul");
  check_rank(b, 2, "matmul");
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  if (b.shape()[0] != k) {
    throw DimensionError("matmul: inner dimensions disagree, " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
  std::vector<double> out(m * n, 0.0);
  mm_nn(a.data().data(), b.data().data(), out.data(), m, k, n);
  return make_op({m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.grad_enabled) mm_nt(self.grad.data(), pb.data.data(), pa.grad.data(), m, n, k);
    if (pb.grad_enabled) mm_tn(pa.data.data(), self.grad.data(), pb.grad.data(), m, k, n);
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("add: shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
  std::vector<double> out(a.size());
  auto da = a.data(), db = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[i] + db[i];
  return make_op(a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (int p = 0; p < 2; ++p) {
      Node& par = *self.parents[p];
      if (!par.grad_enabled) continue;
      for (std::size_t i = 0; i < self.grad.size(); ++i) par.grad[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("sub: shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
  std::vector<double> out(a.size());
  auto da = a.data(), db = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[i] - db[i];
  return make_op(a.shape(), std::move(out), {a, b}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.grad_enabled)
      for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i];
    if (pb.grad_enabled)
      for (std::size_t i = 0; i < self.grad.size(); ++i) pb.grad[i] -= self.grad[i];
  });
}

Tensor scale(const Tensor& a, double c) {
  std::vector<double> out(a.size());
  auto da = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = c * da[i];
  return make_op(a.shape(), std::move(out), {a}, [c](Node& self) {
    Node& pa = *self.parents[0];
    if (!pa.grad_enabled) return;
    for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += c * self.grad[i];
  });
}

Tensor tanh(const Tensor& a) {
  std::vector<double> out(a.size());
  auto da = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(da[i]);
  return make_op(a.shape(), std::move(out), {a}, [](Node& self) {
    Node& pa = *self.parents[0];
    if (!pa.grad_enabled) return;
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const double y = self.data[i];
      pa.grad[i] += (1.0 - y * y) * self.grad[i];
    }
  });
}

Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.data()) acc += v;
  return make_op({}, {acc}, {a}, [](Node& self) {
    Node& pa = *self.parents[0];
    if (!pa.grad_enabled) return;
    const double g = self.grad[0];
    for (auto& v : pa.grad) v += g;
  });
}

Tensor add_rowvec(const Tensor& x, const Tensor& b) {
  check_rank(x, 2, "add_rowvec");
  check_rank(b, 1, "add_rowvec");
  const std::size_t m = x.shape()[0], n = x.shape()[1];
  if (b.shape()[0] != n) {
    throw DimensionError("add_rowvec: row width mismatch " + shape_str(x.shape()) + " vs " +
                         shape_str(b.shape()));
  }
  std::vector<double> out(m * n);
  auto dx = x.data(), db = b.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = dx[i * n + j] + db[j];
  return make_op({m, n}, std::move(out), {x, b}, [m, n](Node& self) {
    Node& px = *self.parents[0];
    Node& pb = *self.parents[1];
    if (px.grad_enabled)
      for (std::size_t i = 0; i < m * n; ++i) px.grad[i] += self.grad[i];
    if (pb.grad_enabled)
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) pb.grad[j] += self.grad[i * n + j];
  });
}

Tensor gap_temporal(const Tensor& x) {
  check_rank(x, 2, "gap_temporal");
  const std::size_t k = x.shape()[0], d = x.shape()[1];
  if (k == 0) throw DimensionError("gap_temporal: empty temporal axis in " + shape_str(x.shape()));
  std::vector<double> out(d, 0.0);
  auto dx = x.data();
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < d; ++j) out[j] += dx[i * d + j];
  const double inv = 1.0 / static_cast<double>(k);
  for (auto& v : out) v *= inv;
  return make_op({d}, std::move(out), {x}, [k, d, inv](Node& self) {
    Node& px = *self.parents[0];
    if (!px.grad_enabled) return;
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < d; ++j) px.grad[i * d + j] += inv * self.grad[j];
  });
}

Tensor concat_vec(const Tensor& a, const Tensor& b) {
  check_rank(a, 1, "concat_vec");
  check_rank(b, 1, "concat_vec");
  const std::size_t d = a.shape()[0];
  if (b.shape()[0] != d) {
    throw DimensionError("concat_vec: length mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
  std::vector<double> out(2 * d);
  auto da = a.data(), db = b.data();
  for (std::size_t i = 0; i < d; ++i) {
    out[i] = da[i];
    out[d + i] = db[i];
  }
  return make_op({2 * d}, std::move(out), {a, b}, [d](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.grad_enabled)
      for (std::size_t i = 0; i < d; ++i) pa.grad[i] += self.grad[i];
    if (pb.grad_enabled)
      for (std::size_t i = 0; i < d; ++i) pb.grad[i] += self.grad[d + i];
  });
}

Tensor mse(const Tensor& pred, const Tensor& target) {
  check_rank(pred, 1, "mse");
  check_rank(target, 1, "mse");
  const std::size_t n = pred.shape()[0];
  if (target.shape()[0] != n) {
    throw DimensionError("mse: length mismatch " + shape_str(pred.shape()) + " vs " +
                         shape_str(target.shape()));
  }
  if (n == 0) throw DimensionError("mse: empty batch");
  auto dp = pred.data(), dt = target.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = dp[i] - dt[i];
    acc += e * e;
  }
  acc /= static_cast<double>(n);
  return make_op({}, {acc}, {pred, target}, [n](Node& self) {
    Node& pp = *self.parents[0];
    Node& pt = *self.parents[1];
    const double s = 2.0 * self.grad[0] / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double e = s * (pp.data[i] - pt.data[i]);
      if (pp.grad_enabled) pp.grad[i] += e;
      if (pt.grad_enabled) pt.grad[i] -= e;
    }
  });
}

Tensor detach(const Tensor& x) {
  auto& n = req(x.node());
  return Tensor(detail::make_node(n.shape, n.data, false));
}

Tensor reshape(const Tensor& x, std::vector<std::size_t> new_shape) {
  std::size_t n = 1;
  for (auto d : new_shape) n *= d;
  if (n != x.size()) {
    throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " +
                         shape_str(new_shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  return make_op(std::move(new_shape), std::move(out), {x}, [](Node& self) {
    Node& px = *self.parents[0];
    if (!px.grad_enabled) return;
    for (std::size_t i = 0; i < self.grad.size(); ++i) px.grad[i] += self.grad[i];
  });
}

Tensor stack(std::span<const Tensor> xs) {
  if (xs.empty()) throw ContractError("stack: no tensors given");
  const auto& s0 = xs[0].shape();
  const std::size_t elem = xs[0].size();
  std::vector<double> out;
  out.reserve(xs.size() * elem);
  bool needs_grad = false;
  for (const auto& t : xs) {
    if (t.shape() != s0) {
      throw DimensionError("stack: shape mismatch " + shape_str(s0) + " vs " +
                           shape_str(t.shape()));
    }
    out.insert(out.end(), t.data().begin(), t.data().end());
    needs_grad = needs_grad || t.grad_enabled();
  }
  std::vector<std::size_t> shape{xs.size()};
  shape.insert(shape.end(), s0.begin(), s0.end());
  auto node = detail::make_node(std::move(shape), std::move(out), needs_grad);
  if (needs_grad) {
    node->parents.reserve(xs.size());
    for (const auto& t : xs) node->parents.push_back(t.node());
    node->backward_fn = [elem](Node& self) {
      for (std::size_t r = 0; r < self.parents.size(); ++r) {
        Node& p = *self.parents[r];
        if (!p.grad_enabled) continue;
        for (std::size_t i = 0; i < elem; ++i) p.grad[i] += self.grad[r * elem + i];
      }
    };
  }
  return Tensor(std::move(node));
}

Tensor custom_op(std::vector<Tensor> inputs, std::vector<std::size_t> shape,
                 std::vector<double> data, std::function<void(detail::Node&)> backward_fn) {
  bool needs_grad = false;
  for (const auto& t : inputs) needs_grad = needs_grad || t.grad_enabled();
  auto n = detail::make_node(std::move(shape), std::move(data), needs_grad);
  if (needs_grad) {
    for (const auto& t : inputs) n->parents.push_back(t.node());
    n->backward_fn = std::move(backward_fn);
  }
  return Tensor(std::move(n));
}

// ---- backward ---------------------------------------------------------------

void backward(const Tensor& root) {
  auto root_node = root.node();
  auto& r = req(root_node);
  if (r.size() != 1) {
    throw ContractError("backward: root must be scalar, got shape " + shape_str(r.shape));
  }
  if (!r.grad_enabled) {
    throw StateError("backward: root does not track gradients (all inputs constant?)");
  }
  if (r.backward_done) {
    throw StateError("backward: already ran on this root; rebuild the graph first");
  }
  r.backward_done = true;

  // Collect the grad-enabled ancestry. Execution follows descending creation
  // id, a topological order that is stable across graph variants sharing a
  // common prefix; with it, zero-weight terms are bitwise no-ops.
  const std::uint64_t epoch = g_visit_epoch.fetch_add(1, std::memory_order_relaxed) + 1;
  std::vector<Node*> order;
  std::vector<Node*> stack_;
  stack_.push_back(&r);
  r.visit_epoch = epoch;
  while (!stack_.empty()) {
    Node* n = stack_.back();
    stack_.pop_back();
    order.push_back(n);
    for (auto& p : n->parents) {
      if (p->grad_enabled && p->visit_epoch != epoch) {
        p->visit_epoch = epoch;
        stack_.push_back(p.get());
      }
    }
  }
  std::sort(order.begin(), order.end(), [](const Node* a, const Node* b) { return a->id > b->id; });

  r.grad[0] = 1.0;
  for (Node* n : order) {
    if (n->backward_fn) n->backward_fn(*n);
  }
}

void zero_grads(std::span<const Tensor> params) {
  for (const auto& p : params) const_cast<Tensor&>(p).zero_grad();
}

}  // namespace coreda
