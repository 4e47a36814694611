#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "wdiff/error.hpp"
#include "wdiff/rng.hpp"

namespace wdiff::ad {

using Shape = std::vector<Eigen::Index>;

Eigen::Index numel(const Shape& s);
std::string to_string(const Shape& s);

// Dense row-major tensor of doubles.
struct Tensor {
  Shape shape;
  Eigen::VectorXd data;
  bool requires_grad = false;
  std::optional<Eigen::VectorXd> grad;

  Tensor() = default;
  explicit Tensor(Shape s) : shape(std::move(s)), data(Eigen::VectorXd::Zero(numel(shape))) {}
  Tensor(Shape s, Eigen::VectorXd d);

  Eigen::Index size() const { return data.size(); }
};

class Graph;

// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
class Var {
 public:
  Var() = default;
  Var(Graph* g, int id) : graph_(g), id_(id) {}

  int id() const { return id_; }
  Graph* graph() const { return graph_; }
  const Shape& shape() const;
  const Eigen::VectorXd& value() const;
  Eigen::Index dim(int axis) const;
  bool valid() const { return graph_ != nullptr; }

 private:
  Graph* graph_ = nullptr;
  int id_ = -1;
};

// Define-by-run tape. Every primitive validates shapes, computes its value
// immediately, and records a closure that pushes gradients to its inputs.
// Nodes are stored in creation order, which is a topological order.
class Graph {
 public:
  explicit Graph(bool training = false, std::uint64_t dropout_seed = 0);
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool training() const { return training_; }

  Var constant(const Tensor& t, std::string name = "constant");
  Var constant(Shape shape, Eigen::VectorXd data, std::string name = "constant");
  Var parameter(const Tensor& t, std::string name);
  Var scalar(double v);

  // (..., k) x (k, n) -> (..., n); b must be rank 2.
  Var matmul(Var a, Var b);
  // Batched (B..., m, k) x (B..., k, n) -> (B..., m, n); with transpose_b the
  // second operand is (B..., n, k).
  Var bmm(Var a, Var b, bool transpose_b = false);

  // Element-wise with numpy-style right-aligned broadcasting.
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double s);
  Var add_scalar(Var a, double s);

  Var softmax(Var a);                       // over the last axis
  Var layer_norm(Var a, double eps = 1e-10);  // over the last axis, no affine
  Var gelu(Var a);
  Var sigmoid(Var a);
  Var square(Var a);
  Var abs(Var a);
  Var dropout(Var a, double rate);  // identity unless training

  Var reshape(Var a, Shape shape);
  Var permute(Var a, const std::vector<int>& axes);
  Var concat(const std::vector<Var>& parts, int axis);
  Var slice(Var a, int axis, Eigen::Index start, Eigen::Index length);

  Var sum(Var a);   // -> shape {}
  Var mean(Var a);  // -> shape {}

  // Reverse sweep from a scalar. A second call without reset() throws
  // GraphStateError.
  void backward(Var loss);
  void reset_grads();

  // Gradient of the last backward pass (zeros if the node received none).
  Eigen::VectorXd grad(Var v) const;

  std::size_t size() const { return nodes_.size(); }
  const std::string& op_name(int id) const { return nodes_[id].op; }

 private:
  friend class Var;

  struct Node {
    std::string op;
    Shape shape;
    Eigen::VectorXd value;
    Eigen::VectorXd grad;  // empty until a gradient arrives
    bool needs_grad = false;
    std::function<void()> backward;
  };

  int push(std::string op, Shape shape, Eigen::VectorXd value, bool needs_grad);
  Node& node(Var v) { return nodes_[v.id()]; }
  const Node& node(Var v) const { return nodes_[v.id()]; }
  Eigen::VectorXd& grad_buffer(int id);
  void check_owned(Var v, const char* op) const;
  [[noreturn]] void shape_error(const std::string& op, const std::string& detail) const;

  template <typename Fwd, typename Da, typename Db>
  Var broadcast_binary(const char* op, Var a, Var b, Fwd fwd, Da da, Db db);

  std::vector<Node> nodes_;
  bool training_;
  NoiseStream dropout_stream_;
  bool backward_done_ = false;
};

Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(Var a, Var b);
Var operator*(double s, Var a);

// Largest |analytic - numeric| / max(|analytic|, |numeric|, floor) over
// `coords` randomly chosen (tensor, index) coordinates, all when coords <= 0.
// Numeric gradients are central differences of f; `grads` aligns with `params`.
struct FiniteDiffResult {
  double max_rel_error = 0.0;
  int coordinates = 0;
};

FiniteDiffResult finite_diff_check(const std::function<double(const std::vector<Tensor>&)>& f,
                                   std::vector<Tensor> params, const std::vector<Eigen::VectorXd>& grads, double h,
                                   int coords = -1, std::uint64_t seed = 0,
                                   double floor = 1e-12);

}  // namespace wdiff::ad
