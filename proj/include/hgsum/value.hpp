#pragma once

#include <Eigen/Core>

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace hgsum {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

struct Node;
using NodePtr = std::shared_ptr<Node>;

// One recorded operation (or a leaf). `backward` reads `grad` and accumulates
// into the parents' grads.
struct Node {
  Matrix data;
  Matrix grad;
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<NodePtr> parents;
  std::function<void(Node&)> backward;

  // Allocates a zero gradient on first use.
  Matrix& grad_buffer() {
    if (grad.rows() != data.rows() || grad.cols() != data.cols()) grad = Matrix::Zero(data.rows(), data.cols());
    return grad;
  }
};

// Handle to a differentiable 2-D array. Vectors are 1 x n rows, scalars 1 x 1.
// Copies alias the same node.
class Value {
 public:
  Value() = default;
  explicit Value(Matrix data, bool requires_grad = false);
  explicit Value(NodePtr node) : node_(std::move(node)) {}

  static Value scalar(double x);
  static Value zeros(Index rows, Index cols, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  Index rows() const { return node_->data.rows(); }
  Index cols() const { return node_->data.cols(); }
  Index size() const { return node_->data.size(); }
  std::string shape_str() const;

  const Matrix& data() const { return node_->data; }
  Matrix& mutable_data() { return node_->data; }
  // Zero matrix of the data's shape when no gradient has been accumulated.
  Matrix grad() const;
  bool has_grad() const { return node_->grad.size() == node_->data.size() && node_->grad.size() > 0; }
  double item() const;
  bool requires_grad() const { return node_->requires_grad; }
  const char* op() const { return node_->op; }

  void zero_grad() { node_->grad.resize(0, 0); }

  // Reverse pass from a 1 x 1 value. Interior gradients are reset first so the
  // same recorded graph can be replayed; leaf gradients accumulate.
  void backward() const;

  const NodePtr& node() const { return node_; }

 private:
  NodePtr node_;
};

// Disables recording for the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// Builds an op result. When recording is off or no parent needs a gradient the
// result is a constant leaf and `backward` is dropped.
Value make_op(Matrix data, std::vector<Value> parents, const char* op, std::function<void(Node&)> backward);

}  // namespace hgsum
