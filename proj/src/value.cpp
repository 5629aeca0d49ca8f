#include "hgsum/value.hpp"

#include "hgsum/errors.hpp"

#include <unordered_set>

namespace hgsum {

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Value::Value(Matrix data, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->data = std::move(data);
  node_->requires_grad = requires_grad;
}

Value Value::scalar(double x) {
  Matrix m(1, 1);
  m(0, 0) = x;
  return Value(std::move(m));
}

Value Value::zeros(Index rows, Index cols, bool requires_grad) {
  return Value(Matrix::Zero(rows, cols), requires_grad);
}

std::string Value::shape_str() const {
  if (!node_) return "[undefined]";
  return "[" + std::to_string(rows()) + "x" + std::to_string(cols()) + "]";
}

Matrix Value::grad() const {
  if (has_grad()) return node_->grad;
  return Matrix::Zero(rows(), cols());
}

double Value::item() const {
  if (size() != 1) throw NumericError("item: value of shape " + shape_str() + " is not a scalar");
  return node_->data(0, 0);
}

void Value::backward() const {
  if (size() != 1) throw NumericError("backward: root of shape " + shape_str() + " is not a scalar");
  // Iterative post-order DFS gives a topological order (parents before children).
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && seen.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  for (Node* n : order) {
    if (n->backward) n->grad = Matrix::Zero(n->data.rows(), n->data.cols());
  }
  node_->grad_buffer()(0, 0) += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward) (*it)->backward(**it);
  }
}

Value make_op(Matrix data, std::vector<Value> parents, const char* op, std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->data = std::move(data);
  node->op = op;
  bool needs = false;
  if (g_grad_enabled) {
    for (const auto& p : parents) needs = needs || p.requires_grad();
  }
  if (needs) {
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (auto& p : parents) node->parents.push_back(p.node());
    node->backward = std::move(backward);
  }
  return Value(std::move(node));
}

}  // namespace hgsum
