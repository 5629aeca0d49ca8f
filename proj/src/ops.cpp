#include "hgsum/ops.hpp"

#include "hgsum/errors.hpp"

#include <cmath>
#include <limits>

namespace hgsum::ops {

namespace {

[[noreturn]] void shape_error(const char* op, const Value& a, const Value& b) {
  throw NumericError(std::string(op) + ": incompatible shapes " + a.shape_str() + " and " + b.shape_str());
}

[[noreturn]] void shape_error(const char* op, const std::string& detail) {
  throw NumericError(std::string(op) + ": " + detail);
}

// Parent i's gradient buffer, or nullptr when it does not need one.
Matrix* grad_of(Node& self, std::size_t i) {
  Node& p = *self.parents[i];
  return p.requires_grad ? &p.grad_buffer() : nullptr;
}

const Matrix& data_of(Node& self, std::size_t i) { return self.parents[i]->data; }

}  // namespace

Value matmul(const Value& a, const Value& b) {
  if (a.cols() != b.rows()) shape_error("matmul", a, b);
  Matrix out = a.data() * b.data();
  return make_op(std::move(out), {a, b}, "matmul", [](Node& self) {
    if (Matrix* ga = grad_of(self, 0)) ga->noalias() += self.grad * data_of(self, 1).transpose();
    if (Matrix* gb = grad_of(self, 1)) gb->noalias() += data_of(self, 0).transpose() * self.grad;
  });
}

Value matmul_nt(const Value& a, const Value& b) {
  if (a.cols() != b.cols()) shape_error("matmul_nt", a, b);
  Matrix out = a.data() * b.data().transpose();
  return make_op(std::move(out), {a, b}, "matmul_nt", [](Node& self) {
    if (Matrix* ga = grad_of(self, 0)) ga->noalias() += self.grad * data_of(self, 1);
    if (Matrix* gb = grad_of(self, 1)) gb->noalias() += self.grad.transpose() * data_of(self, 0);
  });
}

Value transpose(const Value& a) {
  Matrix out = a.data().transpose();
  return make_op(std::move(out), {a}, "transpose", [](Node& self) {
    if (Matrix* ga = grad_of(self, 0)) *ga += self.grad.transpose();
  });
}

Value add(const Value& a, const Value& b) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) {
    Matrix out = a.data() + b.data();
    return make_op(std::move(out), {a, b}, "add", [](Node& self) {
      if (Matrix* ga = grad_of(self, 0)) *ga += self.grad;
      if (Matrix* gb = grad_of(self, 1)) *gb += self.grad;
    });
  }
  if (b.rows() == 1 && b.cols() == a.cols()) {
    Matrix out = a.data().rowwise() + b.data().row(0);
    return make_op(std::move(out), {a, b}, "add_row", [](Node& self) {
      if (Matrix* ga = grad_of(self, 0)) *ga += self.grad;
      if (Matrix* gb = grad_of(self, 1)) *gb += self.grad.colwise().sum();
    });
  }
  shape_error("add", a, b);
}

Value sub(const Value& a, const Value& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error("sub", a, b);
  Matrix out = a.data() - b.data();
  return make_op(std::move(out), {a, b}, "sub", [](Node& self) {
    if (Matrix* ga = grad_of(self, 0)) *ga += self.grad;
    if (Matrix* gb = grad_of(self, 1)) *gb -= self.grad;
  });
}

Value mul(const Value& a, const Value& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error("mul", a, b);
  Matrix out = a.data().cwiseProduct(b.data());
  return make_op(std::move(out), {a, b}, "mul", [](Node& self) {
    if (Matrix* ga = grad_of(self, 0)) *ga += self.grad.cwiseProduct(data_of(self, 1));
    if (Matrix* gb = grad_of(self, 1)) *gb += self.grad.cwiseProduct(data_of(self, 0));
  });
}

Value mul_col(const Value& a, const Value& c) {
  if (c.cols() != 1 || c.rows() != a.rows()) shape_error("mul_col", a, c);
  Matrix out = a.data().array().colwise() * c.data().col(0).array();
  return make_op(std::move(out), {a, c}, "mul_col", [](Node& self) {
    const Matrix& av = data_of(self, 0);
    const Matrix& cv = data_of(self, 1);
    if (Matrix* ga = grad_of(self, 0)) ga->array() += self.grad.array().colwise() * cv.col(0).array();
    if (Matrix* gc = grad_of(self, 1)) gc->col(0) += self.grad.cwiseProduct(av).rowwise().sum();
  });
}

Value scale(const Value& a, double s) {
  Matrix out = a.data() * s;
  return make_op(std::move(out), {a}, "scale", [s](Node& self) {
    if (Matrix* ga = grad_of(self, 0)) *ga += self.grad * s;
  });
}

Value divide(const Value& a, const Value& s) {
  if (s.rows() != 1 || s.cols() != 1) shape_error("divide", a, s);
  const double d = s.data()(0, 0);
  if (d == 0.0) throw NumericError("divide: division by zero");
  Matrix out = a.data() / d;
  return make_op(std::move(out), {a, s}, "divide", [d](Node& self) {
    if (Matrix* ga = grad_of(self, 0)) *ga += self.grad / d;
    if (Matrix* gs = grad_of(self, 1)) (*gs)(0, 0) -= (self.grad.array() * self.data.array()).sum() / d;
  });
}

Value concat(std::span<const Value> parts, int axis) {
  if (parts.empty()) shape_error("concat", "no inputs");
  if (axis != 0 && axis != 1) shape_error("concat", "axis must be 0 or 1");
  Index rows = 0, cols = 0;
  for (const auto& p : parts) {
    if (axis == 0) {
      if (p.cols() != parts[0].cols()) shape_error("concat", parts[0], p);
      rows += p.rows();
      cols = p.cols();
    } else {
      if (p.rows() != parts[0].rows()) shape_error("concat", parts[0], p);
      cols += p.cols();
      rows = p.rows();
    }
  }
  Matrix out(rows, cols);
  Index offset = 0;
  for (const auto& p : parts) {
    if (axis == 0) {
      out.middleRows(offset, p.rows()) = p.data();
      offset += p.rows();
    } else {
      out.middleCols(offset, p.cols()) = p.data();
      offset += p.cols();
    }
  }
  std::vector<Value> parents(parts.begin(), parts.end());
  return make_op(std::move(out), std::move(parents), "concat", [axis](Node& self) {
    Index off = 0;
    for (std::size_t i = 0; i < self.parents.size(); ++i) {
      const Matrix& d = data_of(self, i);
      Index extent = axis == 0 ? d.rows() : d.cols();
      if (Matrix* g = grad_of(self, i)) {
        if (axis == 0)
          *g += self.grad.middleRows(off, extent);
        else
          *g += self.grad.middleCols(off, extent);
      }
      off += extent;
    }
  });
}

Value slice(const Value& a, int axis, Index begin, Index count) {
  Index extent = axis == 0 ? a.rows() : a.cols();
  if ((axis != 0 && axis != 1) || begin < 0 || count < 0 || begin + count > extent) {
    shape_error("slice", "range [" + std::to_string(begin) + ", " + std::to_string(begin + count) + ") on axis " +
                             std::to_string(axis) + " out of bounds for " + a.shape_str());
  }
  Matrix out = axis == 0 ? Matrix(a.data().middleRows(begin, count)) : Matrix(a.data().middleCols(begin, count));
  return make_op(std::move(out), {a}, "slice", [axis, begin, count](Node& self) {
    if (Matrix* g = grad_of(self, 0)) {
      if (axis == 0)
        g->middleRows(begin, count) += self.grad;
      else
        g->middleCols(begin, count) += self.grad;
    }
  });
}

namespace {

// std::exp underflows to an exact 0; Eigen's packet exp leaves denormals.
double exact_exp(double v) { return std::exp(v); }

Matrix softmax_matrix(const Matrix& x) {
  Matrix y(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    double mx = x.row(i).maxCoeff();
    y.row(i) = (x.row(i).array() - mx).unaryExpr(&exact_exp);
    y.row(i) /= y.row(i).sum();
  }
  return y;
}

}  // namespace

Value softmax_rows(const Value& a) {
  if (a.cols() == 0) shape_error("softmax_rows", "empty rows in " + a.shape_str());
  Matrix out = softmax_matrix(a.data());
  return make_op(std::move(out), {a}, "softmax_rows", [](Node& self) {
    if (Matrix* g = grad_of(self, 0)) {
      const Matrix& y = self.data;
      Eigen::VectorXd dot = self.grad.cwiseProduct(y).rowwise().sum();
      *g += (y.array() * (self.grad.array().colwise() - dot.array())).matrix();
    }
  });
}

Value log_softmax_rows(const Value& a) {
  if (a.cols() == 0) shape_error("log_softmax_rows", "empty rows in " + a.shape_str());
  Matrix out(a.rows(), a.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    double mx = a.data().row(i).maxCoeff();
    double lse = mx + std::log((a.data().row(i).array() - mx).unaryExpr(&exact_exp).sum());
    out.row(i) = a.data().row(i).array() - lse;
  }
  return make_op(std::move(out), {a}, "log_softmax_rows", [](Node& self) {
    if (Matrix* g = grad_of(self, 0)) {
      Matrix p = self.data.array().unaryExpr(&exact_exp);
      Eigen::VectorXd total = self.grad.rowwise().sum();
      *g += self.grad - (p.array().colwise() * total.array()).matrix();
    }
  });
}

Value leaky_relu(const Value& a, double slope) {
  Matrix out = a.data().unaryExpr([slope](double v) { return v > 0.0 ? v : slope * v; });
  return make_op(std::move(out), {a}, "leaky_relu", [slope](Node& self) {
    if (Matrix* g = grad_of(self, 0)) {
      const Matrix& x = data_of(self, 0);
      *g += x.unaryExpr([slope](double v) { return v > 0.0 ? 1.0 : slope; }).cwiseProduct(self.grad);
    }
  });
}

Value relu(const Value& a) { return leaky_relu(a, 0.0); }

Value elu(const Value& a) {
  Matrix out = a.data().unaryExpr([](double v) { return v > 0.0 ? v : std::expm1(v); });
  return make_op(std::move(out), {a}, "elu", [](Node& self) {
    if (Matrix* g = grad_of(self, 0)) {
      const Matrix& x = data_of(self, 0);
      *g += x.unaryExpr([](double v) { return v > 0.0 ? 1.0 : std::exp(v); }).cwiseProduct(self.grad);
    }
  });
}

Value mean(const Value& a, int axis) {
  if (a.size() == 0) shape_error("mean", "empty input " + a.shape_str());
  if (axis == 0) {
    Matrix out = a.data().colwise().mean();
    return make_op(std::move(out), {a}, "mean_rows", [](Node& self) {
      if (Matrix* g = grad_of(self, 0)) {
        double n = static_cast<double>(g->rows());
        g->rowwise() += self.grad.row(0) / n;
      }
    });
  }
  if (axis == 1) {
    Matrix out = a.data().rowwise().mean();
    return make_op(std::move(out), {a}, "mean_cols", [](Node& self) {
      if (Matrix* g = grad_of(self, 0)) {
        double n = static_cast<double>(g->cols());
        g->colwise() += self.grad.col(0) / n;
      }
    });
  }
  shape_error("mean", "axis must be 0 or 1");
}

Value sum(const Value& a) {
  Matrix out(1, 1);
  out(0, 0) = a.data().sum();
  return make_op(std::move(out), {a}, "sum", [](Node& self) {
    if (Matrix* g = grad_of(self, 0)) g->array() += self.grad(0, 0);
  });
}

Value cosine(const Value& u, const Value& v) {
  if (u.rows() != 1 || v.rows() != 1 || u.cols() != v.cols()) shape_error("cosine", u, v);
  double nu = u.data().norm();
  double nv = v.data().norm();
  bool degenerate = nu < 1e-12 || nv < 1e-12;
  double c = degenerate ? 0.0 : u.data().row(0).dot(v.data().row(0)) / (nu * nv);
  Matrix out(1, 1);
  out(0, 0) = c;
  return make_op(std::move(out), {u, v}, "cosine", [nu, nv, c, degenerate](Node& self) {
    if (degenerate) return;
    const Matrix& uv = data_of(self, 0);
    const Matrix& vv = data_of(self, 1);
    double g = self.grad(0, 0);
    if (Matrix* gu = grad_of(self, 0)) *gu += g * (vv / (nu * nv) - c * uv / (nu * nu));
    if (Matrix* gv = grad_of(self, 1)) *gv += g * (uv / (nu * nv) - c * vv / (nv * nv));
  });
}

Value masked_fill(const Value& a, const std::vector<std::uint8_t>& mask, double fill) {
  if (static_cast<Index>(mask.size()) != a.size()) {
    shape_error("masked_fill", "mask of " + std::to_string(mask.size()) + " entries for " + a.shape_str());
  }
  Matrix out = a.data();
  for (Index k = 0; k < out.size(); ++k) {
    if (mask[k]) out.data()[k] = fill;
  }
  return make_op(std::move(out), {a}, "masked_fill", [mask](Node& self) {
    if (Matrix* g = grad_of(self, 0)) {
      for (Index k = 0; k < g->size(); ++k) {
        if (!mask[k]) g->data()[k] += self.grad.data()[k];
      }
    }
  });
}

Value gather_rows(const Value& table, std::span<const Index> ids) {
  Matrix out(static_cast<Index>(ids.size()), table.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= table.rows()) {
      shape_error("gather_rows", "row id " + std::to_string(ids[i]) + " out of range for " + table.shape_str());
    }
    out.row(static_cast<Index>(i)) = table.data().row(ids[i]);
  }
  std::vector<Index> idx(ids.begin(), ids.end());
  return make_op(std::move(out), {table}, "gather_rows", [idx = std::move(idx)](Node& self) {
    if (Matrix* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < idx.size(); ++i) g->row(idx[i]) += self.grad.row(static_cast<Index>(i));
    }
  });
}

Value scatter_add_rows(const Value& src, std::span<const Index> index, Index n_rows) {
  if (static_cast<Index>(index.size()) != src.rows()) {
    shape_error("scatter_add_rows", std::to_string(index.size()) + " indices for " + src.shape_str());
  }
  Matrix out = Matrix::Zero(n_rows, src.cols());
  for (std::size_t e = 0; e < index.size(); ++e) {
    if (index[e] < 0 || index[e] >= n_rows) {
      shape_error("scatter_add_rows", "target row " + std::to_string(index[e]) + " out of range " + std::to_string(n_rows));
    }
    out.row(index[e]) += src.data().row(static_cast<Index>(e));
  }
  std::vector<Index> idx(index.begin(), index.end());
  return make_op(std::move(out), {src}, "scatter_add_rows", [idx = std::move(idx)](Node& self) {
    if (Matrix* g = grad_of(self, 0)) {
      for (std::size_t e = 0; e < idx.size(); ++e) g->row(static_cast<Index>(e)) += self.grad.row(idx[e]);
    }
  });
}

Value segment_softmax(const Value& scores, std::span<const Index> segment, Index n_segments) {
  if (scores.cols() != 1 || static_cast<Index>(segment.size()) != scores.rows()) {
    shape_error("segment_softmax", std::to_string(segment.size()) + " segment ids for " + scores.shape_str());
  }
  const Index n = scores.rows();
  std::vector<double> mx(static_cast<std::size_t>(n_segments), -std::numeric_limits<double>::infinity());
  for (Index e = 0; e < n; ++e) {
    Index s = segment[e];
    if (s < 0 || s >= n_segments) shape_error("segment_softmax", "segment id " + std::to_string(s) + " out of range");
    mx[s] = std::max(mx[s], scores.data()(e, 0));
  }
  Matrix out(n, 1);
  std::vector<double> total(static_cast<std::size_t>(n_segments), 0.0);
  for (Index e = 0; e < n; ++e) {
    out(e, 0) = std::exp(scores.data()(e, 0) - mx[segment[e]]);
    total[segment[e]] += out(e, 0);
  }
  for (Index e = 0; e < n; ++e) out(e, 0) /= total[segment[e]];
  std::vector<Index> seg(segment.begin(), segment.end());
  return make_op(std::move(out), {scores}, "segment_softmax", [seg = std::move(seg), n_segments](Node& self) {
    if (Matrix* g = grad_of(self, 0)) {
      std::vector<double> dot(static_cast<std::size_t>(n_segments), 0.0);
      for (std::size_t e = 0; e < seg.size(); ++e) dot[seg[e]] += self.grad(e, 0) * self.data(e, 0);
      for (std::size_t e = 0; e < seg.size(); ++e) (*g)(e, 0) += self.data(e, 0) * (self.grad(e, 0) - dot[seg[e]]);
    }
  });
}

Value layer_norm(const Value& x, const Value& gain, const Value& bias, double eps) {
  if (gain.rows() != 1 || gain.cols() != x.cols()) shape_error("layer_norm", x, gain);
  if (bias.rows() != 1 || bias.cols() != x.cols()) shape_error("layer_norm", x, bias);
  const Index n = x.rows();
  const Index d = x.cols();
  Matrix xhat(n, d);
  Eigen::VectorXd inv_std(n);
  for (Index i = 0; i < n; ++i) {
    double mu = x.data().row(i).mean();
    double var = (x.data().row(i).array() - mu).square().mean();
    inv_std(i) = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = (x.data().row(i).array() - mu) * inv_std(i);
  }
  Matrix out = (xhat.array().rowwise() * gain.data().row(0).array()).rowwise() + bias.data().row(0).array();
  return make_op(std::move(out), {x, gain, bias}, "layer_norm", [xhat, inv_std](Node& self) {
    const Matrix& gv = data_of(self, 1);
    if (Matrix* gx = grad_of(self, 0)) {
      const double d = static_cast<double>(xhat.cols());
      Matrix dxhat = self.grad.array().rowwise() * gv.row(0).array();
      for (Index i = 0; i < xhat.rows(); ++i) {
        double m1 = dxhat.row(i).sum();
        double m2 = dxhat.row(i).dot(xhat.row(i));
        gx->row(i).array() += inv_std(i) / d * (d * dxhat.row(i).array() - m1 - xhat.row(i).array() * m2);
      }
    }
    if (Matrix* gg = grad_of(self, 1)) *gg += self.grad.cwiseProduct(xhat).colwise().sum();
    if (Matrix* gb = grad_of(self, 2)) *gb += self.grad.colwise().sum();
  });
}

Value dropout(const Value& x, double p, std::mt19937_64& rng, bool training) {
  if (!training || p <= 0.0) return x;
  if (p >= 1.0) shape_error("dropout", "probability must be < 1");
  std::bernoulli_distribution keep(1.0 - p);
  Matrix mask(x.rows(), x.cols());
  for (Index k = 0; k < mask.size(); ++k) mask.data()[k] = keep(rng) ? 1.0 / (1.0 - p) : 0.0;
  Matrix out = x.data().cwiseProduct(mask);
  return make_op(std::move(out), {x}, "dropout", [mask = std::move(mask)](Node& self) {
    if (Matrix* g = grad_of(self, 0)) *g += self.grad.cwiseProduct(mask);
  });
}

Value cross_entropy_smoothed(const Value& logits, std::span<const Index> targets, double eps, Index ignore_id) {
  const Index t_len = logits.rows();
  const Index v = logits.cols();
  if (static_cast<Index>(targets.size()) != t_len) {
    shape_error("cross_entropy_smoothed", std::to_string(targets.size()) + " targets for logits " + logits.shape_str());
  }
  if (v < 2) shape_error("cross_entropy_smoothed", "need at least 2 classes, got " + logits.shape_str());
  const double off = eps / static_cast<double>(v - 1);
  Matrix q = Matrix::Zero(t_len, v);
  Index counted = 0;
  for (Index i = 0; i < t_len; ++i) {
    Index y = targets[i];
    if (y == ignore_id) continue;
    if (y < 0 || y >= v) shape_error("cross_entropy_smoothed", "target " + std::to_string(y) + " out of range");
    q.row(i).setConstant(off);
    q(i, y) = 1.0 - eps;
    ++counted;
  }
  Matrix p = softmax_matrix(logits.data());
  double loss = 0.0;
  for (Index i = 0; i < t_len; ++i) {
    if (q.row(i).sum() == 0.0) continue;
    double mx = logits.data().row(i).maxCoeff();
    double lse = mx + std::log((logits.data().row(i).array() - mx).unaryExpr(&exact_exp).sum());
    for (Index c = 0; c < v; ++c) {
      if (q(i, c) != 0.0) loss -= q(i, c) * (logits.data()(i, c) - lse);
    }
  }
  const double denom = counted > 0 ? static_cast<double>(counted) : 1.0;
  Matrix out(1, 1);
  out(0, 0) = loss / denom;
  return make_op(std::move(out), {logits}, "cross_entropy_smoothed",
                 [q = std::move(q), p = std::move(p), denom](Node& self) {
                   if (Matrix* g = grad_of(self, 0)) {
                     double s = self.grad(0, 0) / denom;
                     for (Index i = 0; i < q.rows(); ++i) {
                       double mass = q.row(i).sum();
                       if (mass == 0.0) continue;
                       g->row(i) += s * (mass * p.row(i) - q.row(i));
                     }
                   }
                 });
}

}  // namespace hgsum::ops
