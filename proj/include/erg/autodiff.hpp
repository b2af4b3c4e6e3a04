// Copyright 2026 The ERG Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Reverse-mode automatic differentiation over dense row-major-by-convention
// matrices. Every value on a tape is a matrix whose rows are items (tokens,
// events, edges) and whose columns are features. A single vector is a 1 x d
// matrix.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace erg::ad {

using Matrix = Eigen::MatrixXd;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A trainable tensor with Adam moment buffers.
struct Parameter {
  Matrix value;
  Matrix grad;
  Matrix adam_m;
  Matrix adam_v;

  Parameter() = default;
  explicit Parameter(Matrix init)
      : value(std::move(init)),
        grad(Matrix::Zero(value.rows(), value.cols())),
        adam_m(Matrix::Zero(value.rows(), value.cols())),
        adam_v(Matrix::Zero(value.rows(), value.cols())) {}

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
  Eigen::Index size() const { return value.size(); }
};

class Tape;

// Handle to a node on a tape. Cheap to copy; only valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Matrix& value() const;
  const Matrix& grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }

  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value) { return push(std::move(value), nullptr); }

  // Leaf bound to a parameter; backward accumulates into Parameter::grad.
  Var param(Parameter& p) {
    auto it = bound_.find(&p);
    if (it != bound_.end()) return Var(this, it->second);
    Parameter* target = &p;
    Var v = push(p.value, [target](Tape& t, std::size_t self) {
      target->grad += t.nodes_[self].grad;
    });
    bound_.emplace(&p, v.id());
    return v;
  }

  // Rows of a parameter table; only the gathered rows receive gradient.
  Var gather_param(Parameter& p, std::vector<Eigen::Index> rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), p.value.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r] < 0 || rows[r] >= p.value.rows())
        throw DimensionError("gather_param: row index out of range");
      out.row(static_cast<Eigen::Index>(r)) = p.value.row(rows[r]);
    }
    Parameter* target = &p;
    return push(std::move(out), [target, rows = std::move(rows)](
                                    Tape& t, std::size_t self) {
      const Matrix& g = t.nodes_[self].grad;
      for (std::size_t r = 0; r < rows.size(); ++r)
        target->grad.row(rows[r]) += g.row(static_cast<Eigen::Index>(r));
    });
  }

  Var push(Matrix value, Backward backward) {
    nodes_.push_back(Node{std::move(value), Matrix(), std::move(backward)});
    return Var(this, nodes_.size() - 1);
  }

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  const Matrix& grad(std::size_t id) const { return nodes_[id].grad; }

  // Adds `g` into the gradient of node `id`, allocating it on first use.
  void accumulate(std::size_t id, const Matrix& g) {
    Node& n = nodes_[id];
    if (n.grad.size() == 0)
      n.grad = g;
    else
      n.grad += g;
  }

  // Seeds d(loss)/d(loss) = 1 and propagates to every reachable leaf.
  void backward(Var loss) {
    if (loss.tape() != this) throw std::logic_error("backward: foreign var");
    if (loss.value().size() != 1)
      throw DimensionError("backward: loss must be a scalar");
    accumulate(loss.id(), Matrix::Ones(1, 1));
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.grad.size() == 0 || !n.backward) continue;
      n.backward(*this, i);
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Backward backward;
  };

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> bound_;
};

inline const Matrix& Var::value() const { return tape_->value(id_); }
inline const Matrix& Var::grad() const { return tape_->grad(id_); }

namespace detail {

inline void same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " vs " +
                         std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()));
}

}  // namespace detail

inline Var matmul(Var a, Var b) {
  if (a.cols() != b.rows())
    throw DimensionError("matmul: inner dimensions " +
                         std::to_string(a.cols()) + " and " +
                         std::to_string(b.rows()) + " differ");
  Tape& t = *a.tape();
  const std::size_t ia = a.id(), ib = b.id();
  return t.push(a.value() * b.value(), [ia, ib](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    t.accumulate(ia, g * t.value(ib).transpose());
    t.accumulate(ib, t.value(ia).transpose() * g);
  });
}

inline Var add(Var a, Var b) {
  detail::same_shape(a, b, "add");
  Tape& t = *a.tape();
  const std::size_t ia = a.id(), ib = b.id();
  return t.push(a.value() + b.value(), [ia, ib](Tape& t, std::size_t self) {
    t.accumulate(ia, t.grad(self));
    t.accumulate(ib, t.grad(self));
  });
}

inline Var sub(Var a, Var b) {
  detail::same_shape(a, b, "sub");
  Tape& t = *a.tape();
  const std::size_t ia = a.id(), ib = b.id();
  return t.push(a.value() - b.value(), [ia, ib](Tape& t, std::size_t self) {
    t.accumulate(ia, t.grad(self));
    t.accumulate(ib, -t.grad(self));
  });
}

// Elementwise product.
inline Var mul(Var a, Var b) {
  detail::same_shape(a, b, "mul");
  Tape& t = *a.tape();
  const std::size_t ia = a.id(), ib = b.id();
  return t.push(a.value().cwiseProduct(b.value()),
                [ia, ib](Tape& t, std::size_t self) {
                  const Matrix& g = t.grad(self);
                  t.accumulate(ia, g.cwiseProduct(t.value(ib)));
                  t.accumulate(ib, g.cwiseProduct(t.value(ia)));
                });
}

inline Var scale(Var a, double s) {
  Tape& t = *a.tape();
  const std::size_t ia = a.id();
  return t.push(a.value() * s, [ia, s](Tape& t, std::size_t self) {
    t.accumulate(ia, t.grad(self) * s);
  });
}

// a (n x d) + broadcast of the 1 x d row `bias` to every row.
inline Var add_row(Var a, Var bias) {
  if (bias.rows() != 1 || bias.cols() != a.cols())
    throw DimensionError("add_row: bias must be 1 x " +
                         std::to_string(a.cols()));
  Tape& t = *a.tape();
  const std::size_t ia = a.id(), ib = bias.id();
  Matrix out = a.value();
  out.rowwise() += bias.value().row(0);
  return t.push(std::move(out), [ia, ib](Tape& t, std::size_t self) {
    t.accumulate(ia, t.grad(self));
    t.accumulate(ib, t.grad(self).colwise().sum());
  });
}

inline Var tanh(Var a) {
  Tape& t = *a.tape();
  const std::size_t ia = a.id();
  Matrix out = a.value().array().tanh().matrix();
  return t.push(std::move(out), [ia](Tape& t, std::size_t self) {
    const Matrix& y = t.value(self);
    t.accumulate(ia, t.grad(self).cwiseProduct(
                         (1.0 - y.array().square()).matrix()));
  });
}

inline Var sigmoid(Var a) {
  Tape& t = *a.tape();
  const std::size_t ia = a.id();
  Matrix out = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
  return t.push(std::move(out), [ia](Tape& t, std::size_t self) {
    const Matrix& y = t.value(self);
    t.accumulate(ia, t.grad(self).cwiseProduct(
                         (y.array() * (1.0 - y.array())).matrix()));
  });
}

inline Var leaky_relu(Var a, double slope = 0.2) {
  Tape& t = *a.tape();
  const std::size_t ia = a.id();
  Matrix out = a.value().unaryExpr(
      [slope](double x) { return x > 0.0 ? x : slope * x; });
  return t.push(std::move(out), [ia, slope](Tape& t, std::size_t self) {
    Matrix d = t.value(ia).unaryExpr(
        [slope](double x) { return x > 0.0 ? 1.0 : slope; });
    t.accumulate(ia, t.grad(self).cwiseProduct(d));
  });
}

// Numerically stable softmax over each row.
inline Matrix softmax_rows_value(const Matrix& x) {
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double m = x.row(r).maxCoeff();
    Eigen::RowVectorXd e = (x.row(r).array() - m).exp().matrix();
    out.row(r) = e / e.sum();
  }
  return out;
}

inline Var softmax_rows(Var a) {
  Tape& t = *a.tape();
  const std::size_t ia = a.id();
  return t.push(softmax_rows_value(a.value()),
                [ia](Tape& t, std::size_t self) {
                  const Matrix& y = t.value(self);
                  const Matrix& g = t.grad(self);
                  Matrix d(y.rows(), y.cols());
                  for (Eigen::Index r = 0; r < y.rows(); ++r) {
                    const double dot = g.row(r).dot(y.row(r));
                    d.row(r) = y.row(r).cwiseProduct(
                        (g.row(r).array() - dot).matrix());
                  }
                  t.accumulate(ia, d);
                });
}

inline Var transpose(Var a) {
  Tape& t = *a.tape();
  const std::size_t ia = a.id();
  return t.push(a.value().transpose(), [ia](Tape& t, std::size_t self) {
    t.accumulate(ia, t.grad(self).transpose());
  });
}

inline Var sum(Var a) {
  Tape& t = *a.tape();
  const std::size_t ia = a.id();
  const Eigen::Index r = a.rows(), c = a.cols();
  return t.push(Matrix::Constant(1, 1, a.value().sum()),
                [ia, r, c](Tape& t, std::size_t self) {
                  t.accumulate(ia, Matrix::Constant(r, c, t.grad(self)(0, 0)));
                });
}

inline Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  Tape& t = *parts.front().tape();
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  std::vector<std::size_t> ids;
  std::vector<Eigen::Index> widths;
  for (const Var& p : parts) {
    if (p.rows() != rows) throw DimensionError("concat_cols: row mismatch");
    ids.push_back(p.id());
    widths.push_back(p.cols());
    cols += p.cols();
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (const Var& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  return t.push(std::move(out), [ids = std::move(ids),
                                 widths = std::move(widths)](
                                    Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    Eigen::Index at = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      t.accumulate(ids[k], g.middleCols(at, widths[k]));
      at += widths[k];
    }
  });
}

inline Var concat_cols(std::initializer_list<Var> parts) {
  return concat_cols(std::span<const Var>(parts.begin(), parts.size()));
}

inline Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  Tape& t = *parts.front().tape();
  const Eigen::Index cols = parts.front().cols();
  Eigen::Index rows = 0;
  std::vector<std::size_t> ids;
  std::vector<Eigen::Index> heights;
  for (const Var& p : parts) {
    if (p.cols() != cols) throw DimensionError("concat_rows: column mismatch");
    ids.push_back(p.id());
    heights.push_back(p.rows());
    rows += p.rows();
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (const Var& p : parts) {
    out.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  return t.push(std::move(out), [ids = std::move(ids),
                                 heights = std::move(heights)](
                                    Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    Eigen::Index at = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      t.accumulate(ids[k], g.middleRows(at, heights[k]));
      at += heights[k];
    }
  });
}

inline Var concat_rows(std::initializer_list<Var> parts) {
  return concat_rows(std::span<const Var>(parts.begin(), parts.size()));
}

inline Var row(Var a, Eigen::Index r) {
  if (r < 0 || r >= a.rows()) throw DimensionError("row: index out of range");
  Tape& t = *a.tape();
  const std::size_t ia = a.id();
  const Eigen::Index rows = a.rows(), cols = a.cols();
  return t.push(a.value().row(r), [ia, r, rows, cols](Tape& t,
                                                      std::size_t self) {
    Matrix g = Matrix::Zero(rows, cols);
    g.row(r) = t.grad(self);
    t.accumulate(ia, g);
  });
}

inline Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols())
    throw DimensionError("slice_cols: range out of bounds");
  Tape& t = *a.tape();
  const std::size_t ia = a.id();
  const Eigen::Index rows = a.rows(), cols = a.cols();
  return t.push(a.value().middleCols(start, count),
                [ia, start, count, rows, cols](Tape& t, std::size_t self) {
                  Matrix g = Matrix::Zero(rows, cols);
                  g.middleCols(start, count) = t.grad(self);
                  t.accumulate(ia, g);
                });
}

inline Var gather_rows(Var a, std::vector<Eigen::Index> idx) {
  Tape& t = *a.tape();
  Matrix out(static_cast<Eigen::Index>(idx.size()), a.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (idx[k] < 0 || idx[k] >= a.rows())
      throw DimensionError("gather_rows: index out of range");
    out.row(static_cast<Eigen::Index>(k)) = a.value().row(idx[k]);
  }
  const std::size_t ia = a.id();
  const Eigen::Index rows = a.rows(), cols = a.cols();
  return t.push(std::move(out), [ia, rows, cols, idx = std::move(idx)](
                                    Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    Matrix d = Matrix::Zero(rows, cols);
    for (std::size_t k = 0; k < idx.size(); ++k)
      d.row(idx[k]) += g.row(static_cast<Eigen::Index>(k));
    t.accumulate(ia, d);
  });
}

// Row-wise dot product of equally shaped a and b: rows x 1.
inline Var row_dot(Var a, Var b) {
  detail::same_shape(a, b, "row_dot");
  Tape& t = *a.tape();
  const std::size_t ia = a.id(), ib = b.id();
  return t.push(a.value().cwiseProduct(b.value()).rowwise().sum(),
                [ia, ib](Tape& t, std::size_t self) {
                  const Matrix& g = t.grad(self);
                  const Matrix ga = t.value(ib).array().colwise() *
                                    g.col(0).array();
                  const Matrix gb = t.value(ia).array().colwise() *
                                    g.col(0).array();
                  t.accumulate(ia, ga);
                  t.accumulate(ib, gb);
                });
}

// Row r of a scaled by w(r, 0).
inline Var scale_rows(Var a, Var w) {
  if (w.cols() != 1 || w.rows() != a.rows())
    throw DimensionError("scale_rows: weights must be rows x 1");
  Tape& t = *a.tape();
  const std::size_t ia = a.id(), iw = w.id();
  return t.push(a.value().array().colwise() * w.value().col(0).array(),
                [ia, iw](Tape& t, std::size_t self) {
                  const Matrix& g = t.grad(self);
                  const Matrix ga = g.array().colwise() *
                                    t.value(iw).col(0).array();
                  t.accumulate(ia, ga);
                  t.accumulate(iw, g.cwiseProduct(t.value(ia)).rowwise().sum());
                });
}

// Softmax of a rows x 1 column within each segment (rows sharing an id).
inline Var segment_softmax(Var scores, std::vector<std::size_t> segment) {
  if (scores.cols() != 1 ||
      static_cast<std::size_t>(scores.rows()) != segment.size())
    throw DimensionError("segment_softmax: need one id per score row");
  Tape& t = *scores.tape();
  const Matrix& x = scores.value();
  std::map<std::size_t, double> peak, total;
  for (std::size_t k = 0; k < segment.size(); ++k) {
    auto [it, fresh] = peak.emplace(segment[k], x(k, 0));
    if (!fresh) it->second = std::max(it->second, x(k, 0));
  }
  Matrix y(x.rows(), 1);
  for (std::size_t k = 0; k < segment.size(); ++k) {
    y(k, 0) = std::exp(x(k, 0) - peak[segment[k]]);
    total[segment[k]] += y(k, 0);
  }
  for (std::size_t k = 0; k < segment.size(); ++k) y(k, 0) /= total[segment[k]];
  const std::size_t is = scores.id();
  return t.push(std::move(y), [is, segment = std::move(segment)](
                                  Tape& t, std::size_t self) {
    const Matrix& y = t.value(self);
    const Matrix& g = t.grad(self);
    std::map<std::size_t, double> dot;
    for (std::size_t k = 0; k < segment.size(); ++k)
      dot[segment[k]] += g(k, 0) * y(k, 0);
    Matrix d(y.rows(), 1);
    for (std::size_t k = 0; k < segment.size(); ++k)
      d(k, 0) = y(k, 0) * (g(k, 0) - dot[segment[k]]);
    t.accumulate(is, d);
  });
}

// out.row(segment[k]) += a.row(k); segments >= count throw.
inline Var segment_sum(Var a, std::vector<Eigen::Index> segment,
                       Eigen::Index count) {
  if (static_cast<std::size_t>(a.rows()) != segment.size())
    throw DimensionError("segment_sum: need one id per row");
  Tape& t = *a.tape();
  Matrix out = Matrix::Zero(count, a.cols());
  for (std::size_t k = 0; k < segment.size(); ++k) {
    if (segment[k] < 0 || segment[k] >= count)
      throw DimensionError("segment_sum: segment out of range");
    out.row(segment[k]) += a.value().row(static_cast<Eigen::Index>(k));
  }
  const std::size_t ia = a.id();
  return t.push(std::move(out), [ia, segment = std::move(segment)](
                                    Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    Matrix d(static_cast<Eigen::Index>(segment.size()), g.cols());
    for (std::size_t k = 0; k < segment.size(); ++k)
      d.row(static_cast<Eigen::Index>(k)) = g.row(segment[k]);
    t.accumulate(ia, d);
  });
}

// Lower clamp applied to learned probabilities inside the log.
inline constexpr double kProbabilityFloor = 1e-12;

// -sum(P .* log(max(Q, floor))) over all rows; P is a constant target.
inline Var soft_cross_entropy(const Matrix& target, Var q) {
  if (target.rows() != q.rows() || target.cols() != q.cols())
    throw DimensionError("soft_cross_entropy: arity mismatch " +
                         std::to_string(target.cols()) + " vs " +
                         std::to_string(q.cols()));
  Tape& t = *q.tape();
  const Matrix clamped = q.value().cwiseMax(kProbabilityFloor);
  const double loss = -(target.array() * clamped.array().log()).sum();
  const std::size_t iq = q.id();
  return t.push(Matrix::Constant(1, 1, loss), [iq, target](Tape& t,
                                                         std::size_t self) {
    const Matrix& qv = t.value(iq);
    const double g = t.grad(self)(0, 0);
    Matrix d(qv.rows(), qv.cols());
    for (Eigen::Index r = 0; r < qv.rows(); ++r)
      for (Eigen::Index c = 0; c < qv.cols(); ++c)
        d(r, c) = qv(r, c) > kProbabilityFloor ? -g * target(r, c) / qv(r, c)
                                               : 0.0;
    t.accumulate(iq, d);
  });
}

inline Var add_all(std::span<const Var> terms) {
  if (terms.empty()) throw DimensionError("add_all: no terms");
  Var acc = terms.front();
  for (std::size_t k = 1; k < terms.size(); ++k) acc = add(acc, terms[k]);
  return acc;
}

}  // namespace erg::ad
