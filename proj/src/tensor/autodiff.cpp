// Copyright 2026 The ageshift Authors
// SPDX-License-Identifier: Apache-2.0

#include "ageshift/tensor/autodiff.hpp"

#include <cmath>
#include <limits>

#include "ageshift/error.hpp"

namespace ageshift::ad {

const Matrix& Var::value() const { return tape_->value(id_); }
bool Var::requires_grad() const { return tape_->requires_grad(id_); }

Var Tape::constant(Matrix value) { return push(std::move(value), false, {}); }

Var Tape::variable(Matrix value) { return push(std::move(value), true, {}); }

Var Tape::parameter(Parameter& p) {
  if (auto it = bound_.find(&p); it != bound_.end()) return Var(this, it->second);
  Var v = push(p.value, p.trainable, {});
  bound_.emplace(&p, v.id());
  return v;
}

Var Tape::push(Matrix value, bool requires_grad, Backward backward) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

void Tape::accumulate(int id, const Matrix& g) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return;
  if (!n.has_grad) {
    n.grad = g;
    n.has_grad = true;
  } else {
    n.grad += g;
  }
}

void Tape::backward(const Var& scalar) {
  if (scalar.tape() != this) throw StateError("backward: variable from another tape");
  if (scalar.rows() != 1 || scalar.cols() != 1)
    throw ShapeError("backward: output must be a 1x1 scalar");
  accumulate(scalar.id(), Matrix::Ones(1, 1));
  for (int i = scalar.id(); i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.has_grad || !n.backward) continue;
    n.backward(*this, n.grad);
  }
}

Matrix Tape::grad(const Var& v) const {
  const Node& n = nodes_[v.id()];
  if (!n.has_grad) return Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

Matrix Tape::grad(const Parameter& p) const {
  auto it = bound_.find(&p);
  if (it == bound_.end()) return Matrix::Zero(p.value.rows(), p.value.cols());
  return grad(Var(const_cast<Tape*>(this), it->second));
}

namespace {

Tape& same_tape(const Var& a, const Var& b) {
  if (a.tape() == nullptr || a.tape() != b.tape())
    throw StateError("autodiff: operands live on different tapes");
  return *a.tape();
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError(std::string(op) + ": shape mismatch");
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b);
  if (a.cols() != b.rows()) throw ShapeError("matmul: inner dimensions differ");
  const int ia = a.id(), ib = b.id();
  return t.push(a.value() * b.value(), a.requires_grad() || b.requires_grad(),
                [ia, ib](Tape& tp, const Matrix& g) {
                  if (tp.requires_grad(ia)) tp.accumulate(ia, g * tp.value(ib).transpose());
                  if (tp.requires_grad(ib)) tp.accumulate(ib, tp.value(ia).transpose() * g);
                });
}

Var add(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b);
  check_same_shape(a, b, "add");
  const int ia = a.id(), ib = b.id();
  return t.push(a.value() + b.value(), a.requires_grad() || b.requires_grad(),
                [ia, ib](Tape& tp, const Matrix& g) {
                  tp.accumulate(ia, g);
                  tp.accumulate(ib, g);
                });
}

Var sub(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b);
  check_same_shape(a, b, "sub");
  const int ia = a.id(), ib = b.id();
  return t.push(a.value() - b.value(), a.requires_grad() || b.requires_grad(),
                [ia, ib](Tape& tp, const Matrix& g) {
                  tp.accumulate(ia, g);
                  if (tp.requires_grad(ib)) tp.accumulate(ib, -g);
                });
}

Var hadamard(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b);
  check_same_shape(a, b, "hadamard");
  const int ia = a.id(), ib = b.id();
  return t.push(a.value().cwiseProduct(b.value()), a.requires_grad() || b.requires_grad(),
                [ia, ib](Tape& tp, const Matrix& g) {
                  if (tp.requires_grad(ia)) tp.accumulate(ia, g.cwiseProduct(tp.value(ib)));
                  if (tp.requires_grad(ib)) tp.accumulate(ib, g.cwiseProduct(tp.value(ia)));
                });
}

Var scale(const Var& a, double s) {
  const int ia = a.id();
  return a.tape()->push(a.value() * s, a.requires_grad(),
                        [ia, s](Tape& tp, const Matrix& g) { tp.accumulate(ia, g * s); });
}

Var add_row(const Var& a, const Var& row) {
  Tape& t = same_tape(a, row);
  if (row.rows() != 1 || row.cols() != a.cols()) throw ShapeError("add_row: expected 1xN row");
  const int ia = a.id(), ir = row.id();
  Matrix out = a.value().rowwise() + row.value().row(0);
  return t.push(std::move(out), a.requires_grad() || row.requires_grad(),
                [ia, ir](Tape& tp, const Matrix& g) {
                  tp.accumulate(ia, g);
                  if (tp.requires_grad(ir)) tp.accumulate(ir, g.colwise().sum());
                });
}

Var transpose(const Var& a) {
  const int ia = a.id();
  return a.tape()->push(a.value().transpose(), a.requires_grad(),
                        [ia](Tape& tp, const Matrix& g) { tp.accumulate(ia, g.transpose()); });
}

Var tanh(const Var& a) {
  const int ia = a.id();
  Matrix y = a.value().array().tanh().matrix();
  Matrix y_copy = y;
  return a.tape()->push(std::move(y), a.requires_grad(),
                        [ia, y_copy = std::move(y_copy)](Tape& tp, const Matrix& g) {
                          tp.accumulate(ia, g.cwiseProduct((1.0 - y_copy.array().square()).matrix()));
                        });
}

Var softmax_rows(const Var& a) {
  const Matrix& x = a.value();
  Matrix y(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double m = x.row(r).maxCoeff();
    Eigen::RowVectorXd e = (x.row(r).array() - m).exp().matrix();
    y.row(r) = e / e.sum();
  }
  const int ia = a.id();
  Matrix y_copy = y;
  return a.tape()->push(std::move(y), a.requires_grad(),
                        [ia, y_copy = std::move(y_copy)](Tape& tp, const Matrix& g) {
                          // dx = y * (g - rowsum(g * y))
                          Vector dots = g.cwiseProduct(y_copy).rowwise().sum();
                          Matrix dx = y_copy.cwiseProduct(g.colwise() - dots);
                          tp.accumulate(ia, dx);
                        });
}

Var sum(const Var& a) {
  const int ia = a.id();
  const Eigen::Index r = a.rows(), c = a.cols();
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return a.tape()->push(std::move(out), a.requires_grad(), [ia, r, c](Tape& tp, const Matrix& g) {
    tp.accumulate(ia, Matrix::Constant(r, c, g(0, 0)));
  });
}

Var mean_square(const Var& a) {
  const int ia = a.id();
  const double n = static_cast<double>(a.value().size());
  Matrix out(1, 1);
  out(0, 0) = a.value().squaredNorm() / n;
  return a.tape()->push(std::move(out), a.requires_grad(), [ia, n](Tape& tp, const Matrix& g) {
    tp.accumulate(ia, tp.value(ia) * (2.0 * g(0, 0) / n));
  });
}

Var normalize_rows(const Var& a) {
  const Matrix& x = a.value();
  Vector norms = x.rowwise().norm();
  for (Eigen::Index r = 0; r < norms.size(); ++r)
    if (!(norms(r) > 0.0)) throw DomainError("normalize_rows: zero-norm row");
  Matrix y = norms.cwiseInverse().asDiagonal() * x;
  const int ia = a.id();
  Matrix y_copy = y;
  return a.tape()->push(std::move(y), a.requires_grad(),
                        [ia, y_copy = std::move(y_copy), norms](Tape& tp, const Matrix& g) {
                          // dx = (g - y * <g, y>) / |x|
                          Vector dots = g.cwiseProduct(y_copy).rowwise().sum();
                          Matrix dx = g - dots.asDiagonal() * y_copy;
                          tp.accumulate(ia, norms.cwiseInverse().asDiagonal() * dx);
                        });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  Tape& t = *parts.front().tape();
  const Eigen::Index cols = parts.front().cols();
  Eigen::Index rows = 0;
  bool rg = false;
  for (const auto& p : parts) {
    if (p.tape() != &t) throw StateError("concat_rows: operands live on different tapes");
    if (p.cols() != cols) throw ShapeError("concat_rows: column mismatch");
    rows += p.rows();
    rg = rg || p.requires_grad();
  }
  Matrix out(rows, cols);
  std::vector<std::pair<int, Eigen::Index>> layout;
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    out.middleRows(off, p.rows()) = p.value();
    layout.emplace_back(p.id(), off);
    off += p.rows();
  }
  return t.push(std::move(out), rg, [layout](Tape& tp, const Matrix& g) {
    for (const auto& [id, o] : layout) {
      if (!tp.requires_grad(id)) continue;
      tp.accumulate(id, g.middleRows(o, tp.value(id).rows()));
    }
  });
}

Var select_rows(const Var& a, const std::vector<int>& rows) {
  const Matrix& x = a.value();
  Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k] < 0 || rows[k] >= x.rows()) throw ShapeError("select_rows: index out of range");
    out.row(static_cast<Eigen::Index>(k)) = x.row(rows[k]);
  }
  const int ia = a.id();
  const Eigen::Index r = x.rows();
  return a.tape()->push(std::move(out), a.requires_grad(), [ia, rows, r](Tape& tp, const Matrix& g) {
    Matrix dx = Matrix::Zero(r, g.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) dx.row(rows[k]) += g.row(static_cast<Eigen::Index>(k));
    tp.accumulate(ia, dx);
  });
}

Var place_rows(const Var& a, const std::vector<int>& positions, Eigen::Index total_rows) {
  if (static_cast<Eigen::Index>(positions.size()) != a.rows())
    throw ShapeError("place_rows: one position per row required");
  Matrix out = Matrix::Zero(total_rows, a.cols());
  for (std::size_t k = 0; k < positions.size(); ++k) {
    if (positions[k] < 0 || positions[k] >= total_rows) throw ShapeError("place_rows: position out of range");
    out.row(positions[k]) += a.value().row(static_cast<Eigen::Index>(k));
  }
  const int ia = a.id();
  return a.tape()->push(std::move(out), a.requires_grad(), [ia, positions](Tape& tp, const Matrix& g) {
    Matrix dx(static_cast<Eigen::Index>(positions.size()), g.cols());
    for (std::size_t k = 0; k < positions.size(); ++k) dx.row(static_cast<Eigen::Index>(k)) = g.row(positions[k]);
    tp.accumulate(ia, dx);
  });
}

Var custom(const Var& input, Matrix output, std::function<Matrix(const Matrix&)> vjp) {
  const int ia = input.id();
  return input.tape()->push(std::move(output), input.requires_grad(),
                            [ia, vjp = std::move(vjp)](Tape& tp, const Matrix& g) {
                              tp.accumulate(ia, vjp(g));
                            });
}

Var pair_log_softmax_loss(const Var& similarities, const std::vector<std::pair<int, int>>& pairs) {
  const Matrix& s = similarities.value();
  if (s.rows() != s.cols()) throw ShapeError("pair_log_softmax_loss: similarity matrix must be square");
  const Eigen::Index n = s.rows();
  Matrix out = Matrix::Zero(1, 1);
  if (pairs.empty()) return similarities.tape()->push(std::move(out), false, {});
  // Softmax over k != i for every anchor row that appears in a pair.
  Matrix soft = Matrix::Zero(n, n);
  std::vector<bool> have(static_cast<std::size_t>(n), false);
  double total = 0.0;
  for (const auto& [i, j] : pairs) {
    if (i < 0 || j < 0 || i >= n || j >= n || i == j)
      throw DomainError("pair_log_softmax_loss: invalid pair index");
    if (!have[static_cast<std::size_t>(i)]) {
      double m = -std::numeric_limits<double>::infinity();
      for (Eigen::Index k = 0; k < n; ++k)
        if (k != i) m = std::max(m, s(i, k));
      double z = 0.0;
      for (Eigen::Index k = 0; k < n; ++k)
        if (k != i) z += std::exp(s(i, k) - m);
      for (Eigen::Index k = 0; k < n; ++k)
        soft(i, k) = (k == i) ? 0.0 : std::exp(s(i, k) - m) / z;
      soft(i, i) = m + std::log(z);  // stash the log-normaliser on the diagonal
      have[static_cast<std::size_t>(i)] = true;
    }
    total += -s(i, j) + soft(i, i);
  }
  const double count = static_cast<double>(pairs.size());
  out(0, 0) = total / count;
  const int ia = similarities.id();
  return similarities.tape()->push(
      std::move(out), similarities.requires_grad(), [ia, pairs, soft, n, count](Tape& tp, const Matrix& g) {
        Matrix ds = Matrix::Zero(n, n);
        for (const auto& [i, j] : pairs) {
          for (Eigen::Index k = 0; k < n; ++k)
            if (k != i) ds(i, k) += soft(i, k);
          ds(i, j) -= 1.0;
        }
        tp.accumulate(ia, ds * (g(0, 0) / count));
      });
}

}  // namespace ad
