// Copyright 2026 The ageshift Authors
// SPDX-License-Identifier: Apache-2.0

// Minimal reverse-mode automatic differentiation over dense double matrices.
//
// A Tape records every operation as a node holding its value; calling
// backward() on a scalar node walks the tape in reverse and accumulates
// gradients into every node that requires them. Nodes that do not depend on
// a trainable leaf are never visited.

#pragma once

#include <deque>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace ageshift {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// A named, persistent weight. `trainable` decides whether a tape tracks
// gradients for it.
struct Parameter {
  std::string name;
  Matrix value;
  bool trainable = false;
};

namespace ad {

class Tape;

class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  bool requires_grad() const;
  bool valid() const { return tape_ != nullptr; }
  int id() const { return id_; }
  Tape* tape() const { return tape_; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, const Matrix& grad_out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var variable(Matrix value);
  // Same parameter object maps to the same node for the lifetime of the tape.
  Var parameter(Parameter& p);

  // Low-level node creation used by the op library.
  Var push(Matrix value, bool requires_grad, Backward backward);

  void backward(const Var& scalar);

  // Gradient accumulated for `v`; zero matrix of matching shape if none.
  Matrix grad(const Var& v) const;
  // Gradient for a parameter bound to this tape; zero if not bound.
  Matrix grad(const Parameter& p) const;

  const Matrix& value(int id) const { return nodes_[id].value; }
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  void accumulate(int id, const Matrix& g);
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    bool has_grad = false;
    Backward backward;
  };

  std::deque<Node> nodes_;
  std::unordered_map<const Parameter*, int> bound_;
};

// Op library. All binary ops require both operands on the same tape.
Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var hadamard(const Var& a, const Var& b);
Var scale(const Var& a, double s);
// Adds a 1×n row vector to every row of `a`.
Var add_row(const Var& a, const Var& row);
Var transpose(const Var& a);
Var tanh(const Var& a);
Var softmax_rows(const Var& a);
Var sum(const Var& a);
// Mean of squared entries, a scalar.
Var mean_square(const Var& a);
// Row-wise L2 normalisation.
Var normalize_rows(const Var& a);
Var concat_rows(const std::vector<Var>& parts);
// Rows `rows` of `a`, in order.
Var select_rows(const Var& a, const std::vector<int>& rows);
// Places row k of `a` at row positions[k] of a zero matrix with `total_rows`.
Var place_rows(const Var& a, const std::vector<int>& positions, Eigen::Index total_rows);
// Wraps an opaque function given its value and vector-Jacobian product.
Var custom(const Var& input, Matrix output,
           std::function<Matrix(const Matrix& grad_out)> vjp);

// Mean over (i, j) pairs of  -S_ij + log sum_{k != i} exp(S_ik).
Var pair_log_softmax_loss(const Var& similarities,
                          const std::vector<std::pair<int, int>>& pairs);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, double s) { return scale(a, s); }
inline Var operator*(double s, const Var& a) { return scale(a, s); }

}  // namespace ad
}  // namespace ageshift
