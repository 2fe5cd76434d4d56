// Copyright 2026 The ageshift Authors
// SPDX-License-Identifier: Apache-2.0

#include "ageshift/adapt/ntxent.hpp"

#include <cmath>

#include "ageshift/error.hpp"

namespace ageshift {

namespace {

void check_inputs(const Matrix& e, double temperature) {
  if (!(temperature > 0.0)) throw DomainError("ntxent: temperature must be > 0");
  for (Eigen::Index r = 0; r < e.rows(); ++r)
    if (std::abs(e.row(r).norm() - 1.0) > 1e-3)
      throw DomainError("ntxent: embedding " + std::to_string(r) + " is not unit-norm");
}

}  // namespace

ad::Var ntxent(const ad::Var& embeddings, const PairList& positives, double temperature) {
  check_inputs(embeddings.value(), temperature);
  ad::Var z = ad::normalize_rows(embeddings);
  ad::Var sim = ad::scale(ad::matmul(z, ad::transpose(z)), 1.0 / temperature);
  return ad::pair_log_softmax_loss(sim, positives);
}

double ntxent(const Matrix& embeddings, const PairList& positives, double temperature) {
  ad::Tape tape;
  return ntxent(tape.constant(embeddings), positives, temperature).value()(0, 0);
}

}  // namespace ageshift
