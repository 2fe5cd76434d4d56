// Copyright 2026 The ageshift Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <utility>
#include <vector>

#include "ageshift/tensor/autodiff.hpp"

namespace ageshift {

using PairList = std::vector<std::pair<int, int>>;

// Normalised temperature-scaled cross-entropy over the rows of `embeddings`:
//   mean_(i,j) -log( exp(cos(z_i, z_j)/t) / sum_{k != i} exp(cos(z_i, z_k)/t) )
// Rows are expected unit-norm (within 1e-3). An empty pair list gives 0.
// Throws DomainError for temperature <= 0 or non-unit rows.
double ntxent(const Matrix& embeddings, const PairList& positives, double temperature);
ad::Var ntxent(const ad::Var& embeddings, const PairList& positives, double temperature);

}  // namespace ageshift
