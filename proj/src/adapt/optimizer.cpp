// Copyright 2026 The ageshift Authors
// SPDX-License-Identifier: Apache-2.0

#include "ageshift/adapt/optimizer.hpp"

#include <cmath>

namespace ageshift {

void AdamW::update(Parameter& param, const Matrix& grad) { update(param.value, grad, &param); }

void AdamW::update(Matrix& value, const Matrix& grad, const void* key) {
  auto& s = state_[key];
  if (s.m.size() == 0) {
    s.m = Matrix::Zero(value.rows(), value.cols());
    s.v = Matrix::Zero(value.rows(), value.cols());
  }
  value *= 1.0 - opt_.lr * opt_.weight_decay;
  s.m = opt_.beta1 * s.m + (1.0 - opt_.beta1) * grad;
  s.v = opt_.beta2 * s.v + (1.0 - opt_.beta2) * grad.cwiseProduct(grad);
  const double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
  const double step = opt_.lr / bc1;
  value.array() -= step * s.m.array() / ((s.v.array() / bc2).sqrt() + opt_.eps);
}

}  // namespace ageshift
