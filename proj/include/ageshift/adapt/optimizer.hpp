// Copyright 2026 The ageshift Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <unordered_map>
#include <vector>

#include "ageshift/tensor/autodiff.hpp"

namespace ageshift {

// Adam with decoupled weight decay. weight_decay = 0 gives plain Adam.
class AdamW {
 public:
  struct Options {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-2;
  };

  explicit AdamW(Options options) : opt_(options) {}

  // One update of `param` using `grad`; moment state is keyed by address.
  void update(Parameter& param, const Matrix& grad);
  void update(Matrix& value, const Matrix& grad, const void* key);
  // Advances the shared step counter; call once per optimisation step.
  void next_step() { ++t_; }

 private:
  struct Moments {
    Matrix m, v;
  };
  Options opt_;
  long t_ = 1;
  std::unordered_map<const void*, Moments> state_;
};

}  // namespace ageshift
