// Copyright 2026 The ageshift Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <string>

#include "ageshift/adapt/backend.hpp"

namespace ageshift {

using LayerSelector = std::function<bool(const LayerShape&)>;

// Every self- and cross-attention projection.
bool attention_projections(const LayerShape& layer);

struct AdapterOptions {
  int rank = 16;
  double scale = 1.0;
  long seed = 0;
  std::string token;  // identity token whose embedding rows become trainable
  LayerSelector targets = attention_projections;
};

// A ~ N(0, 1/d_in), B = 0, so the initial contribution AB is exactly zero.
// Throws ConfigError unless 1 <= rank < min(d_in, d_out) for every target.
AdapterWeights init_adapters(const DenoiserBackend& backend, const AdapterOptions& options);

// Folds the adapters into the backend weights (W' = W + scale·AB). Attaches
// them first when nothing is attached. Throws ShapeError naming the first
// incompatible layer and StateError when the backend is already merged.
void merge(AdapterWeights& adapters, DenoiserBackend& backend);

}  // namespace ageshift
