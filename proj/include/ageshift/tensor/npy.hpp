// Copyright 2026 The ageshift Authors
// SPDX-License-Identifier: Apache-2.0

// NumPy .npy reader/writer for 2-D float64 tensors (C order).

#pragma once

#include <filesystem>

#include "ageshift/tensor/autodiff.hpp"

namespace ageshift {

void save_npy(const std::filesystem::path& path, const Matrix& m);
// Accepts <f8 or <f4, 1-D (read as a single row) or 2-D, C order.
Matrix load_npy(const std::filesystem::path& path);

}  // namespace ageshift
