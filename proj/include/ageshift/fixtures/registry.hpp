// Copyright 2026 The ageshift Authors
// SPDX-License-Identifier: Apache-2.0

// Backend identifiers accepted on the command line.
//
//   denoiser   tiny | tiny:<seed>
//   estimator  stub | constant:<age>
//   embedder   stub | stub:<seed>
//   tokenizer  toy  | <path to vocab.txt>

#pragma once

#include <memory>
#include <string>

#include "ageshift/adapt/backend.hpp"
#include "ageshift/fixtures/wordpiece.hpp"
#include "ageshift/regset/regset.hpp"

namespace ageshift {

std::unique_ptr<DenoiserBackend> make_backend(const std::string& id);
std::unique_ptr<AgeEstimator> make_estimator(const std::string& id);
std::unique_ptr<FaceEmbedder> make_embedder(const std::string& id);
std::unique_ptr<WordpieceTokenizer> make_tokenizer(const std::string& id);

}  // namespace ageshift
