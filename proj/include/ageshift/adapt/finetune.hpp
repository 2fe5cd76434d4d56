// Copyright 2026 The ageshift Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "ageshift/adapt/backend.hpp"
#include "ageshift/core/config.hpp"
#include "ageshift/core/types.hpp"
#include "ageshift/tensor/image.hpp"

namespace ageshift {

struct TrainingStep {
  int step = 0;
  double total = 0.0;
  double rec_ref = 0.0;
  double rec_reg = 0.0;
  double ntxent = 0.0;
};

struct FinetuneResult {
  AdapterWeights adapters;
  // True when use_lora was off and the backend's own weights were trained.
  bool full_finetune = false;
  std::vector<TrainingStep> log;
};

// Personalisation loop. Each batch mixes self-reference samples (reference
// prompt with that image's age) and regularisation samples (regularisation
// prompt with the entry's age), alternating slot by slot. The objective is
//   L = L_rec_ref + lambda_reg * L_rec_reg + lambda_id * L_ntxent
// with denoising MSE reconstruction terms and NT-Xent over face embeddings
// of the one-step clean estimates of the reference samples (positives: the
// real self-reference images; negatives: the batch's regularisation images).
//
// With use_lora the backend's weights stay untouched and only the adapters
// and the token embedding rows are optimised; without it the backend is
// updated in place. The backend is left detached on return.
//
// Throws ConfigError for an empty regset or invalid profile, NumericError
// with the step index on a non-finite loss.
FinetuneResult finetune(const IdentityProfile& profile, const AgeLabeledManifest& regset,
                        const PipelineConfig& config, DenoiserBackend& backend, const FaceEmbedder* embedder,
                        const ImageStore& images);

}  // namespace ageshift
