// Copyright 2026 The ageshift Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ageshift/adapt/backend.hpp"
#include "ageshift/core/config.hpp"
#include "ageshift/core/types.hpp"
#include "ageshift/invert/inversion.hpp"
#include "ageshift/p2pedit/controller.hpp"
#include "ageshift/promptkit/prompts.hpp"
#include "ageshift/regset/regset.hpp"

namespace ageshift {

struct EditResult {
  Image image;
  Matrix latent;
  Matrix source_latent;  // the source branch, i.e. the reconstruction
  int cross_steps = 0;
  int self_steps = 0;
  std::vector<ReplacementEvent> events;
  std::vector<RecordedMap> recorded_maps;
};

// Runs the source (p_in) and target (p_tar) branches jointly from z_T with
// the inversion's null embeddings. The controller must have been built from
// `bundle`. When a tokenizer is given, span indices are checked against the
// tokenised prompts. Throws SpanResolutionError on a span/prompt mismatch
// and StateError when null embeddings are missing.
EditResult edit(const InversionResult& inversion, const PromptBundle& bundle, AttentionController& controller,
                DenoiserBackend& backend, const TokenizerAdapter* tokenizer = nullptr);

struct TransformResult {
  Image image;
  PromptBundle bundle;
  int alpha_in = 0;
  bool alpha_in_estimated = false;
  InversionResult inversion;
  EditResult edit;
};

struct TransformContext {
  const TokenizerAdapter* tokenizer = nullptr;
  const ImageStore* images = nullptr;
  const AgeEstimator* estimator = nullptr;  // needed when alpha_in is absent
};

// estimate alpha_in if missing -> prompts -> DDIM inversion -> null-text
// optimisation -> edit. `adapters`, when non-null, are attached for the
// duration of the call unless the backend already carries them. Component
// errors are rethrown as StageError tagged with the failing stage.
TransformResult transform_age(const EditRequest& request, const IdentityProfile& profile, AdapterWeights* adapters,
                              DenoiserBackend& backend, const PipelineConfig& config, const TransformContext& ctx);

// One inversion shared by every target age.
std::vector<TransformResult> transform_ages(const EditRequest& request, const std::vector<int>& target_ages,
                                            const IdentityProfile& profile, AdapterWeights* adapters,
                                            DenoiserBackend& backend, const PipelineConfig& config,
                                            const TransformContext& ctx);

// Sidecar written next to an edited image.
std::string edit_sidecar_json(const TransformResult& result, const EditRequest& request, const PipelineConfig& config);

}  // namespace ageshift
