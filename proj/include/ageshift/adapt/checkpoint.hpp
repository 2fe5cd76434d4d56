// Copyright 2026 The ageshift Authors
// SPDX-License-Identifier: Apache-2.0

// Adapter checkpoint directory:
//   adapter_manifest.json           rank, scale, targets, config hash, token
//   adapters/<layer>.A.npy, .B.npy  low-rank pairs
//   token_embedding.npy             identity token rows
//   weights/<param>.npy             full weights (only when trained without LoRA)
//   training_log.tsv                per-step losses

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ageshift/adapt/backend.hpp"
#include "ageshift/adapt/finetune.hpp"
#include "ageshift/core/config.hpp"

namespace ageshift {

struct AdapterCheckpoint {
  AdapterWeights adapters;
  bool full_finetune = false;
  std::map<std::string, Matrix> full_weights;
  std::string backend_id;
  std::string config_hash;
  std::vector<TrainingStep> log;
};

// `backend` supplies the full weights when result.full_finetune is set.
// Returns the paths written, relative to `dir`, in a fixed order.
std::vector<std::filesystem::path> save_checkpoint(const std::filesystem::path& dir, const FinetuneResult& result,
                                                   DenoiserBackend& backend, const PipelineConfig& config);
AdapterCheckpoint load_checkpoint(const std::filesystem::path& dir);

// Loads full weights (if any) into the backend and attaches the adapters.
// The checkpoint must outlive the attachment.
void apply_checkpoint(AdapterCheckpoint& checkpoint, DenoiserBackend& backend);

std::string format_training_log(const std::vector<TrainingStep>& log);

}  // namespace ageshift
