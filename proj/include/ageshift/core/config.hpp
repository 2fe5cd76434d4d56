// Copyright 2026 The ageshift Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <string_view>

#include "ageshift/core/types.hpp"

namespace ageshift {

// Every knob of the fine-tune / invert / edit pipeline. Defaults reproduce
// the published experimental settings; fields past `use_extreme_nouns` are
// method defaults that were not published and are exposed for tuning.
struct PipelineConfig {
  // Training.
  int iterations = 800;
  int batch_size = 2;
  double learning_rate = 1.0e-6;
  int lora_rank = 16;
  double lora_scale = 1.0;
  int image_size = 224;

  // Sampling.
  int diffusion_steps = 50;
  double guidance_scale = 7.5;

  // Ablation switches.
  bool use_lora = true;
  bool use_refined_regset = true;
  bool use_hyphenated_age = true;
  bool use_ref_age = true;
  bool use_extreme_nouns = true;

  // Loss weights and contrastive temperature.
  double lambda_reg = 1.0;
  double lambda_id = 0.1;
  double temperature = 0.5;
  double weight_decay = 1.0e-2;

  // Null-text optimisation.
  int inner_steps = 10;
  double inner_lr = 1.0e-2;
  double early_stop_loss = 1.0e-5;

  // Attention control.
  double cross_replace_fraction = 0.8;
  double self_replace_fraction = 0.4;
  bool self_attention_injection = true;

  std::size_t max_references = 5;
  std::string token = "sks";
  long seed = 0;

  // Representative age per group when the refined regularisation set is
  // switched off. Indexed by AgeGroup.
  std::array<int, 6> group_ages{6, 16, 30, 50, 70, 90};

  int group_age(AgeGroup g) const { return group_ages[static_cast<std::size_t>(g)]; }

  bool operator==(const PipelineConfig&) const = default;
};

// Throws ConfigError describing the first broken invariant.
void validate_config(const PipelineConfig& config);

// Flat `key = value` text; '#' starts a comment. Unknown keys are errors.
PipelineConfig parse_config(std::string_view text, PipelineConfig base = {});
PipelineConfig load_config(const std::filesystem::path& path);
// Canonical text: every key, fixed order, round-trips through parse_config.
std::string format_config(const PipelineConfig& config);
void save_config(const std::filesystem::path& path, const PipelineConfig& config);

// Sets a single key from its textual value.
void set_config_value(PipelineConfig& config, std::string_view key, std::string_view value);
// Reads <prefix><KEY> for every key (upper-cased, '.' -> '_').
PipelineConfig apply_env_overrides(PipelineConfig config, std::string_view prefix = "AGESHIFT_");

// SHA-256 of format_config().
std::string config_hash(const PipelineConfig& config);

// The names of the five boolean ablation switches.
const std::array<std::string_view, 5>& ablation_flags();
bool get_flag(const PipelineConfig& config, std::string_view flag);
void set_flag(PipelineConfig& config, std::string_view flag, bool value);

}  // namespace ageshift
