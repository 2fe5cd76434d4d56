// Copyright 2026 The ageshift Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>
#include <vector>

#include "ageshift/adapt/backend.hpp"
#include "ageshift/core/config.hpp"
#include "ageshift/promptkit/prompts.hpp"

namespace ageshift {

struct ControllerOptions {
  double cross_replace_fraction = 0.8;
  double self_replace_fraction = 0.4;
  bool self_attention_injection = true;
  // Keep before/after copies of every replaced cross-attention map.
  bool record_maps = false;

  static ControllerOptions from(const PipelineConfig& c) {
    return {c.cross_replace_fraction, c.self_replace_fraction, c.self_attention_injection, false};
  }
};

struct ReplacementEvent {
  int step = 0;
  std::string layer;
  bool cross = false;
  // Context columns overwritten (cross) or empty for a full self map.
  std::vector<int> columns;
};

struct RecordedMap {
  int step = 0;
  std::string layer;
  Matrix before;
  Matrix after;
};

// Per-edit state coupling the source and target branches. The source hook
// records the conditional pass's attention; the target hook, run right after
// in the same step, copies source cross-attention columns at the aligned
// span positions for the first floor(cross * S) steps and the full source
// self-attention for the first floor(self * S) steps.
class AttentionController {
 public:
  AttentionController(const PromptBundle& bundle, ControllerOptions options, int context_offset = 1);

  // Throws ConfigError for fractions outside [0, 1].
  void reset(int total_steps);
  void begin_step(int step);
  int cross_steps() const { return cross_steps_; }
  int self_steps() const { return self_steps_; }

  AttentionHook& source_hook() { return source_; }
  AttentionHook& target_hook() { return target_; }

  const std::vector<int>& spans_in() const { return spans_in_; }
  const std::vector<int>& spans_tar() const { return spans_tar_; }
  const std::vector<SpanPair>& alignment() const { return alignment_; }
  const ControllerOptions& options() const { return options_; }
  int context_offset() const { return offset_; }

  const std::vector<ReplacementEvent>& events() const { return events_; }
  const std::vector<RecordedMap>& recorded_maps() const { return maps_; }

 private:
  class SourceHook : public AttentionHook {
   public:
    explicit SourceHook(AttentionController& c) : c_(c) {}
    std::optional<Matrix> on_attention(const AttentionSite& site, const Matrix& probs) override;

   private:
    AttentionController& c_;
  };
  class TargetHook : public AttentionHook {
   public:
    explicit TargetHook(AttentionController& c) : c_(c) {}
    std::optional<Matrix> on_attention(const AttentionSite& site, const Matrix& probs) override;

   private:
    AttentionController& c_;
  };

  std::vector<int> spans_in_;
  std::vector<int> spans_tar_;
  std::vector<SpanPair> alignment_;
  ControllerOptions options_;
  int offset_;
  int step_ = 0;
  int cross_steps_ = 0;
  int self_steps_ = 0;
  std::map<std::string, Matrix> source_maps_;
  std::vector<ReplacementEvent> events_;
  std::vector<RecordedMap> maps_;
  SourceHook source_{*this};
  TargetHook target_{*this};
};

}  // namespace ageshift
