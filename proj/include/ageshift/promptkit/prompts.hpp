// Copyright 2026 The ageshift Authors
// SPDX-License-Identifier: Apache-2.0

// Prompt grammar for training and editing, and the cross-attention
// replacement spans derived from it.
//
//   reference:      photo of <token> person as <a>-year-old
//   regularisation: photo of person as <a>-year-old
//   edit in/target: photo of <token> <noun> as <a>-year-old
//
// <noun> is chosen from the age and gender (baby/boy/girl/man/woman/elderly).

#pragma once

#include <string>
#include <vector>

#include "ageshift/core/config.hpp"
#include "ageshift/core/types.hpp"
#include "ageshift/promptkit/tokenizer.hpp"

namespace ageshift {

struct PromptFlags {
  bool hyphenated_age = true;
  bool ref_age = true;
  bool extreme_nouns = true;

  static PromptFlags from(const PipelineConfig& c) {
    return {c.use_hyphenated_age, c.use_ref_age, c.use_extreme_nouns};
  }
};

std::string person_word(int age, Gender gender, bool extreme_nouns = true);
std::string age_phrase(int age, bool hyphenated = true);

std::string reference_prompt(const std::string& token, int ref_age, const PromptFlags& flags = {});
std::string regularization_prompt(int reg_age, const PromptFlags& flags = {});
std::string edit_prompt(const std::string& token, int age, Gender gender, const PromptFlags& flags = {});

// Target token position paired with the source position it copies from.
struct SpanPair {
  int target = 0;
  int source = 0;

  bool operator==(const SpanPair&) const = default;
};

struct PromptBundle {
  std::string p_ref;
  std::string p_reg;
  std::string p_in;
  std::string p_tar;
  bool hyphenated_age = true;

  // Filled by attach_spans(); indices into the tokenizer's encode() output.
  std::vector<int> replace_spans_in;
  std::vector<int> replace_spans_tar;
  std::vector<SpanPair> alignment;

  bool operator==(const PromptBundle&) const = default;
};

// Throws DomainError for ages outside [0, 100].
PromptBundle build_bundle(const IdentityProfile& profile, int alpha_in, int alpha_tar, int ref_age, int reg_age,
                          const PromptFlags& flags = {});

struct ReplacementSpans {
  std::vector<int> spans_in;
  std::vector<int> spans_tar;
  // Word-by-word pairing; target positions past the source word's length
  // are left out and keep their own attention.
  std::vector<SpanPair> alignment;
};

// Token positions of the person noun plus, when hyphenated, every token of
// "<a>", "-", "year", "-", "old"; otherwise only the noun and "<a>".
// Throws SpanResolutionError when a word cannot be located.
ReplacementSpans replacement_spans(const PromptBundle& bundle, const TokenizerAdapter& tokenizer);

// build_bundle followed by replacement_spans, spans stored in the bundle.
PromptBundle attach_spans(PromptBundle bundle, const TokenizerAdapter& tokenizer);

// Character ranges of the words whose tokens get replaced, in order
// (noun first). Exposed for inspection and tests.
std::vector<CharSpan> replacement_words(const std::string& prompt, bool hyphenated_age);

}  // namespace ageshift
