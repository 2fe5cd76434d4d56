// Copyright 2026 The ageshift Authors
// SPDX-License-Identifier: Apache-2.0

#include "ageshift/promptkit/prompts.hpp"

#include <algorithm>
#include <cctype>

#include "ageshift/error.hpp"

namespace ageshift {

namespace {

void require_age(int age, const char* what) {
  if (!age_in_range(age))
    throw DomainError(std::string(what) + " " + std::to_string(age) + " outside [0, 100]");
}

bool intersects(const CharSpan& a, const CharSpan& b) { return a.begin < b.end && b.begin < a.end; }

bool contains(const CharSpan& outer, const CharSpan& inner) {
  return inner.begin >= outer.begin && inner.end <= outer.end;
}

struct ResolvedSegments {
  // segments[k] = token positions of word k (noun first).
  std::vector<std::vector<int>> segments;
};

ResolvedSegments resolve(const std::string& prompt, bool hyphenated, const TokenizerAdapter& tokenizer,
                         const char* which) {
  const auto words = replacement_words(prompt, hyphenated);
  const auto offs = tokenizer.offsets(prompt);
  const CharSpan noun = words.front();
  const CharSpan phrase{words[1].begin, words.back().end};

  ResolvedSegments out;
  out.segments.resize(words.size());
  for (std::size_t t = 0; t < offs.size(); ++t) {
    if (offs[t].begin == offs[t].end) continue;
    for (std::size_t k = 0; k < words.size(); ++k) {
      if (!intersects(offs[t], words[k])) continue;
      if (!contains(noun, offs[t]) && !contains(phrase, offs[t]))
        throw SpanResolutionError(std::string(which) + " prompt '" + prompt + "': token " + std::to_string(t) +
                                  " straddles a replaced word boundary");
      out.segments[k].push_back(static_cast<int>(t));
      break;
    }
  }
  for (std::size_t k = 0; k < words.size(); ++k) {
    if (out.segments[k].empty())
      throw SpanResolutionError(std::string(which) + " prompt '" + prompt + "': word '" +
                                prompt.substr(words[k].begin, words[k].end - words[k].begin) +
                                "' has no tokens in the offset map");
  }
  return out;
}

}  // namespace

std::string person_word(int age, Gender gender, bool extreme_nouns) {
  require_age(age, "age");
  if (age < 5) {
    if (extreme_nouns) return "baby";
    return gender == Gender::male ? "boy" : "girl";
  }
  if (age < 15) return gender == Gender::male ? "boy" : "girl";
  if (age < 65 || !extreme_nouns) return gender == Gender::male ? "man" : "woman";
  return "elderly";
}

std::string age_phrase(int age, bool hyphenated) {
  require_age(age, "age");
  return std::to_string(age) + (hyphenated ? "-year-old" : " year old");
}

std::string reference_prompt(const std::string& token, int ref_age, const PromptFlags& flags) {
  if (!flags.ref_age) return "photo of " + token + " person";
  return "photo of " + token + " person as " + age_phrase(ref_age, flags.hyphenated_age);
}

std::string regularization_prompt(int reg_age, const PromptFlags& flags) {
  return "photo of person as " + age_phrase(reg_age, flags.hyphenated_age);
}

std::string edit_prompt(const std::string& token, int age, Gender gender, const PromptFlags& flags) {
  return "photo of " + token + " " + person_word(age, gender, flags.extreme_nouns) + " as " +
         age_phrase(age, flags.hyphenated_age);
}

PromptBundle build_bundle(const IdentityProfile& profile, int alpha_in, int alpha_tar, int ref_age, int reg_age,
                          const PromptFlags& flags) {
  require_age(alpha_in, "input age");
  require_age(alpha_tar, "target age");
  require_age(ref_age, "reference age");
  require_age(reg_age, "regularization age");
  PromptBundle b;
  b.p_ref = reference_prompt(profile.token, ref_age, flags);
  b.p_reg = regularization_prompt(reg_age, flags);
  b.p_in = edit_prompt(profile.token, alpha_in, profile.gender, flags);
  b.p_tar = edit_prompt(profile.token, alpha_tar, profile.gender, flags);
  b.hyphenated_age = flags.hyphenated_age;
  return b;
}

std::vector<CharSpan> replacement_words(const std::string& prompt, bool hyphenated_age) {
  auto fail = [&](const std::string& why) {
    throw SpanResolutionError("cannot locate replacement words in '" + prompt + "': " + why);
  };
  const std::size_t as = prompt.rfind(" as ");
  if (as == std::string::npos || as == 0) fail("no ' as ' before the age phrase");
  const std::size_t noun_begin = prompt.rfind(' ', as - 1);
  if (noun_begin == std::string::npos) fail("no person noun");
  const CharSpan noun{noun_begin + 1, as};
  if (noun.begin >= noun.end) fail("empty person noun");

  std::size_t p = as + 4;
  const std::size_t digits_begin = p;
  while (p < prompt.size() && std::isdigit(static_cast<unsigned char>(prompt[p]))) ++p;
  if (p == digits_begin) fail("age phrase does not start with an integer");
  const CharSpan age{digits_begin, p};

  const std::string tail = prompt.substr(p);
  std::vector<CharSpan> words{noun, age};
  if (hyphenated_age) {
    if (tail != "-year-old") fail("expected '<age>-year-old'");
    words.push_back({p, p + 1});
    words.push_back({p + 1, p + 5});
    words.push_back({p + 5, p + 6});
    words.push_back({p + 6, p + 9});
  } else if (tail != " year old") {
    fail("expected '<age> year old'");
  }
  return words;
}

ReplacementSpans replacement_spans(const PromptBundle& bundle, const TokenizerAdapter& tokenizer) {
  const auto in = resolve(bundle.p_in, bundle.hyphenated_age, tokenizer, "input");
  const auto tar = resolve(bundle.p_tar, bundle.hyphenated_age, tokenizer, "target");
  ReplacementSpans out;
  for (std::size_t k = 0; k < in.segments.size(); ++k) {
    const auto& s = in.segments[k];
    const auto& t = tar.segments[k];
    out.spans_in.insert(out.spans_in.end(), s.begin(), s.end());
    out.spans_tar.insert(out.spans_tar.end(), t.begin(), t.end());
    const std::size_t n = std::min(s.size(), t.size());
    for (std::size_t i = 0; i < n; ++i) out.alignment.push_back({t[i], s[i]});
  }
  return out;
}

PromptBundle attach_spans(PromptBundle bundle, const TokenizerAdapter& tokenizer) {
  auto spans = replacement_spans(bundle, tokenizer);
  bundle.replace_spans_in = std::move(spans.spans_in);
  bundle.replace_spans_tar = std::move(spans.spans_tar);
  bundle.alignment = std::move(spans.alignment);
  return bundle;
}

}  // namespace ageshift
