// Copyright 2026 The ageshift Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace ageshift {

// Half-open character range [begin, end) into the encoded text.
struct CharSpan {
  std::size_t begin = 0;
  std::size_t end = 0;

  bool operator==(const CharSpan&) const = default;
};

// Bridges a text encoder's tokenizer. offsets(text)[i] is the character
// range realised by encode(text)[i]; ranges are ordered and disjoint.
class TokenizerAdapter {
 public:
  virtual ~TokenizerAdapter() = default;

  virtual std::string id() const = 0;
  virtual std::vector<int> encode(std::string_view text) const = 0;
  virtual std::vector<CharSpan> offsets(std::string_view text) const = 0;
  // True if `word` is a single whole-word vocabulary entry.
  virtual bool is_vocabulary_word(std::string_view word) const = 0;
  virtual std::string piece(int id) const = 0;
  virtual int vocab_size() const = 0;
};

}  // namespace ageshift
