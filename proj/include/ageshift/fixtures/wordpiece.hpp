// Copyright 2026 The ageshift Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ageshift/promptkit/tokenizer.hpp"

namespace ageshift {

// Whitespace + punctuation pre-tokenisation followed by greedy
// longest-match-first wordpiece splitting. Continuation pieces carry a
// "##" prefix. A word that cannot be split becomes a single [UNK] token.
//
// Matching is case-insensitive; offsets refer to the original text.
class WordpieceTokenizer : public TokenizerAdapter {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;

  // The first four entries must be [PAD], [BOS], [EOS], [UNK].
  explicit WordpieceTokenizer(std::vector<std::string> vocab, std::string id = "wordpiece");
  static WordpieceTokenizer from_file(const std::filesystem::path& path);
  // The vocabulary shipped under fixtures/v1, compiled in.
  static const WordpieceTokenizer& toy();

  std::string id() const override { return id_; }
  std::vector<int> encode(std::string_view text) const override;
  std::vector<CharSpan> offsets(std::string_view text) const override;
  bool is_vocabulary_word(std::string_view word) const override;
  std::string piece(int id) const override;
  int vocab_size() const override { return static_cast<int>(vocab_.size()); }

  bool is_continuation(int id) const;
  const std::vector<std::string>& vocabulary() const { return vocab_; }

  struct Token {
    int id;
    CharSpan span;
  };
  std::vector<Token> tokenize(std::string_view text) const;

 private:
  std::vector<std::string> vocab_;
  std::unordered_map<std::string, int> index_;
  std::string id_;
};

}  // namespace ageshift
