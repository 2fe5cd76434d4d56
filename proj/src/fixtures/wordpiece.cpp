// Copyright 2026 The ageshift Authors
// SPDX-License-Identifier: Apache-2.0

#include "ageshift/fixtures/wordpiece.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "ageshift/error.hpp"

namespace ageshift {

extern const char* const kToyVocabText;

namespace {

constexpr std::size_t kMaxWordChars = 64;

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::vector<std::string> split_lines(std::istream& in) {
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

}  // namespace

WordpieceTokenizer::WordpieceTokenizer(std::vector<std::string> vocab, std::string id)
    : vocab_(std::move(vocab)), id_(std::move(id)) {
  static const char* const kSpecial[] = {"[PAD]", "[BOS]", "[EOS]", "[UNK]"};
  if (vocab_.size() < 4) throw ConfigError("wordpiece vocabulary needs the four special tokens");
  for (int i = 0; i < 4; ++i)
    if (vocab_[static_cast<std::size_t>(i)] != kSpecial[i])
      throw ConfigError(std::string("wordpiece vocabulary entry ") + std::to_string(i) + " must be " + kSpecial[i]);
  for (std::size_t i = 0; i < vocab_.size(); ++i)
    if (!index_.emplace(vocab_[i], static_cast<int>(i)).second)
      throw ConfigError("duplicate wordpiece entry '" + vocab_[i] + "'");
}

WordpieceTokenizer WordpieceTokenizer::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open vocabulary " + path.string());
  return WordpieceTokenizer(split_lines(in), "wordpiece:" + path.filename().string());
}

const WordpieceTokenizer& WordpieceTokenizer::toy() {
  static const WordpieceTokenizer tok = [] {
    std::istringstream in(kToyVocabText);
    return WordpieceTokenizer(split_lines(in), "wordpiece-toy-v1");
  }();
  return tok;
}

std::vector<WordpieceTokenizer::Token> WordpieceTokenizer::tokenize(std::string_view text) const {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (std::isspace(c)) {
      ++i;
      continue;
    }
    std::size_t end = i + 1;
    if (std::isalnum(c)) {
      while (end < text.size() && std::isalnum(static_cast<unsigned char>(text[end]))) ++end;
    } else if (!std::ispunct(c)) {
      // Non-ASCII bytes: group the run so a multi-byte character stays whole.
      while (end < text.size() && (static_cast<unsigned char>(text[end]) & 0x80)) ++end;
    }

    const std::string word = lower(text.substr(i, end - i));
    std::vector<Token> pieces;
    bool ok = word.size() <= kMaxWordChars;
    std::size_t start = 0;
    while (ok && start < word.size()) {
      int found = -1;
      std::size_t stop = word.size();
      for (; stop > start; --stop) {
        const std::string candidate = (start > 0 ? "##" : "") + word.substr(start, stop - start);
        if (auto it = index_.find(candidate); it != index_.end() && it->second > kUnk) {
          found = it->second;
          break;
        }
      }
      if (found < 0) {
        ok = false;
        break;
      }
      pieces.push_back({found, {i + start, i + stop}});
      start = stop;
    }
    if (ok) {
      out.insert(out.end(), pieces.begin(), pieces.end());
    } else {
      out.push_back({kUnk, {i, end}});
    }
    i = end;
  }
  return out;
}

std::vector<int> WordpieceTokenizer::encode(std::string_view text) const {
  std::vector<int> ids;
  for (const auto& t : tokenize(text)) ids.push_back(t.id);
  return ids;
}

std::vector<CharSpan> WordpieceTokenizer::offsets(std::string_view text) const {
  std::vector<CharSpan> spans;
  for (const auto& t : tokenize(text)) spans.push_back(t.span);
  return spans;
}

bool WordpieceTokenizer::is_vocabulary_word(std::string_view word) const {
  auto it = index_.find(lower(word));
  return it != index_.end() && it->second > kUnk && !is_continuation(it->second);
}

std::string WordpieceTokenizer::piece(int id) const {
  if (id < 0 || id >= vocab_size()) throw DomainError("token id " + std::to_string(id) + " out of range");
  return vocab_[static_cast<std::size_t>(id)];
}

bool WordpieceTokenizer::is_continuation(int id) const {
  return id >= 0 && id < vocab_size() && vocab_[static_cast<std::size_t>(id)].rfind("##", 0) == 0;
}

}  // namespace ageshift
