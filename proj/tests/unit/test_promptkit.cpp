// Copyright 2026 The ageshift Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cctype>
#include <random>

#include "ageshift/error.hpp"
#include "ageshift/fixtures/wordpiece.hpp"
#include "ageshift/promptkit/prompts.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace ageshift;

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t b = 0;
  for (;;) {
    const auto e = line.find('\t', b);
    out.push_back(line.substr(b, e == std::string::npos ? std::string::npos : e - b));
    if (e == std::string::npos) return out;
    b = e + 1;
  }
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

TEST_CASE("person nouns") {
  CHECK(person_word(3, Gender::male) == "baby");
  CHECK(person_word(10, Gender::female) == "girl");
  CHECK(person_word(70, Gender::female) == "elderly");
  CHECK(person_word(40, Gender::male) == "man");
  CHECK(person_word(5, Gender::male) == "boy");
  CHECK(person_word(15, Gender::female) == "woman");
  CHECK(person_word(65, Gender::male) == "elderly");
  CHECK(person_word(4, Gender::female, false) == "girl");
  CHECK(person_word(80, Gender::male, false) == "man");
  CHECK_THROWS_AS(person_word(101, Gender::male), DomainError);
  CHECK_THROWS_AS(person_word(-1, Gender::male), DomainError);

  const std::set<std::string> words{"baby", "boy", "girl", "man", "woman", "elderly"};
  for (int a = 0; a <= 100; ++a)
    for (Gender g : {Gender::male, Gender::female})
      for (bool x : {true, false}) CHECK(words.count(person_word(a, g, x)) == 1);
}

TEST_CASE("age phrases") {
  CHECK(age_phrase(25) == "25-year-old");
  CHECK(age_phrase(25, false) == "25 year old");
  CHECK(age_phrase(0) == "0-year-old");
  CHECK_THROWS_AS(age_phrase(150), DomainError);
}

TEST_CASE("bundle examples") {
  const IdentityProfile p{"sks", Gender::male, {{"a.png", 25}}};
  const auto b = build_bundle(p, 35, 80, 25, 25);
  CHECK(b.p_in == "photo of sks man as 35-year-old");
  CHECK(b.p_tar == "photo of sks elderly as 80-year-old");
  CHECK(b.p_reg == "photo of person as 25-year-old");
  CHECK(b.p_ref == "photo of sks person as 25-year-old");
  PromptFlags no_ref;
  no_ref.ref_age = false;
  CHECK(build_bundle(p, 35, 80, 25, 25, no_ref).p_ref == "photo of sks person");
  CHECK(build_bundle(p, 35, 80, 25, 25) == b);
  CHECK_THROWS_AS(build_bundle(p, 35, 180, 25, 25), DomainError);
}

TEST_CASE("prompt strings match the golden table") {
  const std::string text = testing::read_text(testing::source_dir() / "tests/golden/prompts_v1.tsv");
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  int rows = 0;
  while (std::getline(in, line)) {
    const auto f = split_tabs(line);
    REQUIRE(f.size() == 10);
    const IdentityProfile p{"sks", parse_gender(f[0]), {{"r.png", 30}}};
    const int in_age = std::stoi(f[1]), tar = std::stoi(f[2]);
    const PromptFlags flags{f[3] == "1", f[4] == "1", f[5] == "1"};
    const auto b = build_bundle(p, in_age, tar, in_age, in_age, flags);
    CHECK(b.p_ref == f[6]);
    CHECK(b.p_reg == f[7]);
    CHECK(b.p_in == f[8]);
    CHECK(b.p_tar == f[9]);
    ++rows;
  }
  CHECK(rows == 12 * 2 * 8);
}

TEST_CASE("toy tokenizer offsets reproduce the pieces") {
  const auto& tok = WordpieceTokenizer::toy();
  std::mt19937_64 rng(3);
  const std::string alphabet = "abcdefghijklmnopqrstuvwxyzABC0123456789 -!,";
  for (int trial = 0; trial < 300; ++trial) {
    std::string text;
    const int len = static_cast<int>(rng() % 30);
    for (int i = 0; i < len; ++i) text.push_back(alphabet[rng() % alphabet.size()]);
    const auto ids = tok.encode(text);
    const auto offs = tok.offsets(text);
    REQUIRE(ids.size() == offs.size());
    CHECK(tok.encode(text) == ids);
    std::size_t prev = 0;
    for (std::size_t t = 0; t < ids.size(); ++t) {
      CHECK(offs[t].begin >= prev);
      CHECK(offs[t].end <= text.size());
      CHECK(offs[t].begin < offs[t].end);
      prev = offs[t].end;
      if (ids[t] == WordpieceTokenizer::kUnk) continue;
      std::string piece = tok.piece(ids[t]);
      if (piece.rfind("##", 0) == 0) piece = piece.substr(2);
      CHECK(lower(text.substr(offs[t].begin, offs[t].end - offs[t].begin)) == piece);
    }
  }
}

TEST_CASE("toy tokenizer examples") {
  const auto& tok = WordpieceTokenizer::toy();
  const auto pieces = [&](const std::string& s) {
    std::vector<std::string> out;
    for (int id : tok.encode(s)) out.push_back(tok.piece(id));
    return out;
  };
  CHECK(pieces("photo of sks man as 80-year-old") ==
        std::vector<std::string>{"photo", "of", "s", "##k", "##s", "man", "as", "8", "##0", "-", "year", "-", "old"});
  CHECK(pieces("elderly") == std::vector<std::string>{"eld", "##erly"});
  CHECK(pieces("%") == std::vector<std::string>{"[UNK]"});
  CHECK(tok.is_vocabulary_word("man"));
  CHECK_FALSE(tok.is_vocabulary_word("sks"));
}

TEST_CASE("replacement spans: subword age tokens are all included") {
  const auto& tok = WordpieceTokenizer::toy();
  const IdentityProfile p{"sks", Gender::male, {{"a.png", 25}}};
  const auto spans = replacement_spans(build_bundle(p, 35, 80, 25, 25), tok);
  // "eld ##erly" at 5-6, then "8" and "##0" at 8 and 9.
  CHECK(spans.spans_tar == std::vector<int>{5, 6, 8, 9, 10, 11, 12, 13});
  CHECK(spans.spans_in == std::vector<int>{5, 7, 8, 9, 10, 11, 12});
}

TEST_CASE("replacement spans: identical prompts are symmetric") {
  const auto& tok = WordpieceTokenizer::toy();
  const IdentityProfile p{"sks", Gender::female, {{"a.png", 25}}};
  for (bool hyph : {true, false}) {
    PromptFlags f;
    f.hyphenated_age = hyph;
    const auto s = replacement_spans(build_bundle(p, 44, 44, 25, 25, f), tok);
    CHECK(s.spans_in == s.spans_tar);
    for (const auto& a : s.alignment) CHECK(a.source == a.target);
  }
}

TEST_CASE("replacement spans: flag off with a one-token age covers two tokens") {
  const auto& tok = WordpieceTokenizer::toy();
  const IdentityProfile p{"sks", Gender::male, {{"a.png", 25}}};
  PromptFlags f;
  f.hyphenated_age = false;
  const auto b = build_bundle(p, 7, 9, 25, 25, f);
  const auto s = replacement_spans(b, tok);
  CHECK(s.spans_in.size() == 2);
  CHECK(s.spans_tar.size() == 2);
  CHECK(s.spans_in == testing::oracle_spans(b.p_in, false, tok));
}

TEST_CASE("replacement spans never touch photo, of or the token") {
  const auto& tok = WordpieceTokenizer::toy();
  const IdentityProfile p{"sks", Gender::male, {{"a.png", 25}}};
  for (int a = 0; a <= 100; a += 7) {
    const auto b = build_bundle(p, a, 100 - a, 25, 25);
    const auto s = replacement_spans(b, tok);
    const auto offs = tok.offsets(b.p_in);
    const std::size_t token_end = std::string("photo of sks").size();
    for (int t : s.spans_in) CHECK(offs[static_cast<std::size_t>(t)].begin > token_end);
  }
}

TEST_CASE("malformed prompts raise SpanResolutionError") {
  const auto& tok = WordpieceTokenizer::toy();
  PromptBundle b;
  b.p_in = "photo of sks man";
  b.p_tar = "photo of sks man as 30-year-old";
  CHECK_THROWS_AS(replacement_spans(b, tok), SpanResolutionError);
  b.p_in = "photo of sks man as 30 year old";
  CHECK_THROWS_AS(replacement_spans(b, tok), SpanResolutionError);
}

TEST_CASE("attach_spans stores spans in the bundle") {
  const auto& tok = WordpieceTokenizer::toy();
  const IdentityProfile p{"sks", Gender::male, {{"a.png", 25}}};
  const auto b = attach_spans(build_bundle(p, 35, 80, 25, 25), tok);
  const auto s = replacement_spans(b, tok);
  CHECK(b.replace_spans_in == s.spans_in);
  CHECK(b.replace_spans_tar == s.spans_tar);
  CHECK(b.alignment == s.alignment);
  CHECK(b.alignment.front() == SpanPair{5, 5});
}
