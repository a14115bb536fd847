/*
 * Copyright 2026 The PhishLens Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "phishlens/tokenizer.h"

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include <fstream>

#include "phishlens/error.h"

namespace phishlens {
namespace {

bool IsWhitespace(UChar32 c) {
  if (c == ' ' || c == '\t' || c == '\n' || c == '\r') return true;
  return u_charType(c) == U_SPACE_SEPARATOR;
}

bool IsControl(UChar32 c) {
  if (c == '\t' || c == '\n' || c == '\r') return false;
  const int8_t type = u_charType(c);
  return type == U_CONTROL_CHAR || type == U_FORMAT_CHAR;
}

bool IsPunctuation(UChar32 c) {
  if ((c >= 33 && c <= 47) || (c >= 58 && c <= 64) || (c >= 91 && c <= 96) ||
      (c >= 123 && c <= 126)) {
    return true;
  }
  return (U_GET_GC_MASK(c) & U_GC_P_MASK) != 0;
}

bool IsCjk(UChar32 c) {
  return (c >= 0x4E00 && c <= 0x9FFF) || (c >= 0x3400 && c <= 0x4DBF) ||
         (c >= 0x20000 && c <= 0x2A6DF) || (c >= 0x2A700 && c <= 0x2B73F) ||
         (c >= 0x2B740 && c <= 0x2B81F) || (c >= 0x2B820 && c <= 0x2CEAF) ||
         (c >= 0xF900 && c <= 0xFAFF) || (c >= 0x2F800 && c <= 0x2FA1F);
}

void AppendUtf8(std::string& out, UChar32 c) {
  char buf[U8_MAX_LENGTH];
  int32_t len = 0;
  UBool error = false;
  U8_APPEND(buf, len, U8_MAX_LENGTH, c, error);
  if (!error) out.append(buf, static_cast<std::size_t>(len));
}

// Lowercase, canonical decomposition, then drop nonspacing marks.
icu::UnicodeString LowerAndStripAccents(const icu::UnicodeString& word) {
  icu::UnicodeString lowered(word);
  lowered.toLower(icu::Locale::getRoot());
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfd = icu::Normalizer2::getNFDInstance(status);
  if (U_FAILURE(status)) {
    throw Error(ErrorKind::kConfig, "ICU NFD normalizer unavailable");
  }
  const icu::UnicodeString decomposed = nfd->normalize(lowered, status);
  if (U_FAILURE(status)) return lowered;
  icu::UnicodeString out;
  for (int32_t i = 0; i < decomposed.length();) {
    const UChar32 c = decomposed.char32At(i);
    if (u_charType(c) != U_NON_SPACING_MARK) out.append(c);
    i += U16_LENGTH(c);
  }
  return out;
}

// Byte offsets of code point starts in a valid UTF-8 string, plus the end.
std::vector<std::size_t> CodePointOffsets(const std::string& word) {
  std::vector<std::size_t> offsets;
  const auto* s = reinterpret_cast<const uint8_t*>(word.data());
  const auto n = static_cast<int32_t>(word.size());
  int32_t i = 0;
  while (i < n) {
    offsets.push_back(static_cast<std::size_t>(i));
    UChar32 c;
    U8_NEXT(s, i, n, c);
  }
  offsets.push_back(word.size());
  return offsets;
}

void WordpieceWord(const std::string& word, const Vocabulary& vocab,
                   std::vector<std::string>& out) {
  const std::vector<std::size_t> offsets = CodePointOffsets(word);
  const std::size_t n_chars = offsets.size() - 1;
  if (n_chars > kMaxWordChars) {
    out.emplace_back(kUnkToken);
    return;
  }
  std::vector<std::string> pieces;
  std::size_t start = 0;
  while (start < n_chars) {
    std::size_t end = n_chars;
    std::string match;
    while (start < end) {
      std::string candidate = word.substr(offsets[start], offsets[end] - offsets[start]);
      if (start > 0) candidate.insert(0, "##");
      if (vocab.Contains(candidate)) {
        match = std::move(candidate);
        break;
      }
      --end;
    }
    if (match.empty()) {
      out.emplace_back(kUnkToken);
      return;
    }
    pieces.push_back(std::move(match));
    start = end;
  }
  for (std::string& p : pieces) out.push_back(std::move(p));
}

}  // namespace

Vocabulary Vocabulary::FromTokens(std::vector<std::string> tokens) {
  Vocabulary vocab;
  vocab.tokens_ = std::move(tokens);
  vocab.index_.reserve(vocab.tokens_.size());
  for (std::size_t i = 0; i < vocab.tokens_.size(); ++i) {
    const auto [it, inserted] =
        vocab.index_.emplace(vocab.tokens_[i], static_cast<TokenId>(i));
    if (!inserted) {
      throw Error(ErrorKind::kInvalidVocabulary,
                  "duplicate vocabulary token '" + vocab.tokens_[i] + "'");
    }
  }
  auto special = [&](std::string_view name) {
    const auto id = vocab.Find(name);
    if (!id) {
      throw Error(ErrorKind::kInvalidVocabulary,
                  "vocabulary lacks special token " + std::string(name));
    }
    return *id;
  };
  vocab.pad_id_ = special(kPadToken);
  vocab.unk_id_ = special(kUnkToken);
  vocab.cls_id_ = special(kClsToken);
  vocab.sep_id_ = special(kSepToken);
  vocab.mask_id_ = special(kMaskToken);
  return vocab;
}

Vocabulary Vocabulary::Load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot read vocabulary file " + path);
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(std::move(line));
  }
  return FromTokens(std::move(tokens));
}

std::optional<TokenId> Vocabulary::Find(std::string_view token) const {
  const auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

TokenId Vocabulary::IdOf(std::string_view token) const {
  return Find(token).value_or(unk_id_);
}

const std::string& Vocabulary::Token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw Error(ErrorKind::kInvalidArgument,
                "token id " + std::to_string(id) + " outside vocabulary");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

bool Vocabulary::IsSpecial(TokenId id) const {
  return id == pad_id_ || id == unk_id_ || id == cls_id_ || id == sep_id_ ||
         id == mask_id_;
}

std::vector<std::string> BasicTokenize(std::string_view text) {
  const icu::UnicodeString input = icu::UnicodeString::fromUTF8(
      icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));

  // Clean and split on whitespace; CJK ideographs become their own words.
  std::vector<icu::UnicodeString> words;
  icu::UnicodeString current;
  auto flush = [&] {
    if (!current.isEmpty()) words.push_back(current);
    current.remove();
  };
  for (int32_t i = 0; i < input.length();) {
    const UChar32 c = input.char32At(i);
    i += U16_LENGTH(c);
    if (c == 0 || c == 0xFFFD || IsControl(c)) continue;
    if (IsWhitespace(c)) {
      flush();
    } else if (IsCjk(c)) {
      flush();
      current.append(c);
      flush();
    } else {
      current.append(c);
    }
  }
  flush();

  std::vector<std::string> out;
  for (const icu::UnicodeString& word : words) {
    const icu::UnicodeString normalized = LowerAndStripAccents(word);
    std::string piece;
    for (int32_t i = 0; i < normalized.length();) {
      const UChar32 c = normalized.char32At(i);
      i += U16_LENGTH(c);
      if (IsPunctuation(c)) {
        if (!piece.empty()) out.push_back(std::move(piece));
        piece.clear();
        std::string p;
        AppendUtf8(p, c);
        out.push_back(std::move(p));
      } else {
        AppendUtf8(piece, c);
      }
    }
    if (!piece.empty()) out.push_back(std::move(piece));
  }
  return out;
}

std::vector<std::string> WordpieceTokenize(std::string_view text,
                                           const Vocabulary& vocab) {
  std::vector<std::string> out;
  for (const std::string& word : BasicTokenize(text)) {
    WordpieceWord(word, vocab, out);
  }
  return out;
}

TokenSequence Encode(std::string_view text, const Vocabulary& vocab,
                     std::size_t max_len) {
  if (max_len < 2) {
    throw Error(ErrorKind::kInvalidArgument, "max_len must be at least 2");
  }
  std::vector<std::string> pieces = WordpieceTokenize(text, vocab);
  if (pieces.size() > max_len - 2) pieces.resize(max_len - 2);

  TokenSequence seq;
  seq.tokens.reserve(pieces.size() + 2);
  seq.tokens.emplace_back(kClsToken);
  for (std::string& p : pieces) seq.tokens.push_back(std::move(p));
  seq.tokens.emplace_back(kSepToken);

  seq.input_ids.assign(max_len, vocab.pad_id());
  seq.attention_mask.assign(max_len, 0);
  for (std::size_t i = 0; i < seq.tokens.size(); ++i) {
    seq.input_ids[i] = vocab.IdOf(seq.tokens[i]);
    seq.attention_mask[i] = 1;
  }
  return seq;
}

nlohmann::json TokenDumpJson(const TokenSequence& sequence) {
  nlohmann::json out = nlohmann::json::array();
  for (std::size_t i = 0; i < sequence.num_real(); ++i) {
    out.push_back({{"token", sequence.tokens[i]}, {"id", sequence.input_ids[i]}});
  }
  return out;
}

}  // namespace phishlens
