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

#ifndef PHISHLENS_TOKENIZER_H_
#define PHISHLENS_TOKENIZER_H_

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"

namespace phishlens {

using TokenId = int;

inline constexpr std::string_view kPadToken = "[PAD]";
inline constexpr std::string_view kUnkToken = "[UNK]";
inline constexpr std::string_view kClsToken = "[CLS]";
inline constexpr std::string_view kSepToken = "[SEP]";
inline constexpr std::string_view kMaskToken = "[MASK]";

// Words longer than this many code points become [UNK] without matching.
inline constexpr std::size_t kMaxWordChars = 100;

// Immutable token table. Ids are dense line indices of the vocabulary file.
class Vocabulary {
 public:
  // One token per line; throws kInvalidVocabulary if a special token is
  // missing or a token repeats.
  static Vocabulary Load(const std::string& path);
  static Vocabulary FromTokens(std::vector<std::string> tokens);

  std::size_t size() const { return tokens_.size(); }
  std::optional<TokenId> Find(std::string_view token) const;
  bool Contains(std::string_view token) const { return Find(token).has_value(); }
  // Id of a token known to be present, [UNK] otherwise.
  TokenId IdOf(std::string_view token) const;
  const std::string& Token(TokenId id) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  TokenId pad_id() const { return pad_id_; }
  TokenId unk_id() const { return unk_id_; }
  TokenId cls_id() const { return cls_id_; }
  TokenId sep_id() const { return sep_id_; }
  TokenId mask_id() const { return mask_id_; }
  bool IsSpecial(TokenId id) const;

 private:
  Vocabulary() = default;

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
  TokenId pad_id_ = 0;
  TokenId unk_id_ = 0;
  TokenId cls_id_ = 0;
  TokenId sep_id_ = 0;
  TokenId mask_id_ = 0;
};

// Fixed-length model input. `tokens` lists the non-pad tokens, [CLS] and
// [SEP] included, in input order.
struct TokenSequence {
  std::vector<TokenId> input_ids;
  std::vector<int> attention_mask;
  std::vector<std::string> tokens;

  std::size_t max_len() const { return input_ids.size(); }
  std::size_t num_real() const { return tokens.size(); }

  friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

// Uncased pre-tokenization: drops control characters, normalizes
// whitespace, isolates CJK ideographs, lowercases, strips accents and splits
// punctuation into standalone tokens.
std::vector<std::string> BasicTokenize(std::string_view text);

// Greedy longest-prefix WordPiece over the pre-tokenized words of `text`.
std::vector<std::string> WordpieceTokenize(std::string_view text,
                                           const Vocabulary& vocab);

// [CLS] pieces [SEP], truncated from the end to max_len and padded.
TokenSequence Encode(std::string_view text, const Vocabulary& vocab,
                     std::size_t max_len);

// JSON array of {token, id} for the non-pad positions.
nlohmann::json TokenDumpJson(const TokenSequence& sequence);

}  // namespace phishlens

#endif  // PHISHLENS_TOKENIZER_H_
