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

#ifndef PHISHLENS_ERROR_H_
#define PHISHLENS_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace phishlens {

// Failure categories shared by every module. The CLI maps kinds that stem
// from bad user input to exit code 2 and everything else to exit code 1.
enum class ErrorKind {
  kIo,
  kEmptyCorpus,
  kInvalidArgument,
  kInvalidVocabulary,
  kConfig,
  kCheckpointCorrupt,
  kShapeMismatch,
  kNumericalRank,
  kContract,
  kStaleCache,
};

std::string_view ErrorKindName(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace phishlens

#endif  // PHISHLENS_ERROR_H_
