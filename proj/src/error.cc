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

#include "phishlens/error.h"

namespace phishlens {

std::string_view ErrorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kIo:
      return "io";
    case ErrorKind::kEmptyCorpus:
      return "empty-corpus";
    case ErrorKind::kInvalidArgument:
      return "invalid-argument";
    case ErrorKind::kInvalidVocabulary:
      return "vocabulary-invalid";
    case ErrorKind::kConfig:
      return "config";
    case ErrorKind::kCheckpointCorrupt:
      return "checkpoint-corrupt";
    case ErrorKind::kShapeMismatch:
      return "shape-mismatch";
    case ErrorKind::kNumericalRank:
      return "numerical-rank";
    case ErrorKind::kContract:
      return "contract";
    case ErrorKind::kStaleCache:
      return "stale-cache";
  }
  return "unknown";
}

}  // namespace phishlens
