// core/src/error.cpp

// Copyright 2026  The CDI Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "cdi/error.hpp"

namespace cdi {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kDimensionMismatch: return "dimension_mismatch";
    case ErrorCode::kCountMismatch: return "count_mismatch";
    case ErrorCode::kNonFinite: return "non_finite";
    case ErrorCode::kDuplicateId: return "duplicate_id";
    case ErrorCode::kParse: return "parse_error";
    case ErrorCode::kIo: return "io_error";
    case ErrorCode::kDegenerate: return "degenerate";
    case ErrorCode::kUnknownLabel: return "unknown_label";
    case ErrorCode::kMissingHead: return "missing_head";
    case ErrorCode::kLabelSpaceMismatch: return "label_space_mismatch";
    case ErrorCode::kMissingGoldLabels: return "missing_gold_labels";
    case ErrorCode::kNotFound: return "not_found";
    case ErrorCode::kConflict: return "conflict";
    case ErrorCode::kInvalidFeedback: return "invalid_feedback";
    case ErrorCode::kInvalidState: return "invalid_state";
  }
  return "unknown";
}

}  // namespace cdi
