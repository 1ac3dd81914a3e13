// core/include/cdi/error.hpp

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

#ifndef CDI_ERROR_HPP_
#define CDI_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace cdi {

enum class ErrorCode {
  kInvalidArgument,
  kDimensionMismatch,
  kCountMismatch,
  kNonFinite,
  kDuplicateId,
  kParse,
  kIo,
  kDegenerate,
  kUnknownLabel,
  kMissingHead,
  kLabelSpaceMismatch,
  kMissingGoldLabels,
  kNotFound,
  kConflict,
  kInvalidFeedback,
  kInvalidState,
};

std::string_view ErrorCodeName(ErrorCode code);

// All library failures are reported through this type. The message is
// meant for humans; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string &what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace cdi

#endif  // CDI_ERROR_HPP_
