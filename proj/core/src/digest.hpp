// core/src/digest.hpp

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

#ifndef CDI_SRC_DIGEST_HPP_
#define CDI_SRC_DIGEST_HPP_

#include <initializer_list>
#include <string>
#include <string_view>

namespace cdi::internal {

// Lower-case hex SHA-256 of the concatenated parts.
std::string Sha256Hex(std::initializer_list<std::string_view> parts);

}  // namespace cdi::internal

#endif  // CDI_SRC_DIGEST_HPP_
