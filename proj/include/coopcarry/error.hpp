// Copyright 2026 The coopcarry Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef COOPCARRY_ERROR_HPP_
#define COOPCARRY_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace coopcarry {

// Mirrors cc_status in the C API one-to-one.
enum class ErrorCode {
  kInvalidArgument = 1,
  kInvalidGeometry = 2,
  kIo = 3,
  kState = 4,
  kNumeric = 5,
  kConfig = 6,
  kInternal = 7,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace coopcarry

#endif  // COOPCARRY_ERROR_HPP_
