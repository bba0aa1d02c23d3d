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

// Binary checkpoint container.
//
// Layout, all integers little-endian:
//   bytes 0..7   magic "CCARRYCK"
//   u32          format version (kCheckpointVersion)
//   u64          header length H
//   H bytes      UTF-8 JSON header:
//                  {"meta": {...}, "tensors": [{"name", "rows", "cols"}, ...]}
//   payload      every tensor's values as IEEE-754 binary64, row-major, in
//                header order
// Values are copied bit for bit, so a round trip is exact.

#ifndef COOPCARRY_CHECKPOINT_HPP_
#define COOPCARRY_CHECKPOINT_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "coopcarry/autodiff.hpp"
#include "json.hpp"

namespace coopcarry {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  ad::Mat value;
};

struct CheckpointData {
  nlohmann::json meta = nlohmann::json::object();
  std::vector<NamedTensor> tensors;

  void add(std::string name, const ad::Mat& value);
  // Throws kIo naming the tensor when absent.
  const ad::Mat& get(const std::string& name) const;
  bool contains(const std::string& name) const;
};

void write_checkpoint(const std::string& path, const CheckpointData& data);
// Throws kIo for unreadable, truncated or foreign files.
CheckpointData read_checkpoint(const std::string& path);

// Adds every parameter as prefix + name; reading checks names and shapes.
void add_params(CheckpointData& data, const std::string& prefix,
                const ad::ParamSet& params);
void load_params(const CheckpointData& data, const std::string& prefix,
                 ad::ParamSet& params);

}  // namespace coopcarry

#endif  // COOPCARRY_CHECKPOINT_HPP_
