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

#include "coopcarry/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "coopcarry/error.hpp"

namespace coopcarry {
namespace {

constexpr char kMagic[8] = {'C', 'C', 'A', 'R', 'R', 'Y', 'C', 'K'};

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

template <typename T>
void put(std::ofstream& out, T v) {
  v = to_little(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in, const std::string& path) {
  T v;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    fail(ErrorCode::kIo, path + ": truncated checkpoint");
  }
  return to_little(v);
}

}  // namespace

void CheckpointData::add(std::string name, const ad::Mat& value) {
  tensors.push_back({std::move(name), value});
}

bool CheckpointData::contains(const std::string& name) const {
  for (const NamedTensor& t : tensors) {
    if (t.name == name) return true;
  }
  return false;
}

const ad::Mat& CheckpointData::get(const std::string& name) const {
  for (const NamedTensor& t : tensors) {
    if (t.name == name) return t.value;
  }
  fail(ErrorCode::kIo, "checkpoint has no tensor '" + name + "'");
}

void write_checkpoint(const std::string& path, const CheckpointData& data) {
  nlohmann::json header;
  header["meta"] = data.meta;
  header["tensors"] = nlohmann::json::array();
  for (const NamedTensor& t : data.tensors) {
    header["tensors"].push_back({{"name", t.name}, {"rows", t.value.rows()}, {"cols", t.value.cols()}});
  }
  const std::string text = header.dump();

  // Write next to the target and rename, so a crash never leaves half a file.
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::kIo, "cannot write " + tmp);
    out.write(kMagic, sizeof(kMagic));
    put<std::uint32_t>(out, kCheckpointVersion);
    put<std::uint64_t>(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const NamedTensor& t : data.tensors) {
      for (Eigen::Index i = 0; i < t.value.size(); ++i) put<double>(out, t.value.data()[i]);
    }
    out.flush();
    if (!out) fail(ErrorCode::kIo, "write failed: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    fail(ErrorCode::kIo, "cannot move checkpoint into place: " + path);
  }
}

CheckpointData read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open checkpoint " + path);
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    fail(ErrorCode::kIo, path + ": not a coopcarry checkpoint");
  }
  const auto version = get<std::uint32_t>(in, path);
  if (version != kCheckpointVersion) {
    fail(ErrorCode::kIo, path + ": unsupported checkpoint version " + std::to_string(version));
  }
  const auto header_len = get<std::uint64_t>(in, path);
  if (header_len > (std::uint64_t{1} << 32)) fail(ErrorCode::kIo, path + ": corrupt header");
  std::string text(header_len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(header_len))) {
    fail(ErrorCode::kIo, path + ": truncated checkpoint header");
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kIo, path + ": corrupt checkpoint header: " + e.what());
  }

  CheckpointData data;
  try {
    data.meta = header.at("meta");
    for (const auto& t : header.at("tensors")) {
      const auto rows = t.at("rows").get<Eigen::Index>();
      const auto cols = t.at("cols").get<Eigen::Index>();
      if (rows < 0 || cols < 0) fail(ErrorCode::kIo, path + ": negative tensor shape");
      NamedTensor nt{t.at("name").get<std::string>(), ad::Mat(rows, cols)};
      for (Eigen::Index i = 0; i < nt.value.size(); ++i) {
        nt.value.data()[i] = get<double>(in, path);
      }
      data.tensors.push_back(std::move(nt));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kIo, path + ": malformed checkpoint header: " + e.what());
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    fail(ErrorCode::kIo, path + ": trailing bytes after checkpoint payload");
  }
  return data;
}

void add_params(CheckpointData& data, const std::string& prefix,
                const ad::ParamSet& params) {
  for (const ad::Parameter& p : params.items()) data.add(prefix + p.name, p.value);
}

void load_params(const CheckpointData& data, const std::string& prefix,
                 ad::ParamSet& params) {
  for (ad::Parameter& p : params.items()) {
    const ad::Mat& v = data.get(prefix + p.name);
    if (v.rows() != p.value.rows() || v.cols() != p.value.cols()) {
      fail(ErrorCode::kIo, "checkpoint tensor '" + prefix + p.name + "' has shape " +
                               std::to_string(v.rows()) + "x" + std::to_string(v.cols()) +
                               ", expected " + std::to_string(p.value.rows()) + "x" +
                               std::to_string(p.value.cols()));
    }
    p.value = v;
  }
}

}  // namespace coopcarry
