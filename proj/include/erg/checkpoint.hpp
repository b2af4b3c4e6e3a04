// Copyright 2026 The ERG Authors.
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

#pragma once

// Binary checkpoint files:
//
//   "ERGCKPT\n" | u64 header length | JSON header | raw float64 payload
//
// The header names the model kind, its dimensions, the training seed and
// every parameter (name, rows, cols) in payload order. Payload values are
// stored column-major in host little-endian order, so a save/load cycle is
// bit-exact.

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "erg/error.hpp"
#include "erg/nn.hpp"

namespace erg {

static_assert(std::endian::native == std::endian::little,
              "checkpoint payloads assume a little-endian host");

inline constexpr char kCheckpointMagic[] = "ERGCKPT\n";

struct CheckpointHeader {
  std::string kind;
  std::uint64_t seed = 0;
  nlohmann::json dims = nlohmann::json::object();
};

inline void save_checkpoint(const std::filesystem::path& path,
                            const CheckpointHeader& header,
                            const nn::ParamList& params) {
  nlohmann::json h;
  h["kind"] = header.kind;
  h["seed"] = header.seed;
  h["dims"] = header.dims;
  h["params"] = nlohmann::json::array();
  for (const auto& [name, p] : params)
    h["params"].push_back(
        {{"name", name}, {"rows", p->value.rows()}, {"cols", p->value.cols()}});
  const std::string text = h.dump();
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic) - 1);
  const std::uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [name, p] : params)
    out.write(reinterpret_cast<const char*>(p->value.data()),
              static_cast<std::streamsize>(p->value.size() * sizeof(double)));
  if (!out) throw std::runtime_error("short write on " + path.string());
}

namespace detail {

inline nlohmann::json read_header_json(std::ifstream& in,
                                       const std::filesystem::path& path) {
  char magic[sizeof(kCheckpointMagic) - 1];
  in.read(magic, sizeof(magic));
  if (!in || std::string(magic, sizeof(magic)) != kCheckpointMagic)
    throw ParseError("not a checkpoint file: " + path.string());
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in || len > (1u << 26))
    throw ParseError("corrupt checkpoint header: " + path.string());
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw ParseError("truncated checkpoint header: " + path.string());
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("corrupt checkpoint header: " + std::string(e.what()));
  }
}

inline std::ifstream open_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path))
    throw PrerequisiteError("missing checkpoint " + path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PrerequisiteError("cannot open checkpoint " + path.string());
  return in;
}

}  // namespace detail

inline CheckpointHeader read_checkpoint_header(
    const std::filesystem::path& path) {
  std::ifstream in = detail::open_checkpoint(path);
  const nlohmann::json h = detail::read_header_json(in, path);
  return {h.at("kind").get<std::string>(), h.at("seed").get<std::uint64_t>(),
          h.at("dims")};
}

// Fills `params` (already shaped by constructing the model from the header
// dims) from the payload. Names and shapes must match exactly.
inline void load_checkpoint(const std::filesystem::path& path,
                            const std::string& expected_kind,
                            const nn::ParamList& params) {
  std::ifstream in = detail::open_checkpoint(path);
  const nlohmann::json h = detail::read_header_json(in, path);
  if (h.at("kind") != expected_kind)
    throw ValidationError("checkpoint " + path.string() + " holds a " +
                          h.at("kind").get<std::string>() + ", expected " +
                          expected_kind);
  const auto& listed = h.at("params");
  if (listed.size() != params.size())
    throw ValidationError("checkpoint dimensionality mismatch: " +
                          std::to_string(listed.size()) + " tensors vs " +
                          std::to_string(params.size()));
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto& [name, p] = params[k];
    if (listed[k].at("name") != name ||
        listed[k].at("rows").get<Eigen::Index>() != p->value.rows() ||
        listed[k].at("cols").get<Eigen::Index>() != p->value.cols())
      throw ValidationError("checkpoint dimensionality mismatch at " + name);
  }
  for (const auto& [name, p] : params) {
    in.read(reinterpret_cast<char*>(p->value.data()),
            static_cast<std::streamsize>(p->value.size() * sizeof(double)));
    if (!in) throw ParseError("truncated checkpoint payload at " + name);
    p->grad.setZero(p->value.rows(), p->value.cols());
    p->adam_m.setZero(p->value.rows(), p->value.cols());
    p->adam_v.setZero(p->value.rows(), p->value.cols());
  }
}

}  // namespace erg
