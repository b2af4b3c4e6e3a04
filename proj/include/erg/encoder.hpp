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

// Contextual token encoder shared by the graph builder, the event-aware
// language model and the classifier.
//
// Words are hashed into a fixed table (bucket 0 is the article start token
// <s>), passed through residual window-3 context layers and, optionally, a
// bidirectional LSTM. encode() returns one row per position with row 0 the
// start token and row k + 1 token k.

#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "erg/corpus.hpp"
#include "erg/error.hpp"
#include "erg/nn.hpp"

namespace erg {

enum class EncoderKind { kDesk, kPretrained };

inline EncoderKind parse_encoder_kind(std::string_view s) {
  if (s == "desk") return EncoderKind::kDesk;
  if (s == "pretrained") return EncoderKind::kPretrained;
  throw ConfigError("unknown encoder '" + std::string(s) +
                    "' (expected desk or pretrained)");
}

inline std::string_view to_string(EncoderKind k) {
  return k == EncoderKind::kDesk ? "desk" : "pretrained";
}

struct EncoderConfig {
  EncoderKind kind = EncoderKind::kDesk;
  std::string word_vectors;  // text file "word v1 ... vd", kPretrained only
  std::size_t vocab_buckets = 2048;
  std::size_t dim = 32;
  std::size_t context_layers = 2;
  bool bilstm = false;
};

inline constexpr std::string_view kStartToken = "<s>";

// FNV-1a over the lower-cased word, folded into buckets 1..n-1.
inline std::size_t token_bucket(std::string_view word, std::size_t buckets) {
  if (word == kStartToken) return 0;
  std::uint64_t h = 1469598103934665603ull;
  for (char c : word) {
    h ^= static_cast<unsigned char>(
        std::tolower(static_cast<unsigned char>(c)));
    h *= 1099511628211ull;
  }
  return 1 + static_cast<std::size_t>(h % (buckets - 1));
}

class TextEncoder {
 public:
  TextEncoder() = default;
  TextEncoder(const EncoderConfig& config, nn::Rng& rng) : config_(config) {
    if (config.dim == 0 || config.vocab_buckets < 2)
      throw ConfigError("encoder needs dim > 0 and at least 2 vocab buckets");
    if (config.bilstm && config.dim % 2 != 0)
      throw ConfigError("bilstm encoder needs an even dim");
    const auto d = static_cast<Eigen::Index>(config.dim);
    embedding_ = nn::Parameter(
        nn::xavier(static_cast<Eigen::Index>(config.vocab_buckets), d, rng));
    for (std::size_t k = 0; k < config.context_layers; ++k)
      context_.emplace_back(d, rng);
    if (config.bilstm) lstm_ = nn::BiLstm(d, d / 2, rng);
    if (config.kind == EncoderKind::kPretrained)
      load_word_vectors(config.word_vectors);
  }

  const EncoderConfig& config() const { return config_; }
  Eigen::Index dim() const { return static_cast<Eigen::Index>(config_.dim); }

  // (n + 1) x dim contextual states; row 0 is the start token.
  nn::Var encode(nn::Tape& t, std::span<const Token> tokens) {
    std::vector<Eigen::Index> ids;
    ids.reserve(tokens.size() + 1);
    ids.push_back(0);
    for (const Token& tok : tokens)
      ids.push_back(static_cast<Eigen::Index>(
          token_bucket(tok.text, config_.vocab_buckets)));
    nn::Var x = t.gather_param(embedding_, std::move(ids));
    for (nn::ContextLayer& layer : context_) x = layer(t, x);
    if (config_.bilstm) x = lstm_(t, x);
    return x;
  }

  // Context-free table row for a word.
  nn::Var word_embedding(nn::Tape& t, std::string_view word) {
    return t.gather_param(
        embedding_, {static_cast<Eigen::Index>(
                        token_bucket(word, config_.vocab_buckets))});
  }

  nn::ParamList params() {
    nn::ParamList out;
    out.emplace_back("encoder.embedding", &embedding_);
    for (std::size_t k = 0; k < context_.size(); ++k)
      context_[k].collect("encoder.context" + std::to_string(k), out);
    if (config_.bilstm) lstm_.collect("encoder.bilstm", out);
    return out;
  }

  nlohmann::json dims() const {
    return {{"kind", std::string(to_string(config_.kind))},
            {"vocab_buckets", config_.vocab_buckets},
            {"dim", config_.dim},
            {"context_layers", config_.context_layers},
            {"bilstm", config_.bilstm}};
  }

  static EncoderConfig config_from_dims(const nlohmann::json& d) {
    EncoderConfig c;
    c.kind = EncoderKind::kDesk;  // weights come from the checkpoint
    c.vocab_buckets = d.at("vocab_buckets").get<std::size_t>();
    c.dim = d.at("dim").get<std::size_t>();
    c.context_layers = d.at("context_layers").get<std::size_t>();
    c.bilstm = d.at("bilstm").get<bool>();
    return c;
  }

 private:
  // Copies vectors for known words into their hash buckets. Width must match.
  void load_word_vectors(const std::string& path) {
    if (path.empty())
      throw ConfigError("pretrained encoder needs a word_vectors file");
    std::ifstream in(path);
    if (!in) throw PrerequisiteError("cannot open word vectors " + path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      std::istringstream fields(line);
      std::string word;
      if (!(fields >> word)) continue;
      std::vector<double> v;
      double x;
      while (fields >> x) v.push_back(x);
      if (v.size() != config_.dim) {
        // word2vec headers carry "count dim" on the first line.
        if (line_no == 1 && v.size() == 1) continue;
        throw ParseError("word vector width " + std::to_string(v.size()) +
                             " != encoder dim " + std::to_string(config_.dim),
                         line_no);
      }
      const auto row = static_cast<Eigen::Index>(
          token_bucket(word, config_.vocab_buckets));
      for (std::size_t k = 0; k < v.size(); ++k)
        embedding_.value(row, static_cast<Eigen::Index>(k)) = v[k];
    }
  }

  EncoderConfig config_;
  nn::Parameter embedding_;
  std::vector<nn::ContextLayer> context_;
  nn::BiLstm lstm_;
};

}  // namespace erg
