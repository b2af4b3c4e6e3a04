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

// Event-aware language model: the classifier-side encoder (with its BiLSTM)
// plus an event head and four relation heads, trained to reproduce the soft
// labels stored in event relation graphs.

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "erg/checkpoint.hpp"
#include "erg/corpus.hpp"
#include "erg/encoder.hpp"
#include "erg/error.hpp"
#include "erg/graph.hpp"
#include "erg/nn.hpp"
#include "erg/relations.hpp"

namespace erg {

// Loss components in (event, coref, temporal, causal, subevent) order.
inline constexpr std::size_t kNumDistillComponents = 5;
using ComponentMask = std::array<bool, kNumDistillComponents>;
inline constexpr ComponentMask kAllComponents{true, true, true, true, true};

inline constexpr std::size_t component_of(Family f) {
  return 1 + family_index(f);
}

struct DistillConfig {
  EncoderConfig encoder;  // bilstm is always switched on
  std::size_t head_hidden = 32;
  std::size_t epochs = 20;
  double lr = 0.01;
  std::uint64_t seed = 13;
  // Keep-probability for pairs whose every family is near-certainly none.
  double pair_subsample = 1.0;
  ComponentMask components = kAllComponents;
};

class EventAwareEncoder {
 public:
  EventAwareEncoder() = default;

  static EventAwareEncoder create(const DistillConfig& config) {
    if (config.head_hidden == 0) throw ConfigError("head_hidden must be > 0");
    nn::Rng rng(config.seed);
    EncoderConfig ec = config.encoder;
    ec.bilstm = true;
    EventAwareEncoder m;
    m.encoder = TextEncoder(ec, rng);
    m.seed = config.seed;
    m.head_hidden = config.head_hidden;
    const Eigen::Index d = m.encoder.dim();
    const auto h = static_cast<Eigen::Index>(config.head_hidden);
    m.event_head_ =
        nn::TwoLayerSoftmax(d, h, 2, nn::Activation::kIdentity, rng);
    for (Family f : kFamilies)
      m.relation_heads_[family_index(f)] = nn::TwoLayerSoftmax(
          2 * d, h, static_cast<Eigen::Index>(arity(f)),
          nn::Activation::kIdentity, rng);
    return m;
  }

  // Q^event for each row of `words` (rows x dim).
  nn::Var event_head(nn::Tape& t, nn::Var words) {
    if (words.cols() != encoder.dim())
      throw ValidationError("event head expects width " +
                            std::to_string(encoder.dim()) + ", got " +
                            std::to_string(words.cols()));
    return event_head_(t, words);
  }

  // Q^family for each row pair (e_i, e_j).
  nn::Var relation_head(nn::Tape& t, Family f, nn::Var e_i, nn::Var e_j) {
    if (family_index(f) >= kFamilies.size())
      throw ValidationError("unknown relation family");
    if (e_i.cols() != encoder.dim() || e_j.cols() != encoder.dim())
      throw ValidationError("relation head expects two embeddings of width " +
                            std::to_string(encoder.dim()));
    return relation_heads_[family_index(f)](t, ad::concat_cols({e_i, e_j}));
  }

  nn::TwoLayerSoftmax& event_layers() { return event_head_; }
  nn::TwoLayerSoftmax& relation_layers(Family f) {
    return relation_heads_[family_index(f)];
  }

  nn::ParamList params() {
    nn::ParamList out = encoder.params();
    event_head_.collect("event_head", out);
    for (Family f : kFamilies)
      relation_heads_[family_index(f)].collect(
          "relation_head." + std::string(to_string(f)), out);
    return out;
  }

  nlohmann::json dims() const {
    return {{"encoder", encoder.dims()}, {"head_hidden", head_hidden}};
  }

  TextEncoder encoder;
  std::uint64_t seed = 0;
  std::size_t head_hidden = 0;

 private:
  nn::TwoLayerSoftmax event_head_;
  std::array<nn::TwoLayerSoftmax, 4> relation_heads_;
};

inline constexpr char kEventAwareCheckpointKind[] = "event_aware_encoder";

inline void save_event_aware(const std::filesystem::path& path,
                             EventAwareEncoder& m) {
  save_checkpoint(path, {kEventAwareCheckpointKind, m.seed, m.dims()},
                  m.params());
}

inline EventAwareEncoder load_event_aware(const std::filesystem::path& path) {
  const CheckpointHeader h = read_checkpoint_header(path);
  if (h.kind != kEventAwareCheckpointKind)
    throw ValidationError(path.string() +
                          " is not an event-aware encoder checkpoint");
  DistillConfig c;
  c.encoder = TextEncoder::config_from_dims(h.dims.at("encoder"));
  c.head_hidden = h.dims.at("head_hidden").get<std::size_t>();
  c.seed = h.seed;
  EventAwareEncoder m = EventAwareEncoder::create(c);
  load_checkpoint(path, kEventAwareCheckpointKind, m.params());
  return m;
}

// ---------------------------------------------------------------------------
// Loss

// -sum P log Q over all rows; arity mismatch throws.
using ad::soft_cross_entropy;

// Loss_soft: unit-weight sum of the five components.
inline nn::Var total_distill_loss(
    const std::array<nn::Var, kNumDistillComponents>& components) {
  return ad::add_all(components);
}

inline double total_distill_loss(
    const std::array<double, kNumDistillComponents>& components) {
  double s = 0.0;
  for (double c : components) s += c;
  return s;
}

// Targets for one document, read from its stored graph.
struct DistillBatch {
  const Document* doc = nullptr;
  nn::Matrix token_targets;              // tokens x 2
  std::vector<std::size_t> first_token;  // per event
  std::vector<EventPair> pairs;
  std::array<nn::Matrix, 4> pair_targets;  // pairs x arity, per family
};

inline constexpr double kNearCertainNone = 0.99;

inline DistillBatch make_distill_batch(const Document& doc,
                                       const EventRelationGraph& g,
                                       double pair_subsample, nn::Rng& rng) {
  if (g.doc_id != doc.doc_id)
    throw ValidationError("graph '" + g.doc_id + "' paired with document '" +
                          doc.doc_id + "'");
  if (g.token_event_probs.size() != doc.tokens.size())
    throw ValidationError("graph for '" + doc.doc_id + "' has " +
                          std::to_string(g.token_event_probs.size()) +
                          " token targets for " +
                          std::to_string(doc.tokens.size()) + " tokens");
  validate_graph(g);
  DistillBatch b;
  b.doc = &doc;
  b.token_targets.resize(static_cast<Eigen::Index>(doc.tokens.size()), 2);
  for (std::size_t k = 0; k < doc.tokens.size(); ++k) {
    if (!is_distribution(g.token_event_probs[k]))
      throw ValidationError("token target is not a distribution");
    b.token_targets(static_cast<Eigen::Index>(k), 0) = g.token_event_probs[k][0];
    b.token_targets(static_cast<Eigen::Index>(k), 1) = g.token_event_probs[k][1];
  }
  for (const EventNode& e : g.events) {
    if (e.token_end > doc.tokens.size())
      throw ValidationError("graph event outside the document tokens");
    b.first_token.push_back(e.token_begin);
  }
  std::vector<const PairRelationProbs*> kept;
  for (const auto& [pair, probs] : g.soft_labels) {
    if (pair_subsample < 1.0) {
      bool near_none = true;
      for (Family f : kFamilies) near_none &= probs.of(f)[kNone] >= kNearCertainNone;
      if (near_none && rng.uniform() >= pair_subsample) continue;
    }
    b.pairs.push_back(pair);
    kept.push_back(&probs);
  }
  for (Family f : kFamilies) {
    nn::Matrix& m = b.pair_targets[family_index(f)];
    m.resize(static_cast<Eigen::Index>(kept.size()),
             static_cast<Eigen::Index>(arity(f)));
    for (std::size_t k = 0; k < kept.size(); ++k)
      for (std::size_t c = 0; c < arity(f); ++c)
        m(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(c)) =
            kept[k]->of(f)[c];
  }
  return b;
}

// Loss_soft for one document. Masked-out components contribute 0.
inline nn::Var distill_loss(
    nn::Tape& t, EventAwareEncoder& m, const DistillBatch& b,
    const ComponentMask& mask = kAllComponents,
    std::array<double, kNumDistillComponents>* components = nullptr) {
  const auto& tokens = b.doc->tokens;
  nn::Var states = m.encoder.encode(t, tokens);
  std::array<nn::Var, kNumDistillComponents> terms;
  for (auto& v : terms) v = t.constant(nn::Matrix::Zero(1, 1));
  if (mask[0] && !tokens.empty()) {
    std::vector<Eigen::Index> rows(tokens.size());
    for (std::size_t k = 0; k < rows.size(); ++k)
      rows[k] = static_cast<Eigen::Index>(k + 1);
    terms[0] = soft_cross_entropy(
        b.token_targets, m.event_head(t, ad::gather_rows(states, rows)));
  }
  if (!b.pairs.empty()) {
    std::vector<Eigen::Index> left, right;
    for (const auto& [i, j] : b.pairs) {
      left.push_back(static_cast<Eigen::Index>(b.first_token[i] + 1));
      right.push_back(static_cast<Eigen::Index>(b.first_token[j] + 1));
    }
    nn::Var ei = ad::gather_rows(states, left);
    nn::Var ej = ad::gather_rows(states, right);
    for (Family f : kFamilies) {
      if (!mask[component_of(f)]) continue;
      terms[component_of(f)] = soft_cross_entropy(
          b.pair_targets[family_index(f)], m.relation_head(t, f, ei, ej));
    }
  }
  if (components)
    for (std::size_t k = 0; k < kNumDistillComponents; ++k)
      (*components)[k] = terms[k].scalar();
  return total_distill_loss(terms);
}

// ---------------------------------------------------------------------------
// Training

struct DistillLog {
  double initial_loss = 0.0;
  std::vector<double> epoch_loss;
  double final_loss = 0.0;
  std::array<double, kNumDistillComponents> final_components{};

  nlohmann::json to_json() const {
    return {{"initial_loss", initial_loss},
            {"epoch_loss", epoch_loss},
            {"final_loss", final_loss},
            {"final_components",
             {{"event", final_components[0]},
              {"coreference", final_components[1]},
              {"temporal", final_components[2]},
              {"causal", final_components[3]},
              {"subevent", final_components[4]}}}};
  }
};

inline std::vector<DistillBatch> make_distill_batches(
    const std::vector<Document>& docs,
    const std::map<std::string, EventRelationGraph>& graphs,
    const DistillConfig& config) {
  nn::Rng rng(config.seed ^ 0x5ab5ull);
  std::vector<DistillBatch> out;
  for (const Document& d : docs) {
    auto it = graphs.find(d.doc_id);
    if (it == graphs.end())
      throw PrerequisiteError("no event relation graph for document '" +
                              d.doc_id + "'");
    out.push_back(make_distill_batch(d, it->second, config.pair_subsample, rng));
  }
  return out;
}

inline double total_distill_loss(EventAwareEncoder& m,
                                 const std::vector<DistillBatch>& batches,
                                 const ComponentMask& mask,
                                 std::array<double, 5>* components = nullptr) {
  double total = 0.0;
  if (components) components->fill(0.0);
  for (const DistillBatch& b : batches) {
    nn::Tape t;
    std::array<double, 5> c{};
    total += distill_loss(t, m, b, mask, &c).scalar();
    if (components)
      for (std::size_t k = 0; k < 5; ++k) (*components)[k] += c[k];
  }
  return total;
}

// `docs` must be tokenized; every doc needs a graph in `graphs`.
inline EventAwareEncoder train_event_aware_encoder(
    const std::vector<Document>& docs,
    const std::map<std::string, EventRelationGraph>& graphs,
    const DistillConfig& config, DistillLog* log = nullptr) {
  if (docs.empty()) throw ValidationError("distillation needs documents");
  if (config.pair_subsample <= 0.0 || config.pair_subsample > 1.0)
    throw ConfigError("pair_subsample must lie in (0, 1]");
  const std::vector<DistillBatch> batches =
      make_distill_batches(docs, graphs, config);
  EventAwareEncoder m = EventAwareEncoder::create(config);

  DistillLog local;
  DistillLog& out = log ? *log : local;
  out = {};
  out.initial_loss = total_distill_loss(m, batches, config.components);

  nn::Rng rng(config.seed ^ 0xd157ull);
  nn::Adam adam({.lr = config.lr});
  nn::ParamList params = m.params();
  std::vector<std::size_t> order(batches.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    double sum = 0.0;
    for (std::size_t k : order) {
      adam.zero_grad(params);
      nn::Tape t;
      nn::Var loss = distill_loss(t, m, batches[k], config.components);
      sum += loss.scalar();
      t.backward(loss);
      adam.step(params);
    }
    out.epoch_loss.push_back(sum);
  }
  out.final_loss = total_distill_loss(m, batches, config.components,
                                      &out.final_components);
  return m;
}

}  // namespace erg
