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

// Event relation graph builder: a jointly trained event identifier and four
// pairwise relation classifiers over a shared contextual encoder, and the
// construction of an EventRelationGraph from their outputs.

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "erg/checkpoint.hpp"
#include "erg/corpus.hpp"
#include "erg/encoder.hpp"
#include "erg/error.hpp"
#include "erg/graph.hpp"
#include "erg/metrics.hpp"
#include "erg/nn.hpp"
#include "erg/relations.hpp"

namespace erg {

// ---------------------------------------------------------------------------
// Pairing

// All (i, j) with i < j, optionally limited to j - i <= max_distance. Indices
// refer to events already in textual order.
inline std::vector<EventPair> form_event_pairs(
    std::size_t count, std::optional<std::size_t> max_distance = std::nullopt) {
  std::vector<EventPair> out;
  for (std::size_t i = 0; i < count; ++i)
    for (std::size_t j = i + 1; j < count; ++j) {
      if (max_distance && j - i > *max_distance) break;
      out.emplace_back(i, j);
    }
  return out;
}

// Textual order: start offset, then end offset, then mention id.
inline std::vector<std::size_t> textual_order(
    const std::vector<EventMention>& mentions) {
  std::vector<std::size_t> order(mentions.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const EventMention& x = mentions[a];
    const EventMention& y = mentions[b];
    return std::tie(x.char_begin, x.char_end, x.id) <
           std::tie(y.char_begin, y.char_end, y.id);
  });
  return order;
}

// ---------------------------------------------------------------------------
// Models

struct ErgConfig {
  EncoderConfig encoder;
  std::size_t head_hidden = 32;
  std::size_t epochs = 60;
  double lr = 0.01;
  std::uint64_t seed = 13;
  std::optional<std::size_t> max_pair_distance;
};

// Per-token (non-event, event) probabilities.
using TokenEventProbs = std::vector<std::array<double, 2>>;

struct ErgModels {
  TextEncoder encoder;
  nn::TwoLayerSoftmax event_head;
  std::array<nn::TwoLayerSoftmax, 4> relation_heads;
  std::optional<std::size_t> max_pair_distance;
  std::uint64_t seed = 0;
  std::size_t head_hidden = 0;

  static ErgModels create(const ErgConfig& config) {
    if (config.encoder.bilstm)
      throw ConfigError("the graph builder encoder carries no bilstm layer");
    nn::Rng rng(config.seed);
    ErgModels m;
    m.encoder = TextEncoder(config.encoder, rng);
    const Eigen::Index d = m.encoder.dim();
    const auto h = static_cast<Eigen::Index>(config.head_hidden);
    m.event_head =
        nn::TwoLayerSoftmax(d, h, 2, nn::Activation::kTanh, rng);
    for (Family f : kFamilies)
      m.relation_heads[family_index(f)] = nn::TwoLayerSoftmax(
          2 * d, h, static_cast<Eigen::Index>(arity(f)), nn::Activation::kTanh,
          rng);
    m.max_pair_distance = config.max_pair_distance;
    m.seed = config.seed;
    m.head_hidden = config.head_hidden;
    return m;
  }

  nn::TwoLayerSoftmax& head(Family f) { return relation_heads[family_index(f)]; }

  nn::ParamList params() {
    nn::ParamList out = encoder.params();
    event_head.collect("event_head", out);
    for (Family f : kFamilies)
      head(f).collect("relation_head." + std::string(to_string(f)), out);
    return out;
  }

  nlohmann::json dims() const {
    nlohmann::json d{{"encoder", encoder.dims()}, {"head_hidden", head_hidden}};
    d["max_pair_distance"] = max_pair_distance
                                 ? nlohmann::json(*max_pair_distance)
                                 : nlohmann::json(nullptr);
    return d;
  }
};

inline constexpr char kErgCheckpointKind[] = "erg_models";

inline void save_erg(const std::filesystem::path& path, ErgModels& m) {
  save_checkpoint(path, {kErgCheckpointKind, m.seed, m.dims()}, m.params());
}

inline ErgModels load_erg(const std::filesystem::path& path) {
  const CheckpointHeader h = read_checkpoint_header(path);
  if (h.kind != kErgCheckpointKind)
    throw ValidationError(path.string() + " is not a graph builder checkpoint");
  ErgConfig c;
  c.encoder = TextEncoder::config_from_dims(h.dims.at("encoder"));
  c.head_hidden = h.dims.at("head_hidden").get<std::size_t>();
  if (!h.dims.at("max_pair_distance").is_null())
    c.max_pair_distance = h.dims.at("max_pair_distance").get<std::size_t>();
  c.seed = h.seed;
  ErgModels m = ErgModels::create(c);
  load_checkpoint(path, kErgCheckpointKind, m.params());
  return m;
}

// ---------------------------------------------------------------------------
// Training targets

// Gold targets for one annotated document, mentions in textual order.
struct ErgExample {
  const AnnotatedDocument* source = nullptr;
  std::vector<std::size_t> order;        // sorted position -> mention index
  std::vector<std::size_t> first_token;  // per sorted mention
  nn::Matrix token_targets;              // tokens x 2, one-hot
  std::vector<EventPair> pairs;
  std::array<std::vector<std::size_t>, 4> labels;  // per family, per pair
};

inline ErgExample make_erg_example(const AnnotatedDocument& doc,
                                   std::optional<std::size_t> max_distance) {
  ErgExample ex;
  ex.source = &doc;
  const std::size_t n_tokens = doc.document.tokens.size();
  ex.token_targets = nn::Matrix::Zero(static_cast<Eigen::Index>(n_tokens), 2);
  ex.token_targets.col(0).setOnes();
  for (const EventMention& m : doc.event_mentions)
    for (std::size_t k = m.token_begin; k < m.token_end; ++k) {
      ex.token_targets(static_cast<Eigen::Index>(k), 0) = 0.0;
      ex.token_targets(static_cast<Eigen::Index>(k), 1) = 1.0;
    }

  ex.order = textual_order(doc.event_mentions);
  std::map<std::string, std::size_t> position;
  for (std::size_t p = 0; p < ex.order.size(); ++p) {
    const EventMention& m = doc.event_mentions[ex.order[p]];
    position[m.id] = p;
    ex.first_token.push_back(m.token_begin);
  }
  ex.pairs = form_event_pairs(ex.order.size(), max_distance);
  std::map<EventPair, std::size_t> pair_index;
  for (std::size_t k = 0; k < ex.pairs.size(); ++k) pair_index[ex.pairs[k]] = k;
  for (auto& l : ex.labels) l.assign(ex.pairs.size(), kNone);

  auto set_label = [&](Family f, const std::string& a, const std::string& b,
                       const std::string& raw) {
    const std::size_t pa = position.at(a), pb = position.at(b);
    if (pa == pb) return;
    const EventPair key{std::min(pa, pb), std::max(pa, pb)};
    auto it = pair_index.find(key);
    if (it == pair_index.end()) return;  // beyond the distance cap
    ex.labels[family_index(f)][it->second] =
        map_annotation_label(f, raw, pa < pb).index;
  };
  for (const auto& cluster : doc.coref_clusters)
    for (std::size_t x = 0; x < cluster.size(); ++x)
      for (std::size_t y = x + 1; y < cluster.size(); ++y)
        set_label(Family::kCoref, cluster[x], cluster[y], "COREFERENCE");
  for (const RawRelation& r : doc.temporal_annotations)
    set_label(Family::kTemporal, r.a, r.b, r.label);
  for (const RawRelation& r : doc.causal_annotations)
    set_label(Family::kCausal, r.a, r.b, r.label);
  for (const RawRelation& r : doc.subevent_annotations)
    set_label(Family::kSubevent, r.a, r.b, r.label);
  return ex;
}

inline nn::Matrix one_hot(const std::vector<std::size_t>& labels,
                          std::size_t classes) {
  nn::Matrix m = nn::Matrix::Zero(static_cast<Eigen::Index>(labels.size()),
                                  static_cast<Eigen::Index>(classes));
  for (std::size_t k = 0; k < labels.size(); ++k)
    m(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(labels[k])) = 1.0;
  return m;
}

namespace detail {

inline std::vector<Eigen::Index> token_rows(std::size_t begin,
                                           std::size_t count) {
  std::vector<Eigen::Index> rows(count);
  for (std::size_t k = 0; k < count; ++k)
    rows[k] = static_cast<Eigen::Index>(begin + k);
  return rows;
}

// Relation distributions for `pairs` given encoder states; one row per pair.
inline nn::Var pair_distributions(nn::Tape& t, nn::TwoLayerSoftmax& head,
                                  nn::Var states,
                                  const std::vector<std::size_t>& first_token,
                                  const std::vector<EventPair>& pairs) {
  std::vector<Eigen::Index> left, right;
  for (const auto& [i, j] : pairs) {
    left.push_back(static_cast<Eigen::Index>(first_token[i] + 1));
    right.push_back(static_cast<Eigen::Index>(first_token[j] + 1));
  }
  nn::Var x = ad::concat_cols({ad::gather_rows(states, std::move(left)),
                               ad::gather_rows(states, std::move(right))});
  return head(t, x);
}

}  // namespace detail

// Sum of the five cross-entropy terms for one document; `components`
// receives them in (event, coref, temporal, causal, subevent) order.
inline nn::Var erg_loss(nn::Tape& t, ErgModels& m, const ErgExample& ex,
                        std::array<double, 5>* components = nullptr) {
  const auto& tokens = ex.source->document.tokens;
  nn::Var states = m.encoder.encode(t, tokens);
  std::vector<nn::Var> terms;
  if (!tokens.empty()) {
    nn::Var probs = m.event_head(
        t, ad::gather_rows(states, detail::token_rows(1, tokens.size())));
    terms.push_back(ad::soft_cross_entropy(ex.token_targets, probs));
  } else {
    terms.push_back(t.constant(nn::Matrix::Zero(1, 1)));
  }
  for (Family f : kFamilies) {
    if (ex.pairs.empty()) {
      terms.push_back(t.constant(nn::Matrix::Zero(1, 1)));
      continue;
    }
    nn::Var q = detail::pair_distributions(t, m.head(f), states,
                                           ex.first_token, ex.pairs);
    terms.push_back(ad::soft_cross_entropy(
        one_hot(ex.labels[family_index(f)], arity(f)), q));
  }
  if (components)
    for (std::size_t k = 0; k < 5; ++k) (*components)[k] = terms[k].scalar();
  return ad::add_all(terms);
}

// ---------------------------------------------------------------------------
// Evaluation against gold annotations

struct ErgEvaluation {
  metrics::PRF event_macro;
  metrics::CorefScores coref;
  std::array<metrics::PRF, 3> relation_macro;  // temporal, causal, subevent
  std::size_t token_errors = 0;
  std::size_t pair_label_errors = 0;
  std::size_t tokens = 0;
  std::size_t pair_labels = 0;

  bool perfect() const { return token_errors == 0 && pair_label_errors == 0; }
};

inline nlohmann::json to_json(const ErgEvaluation& e) {
  return {{"event_identification", metrics::to_json(e.event_macro)},
          {"coreference", metrics::to_json(e.coref)},
          {"temporal", metrics::to_json(e.relation_macro[0])},
          {"causal", metrics::to_json(e.relation_macro[1])},
          {"subevent", metrics::to_json(e.relation_macro[2])},
          {"token_errors", e.token_errors},
          {"pair_label_errors", e.pair_label_errors},
          {"tokens", e.tokens},
          {"pair_labels", e.pair_labels}};
}

// Event identification is scored per token; relations on gold mention pairs.
inline ErgEvaluation evaluate_erg(ErgModels& m,
                                  const std::vector<AnnotatedDocument>& docs) {
  ErgEvaluation out;
  std::vector<int> tok_pred, tok_gold;
  std::array<std::vector<std::size_t>, 4> rel_pred, rel_gold;
  metrics::CorefAccumulator coref;
  for (const AnnotatedDocument& doc : docs) {
    const ErgExample ex = make_erg_example(doc, m.max_pair_distance);
    const auto& tokens = doc.document.tokens;
    nn::Tape t;
    nn::Var states = m.encoder.encode(t, tokens);
    if (!tokens.empty()) {
      nn::Var probs = m.event_head(
          t, ad::gather_rows(states, detail::token_rows(1, tokens.size())));
      for (Eigen::Index k = 0; k < probs.rows(); ++k) {
        const int pred = probs.value()(k, 1) > probs.value()(k, 0) ? 1 : 0;
        const int gold = ex.token_targets(k, 1) > 0.5 ? 1 : 0;
        tok_pred.push_back(pred);
        tok_gold.push_back(gold);
        out.token_errors += pred != gold;
      }
    }
    DisjointSets pred_sets(ex.order.size());
    for (Family f : kFamilies) {
      if (ex.pairs.empty()) continue;
      nn::Var q = detail::pair_distributions(t, m.head(f), states,
                                             ex.first_token, ex.pairs);
      for (std::size_t k = 0; k < ex.pairs.size(); ++k) {
        const nn::Matrix row = q.value().row(static_cast<Eigen::Index>(k));
        const std::size_t pred =
            argmax(std::span<const double>(row.data(), row.size()));
        const std::size_t gold = ex.labels[family_index(f)][k];
        rel_pred[family_index(f)].push_back(pred);
        rel_gold[family_index(f)].push_back(gold);
        out.pair_label_errors += pred != gold;
        ++out.pair_labels;
        if (f == Family::kCoref && pred == label::kCorefer.index)
          pred_sets.unite(ex.pairs[k].first, ex.pairs[k].second);
      }
    }
    if (!ex.order.empty()) {
      std::map<std::size_t, metrics::Entity> groups;
      for (std::size_t p = 0; p < ex.order.size(); ++p)
        groups[pred_sets.find(p)].push_back(p);
      metrics::EntityPartition pred_part, gold_part;
      for (auto& [root, e] : groups) pred_part.push_back(std::move(e));
      std::map<std::string, std::size_t> position;
      for (std::size_t p = 0; p < ex.order.size(); ++p)
        position[doc.event_mentions[ex.order[p]].id] = p;
      for (const auto& cluster : doc.coref_clusters) {
        metrics::Entity e;
        for (const std::string& id : cluster) e.push_back(position.at(id));
        gold_part.push_back(std::move(e));
      }
      coref.add(pred_part, gold_part);
    }
  }
  out.tokens = tok_pred.size();
  if (!tok_pred.empty())
    out.event_macro = metrics::macro_prf(tok_pred, tok_gold, {0, 1});
  if (!coref.empty()) out.coref = coref.score();
  for (Family f : {Family::kTemporal, Family::kCausal, Family::kSubevent}) {
    const auto& pred = rel_pred[family_index(f)];
    if (pred.empty()) continue;
    std::vector<std::size_t> classes;
    for (std::size_t c = 1; c < arity(f); ++c) classes.push_back(c);
    out.relation_macro[family_index(f) - 1] =
        metrics::macro_prf(pred, rel_gold[family_index(f)], classes);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training

struct ErgTrainingLog {
  double initial_loss = 0.0;
  std::vector<double> epoch_loss;  // summed over training documents
  double final_loss = 0.0;
  std::optional<ErgEvaluation> dev;

  nlohmann::json to_json() const {
    nlohmann::json j{{"initial_loss", initial_loss},
                     {"epoch_loss", epoch_loss},
                     {"final_loss", final_loss}};
    if (dev) j["dev"] = erg::to_json(*dev);
    return j;
  }
};

inline double total_erg_loss(ErgModels& m,
                             const std::vector<ErgExample>& examples) {
  double total = 0.0;
  for (const ErgExample& ex : examples) {
    nn::Tape t;
    total += erg_loss(t, m, ex).scalar();
  }
  return total;
}

// Joint training: every step sums the event, coreference, temporal, causal
// and subevent losses of one document with unit weights.
inline ErgModels train_erg(const std::vector<AnnotatedDocument>& train,
                           const std::vector<AnnotatedDocument>& dev,
                           const ErgConfig& config,
                           ErgTrainingLog* log = nullptr) {
  if (train.empty()) throw ValidationError("train_erg: empty training set");
  ErgModels m = ErgModels::create(config);
  std::vector<ErgExample> examples;
  for (const AnnotatedDocument& d : train)
    examples.push_back(make_erg_example(d, config.max_pair_distance));

  ErgTrainingLog local;
  ErgTrainingLog& out = log ? *log : local;
  out = {};
  out.initial_loss = total_erg_loss(m, examples);

  nn::Rng rng(config.seed ^ 0x5eedull);
  nn::Adam adam({.lr = config.lr});
  nn::ParamList params = m.params();
  std::vector<std::size_t> order(examples.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t k : order) {
      adam.zero_grad(params);
      nn::Tape t;
      nn::Var loss = erg_loss(t, m, examples[k]);
      epoch_loss += loss.scalar();
      t.backward(loss);
      adam.step(params);
    }
    out.epoch_loss.push_back(epoch_loss);
  }
  out.final_loss = total_erg_loss(m, examples);
  if (!dev.empty()) out.dev = evaluate_erg(m, dev);
  return m;
}

// ---------------------------------------------------------------------------
// Inference and graph construction

// Groups maximal runs of event-labelled tokens into event nodes.
inline std::vector<EventNode> merge_event_runs(const Document& doc,
                                               const TokenEventProbs& probs) {
  std::vector<EventNode> nodes;
  std::size_t k = 0;
  while (k < probs.size()) {
    if (argmax(probs[k]) != 1) {
      ++k;
      continue;
    }
    std::size_t end = k + 1;
    while (end < probs.size() && argmax(probs[end]) == 1) ++end;
    EventNode node;
    node.id = nodes.size();
    node.token_begin = k;
    node.token_end = end;
    node.trigger = doc.text.substr(doc.tokens[k].begin,
                                   doc.tokens[end - 1].end - doc.tokens[k].begin);
    nodes.push_back(std::move(node));
    k = end;
  }
  return nodes;
}

namespace detail {

inline void require_tokens(const Document& doc) {
  if (doc.tokens.empty() && !doc.text.empty())
    throw ValidationError("document '" + doc.doc_id + "' is not tokenized");
}

inline TokenEventProbs token_probs(nn::Tape& t, ErgModels& m, nn::Var states,
                                   std::size_t n_tokens) {
  TokenEventProbs out;
  if (n_tokens == 0) return out;
  nn::Var probs =
      m.event_head(t, ad::gather_rows(states, token_rows(1, n_tokens)));
  for (Eigen::Index k = 0; k < probs.rows(); ++k)
    out.push_back({probs.value()(k, 0), probs.value()(k, 1)});
  return out;
}

inline std::map<EventPair, PairRelationProbs> pair_probs(
    nn::Tape& t, ErgModels& m, nn::Var states,
    const std::vector<EventNode>& events, const std::vector<EventPair>& pairs) {
  std::map<EventPair, PairRelationProbs> out;
  if (pairs.empty()) return out;
  std::vector<std::size_t> first;
  for (const EventNode& e : events) first.push_back(e.token_begin);
  for (Family f : kFamilies) {
    nn::Var q = pair_distributions(t, m.head(f), states, first, pairs);
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      const auto r = static_cast<Eigen::Index>(k);
      std::vector<double> d(q.value().cols());
      for (Eigen::Index c = 0; c < q.value().cols(); ++c) d[c] = q.value()(r, c);
      out[pairs[k]].of(f) = std::move(d);
    }
  }
  return out;
}

}  // namespace detail

// Forward passes below only read model parameters, so a trained ErgModels
// can be shared across threads for inference.

inline TokenEventProbs predict_token_events(const Document& doc, ErgModels& m) {
  detail::require_tokens(doc);
  nn::Tape t;
  nn::Var states = m.encoder.encode(t, doc.tokens);
  return detail::token_probs(t, m, states, doc.tokens.size());
}

// Soft labels for the given pairs, which must be in textual order.
inline std::map<EventPair, PairRelationProbs> predict_pair_relations(
    const Document& doc, const std::vector<EventNode>& events,
    const std::vector<EventPair>& pairs, ErgModels& m) {
  detail::require_tokens(doc);
  for (const auto& [i, j] : pairs) {
    if (i >= events.size() || j >= events.size())
      throw ValidationError("pair references an unknown event");
    const EventNode& a = events[i];
    const EventNode& b = events[j];
    if (!(a.token_begin < b.token_begin ||
          (a.token_begin == b.token_begin && a.token_end < b.token_end)))
      throw ValidationError("event pair (" + std::to_string(i) + ", " +
                            std::to_string(j) + ") is not in textual order");
  }
  for (const EventNode& e : events)
    if (e.token_end > doc.tokens.size() || e.token_begin >= e.token_end)
      throw ValidationError("event span outside the token range");
  nn::Tape t;
  nn::Var states = m.encoder.encode(t, doc.tokens);
  return detail::pair_probs(t, m, states, events, pairs);
}

inline std::map<EventPair, PairRelationProbs> predict_pair_relations(
    const Document& doc, const std::vector<EventNode>& events, ErgModels& m) {
  return predict_pair_relations(
      doc, events, form_event_pairs(events.size(), m.max_pair_distance), m);
}

inline EventRelationGraph build_graph(const Document& doc, ErgModels& m) {
  detail::require_tokens(doc);
  EventRelationGraph g;
  g.doc_id = doc.doc_id;
  nn::Tape t;
  nn::Var states = m.encoder.encode(t, doc.tokens);
  g.token_event_probs = detail::token_probs(t, m, states, doc.tokens.size());
  g.events = merge_event_runs(doc, g.token_event_probs);
  g.soft_labels = detail::pair_probs(
      t, m, states, g.events,
      form_event_pairs(g.events.size(), m.max_pair_distance));
  derive_hard_edges(g);
  return g;
}

// Graph from gold annotations: each soft label is the one-hot gold label
// mixed with `smoothing` of the uniform distribution.
inline EventRelationGraph annotation_graph(const AnnotatedDocument& doc,
                                           double smoothing = 0.1) {
  if (smoothing < 0.0 || smoothing >= 1.0)
    throw ValidationError("smoothing must lie in [0, 1)");
  auto smooth = [&](std::size_t label, std::size_t k) {
    std::vector<double> d(k, smoothing / static_cast<double>(k));
    d[label] += 1.0 - smoothing;
    return d;
  };
  const ErgExample ex = make_erg_example(doc, std::nullopt);
  EventRelationGraph g;
  g.doc_id = doc.document.doc_id;
  for (Eigen::Index k = 0; k < ex.token_targets.rows(); ++k) {
    const auto d = smooth(ex.token_targets(k, 1) > 0.5 ? 1 : 0, 2);
    g.token_event_probs.push_back({d[0], d[1]});
  }
  for (std::size_t p = 0; p < ex.order.size(); ++p) {
    const EventMention& m = doc.event_mentions[ex.order[p]];
    g.events.push_back({p, m.token_begin, m.token_end,
                        doc.document.text.substr(m.char_begin,
                                                 m.char_end - m.char_begin)});
  }
  for (std::size_t k = 0; k < ex.pairs.size(); ++k) {
    PairRelationProbs probs;
    for (Family f : kFamilies)
      probs.of(f) = smooth(ex.labels[family_index(f)][k], arity(f));
    g.soft_labels.emplace(ex.pairs[k], std::move(probs));
  }
  derive_hard_edges(g);
  return g;
}

}  // namespace erg
