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

// Heterogeneous graph encoder and conspiracy classifier.
//
// Event nodes start from their trigger's first-token state, the document
// node from the <s> state, and every attention edge from the token embedding
// of its relation word. Each layer runs relation-aware attention over event
// neighborhoods (one softmax per node and relation type, mean over the 8
// types) and standard attention from the document node to all events.

#include <array>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "erg/checkpoint.hpp"
#include "erg/corpus.hpp"
#include "erg/distill.hpp"
#include "erg/encoder.hpp"
#include "erg/erg.hpp"
#include "erg/error.hpp"
#include "erg/graph.hpp"
#include "erg/metrics.hpp"
#include "erg/nn.hpp"
#include "erg/relations.hpp"

namespace erg {

// ---------------------------------------------------------------------------
// Configuration

enum class Variant { kBaseline, kFeatures, kSoft, kHard, kFull };

inline constexpr std::array<Variant, 5> kVariants{
    Variant::kBaseline, Variant::kFeatures, Variant::kSoft, Variant::kHard,
    Variant::kFull};

inline std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::kBaseline: return "baseline";
    case Variant::kFeatures: return "features";
    case Variant::kSoft: return "soft";
    case Variant::kHard: return "hard";
    case Variant::kFull: return "full";
  }
  return "?";
}

inline Variant parse_variant(std::string_view s) {
  for (Variant v : kVariants)
    if (to_string(v) == s) return v;
  throw ConfigError("unknown variant '" + std::string(s) +
                    "' (expected baseline, features, soft, hard or full)");
}

inline bool uses_distilled_encoder(Variant v) {
  return v == Variant::kSoft || v == Variant::kFull;
}
inline bool uses_graph_layers(Variant v) {
  return v == Variant::kHard || v == Variant::kFull;
}
inline bool needs_graphs(Variant v) {
  return uses_graph_layers(v) || v == Variant::kFeatures;
}

enum class Ablation { kCoref, kTemporal, kCausal, kSubevent, kEventIdentify };

inline constexpr std::array<Ablation, 5> kAblations{
    Ablation::kEventIdentify, Ablation::kCoref, Ablation::kTemporal,
    Ablation::kCausal, Ablation::kSubevent};

inline std::string_view to_string(Ablation a) {
  switch (a) {
    case Ablation::kCoref: return "coref";
    case Ablation::kTemporal: return "temporal";
    case Ablation::kCausal: return "causal";
    case Ablation::kSubevent: return "subevent";
    case Ablation::kEventIdentify: return "event_identify";
  }
  return "?";
}

inline Ablation parse_ablation(std::string_view s) {
  for (Ablation a : kAblations)
    if (to_string(a) == s) return a;
  throw ConfigError("unknown ablation '" + std::string(s) +
                    "' (expected coref, temporal, causal, subevent or "
                    "event_identify)");
}

inline std::optional<Ablation> ablation_of(Family f) {
  switch (f) {
    case Family::kCoref: return Ablation::kCoref;
    case Family::kTemporal: return Ablation::kTemporal;
    case Family::kCausal: return Ablation::kCausal;
    case Family::kSubevent: return Ablation::kSubevent;
  }
  return std::nullopt;
}

struct ClassifierConfig {
  Variant variant = Variant::kFull;
  std::size_t layers = 2;
  std::size_t hidden_width = 32;  // classification head hidden layer
  bool residuals = false;
  std::size_t epochs = 20;
  double lr = 0.005;
  std::uint64_t seed = 13;
  std::set<Ablation> ablate;
  EncoderConfig encoder;  // fresh encoder for baseline, features and hard
};

// Rejects flag combinations that name a component the variant lacks.
inline void validate(const ClassifierConfig& c) {
  if (c.hidden_width == 0) throw ConfigError("hidden_width must be > 0");
  if (c.layers == 0 && uses_graph_layers(c.variant))
    throw ConfigError("variant " + std::string(to_string(c.variant)) +
                      " needs layers >= 1");
  for (Ablation a : c.ablate) {
    if (c.variant == Variant::kBaseline || c.variant == Variant::kFeatures)
      throw ConfigError("ablate " + std::string(to_string(a)) +
                        " has no effect on variant " +
                        std::string(to_string(c.variant)));
    if (a == Ablation::kEventIdentify && c.variant == Variant::kHard)
      throw ConfigError(
          "ablate event_identify needs a distilled encoder (soft or full)");
  }
}

// Distillation terms kept under the ablation set.
inline ComponentMask distill_components(const std::set<Ablation>& ablate) {
  ComponentMask m = kAllComponents;
  if (ablate.contains(Ablation::kEventIdentify)) m[0] = false;
  for (Family f : kFamilies)
    if (ablate.contains(*ablation_of(f))) m[component_of(f)] = false;
  return m;
}

inline bool keeps_edge(EdgeType t, const std::set<Ablation>& ablate) {
  return !ablate.contains(*ablation_of(family_of(t)));
}

// ---------------------------------------------------------------------------
// Graph encoder state

struct GraphLayer {
  nn::Parameter w_r;      // 3d x d
  nn::Parameter w_q;      // d x d
  nn::Parameter w_k;      // d x d
  nn::Parameter w_v;      // d x d
  nn::Parameter w_doc;    // d x d, shared by document and event sides
  nn::Parameter a_doc;    // d x 1, document half of a
  nn::Parameter a_event;  // d x 1, event half of a

  GraphLayer() = default;
  GraphLayer(Eigen::Index d, nn::Rng& rng)
      : w_r(nn::xavier(3 * d, d, rng)),
        w_q(nn::xavier(d, d, rng)),
        w_k(nn::xavier(d, d, rng)),
        w_v(nn::xavier(d, d, rng)),
        w_doc(nn::xavier(d, d, rng)),
        a_doc(nn::xavier(d, 1, rng)),
        a_event(nn::xavier(d, 1, rng)) {}

  void collect(const std::string& prefix, nn::ParamList& out) {
    out.emplace_back(prefix + ".w_r", &w_r);
    out.emplace_back(prefix + ".w_q", &w_q);
    out.emplace_back(prefix + ".w_k", &w_k);
    out.emplace_back(prefix + ".w_v", &w_v);
    out.emplace_back(prefix + ".w_doc", &w_doc);
    out.emplace_back(prefix + ".a_doc", &a_doc);
    out.emplace_back(prefix + ".a_event", &a_event);
  }
};

struct GraphEncoderState {
  std::vector<GraphLayer> layers;
  std::array<std::string, kNumEdgeTypes> relation_words;
  bool residuals = false;

  GraphEncoderState() = default;
  GraphEncoderState(Eigen::Index dim, std::size_t count, bool residual,
                    nn::Rng& rng)
      : residuals(residual) {
    for (std::size_t l = 0; l < count; ++l) layers.emplace_back(dim, rng);
    for (EdgeType t : kEdgeTypes)
      relation_words[static_cast<std::size_t>(t)] = relation_word(t);
  }

  void collect(nn::ParamList& out) {
    for (std::size_t l = 0; l < layers.size(); ++l)
      layers[l].collect("graph.layer" + std::to_string(l), out);
  }
};

// Directed attention edges: `node` attends to `neighbor` through `type`.
// A stored hard edge (s, t, type) yields s <- t via type and t <- s via its
// inverse; coreference is already stored in both directions.
struct AttentionEdges {
  std::vector<Eigen::Index> node;
  std::vector<Eigen::Index> neighbor;
  std::vector<EdgeType> type;

  std::size_t size() const { return node.size(); }
};

inline AttentionEdges attention_edges(const EventRelationGraph& g,
                                      const std::set<Ablation>& ablate = {}) {
  AttentionEdges out;
  auto add = [&](std::size_t i, std::size_t j, EdgeType t) {
    out.node.push_back(static_cast<Eigen::Index>(i));
    out.neighbor.push_back(static_cast<Eigen::Index>(j));
    out.type.push_back(t);
  };
  for (const HardEdge& e : g.hard_edges) {
    if (!keeps_edge(e.type, ablate)) continue;
    add(e.source, e.target, e.type);
    if (e.type != EdgeType::kCoreference) add(e.target, e.source, inverse(e.type));
  }
  return out;
}

struct NodeStates {
  std::optional<nn::Var> h;  // events x d; empty when there are no events
  nn::Var d;                 // 1 x d
  std::optional<nn::Var> r;  // edges x d; empty when there are no edges
};

// `token_states` is the encoder output for the document, row 0 = <s>.
inline NodeStates init_node_states(nn::Tape& t, const EventRelationGraph& g,
                                   nn::Var token_states, TextEncoder& encoder,
                                   const GraphEncoderState& state,
                                   const AttentionEdges& edges) {
  NodeStates s;
  s.d = ad::row(token_states, 0);
  if (!g.events.empty()) {
    std::vector<Eigen::Index> rows;
    for (const EventNode& e : g.events) {
      if (e.token_begin >= e.token_end ||
          static_cast<Eigen::Index>(e.token_end) >= token_states.rows())
        throw ValidationError("event " + std::to_string(e.id) +
                              " spans tokens outside the document");
      rows.push_back(static_cast<Eigen::Index>(e.token_begin + 1));
    }
    s.h = ad::gather_rows(token_states, std::move(rows));
  }
  if (edges.size() > 0) {
    std::vector<nn::Var> words;
    for (EdgeType type : kEdgeTypes)
      words.push_back(encoder.word_embedding(
          t, state.relation_words[static_cast<std::size_t>(type)]));
    nn::Var table = ad::concat_rows(words);  // 8 x d
    std::vector<Eigen::Index> ids;
    for (EdgeType type : edges.type) ids.push_back(static_cast<Eigen::Index>(type));
    s.r = ad::gather_rows(table, std::move(ids));
  }
  return s;
}

// Per-edge attention weights and document weights of the last layer call,
// for inspection in tests.
struct AttentionTrace {
  nn::Matrix relation_alpha;  // edges x 1
  nn::Matrix doc_alpha;       // 1 x events
};

// One relation-aware layer. Returns updated h and r; isolated nodes get 0.
inline std::pair<nn::Var, nn::Var> relation_attention_layer(
    nn::Tape& t, nn::Var h, nn::Var r, const AttentionEdges& edges,
    GraphLayer& layer, AttentionTrace* trace = nullptr) {
  const Eigen::Index d = h.cols();
  if (r.cols() != d || layer.w_q.value.rows() != d)
    throw ValidationError("relation attention: width mismatch");
  if (static_cast<std::size_t>(r.rows()) != edges.size())
    throw ValidationError("relation attention: one relation row per edge");
  nn::Var x = ad::concat_cols({ad::gather_rows(h, edges.node), r,
                               ad::gather_rows(h, edges.neighbor)});
  nn::Var r_new = ad::matmul(x, t.param(layer.w_r));
  nn::Var q = ad::gather_rows(ad::matmul(h, t.param(layer.w_q)), edges.node);
  nn::Var k = ad::matmul(r_new, t.param(layer.w_k));
  nn::Var v = ad::matmul(r_new, t.param(layer.w_v));
  std::vector<std::size_t> group(edges.size());
  for (std::size_t e = 0; e < edges.size(); ++e)
    group[e] = static_cast<std::size_t>(edges.node[e]) * kNumEdgeTypes +
               static_cast<std::size_t>(edges.type[e]);
  nn::Var alpha = ad::segment_softmax(ad::row_dot(q, k), std::move(group));
  if (trace) trace->relation_alpha = alpha.value();
  nn::Var pooled = ad::segment_sum(ad::scale_rows(v, alpha), edges.node, h.rows());
  return {ad::scale(pooled, 1.0 / static_cast<double>(kNumEdgeTypes)), r_new};
}

// Relation layer for a graph with events but no edges: every h becomes 0.
inline nn::Var isolated_layer(nn::Tape& t, nn::Var h) {
  return t.constant(nn::Matrix::Zero(h.rows(), h.cols()));
}

// One document attention layer; with no events d passes through and
// `passed_through` is set.
inline nn::Var doc_attention_layer(nn::Tape& t, nn::Var d,
                                   const std::optional<nn::Var>& h,
                                   GraphLayer& layer,
                                   bool* passed_through = nullptr,
                                   AttentionTrace* trace = nullptr) {
  if (passed_through) *passed_through = !h.has_value();
  if (!h) return d;
  nn::Var w = t.param(layer.w_doc);
  nn::Var wh = ad::matmul(*h, w);                            // n x d
  nn::Var doc_score = ad::matmul(ad::matmul(d, w), t.param(layer.a_doc));
  nn::Var event_score = ad::matmul(wh, t.param(layer.a_event));  // n x 1
  nn::Var e = ad::leaky_relu(ad::add_row(event_score, doc_score));
  nn::Var alpha = ad::softmax_rows(ad::transpose(e));        // 1 x n
  if (trace) trace->doc_alpha = alpha.value();
  return ad::matmul(alpha, wh);
}

// Runs every layer; returns the final document vector.
inline nn::Var encode_graph(nn::Tape& t, GraphEncoderState& state,
                            const EventRelationGraph& g, nn::Var token_states,
                            TextEncoder& encoder,
                            const std::set<Ablation>& ablate = {},
                            AttentionTrace* trace = nullptr) {
  const AttentionEdges edges = attention_edges(g, ablate);
  NodeStates s = init_node_states(t, g, token_states, encoder, state, edges);
  for (GraphLayer& layer : state.layers) {
    nn::Var d_next = doc_attention_layer(t, s.d, s.h, layer, nullptr, trace);
    if (s.h) {
      nn::Var h_next = isolated_layer(t, *s.h);
      if (s.r) {
        auto [h_new, r_new] =
            relation_attention_layer(t, *s.h, *s.r, edges, layer, trace);
        h_next = h_new;
        s.r = r_new;
      }
      s.h = state.residuals ? ad::add(h_next, *s.h) : h_next;
    }
    s.d = state.residuals && s.h ? ad::add(d_next, s.d) : d_next;
  }
  return s.d;
}

// ---------------------------------------------------------------------------
// Classifier

inline constexpr std::size_t kSoftFeatureWidth = 2 + 2 + 4 + 3 + 3;

// Mean token event distribution and mean per-family pair distributions.
// Graphs without tokens or pairs fall back to the all-none distributions.
inline nn::Matrix soft_features(const EventRelationGraph& g) {
  nn::Matrix f = nn::Matrix::Zero(1, kSoftFeatureWidth);
  if (g.token_event_probs.empty()) {
    f(0, 0) = 1.0;
  } else {
    for (const auto& p : g.token_event_probs) {
      f(0, 0) += p[0];
      f(0, 1) += p[1];
    }
    f.leftCols(2) /= static_cast<double>(g.token_event_probs.size());
  }
  Eigen::Index col = 2;
  for (Family fam : kFamilies) {
    const auto k = static_cast<Eigen::Index>(arity(fam));
    if (g.soft_labels.empty()) {
      f(0, col) = 1.0;
    } else {
      for (const auto& [pair, probs] : g.soft_labels)
        for (Eigen::Index c = 0; c < k; ++c)
          f(0, col + c) += probs.of(fam)[static_cast<std::size_t>(c)];
      f.block(0, col, 1, k) /= static_cast<double>(g.soft_labels.size());
    }
    col += k;
  }
  return f;
}

// (benign, conspiracy) distribution for a document vector.
inline nn::Var classify_document(nn::Tape& t, nn::Var d,
                                 nn::TwoLayerSoftmax& head) {
  return head(t, d);
}

inline constexpr double kDecisionThreshold = 0.5;

inline Label decide(double conspiracy_probability) {
  return conspiracy_probability >= kDecisionThreshold ? Label::kConspiracy
                                                      : Label::kBenign;
}

class ConspiracyClassifier {
 public:
  ConspiracyClassifier() = default;

  // `distilled` supplies the encoder for soft and full; others start fresh.
  static ConspiracyClassifier create(const ClassifierConfig& config,
                                     const EventAwareEncoder* distilled) {
    validate(config);
    nn::Rng rng(config.seed);
    ConspiracyClassifier m;
    m.config_ = config;
    if (uses_distilled_encoder(config.variant)) {
      if (!distilled)
        throw PrerequisiteError("variant " +
                                std::string(to_string(config.variant)) +
                                " needs a distilled event-aware encoder");
      m.encoder = distilled->encoder;
    } else {
      EncoderConfig ec = config.encoder;
      ec.bilstm = true;
      m.encoder = TextEncoder(ec, rng);
    }
    const Eigen::Index d = m.encoder.dim();
    m.graph = GraphEncoderState(
        d, uses_graph_layers(config.variant) ? config.layers : 0,
        config.residuals, rng);
    m.head = nn::TwoLayerSoftmax(
        m.input_width(), static_cast<Eigen::Index>(config.hidden_width), 2,
        nn::Activation::kTanh, rng);
    return m;
  }

  const ClassifierConfig& config() const { return config_; }

  // Width of the head input: the article embedding plus soft features.
  Eigen::Index input_width() const {
    return encoder.dim() + (config_.variant == Variant::kFeatures
                                ? static_cast<Eigen::Index>(kSoftFeatureWidth)
                                : 0);
  }

  nn::Var article_embedding(nn::Tape& t, const Document& doc,
                            const EventRelationGraph* g,
                            AttentionTrace* trace = nullptr) {
    if (needs_graphs(config_.variant) && !g)
      throw PrerequisiteError("variant " +
                              std::string(to_string(config_.variant)) +
                              " needs an event relation graph for '" +
                              doc.doc_id + "'");
    nn::Var states = encoder.encode(t, doc.tokens);
    if (uses_graph_layers(config_.variant))
      return encode_graph(t, graph, *g, states, encoder, config_.ablate, trace);
    nn::Var d = ad::row(states, 0);
    if (config_.variant == Variant::kFeatures)
      d = ad::concat_cols({d, t.constant(soft_features(*g))});
    return d;
  }

  nn::Var probabilities(nn::Tape& t, const Document& doc,
                        const EventRelationGraph* g) {
    return classify_document(t, article_embedding(t, doc, g), head);
  }

  double conspiracy_probability(const Document& doc,
                                const EventRelationGraph* g) {
    nn::Tape t;
    return probabilities(t, doc, g).value()(0, 1);
  }

  nn::ParamList params() {
    nn::ParamList out = encoder.params();
    graph.collect(out);
    head.collect("classifier_head", out);
    return out;
  }

  nlohmann::json dims() const {
    nlohmann::json ablate = nlohmann::json::array();
    for (Ablation a : config_.ablate) ablate.push_back(std::string(to_string(a)));
    return {{"variant", std::string(to_string(config_.variant))},
            {"layers", config_.layers},
            {"hidden_width", config_.hidden_width},
            {"residuals", config_.residuals},
            {"ablate", ablate},
            {"encoder", encoder.dims()}};
  }

  TextEncoder encoder;
  GraphEncoderState graph;
  nn::TwoLayerSoftmax head;

 private:
  ClassifierConfig config_;
};

inline constexpr char kClassifierCheckpointKind[] = "conspiracy_classifier";

inline void save_classifier(const std::filesystem::path& path,
                            ConspiracyClassifier& m) {
  save_checkpoint(path, {kClassifierCheckpointKind, m.config().seed, m.dims()},
                  m.params());
}

inline ConspiracyClassifier load_classifier(const std::filesystem::path& path) {
  const CheckpointHeader h = read_checkpoint_header(path);
  if (h.kind != kClassifierCheckpointKind)
    throw ValidationError(path.string() + " is not a classifier checkpoint");
  ClassifierConfig c;
  c.variant = parse_variant(h.dims.at("variant").get<std::string>());
  c.layers = h.dims.at("layers").get<std::size_t>();
  c.hidden_width = h.dims.at("hidden_width").get<std::size_t>();
  c.residuals = h.dims.at("residuals").get<bool>();
  for (const auto& a : h.dims.at("ablate"))
    c.ablate.insert(parse_ablation(a.get<std::string>()));
  c.encoder = TextEncoder::config_from_dims(h.dims.at("encoder"));
  c.seed = h.seed;
  // Weights come from the file, so a placeholder encoder stands in for the
  // distilled one.
  std::optional<EventAwareEncoder> shell;
  if (uses_distilled_encoder(c.variant)) {
    DistillConfig dc;
    dc.encoder = c.encoder;
    dc.head_hidden = 1;
    shell = EventAwareEncoder::create(dc);
  }
  ConspiracyClassifier m =
      ConspiracyClassifier::create(c, shell ? &*shell : nullptr);
  load_checkpoint(path, kClassifierCheckpointKind, m.params());
  return m;
}

// ---------------------------------------------------------------------------
// Training and evaluation

struct ClassifierExample {
  const Document* doc = nullptr;
  const EventRelationGraph* graph = nullptr;  // may be null for baseline, soft
  Label label = Label::kBenign;
};

inline nn::Matrix label_target(Label l) {
  nn::Matrix m = nn::Matrix::Zero(1, 2);
  m(0, l == Label::kConspiracy ? 1 : 0) = 1.0;
  return m;
}

inline nn::Var classifier_loss(nn::Tape& t, ConspiracyClassifier& m,
                               const ClassifierExample& ex) {
  return ad::soft_cross_entropy(label_target(ex.label),
                                m.probabilities(t, *ex.doc, ex.graph));
}

struct ClassifierEvaluation {
  metrics::PRF conspiracy;  // the conspiracy class as positive
  metrics::PRF macro;
  double accuracy = 0.0;
  std::size_t documents = 0;
};

inline nlohmann::json to_json(const ClassifierEvaluation& e) {
  return {{"conspiracy", metrics::to_json(e.conspiracy)},
          {"macro", metrics::to_json(e.macro)},
          {"accuracy", metrics::round2(e.accuracy)},
          {"documents", e.documents}};
}

inline ClassifierEvaluation score_labels(const std::vector<Label>& pred,
                                         const std::vector<Label>& gold) {
  ClassifierEvaluation e;
  e.documents = gold.size();
  if (gold.empty()) return e;
  e.conspiracy = metrics::binary_prf(pred, gold, Label::kConspiracy);
  e.macro = metrics::macro_prf(
      pred, gold, std::vector<Label>{Label::kConspiracy, Label::kBenign});
  std::size_t right = 0;
  for (std::size_t k = 0; k < gold.size(); ++k) right += pred[k] == gold[k];
  e.accuracy = 100.0 * static_cast<double>(right) /
               static_cast<double>(gold.size());
  return e;
}

inline ClassifierEvaluation evaluate_classifier(
    ConspiracyClassifier& m, const std::vector<ClassifierExample>& examples) {
  std::vector<Label> pred, gold;
  for (const ClassifierExample& ex : examples) {
    pred.push_back(decide(m.conspiracy_probability(*ex.doc, ex.graph)));
    gold.push_back(ex.label);
  }
  return score_labels(pred, gold);
}

struct ClassifierLog {
  std::vector<double> epoch_loss;
  std::vector<double> dev_f1;  // conspiracy-class F1 per epoch
  std::size_t best_epoch = 0;

  nlohmann::json to_json() const {
    return {{"epoch_loss", epoch_loss},
            {"dev_f1", dev_f1},
            {"best_epoch", best_epoch}};
  }
};

// Trains with one Adam step per document; keeps the epoch with the best dev
// conspiracy F1 (the last epoch when dev is empty).
inline ConspiracyClassifier train_classifier(
    const std::vector<ClassifierExample>& train,
    const std::vector<ClassifierExample>& dev, const ClassifierConfig& config,
    const EventAwareEncoder* distilled = nullptr,
    ClassifierLog* log = nullptr) {
  if (train.empty()) throw ValidationError("train_classifier: no documents");
  ConspiracyClassifier m = ConspiracyClassifier::create(config, distilled);
  ClassifierLog local;
  ClassifierLog& out = log ? *log : local;
  out = {};

  nn::ParamList params = m.params();
  std::vector<nn::Matrix> best;
  double best_f1 = -1.0;
  nn::Rng rng(config.seed ^ 0xc1a5ull);
  nn::Adam adam({.lr = config.lr});
  std::vector<std::size_t> order(train.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    double sum = 0.0;
    for (std::size_t k : order) {
      adam.zero_grad(params);
      nn::Tape t;
      nn::Var loss = classifier_loss(t, m, train[k]);
      sum += loss.scalar();
      t.backward(loss);
      adam.step(params);
    }
    out.epoch_loss.push_back(sum);
    if (!dev.empty()) {
      const double f1 = evaluate_classifier(m, dev).conspiracy.f1;
      out.dev_f1.push_back(f1);
      if (f1 > best_f1) {
        best_f1 = f1;
        out.best_epoch = epoch;
        best.clear();
        for (const auto& [name, p] : params) best.push_back(p->value);
      }
    }
  }
  if (!best.empty()) {
    for (std::size_t k = 0; k < params.size(); ++k)
      params[k].second->value = best[k];
  } else if (config.epochs > 0) {
    out.best_epoch = config.epochs - 1;
  }
  return m;
}

struct Prediction {
  Label label = Label::kBenign;
  double probability = 0.0;  // of conspiracy
  EventRelationGraph graph;
};

// End to end: graph from the builder, then the classifier.
inline Prediction predict(const Document& doc, ErgModels& erg,
                          ConspiracyClassifier& classifier) {
  Prediction p;
  p.graph = build_graph(doc, erg);
  p.probability = classifier.conspiracy_probability(doc, &p.graph);
  p.label = decide(p.probability);
  return p;
}

}  // namespace erg
