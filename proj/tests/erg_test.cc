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

#include <cstring>
#include <filesystem>
#include <set>

#include <gtest/gtest.h>

#include "erg/erg.hpp"
#include "erg/synthetic.hpp"
#include "testing.hpp"

namespace erg {
namespace {

namespace fs = std::filesystem;

ErgConfig tiny_config(std::uint64_t seed = 5) {
  ErgConfig c;
  c.encoder.dim = 8;
  c.encoder.vocab_buckets = 64;
  c.head_hidden = 8;
  c.seed = seed;
  return c;
}

fs::path temp_path(const std::string& name) {
  return fs::temp_directory_path() /
         ("erg_test_" + std::to_string(::getpid()) + "_" + name);
}

TEST(FormEventPairs, SmallCases) {
  EXPECT_EQ(form_event_pairs(3),
            (std::vector<EventPair>{{0, 1}, {0, 2}, {1, 2}}));
  EXPECT_TRUE(form_event_pairs(1).empty());
  EXPECT_TRUE(form_event_pairs(0).empty());
}

TEST(FormEventPairs, DistanceCapMatchesEnumeration) {
  std::set<EventPair> oracle;
  for (std::size_t i = 0; i < 10; ++i)
    for (std::size_t j = 0; j < 10; ++j)
      if (i < j && j - i <= 3) oracle.insert({i, j});
  const auto got = form_event_pairs(10, 3);
  EXPECT_EQ(got.size(), 24u);
  EXPECT_EQ(std::set<EventPair>(got.begin(), got.end()), oracle);
}

TEST(TextualOrder, TiesByEndThenId) {
  const std::vector<EventMention> m{
      {"b", 5, 9, 0, 0}, {"a", 5, 9, 0, 0}, {"c", 5, 7, 0, 0}, {"d", 1, 3, 0, 0}};
  EXPECT_EQ(textual_order(m), (std::vector<std::size_t>{3, 2, 1, 0}));
}

TEST(ErgModels, BilstmIsRejected) {
  ErgConfig c = tiny_config();
  c.encoder.bilstm = true;
  EXPECT_THROW(ErgModels::create(c), ConfigError);
}

TEST(ErgModels, CheckpointRoundTripIsBitExact) {
  ErgConfig c = tiny_config();
  c.max_pair_distance = 4;
  ErgModels m = ErgModels::create(c);
  const fs::path path = temp_path("ckpt");
  save_erg(path, m);
  ErgModels back = load_erg(path);
  fs::remove(path);
  const auto a = m.params(), b = back.params();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a[k].first, b[k].first);
    ASSERT_EQ(a[k].second->value.size(), b[k].second->value.size());
    EXPECT_EQ(std::memcmp(a[k].second->value.data(), b[k].second->value.data(),
                          sizeof(double) * a[k].second->value.size()),
              0)
        << a[k].first;
  }
  EXPECT_EQ(back.max_pair_distance, std::optional<std::size_t>(4));
}

TEST(ErgModels, DimensionalityMismatchIsAnError) {
  ErgModels small = ErgModels::create(tiny_config());
  const fs::path path = temp_path("mismatch");
  save_erg(path, small);
  ErgConfig wide = tiny_config();
  wide.encoder.dim = 12;
  ErgModels other = ErgModels::create(wide);
  EXPECT_THROW(load_checkpoint(path, kErgCheckpointKind, other.params()),
               ValidationError);
  fs::remove(path);
  EXPECT_THROW(load_erg(path), PrerequisiteError);
}

TEST(ErgLoss, GradientsMatchFiniteDifferences) {
  ErgConfig c = tiny_config();
  c.encoder.dim = 4;
  c.head_hidden = 3;
  c.encoder.vocab_buckets = 16;
  ErgModels m = ErgModels::create(c);
  const auto docs = synthetic_annotated_corpus(1, 3);
  const ErgExample ex = make_erg_example(docs[0], std::nullopt);
  const auto report = testing::check_gradients(
      m.params(), [&](nn::Tape& t) { return erg_loss(t, m, ex); });
  EXPECT_LT(report.max_relative_error, 1e-4) << report.worst;
  EXPECT_GT(report.checked, 100u);
}

// Independent argmax (first maximum) and label -> edge name tables.
std::size_t first_max(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < v.size(); ++k)
    if (v[k] > v[best]) best = k;
  return best;
}

std::set<std::tuple<std::size_t, std::size_t, std::string>> expected_edges(
    const EventRelationGraph& g) {
  static const std::vector<std::vector<std::string>> names{
      {"", "coreference"},
      {"", "before", "after", "overlap"},
      {"", "causes", "caused_by"},
      {"", "contains", "contained_by"}};
  std::set<std::tuple<std::size_t, std::size_t, std::string>> out;
  for (const auto& [pair, p] : g.soft_labels)
    for (std::size_t f = 0; f < 4; ++f) {
      const std::size_t k = first_max(p.dist[f]);
      if (k == 0) continue;
      out.insert({pair.first, pair.second, names[f][k]});
      if (f == 0) out.insert({pair.second, pair.first, names[f][k]});
    }
  return out;
}

std::set<std::tuple<std::size_t, std::size_t, std::string>> stored_edges(
    const EventRelationGraph& g) {
  std::set<std::tuple<std::size_t, std::size_t, std::string>> out;
  for (const HardEdge& e : g.hard_edges)
    out.insert({e.source, e.target, std::string(to_string(e.type))});
  return out;
}

TEST(ErgInference, TenThousandSoftLabelsAreDistributions) {
  const auto docs = synthetic_annotated_corpus(40, 9, {.min_clauses = 3,
                                                      .max_clauses = 6});
  std::size_t vectors = 0;
  for (std::uint64_t seed = 1; vectors < 10000; ++seed) {
    ErgModels m = ErgModels::create(tiny_config(seed));
    for (const AnnotatedDocument& doc : docs) {
      const TokenEventProbs tokens = predict_token_events(doc.document, m);
      for (const auto& p : tokens) {
        EXPECT_NEAR(p[0] + p[1], 1.0, 1e-6);
        EXPECT_GE(p[0], 0.0);
        ++vectors;
      }
      EventRelationGraph g;
      g.doc_id = doc.document.doc_id;
      g.token_event_probs = tokens;
      const ErgExample ex = make_erg_example(doc, std::nullopt);
      for (std::size_t p = 0; p < ex.order.size(); ++p) {
        const EventMention& em = doc.event_mentions[ex.order[p]];
        g.events.push_back({p, em.token_begin, em.token_end, "x"});
      }
      g.soft_labels = predict_pair_relations(doc.document, g.events, m);
      for (const auto& [pair, probs] : g.soft_labels)
        for (Family f : kFamilies) {
          const auto& d = probs.of(f);
          ASSERT_EQ(d.size(), arity(f));
          double s = 0.0;
          for (double x : d) {
            EXPECT_GE(x, 0.0);
            s += x;
          }
          EXPECT_NEAR(s, 1.0, 1e-6);
          ++vectors;
        }
      derive_hard_edges(g);
      EXPECT_EQ(stored_edges(g), expected_edges(g));
      // Graphs built end to end obey the same rule.
      const EventRelationGraph built = build_graph(doc.document, m);
      EXPECT_EQ(stored_edges(built), expected_edges(built));
      EXPECT_NO_THROW(validate_graph(built));
    }
  }
  EXPECT_GE(vectors, 10000u);
}

TEST(ErgInference, PairsMustBeInTextualOrder) {
  ErgModels m = ErgModels::create(tiny_config());
  const auto docs = synthetic_annotated_corpus(1, 4);
  const Document& d = docs[0].document;
  const std::vector<EventNode> events{{0, 0, 1, "a"}, {1, 2, 3, "b"}};
  EXPECT_NO_THROW(predict_pair_relations(d, events, {{0, 1}}, m));
  EXPECT_THROW(predict_pair_relations(d, events, {{1, 0}}, m), ValidationError);
}

TEST(ErgInference, ZeroPredictedEventsGivesDocumentNodeOnly) {
  ErgModels m = ErgModels::create(tiny_config());
  // Force every token to non-event.
  m.event_head.second.bias.value << 50.0, -50.0;
  const auto docs = synthetic_annotated_corpus(1, 4);
  const EventRelationGraph g = build_graph(docs[0].document, m);
  EXPECT_TRUE(g.events.empty());
  EXPECT_TRUE(g.hard_edges.empty());
  EXPECT_TRUE(g.doc_edges.empty());
  EXPECT_TRUE(g.soft_labels.empty());
  EXPECT_EQ(g.token_event_probs.size(), docs[0].document.tokens.size());
  EXPECT_EQ(deserialize_graph(serialize_graph(g)), g);
}

TEST(ErgInference, MergesEventRuns) {
  Document d;
  d.doc_id = "d";
  d.text = "a big storm hit";
  d = tokenize(std::move(d), SimpleTokenizer{});
  const TokenEventProbs p{{0.9, 0.1}, {0.2, 0.8}, {0.4, 0.6}, {0.5, 0.5}};
  const auto nodes = merge_event_runs(d, p);
  ASSERT_EQ(nodes.size(), 1u);
  EXPECT_EQ(nodes[0].token_begin, 1u);
  EXPECT_EQ(nodes[0].token_end, 3u);
  EXPECT_EQ(nodes[0].trigger, "big storm");
}

TEST(AnnotationGraph, MatchesGoldRelations) {
  const auto docs = synthetic_annotated_corpus(20, 6);
  for (const AnnotatedDocument& doc : docs) {
    const EventRelationGraph g = annotation_graph(doc);
    EXPECT_NO_THROW(validate_graph(g));
    EXPECT_EQ(g.events.size(), doc.event_mentions.size());
    std::size_t causal = 0;
    for (const HardEdge& e : g.hard_edges)
      causal += e.type == EdgeType::kCauses || e.type == EdgeType::kCausedBy;
    EXPECT_EQ(causal, doc.causal_annotations.size());
  }
}

TEST(TrainErg, EmptyTrainingSetIsAnError) {
  EXPECT_THROW(train_erg({}, {}, tiny_config()), ValidationError);
}

TEST(TrainErg, OverfitsFiveSyntheticDocuments) {
  const auto docs = synthetic_annotated_corpus(5, 17);
  ErgConfig c;
  c.encoder.dim = 32;
  c.head_hidden = 32;
  c.epochs = 80;
  c.seed = 3;
  ErgTrainingLog log;
  ErgModels m = train_erg(docs, docs, c, &log);
  EXPECT_LT(log.final_loss, 0.1 * log.initial_loss);
  ASSERT_TRUE(log.dev.has_value());
  EXPECT_EQ(log.dev->token_errors, 0u);
  EXPECT_EQ(log.dev->pair_label_errors, 0u);
  EXPECT_GT(log.dev->pair_labels, 0u);
  // Graphs rebuilt from raw text carry the gold edges.
  for (const AnnotatedDocument& doc : docs) {
    const EventRelationGraph built = build_graph(doc.document, m);
    const EventRelationGraph gold = annotation_graph(doc);
    EXPECT_EQ(built.events, gold.events);
    EXPECT_EQ(built.hard_edges, gold.hard_edges);
  }
}

TEST(TrainErg, FixedSeedIsBitReproducible) {
  const auto docs = synthetic_annotated_corpus(3, 2);
  ErgConfig c = tiny_config();
  c.epochs = 3;
  ErgModels a = train_erg(docs, {}, c), b = train_erg(docs, {}, c);
  const auto pa = a.params(), pb = b.params();
  for (std::size_t k = 0; k < pa.size(); ++k)
    EXPECT_EQ(std::memcmp(pa[k].second->value.data(),
                          pb[k].second->value.data(),
                          sizeof(double) * pa[k].second->value.size()),
              0);
}

}  // namespace
}  // namespace erg
