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

#include <map>
#include <set>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "erg/corpus.hpp"
#include "testing.hpp"

namespace erg {
namespace {

Corpus parse(const std::string& text) {
  std::istringstream in(text);
  return parse_labeled_corpus(in);
}

std::vector<AnnotatedDocument> parse_annotated(const std::string& text) {
  std::istringstream in(text);
  return parse_annotated_corpus(in);
}

TEST(LabeledCorpus, LoadsRecordsInFileOrder) {
  const Corpus c = parse(
      R"({"doc_id": "b", "media_source": "s1", "text": "One.", "label": "benign"})"
      "\n"
      R"({"doc_id": "a", "media_source": "s2", "text": "Two."})"
      "\n");
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c.documents[0].doc_id, "b");
  EXPECT_EQ(c.documents[0].label, Label::kBenign);
  EXPECT_EQ(c.documents[1].doc_id, "a");
  EXPECT_FALSE(c.documents[1].label.has_value());
}

TEST(LabeledCorpus, DuplicateIdIsValidationError) {
  EXPECT_THROW(
      parse(R"({"doc_id": "a", "media_source": "s", "text": "x"})"
            "\n"
            R"({"doc_id": "a", "media_source": "s", "text": "y"})"),
      ValidationError);
}

TEST(LabeledCorpus, MalformedRecordReportsLine) {
  try {
    parse(R"({"doc_id": "a", "media_source": "s", "text": "x"})"
          "\n"
          R"({"doc_id": "b", "text": "missing source"})");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  try {
    parse("{not json");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 1u);
  }
}

TEST(LabeledCorpus, WriteThenParseRoundTrips) {
  Corpus c;
  c.documents.push_back({"d1", "src", "Text \"quoted\".", Label::kConspiracy, {}});
  c.documents.push_back({"d2", "src2", "More.", std::nullopt, {}});
  std::ostringstream out;
  write_labeled_corpus(out, c);
  EXPECT_EQ(parse(out.str()).documents, c.documents);
}

TEST(Tokenize, SplitsWordsAndPunctuation) {
  Document d{"d", "s", "Murder.", std::nullopt, {}};
  d = tokenize(d, SimpleTokenizer{});
  ASSERT_EQ(d.tokens.size(), 2u);
  EXPECT_EQ(d.tokens[0], (Token{"Murder", 0, 6}));
  EXPECT_EQ(d.tokens[1], (Token{".", 6, 7}));
}

TEST(Tokenize, KeepsInnerApostrophesAndHyphens) {
  Document d{"d", "s", "it's covid-19 now", std::nullopt, {}};
  d = tokenize(d, SimpleTokenizer{});
  ASSERT_EQ(d.tokens.size(), 3u);
  EXPECT_EQ(d.tokens[0].text, "it's");
  EXPECT_EQ(d.tokens[1].text, "covid-19");
}

TEST(Tokenize, EmptyTextThrows) {
  EXPECT_THROW(tokenize(Document{"d", "s", "", std::nullopt, {}},
                        SimpleTokenizer{}),
               ValidationError);
}

TEST(Tokenize, RandomTextPropertiesHold) {
  // Reconstruction oracle: surfaces plus the recorded gaps give back the
  // text; spans are monotone; tokenization is idempotent.
  const std::string alphabet = "ab Z9.,'-\t\n!é";
  nn::Rng rng(7);
  for (int trial = 0; trial < 500; ++trial) {
    std::string text;
    const std::size_t len = 1 + rng.index(40);
    for (std::size_t k = 0; k < len; ++k)
      text += alphabet[rng.index(alphabet.size())];
    Document d{"d", "s", text, std::nullopt, {}};
    const Document once = tokenize(d, SimpleTokenizer{});
    EXPECT_NO_THROW(check_token_spans(once));
    EXPECT_EQ(reconstruct_text(once), text);
    EXPECT_EQ(tokenize(once, SimpleTokenizer{}), once);
  }
}

constexpr char kAnnotated[] =
    R"({"doc_id": "a1", "text": "The storm caused a flood and the flood hit.",)"
    R"( "events": [{"id": "m1", "start": 19, "end": 24},)"
    R"( {"id": "m2", "start": 33, "end": 38}, {"id": "m3", "start": 39, "end": 42}],)"
    R"( "clusters": [["m1", "m2"]],)"
    R"( "temporal": [["m2", "m3", "BEFORE"], ["m1", "t1", "BEFORE"]],)"
    R"( "causal": [["m1", "m3", "CAUSE"]], "subevent": [],)"
    R"( "timex": [{"id": "t1"}], "timex_temporal": [["t1", "m3", "BEFORE"]]})";

TEST(AnnotatedCorpus, FixtureClustersAndTimexFiltering) {
  const auto docs = parse_annotated(kAnnotated);
  ASSERT_EQ(docs.size(), 1u);
  const AnnotatedDocument& d = docs[0];
  ASSERT_EQ(d.event_mentions.size(), 3u);
  EXPECT_EQ(d.event_mentions[0].token_begin, 4u);  // "flood"
  EXPECT_EQ(d.event_mentions[0].token_end, 5u);
  // {m1, m2} plus the unclustered m3 as a singleton.
  ASSERT_EQ(d.coref_clusters.size(), 2u);
  EXPECT_EQ(d.coref_clusters[0], (std::vector<std::string>{"m1", "m2"}));
  EXPECT_EQ(d.coref_clusters[1], (std::vector<std::string>{"m3"}));
  // The event/time-expression BEFORE link is gone; the event-event one stays.
  ASSERT_EQ(d.temporal_annotations.size(), 1u);
  EXPECT_EQ(d.temporal_annotations[0], (RawRelation{"m2", "m3", "BEFORE"}));
  EXPECT_EQ(d.causal_annotations[0].label, "CAUSE");
}

TEST(AnnotatedCorpus, EmptyDocument) {
  const auto docs = parse_annotated(
      R"({"doc_id": "e", "text": "Nothing happens here."})");
  ASSERT_EQ(docs.size(), 1u);
  EXPECT_TRUE(docs[0].event_mentions.empty());
  EXPECT_TRUE(docs[0].coref_clusters.empty());
  EXPECT_TRUE(docs[0].temporal_annotations.empty());
  EXPECT_TRUE(docs[0].causal_annotations.empty());
  EXPECT_TRUE(docs[0].subevent_annotations.empty());
}

TEST(AnnotatedCorpus, UnknownMentionIsValidationError) {
  EXPECT_THROW(parse_annotated(
                   R"({"doc_id": "x", "text": "a b", "events": [{"id": "m1", "start": 0, "end": 1}],)"
                   R"( "causal": [["m1", "m9", "CAUSE"]]})"),
               ValidationError);
  EXPECT_THROW(parse_annotated(
                   R"({"doc_id": "x", "text": "a b", "events": [{"id": "m1", "start": 0, "end": 1}],)"
                   R"( "clusters": [["m1", "m2"]]})"),
               ValidationError);
  // Causal links never involve time expressions.
  EXPECT_THROW(parse_annotated(
                   R"({"doc_id": "x", "text": "a b", "events": [{"id": "m1", "start": 0, "end": 1}],)"
                   R"( "timex": [{"id": "t"}], "causal": [["m1", "t", "CAUSE"]]})"),
               ValidationError);
}

TEST(AnnotatedCorpus, SerializeThenReloadIsIdentity) {
  const auto docs = parse_annotated(kAnnotated);
  std::ostringstream out;
  write_annotated_corpus(out, docs);
  EXPECT_EQ(parse_annotated(out.str()), docs);
}

// ---------------------------------------------------------------------------
// Splits

Corpus synthetic_corpus(std::size_t conspiracy_sources,
                        std::size_t benign_sources, nn::Rng& rng,
                        std::size_t max_docs_per_source = 4) {
  Corpus c;
  auto add = [&](const std::string& prefix, std::size_t n, Label label) {
    for (std::size_t s = 0; s < n; ++s) {
      const std::size_t docs = 1 + rng.index(max_docs_per_source);
      for (std::size_t k = 0; k < docs; ++k)
        c.documents.push_back({prefix + std::to_string(s) + "_" +
                                   std::to_string(k),
                               prefix + std::to_string(s), "text", label, {}});
    }
  };
  add("c", conspiracy_sources, Label::kConspiracy);
  add("b", benign_sources, Label::kBenign);
  return c;
}

// Brute force: any two documents sharing a source share a split.
bool sources_disjoint(const Corpus& c, const SplitManifest& m) {
  for (const Document& x : c.documents)
    for (const Document& y : c.documents)
      if (x.media_source == y.media_source &&
          m.assignment.at(x.doc_id) != m.assignment.at(y.doc_id))
        return false;
  return true;
}

TEST(MediaSourceSplit, TableCountsGiveValidManifest) {
  nn::Rng rng(11);
  const Corpus c = synthetic_corpus(58, 92, rng);
  const std::map<Label, SourceCounts> counts{
      {Label::kConspiracy, {39, 11, 8}}, {Label::kBenign, {43, 27, 22}}};
  const SplitManifest m = make_media_source_split(c, counts, 2024);
  EXPECT_NO_THROW(check_manifest(c, m));
  EXPECT_TRUE(sources_disjoint(c, m));
  const SplitTable t = count_sources(c, m);
  EXPECT_EQ(t.counts.at(Label::kConspiracy),
            (std::array<std::size_t, 3>{39, 11, 8}));
  EXPECT_EQ(t.counts.at(Label::kBenign),
            (std::array<std::size_t, 3>{43, 27, 22}));
  EXPECT_EQ(make_media_source_split(c, counts, 2024), m);
}

TEST(MediaSourceSplit, SingleSourceClassIsInfeasible) {
  nn::Rng rng(12);
  const Corpus c = synthetic_corpus(1, 5, rng);
  EXPECT_THROW(make_media_source_split(
                   c, {{Label::kConspiracy, {1, 0, 0}},
                       {Label::kBenign, {3, 1, 1}}},
                   1),
               InfeasibleError);
}

TEST(MediaSourceSplit, TooFewSourcesForCountsIsInfeasible) {
  nn::Rng rng(13);
  const Corpus c = synthetic_corpus(4, 4, rng);
  EXPECT_THROW(make_media_source_split(
                   c, {{Label::kConspiracy, {3, 1, 1}},
                       {Label::kBenign, {2, 1, 1}}},
                   1),
               InfeasibleError);
}

TEST(MediaSourceSplit, RandomCorporaAreAlwaysDisjoint) {
  nn::Rng rng(14);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t cs = 3 + rng.index(6), bs = 3 + rng.index(6);
    const Corpus c = synthetic_corpus(cs, bs, rng, 3);
    auto counts_for = [&](std::size_t n) {
      const std::size_t train = 1 + rng.index(n - 2);
      const std::size_t dev = 1 + rng.index(n - train - 1);
      return SourceCounts{train, dev, n - train - dev};
    };
    const SplitManifest m = make_media_source_split(
        c, {{Label::kConspiracy, counts_for(cs)}, {Label::kBenign, counts_for(bs)}},
        rng.next());
    ASSERT_EQ(m.assignment.size(), c.size());
    ASSERT_TRUE(sources_disjoint(c, m)) << "trial " << trial;
  }
}

TEST(RandomSplit, KeepsFixedTestSetExactly) {
  nn::Rng rng(15);
  const Corpus c = synthetic_corpus(6, 6, rng);
  const SplitManifest media = make_media_source_split(
      c, {{Label::kConspiracy, {3, 2, 1}}, {Label::kBenign, {3, 2, 1}}}, 5);
  const auto test_ids = media.ids(Split::kTest);
  const std::set<std::string> fixed(test_ids.begin(), test_ids.end());
  const std::size_t train = media.ids(Split::kTrain).size();
  const std::size_t dev = media.ids(Split::kDev).size();
  const SplitManifest r = make_random_split(c, train, dev, fixed, 77);
  EXPECT_EQ(r.ids(Split::kTest), test_ids);
  EXPECT_EQ(r.ids(Split::kTrain).size(), train);
  EXPECT_EQ(r.ids(Split::kDev).size(), dev);
  EXPECT_EQ(r.mode, SplitMode::kRandom);
  EXPECT_NO_THROW(check_manifest(c, r));
  EXPECT_EQ(make_random_split(c, train, dev, fixed, 77), r);
}

TEST(RandomSplit, SizeErrors) {
  nn::Rng rng(16);
  const Corpus c = synthetic_corpus(3, 3, rng);
  const std::set<std::string> fixed{c.documents.front().doc_id};
  EXPECT_THROW(make_random_split(c, 0, 0, fixed, 1), ValidationError);
  EXPECT_THROW(make_random_split(c, c.size(), 1, fixed, 1), InfeasibleError);
  EXPECT_THROW(make_random_split(c, 1, 1, {"nope"}, 1), ValidationError);
}

TEST(Manifest, JsonRoundTripAndErrors) {
  nn::Rng rng(17);
  const Corpus c = synthetic_corpus(3, 3, rng);
  const SplitManifest m = make_media_source_split(
      c, {{Label::kConspiracy, {1, 1, 1}}, {Label::kBenign, {1, 1, 1}}}, 3);
  EXPECT_EQ(manifest_from_json(to_json(m)), m);
  nlohmann::json bad = to_json(m);
  bad["assignment"][c.documents[0].doc_id] = "holdout";
  EXPECT_THROW(manifest_from_json(bad), ParseError);
  SplitManifest partial = m;
  partial.assignment.erase(c.documents[0].doc_id);
  EXPECT_THROW(check_manifest(c, partial), ValidationError);
}

}  // namespace
}  // namespace erg
