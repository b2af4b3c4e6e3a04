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

// Corpus ingestion, tokenization and train/dev/test splitting.
//
// Labeled corpus (JSONL): {"doc_id", "media_source", "text", "label"?}
// Annotated corpus (JSONL, MAVEN-ERE style field names):
//   {"doc_id", "text", "events": [{"id", "start", "end"}],
//    "clusters": [[id, ...]], "temporal": [[a, b, LABEL]],
//    "causal": [[a, b, LABEL]], "subevent": [[a, b, LABEL]],
//    "timex": [{"id", ...}]?, "timex_temporal": [...]?}
// Event "start"/"end" are character offsets into "text" (end exclusive).

#include <algorithm>
#include <array>
#include <cctype>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "erg/error.hpp"
#include "erg/nn.hpp"

namespace erg {

enum class Label { kConspiracy, kBenign };

inline std::string_view to_string(Label l) {
  return l == Label::kConspiracy ? "conspiracy" : "benign";
}

inline Label parse_label(std::string_view s) {
  if (s == "conspiracy") return Label::kConspiracy;
  if (s == "benign") return Label::kBenign;
  throw ValidationError("unknown label '" + std::string(s) + "'");
}

struct Token {
  std::string text;
  std::size_t begin = 0;  // character offsets, end exclusive
  std::size_t end = 0;

  friend bool operator==(const Token&, const Token&) = default;
};

struct Document {
  std::string doc_id;
  std::string media_source;
  std::string text;
  std::optional<Label> label;
  std::vector<Token> tokens;

  friend bool operator==(const Document&, const Document&) = default;
};

struct Corpus {
  std::vector<Document> documents;

  std::size_t size() const { return documents.size(); }
  const Document* find(std::string_view id) const {
    for (const Document& d : documents)
      if (d.doc_id == id) return &d;
    return nullptr;
  }
};

// ---------------------------------------------------------------------------
// Tokenization

class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  virtual std::vector<Token> split(std::string_view text) const = 0;
};

// Alphanumeric runs (with inner apostrophes and hyphens) are words; any other
// non-space byte is a token of its own. Bytes >= 0x80 count as word bytes so
// UTF-8 sequences stay intact.
class SimpleTokenizer final : public Tokenizer {
 public:
  std::vector<Token> split(std::string_view text) const override {
    std::vector<Token> out;
    std::size_t i = 0;
    const std::size_t n = text.size();
    auto word_byte = [](unsigned char c) {
      return std::isalnum(c) || c >= 0x80;
    };
    while (i < n) {
      const auto c = static_cast<unsigned char>(text[i]);
      if (std::isspace(c)) {
        ++i;
        continue;
      }
      std::size_t j = i + 1;
      if (word_byte(c)) {
        while (j < n) {
          const auto d = static_cast<unsigned char>(text[j]);
          if (word_byte(d)) {
            ++j;
          } else if ((d == '\'' || d == '-') && j + 1 < n &&
                     word_byte(static_cast<unsigned char>(text[j + 1]))) {
            j += 2;
          } else {
            break;
          }
        }
      }
      out.push_back({std::string(text.substr(i, j - i)), i, j});
      i = j;
    }
    return out;
  }
};

inline Document tokenize(Document doc, const Tokenizer& tokenizer) {
  if (doc.text.empty())
    throw ValidationError("tokenize: document '" + doc.doc_id +
                          "' has empty text");
  doc.tokens = tokenizer.split(doc.text);
  return doc;
}

// Rebuilds the text from token surfaces and the original inter-token gaps.
inline std::string reconstruct_text(const Document& doc) {
  std::string out;
  std::size_t at = 0;
  for (const Token& t : doc.tokens) {
    out += doc.text.substr(at, t.begin - at);
    out += t.text;
    at = t.end;
  }
  out += doc.text.substr(at);
  return out;
}

inline void check_token_spans(const Document& doc) {
  std::size_t prev_end = 0;
  for (const Token& t : doc.tokens) {
    if (t.begin < prev_end || t.end <= t.begin || t.end > doc.text.size())
      throw ValidationError("document '" + doc.doc_id +
                            "' has overlapping or out-of-range token spans");
    prev_end = t.end;
  }
}

// ---------------------------------------------------------------------------
// Labeled corpus

inline Corpus parse_labeled_corpus(std::istream& in) {
  Corpus corpus;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(std::string("malformed JSON: ") + e.what(), line_no);
    }
    Document doc;
    try {
      doc.doc_id = rec.at("doc_id").get<std::string>();
      doc.media_source = rec.at("media_source").get<std::string>();
      doc.text = rec.at("text").get<std::string>();
      if (rec.contains("label") && !rec["label"].is_null())
        doc.label = parse_label(rec["label"].get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("bad record: ") + e.what(), line_no);
    } catch (const ValidationError& e) {
      throw ParseError(e.what(), line_no);
    }
    if (!seen.insert(doc.doc_id).second)
      throw ValidationError("duplicate doc_id '" + doc.doc_id + "' at line " +
                            std::to_string(line_no));
    corpus.documents.push_back(std::move(doc));
  }
  return corpus;
}

inline std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw PrerequisiteError("cannot open " + path.string());
  return in;
}

inline Corpus load_labeled_corpus(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  return parse_labeled_corpus(in);
}

inline void write_labeled_corpus(std::ostream& out, const Corpus& corpus) {
  for (const Document& d : corpus.documents) {
    nlohmann::json rec{{"doc_id", d.doc_id},
                       {"media_source", d.media_source},
                       {"text", d.text}};
    if (d.label) rec["label"] = std::string(to_string(*d.label));
    out << rec.dump() << '\n';
  }
}

// ---------------------------------------------------------------------------
// Annotated corpus

struct EventMention {
  std::string id;
  std::size_t char_begin = 0;
  std::size_t char_end = 0;
  std::size_t token_begin = 0;  // token range, end exclusive
  std::size_t token_end = 0;

  friend bool operator==(const EventMention&, const EventMention&) = default;
};

struct RawRelation {
  std::string a;
  std::string b;
  std::string label;

  friend bool operator==(const RawRelation&, const RawRelation&) = default;
};

struct AnnotatedDocument {
  Document document;
  std::vector<EventMention> event_mentions;
  std::vector<std::vector<std::string>> coref_clusters;
  std::vector<RawRelation> temporal_annotations;
  std::vector<RawRelation> causal_annotations;
  std::vector<RawRelation> subevent_annotations;

  friend bool operator==(const AnnotatedDocument&,
                         const AnnotatedDocument&) = default;

  const EventMention* mention(std::string_view id) const {
    for (const EventMention& m : event_mentions)
      if (m.id == id) return &m;
    return nullptr;
  }
};

namespace detail {

inline std::vector<RawRelation> read_relations(
    const nlohmann::json& rec, const char* key,
    const std::unordered_set<std::string>& events,
    const std::unordered_set<std::string>& timex, bool drop_timex) {
  std::vector<RawRelation> out;
  if (!rec.contains(key)) return out;
  for (const auto& triple : rec.at(key)) {
    if (!triple.is_array() || triple.size() != 3)
      throw ParseError(std::string(key) + " entries must be [a, b, LABEL]");
    RawRelation r{triple[0].get<std::string>(), triple[1].get<std::string>(),
                  triple[2].get<std::string>()};
    const bool a_event = events.contains(r.a), b_event = events.contains(r.b);
    if (a_event && b_event) {
      out.push_back(std::move(r));
      continue;
    }
    const bool a_known = a_event || timex.contains(r.a);
    const bool b_known = b_event || timex.contains(r.b);
    if (drop_timex && a_known && b_known) continue;
    throw ValidationError(std::string(key) + " relation references unknown "
                          "mention '" + (a_known ? r.b : r.a) + "'");
  }
  return out;
}

}  // namespace detail

// Parses one annotated record. Temporal links touching a time expression are
// dropped here so no later stage sees them.
inline AnnotatedDocument parse_annotated_document(const nlohmann::json& rec,
                                                  const Tokenizer& tokenizer) {
  AnnotatedDocument out;
  out.document.doc_id = rec.at("doc_id").get<std::string>();
  out.document.text = rec.at("text").get<std::string>();
  if (rec.contains("media_source"))
    out.document.media_source = rec["media_source"].get<std::string>();
  if (!out.document.text.empty())
    out.document = tokenize(std::move(out.document), tokenizer);

  std::unordered_set<std::string> event_ids;
  for (const auto& e : rec.value("events", nlohmann::json::array())) {
    EventMention m;
    m.id = e.at("id").get<std::string>();
    m.char_begin = e.at("start").get<std::size_t>();
    m.char_end = e.at("end").get<std::size_t>();
    if (m.char_end <= m.char_begin || m.char_end > out.document.text.size())
      throw ValidationError("event '" + m.id + "' span out of text bounds");
    const auto& toks = out.document.tokens;
    std::size_t first = toks.size(), last = 0;
    for (std::size_t k = 0; k < toks.size(); ++k) {
      if (toks[k].end > m.char_begin && toks[k].begin < m.char_end) {
        first = std::min(first, k);
        last = k + 1;
      }
    }
    if (first >= last)
      throw ValidationError("event '" + m.id + "' covers no token");
    m.token_begin = first;
    m.token_end = last;
    if (!event_ids.insert(m.id).second)
      throw ValidationError("duplicate event id '" + m.id + "'");
    out.event_mentions.push_back(std::move(m));
  }

  std::unordered_set<std::string> timex_ids;
  for (const auto& t : rec.value("timex", nlohmann::json::array()))
    timex_ids.insert(t.at("id").get<std::string>());

  std::unordered_set<std::string> clustered;
  for (const auto& c : rec.value("clusters", nlohmann::json::array())) {
    std::vector<std::string> cluster;
    for (const auto& id : c) {
      std::string s = id.get<std::string>();
      if (!event_ids.contains(s))
        throw ValidationError("cluster references unknown mention '" + s + "'");
      if (!clustered.insert(s).second)
        throw ValidationError("mention '" + s + "' appears in two clusters");
      cluster.push_back(std::move(s));
    }
    if (!cluster.empty()) out.coref_clusters.push_back(std::move(cluster));
  }
  // Unclustered mentions are singletons.
  for (const EventMention& m : out.event_mentions)
    if (!clustered.contains(m.id)) out.coref_clusters.push_back({m.id});

  out.temporal_annotations =
      detail::read_relations(rec, "temporal", event_ids, timex_ids, true);
  out.causal_annotations =
      detail::read_relations(rec, "causal", event_ids, timex_ids, false);
  out.subevent_annotations =
      detail::read_relations(rec, "subevent", event_ids, timex_ids, false);
  return out;
}

inline std::vector<AnnotatedDocument> parse_annotated_corpus(
    std::istream& in, const Tokenizer& tokenizer = SimpleTokenizer{}) {
  std::vector<AnnotatedDocument> docs;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      AnnotatedDocument doc =
          parse_annotated_document(nlohmann::json::parse(line), tokenizer);
      if (!seen.insert(doc.document.doc_id).second)
        throw ValidationError("duplicate doc_id '" + doc.document.doc_id + "'");
      docs.push_back(std::move(doc));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("bad annotated record: ") + e.what(),
                       line_no);
    } catch (const ValidationError& e) {
      throw ValidationError("line " + std::to_string(line_no) + ": " +
                            e.what());
    }
  }
  return docs;
}

inline std::vector<AnnotatedDocument> load_annotated_corpus(
    const std::filesystem::path& path,
    const Tokenizer& tokenizer = SimpleTokenizer{}) {
  std::ifstream in = open_input(path);
  return parse_annotated_corpus(in, tokenizer);
}

inline nlohmann::json to_json(const AnnotatedDocument& doc) {
  nlohmann::json rec{{"doc_id", doc.document.doc_id},
                     {"text", doc.document.text}};
  if (!doc.document.media_source.empty())
    rec["media_source"] = doc.document.media_source;
  rec["events"] = nlohmann::json::array();
  for (const EventMention& m : doc.event_mentions)
    rec["events"].push_back(
        {{"id", m.id}, {"start", m.char_begin}, {"end", m.char_end}});
  rec["clusters"] = doc.coref_clusters;
  auto rels = [](const std::vector<RawRelation>& v) {
    nlohmann::json arr = nlohmann::json::array();
    for (const RawRelation& r : v) arr.push_back({r.a, r.b, r.label});
    return arr;
  };
  rec["temporal"] = rels(doc.temporal_annotations);
  rec["causal"] = rels(doc.causal_annotations);
  rec["subevent"] = rels(doc.subevent_annotations);
  return rec;
}

inline void write_annotated_corpus(std::ostream& out,
                                   const std::vector<AnnotatedDocument>& docs) {
  for (const AnnotatedDocument& d : docs) out << to_json(d).dump() << '\n';
}

// ---------------------------------------------------------------------------
// Splits

enum class Split { kTrain, kDev, kTest };
enum class SplitMode { kMediaSource, kRandom };

inline std::string_view to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kDev: return "dev";
    case Split::kTest: return "test";
  }
  return "?";
}

inline Split parse_split(std::string_view s) {
  if (s == "train") return Split::kTrain;
  if (s == "dev") return Split::kDev;
  if (s == "test") return Split::kTest;
  throw ParseError("unknown split '" + std::string(s) + "'");
}

inline std::string_view to_string(SplitMode m) {
  return m == SplitMode::kMediaSource ? "media_source" : "random";
}

inline SplitMode parse_split_mode(std::string_view s) {
  if (s == "media_source") return SplitMode::kMediaSource;
  if (s == "random") return SplitMode::kRandom;
  throw ConfigError("unknown split mode '" + std::string(s) + "'");
}

struct SplitManifest {
  std::map<std::string, Split> assignment;
  SplitMode mode = SplitMode::kMediaSource;
  std::uint64_t seed = 0;

  friend bool operator==(const SplitManifest&, const SplitManifest&) = default;

  std::vector<std::string> ids(Split s) const {
    std::vector<std::string> out;
    for (const auto& [id, split] : assignment)
      if (split == s) out.push_back(id);
    return out;
  }
};

struct SourceCounts {
  std::size_t train = 0;
  std::size_t dev = 0;
  std::size_t test = 0;

  std::size_t total() const { return train + dev + test; }
};

// Number of sources (or articles) per class and split.
struct SplitTable {
  std::map<Label, std::array<std::size_t, 3>> counts;
};

inline SplitTable count_articles(const Corpus& corpus,
                                 const SplitManifest& manifest) {
  SplitTable t;
  for (const Document& d : corpus.documents) {
    if (!d.label) continue;
    auto it = manifest.assignment.find(d.doc_id);
    if (it == manifest.assignment.end()) continue;
    ++t.counts[*d.label][static_cast<std::size_t>(it->second)];
  }
  return t;
}

inline SplitTable count_sources(const Corpus& corpus,
                                const SplitManifest& manifest) {
  std::map<Label, std::array<std::set<std::string>, 3>> sets;
  for (const Document& d : corpus.documents) {
    if (!d.label) continue;
    auto it = manifest.assignment.find(d.doc_id);
    if (it == manifest.assignment.end()) continue;
    sets[*d.label][static_cast<std::size_t>(it->second)].insert(d.media_source);
  }
  SplitTable t;
  for (const auto& [label, s] : sets)
    t.counts[label] = {s[0].size(), s[1].size(), s[2].size()};
  return t;
}

// Throws ValidationError unless every document is assigned exactly once and,
// for media-source manifests, no source spans two splits.
inline void check_manifest(const Corpus& corpus,
                           const SplitManifest& manifest) {
  if (manifest.assignment.size() != corpus.size())
    throw ValidationError("manifest assigns " +
                          std::to_string(manifest.assignment.size()) +
                          " documents, corpus has " +
                          std::to_string(corpus.size()));
  std::map<std::string, Split> source_split;
  for (const Document& d : corpus.documents) {
    auto it = manifest.assignment.find(d.doc_id);
    if (it == manifest.assignment.end())
      throw ValidationError("document '" + d.doc_id + "' is unassigned");
    if (manifest.mode != SplitMode::kMediaSource) continue;
    auto [pos, inserted] = source_split.emplace(d.media_source, it->second);
    if (!inserted && pos->second != it->second)
      throw ValidationError("media source '" + d.media_source +
                            "' appears in two splits");
  }
}

// Shuffles each class's sorted source list with `seed` (conspiracy first) and
// hands out prefixes of the requested sizes to train, dev and test.
inline SplitManifest make_media_source_split(
    const Corpus& corpus, const std::map<Label, SourceCounts>& source_counts,
    std::uint64_t seed) {
  std::map<Label, std::set<std::string>> sources;
  std::map<std::string, Label> source_label;
  for (const Document& d : corpus.documents) {
    if (!d.label)
      throw ValidationError("media-source split needs labels; '" + d.doc_id +
                            "' has none");
    auto [it, inserted] = source_label.emplace(d.media_source, *d.label);
    if (!inserted && it->second != *d.label)
      throw ValidationError("media source '" + d.media_source +
                            "' carries both labels");
    sources[*d.label].insert(d.media_source);
  }

  nn::Rng rng(seed);
  std::map<std::string, Split> source_split;
  for (Label label : {Label::kConspiracy, Label::kBenign}) {
    const auto& available = sources[label];
    if (available.empty()) continue;
    auto counts_it = source_counts.find(label);
    if (counts_it == source_counts.end())
      throw ValidationError("no source counts given for class " +
                            std::string(to_string(label)));
    const SourceCounts& want = counts_it->second;
    if (available.size() < 3 || available.size() < want.total())
      throw InfeasibleError(
          "class " + std::string(to_string(label)) + " has " +
          std::to_string(available.size()) + " media source(s); disjoint "
          "train/dev/test needs at least max(3, " +
          std::to_string(want.total()) + ")");
    if (available.size() != want.total())
      throw ValidationError(
          "source counts for class " + std::string(to_string(label)) +
          " sum to " + std::to_string(want.total()) + " but " +
          std::to_string(available.size()) + " sources exist");
    std::vector<std::string> order(available.begin(), available.end());
    rng.shuffle(order);
    std::size_t k = 0;
    for (; k < want.train; ++k) source_split[order[k]] = Split::kTrain;
    for (; k < want.train + want.dev; ++k) source_split[order[k]] = Split::kDev;
    for (; k < order.size(); ++k) source_split[order[k]] = Split::kTest;
  }

  SplitManifest m;
  m.mode = SplitMode::kMediaSource;
  m.seed = seed;
  for (const Document& d : corpus.documents)
    m.assignment[d.doc_id] = source_split.at(d.media_source);
  return m;
}

// Keeps `fixed_test` as the test set and draws train/dev from the rest in a
// seeded shuffle of corpus order. Every document must end up assigned.
inline SplitManifest make_random_split(const Corpus& corpus,
                                       std::size_t train_size,
                                       std::size_t dev_size,
                                       const std::set<std::string>& fixed_test,
                                       std::uint64_t seed) {
  std::vector<std::string> rest;
  std::size_t test_found = 0;
  for (const Document& d : corpus.documents) {
    if (fixed_test.contains(d.doc_id))
      ++test_found;
    else
      rest.push_back(d.doc_id);
  }
  if (test_found != fixed_test.size())
    throw ValidationError("fixed test set names documents absent from corpus");
  if (train_size + dev_size > rest.size())
    throw InfeasibleError("train + dev = " +
                          std::to_string(train_size + dev_size) +
                          " exceeds the " + std::to_string(rest.size()) +
                          " non-test documents");
  if (train_size + dev_size < rest.size())
    throw ValidationError(std::to_string(rest.size() - train_size - dev_size) +
                          " non-test documents would stay unassigned");
  nn::Rng rng(seed);
  rng.shuffle(rest);
  SplitManifest m;
  m.mode = SplitMode::kRandom;
  m.seed = seed;
  for (const std::string& id : fixed_test) m.assignment[id] = Split::kTest;
  for (std::size_t k = 0; k < rest.size(); ++k)
    m.assignment[rest[k]] = k < train_size ? Split::kTrain : Split::kDev;
  return m;
}

inline nlohmann::json to_json(const SplitManifest& m) {
  nlohmann::json assignment = nlohmann::json::object();
  for (const auto& [id, s] : m.assignment)
    assignment[id] = std::string(to_string(s));
  return {{"mode", std::string(to_string(m.mode))},
          {"seed", m.seed},
          {"assignment", assignment}};
}

inline SplitManifest manifest_from_json(const nlohmann::json& j) {
  SplitManifest m;
  try {
    const std::string mode = j.at("mode").get<std::string>();
    if (mode == "media_source")
      m.mode = SplitMode::kMediaSource;
    else if (mode == "random")
      m.mode = SplitMode::kRandom;
    else
      throw ParseError("unknown manifest mode '" + mode + "'");
    m.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& [id, s] : j.at("assignment").items())
      m.assignment[id] = parse_split(s.get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad manifest: ") + e.what());
  }
  return m;
}

inline SplitManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  try {
    return manifest_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("bad manifest: ") + e.what());
  }
}

}  // namespace erg
