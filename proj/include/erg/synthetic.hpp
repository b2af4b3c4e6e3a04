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

// Desk-scale fixtures with known ground truth. Articles are strings of short
// clauses, each naming one or two events; relations hold only inside a
// clause, plus coreference when a clause mentions an earlier event again.

#include <array>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "erg/corpus.hpp"
#include "erg/nn.hpp"

namespace erg {

enum class Clause { kCausal, kBefore, kOverlap, kSubevent, kPlain, kCoref };
inline constexpr std::size_t kNumClauses = 6;

// Relative clause weights, indexed by Clause.
using ClauseMix = std::array<double, kNumClauses>;

inline constexpr ClauseMix kBalancedMix{1, 1, 1, 1, 1, 1};
// Classifier fixtures. Causal density differs sharply between the two.
inline constexpr ClauseMix kCausalHeavyMix{6, 1, 1, 1, 1, 1};
inline constexpr ClauseMix kCausalLightMix{0, 3, 3, 2, 1, 2};

struct SyntheticOptions {
  std::size_t min_clauses = 2;
  std::size_t max_clauses = 4;
  ClauseMix mix = kBalancedMix;
  // When set every two-event clause uses the same connector pool, so the
  // text carries no per-relation cue.
  bool neutral_connectors = false;
};

namespace detail {

inline constexpr std::array<const char*, 40> kTriggers{
    "storm",   "flood",    "attack",   "vote",     "rally",    "strike",
    "outbreak", "lockdown", "protest", "election", "merger",   "recall",
    "verdict", "raid",     "fire",     "blackout", "shortage", "launch",
    "summit",  "ceasefire", "boycott", "leak",     "crash",    "rescue",
    "audit",   "hearing",  "purge",    "drought",  "riot",     "ban",
    "bailout", "inquiry",  "landslide", "heatwave", "embargo", "coup",
    "walkout", "scandal",  "eruption", "collapse"};

inline constexpr std::array<const char*, 12> kSubjects{
    "officials", "reporters", "residents", "analysts", "witnesses",
    "sources",   "critics",   "experts",   "locals",   "observers",
    "insiders",  "agencies"};

inline const char* connector(Clause c, bool neutral, nn::Rng& rng) {
  if (neutral) {
    static constexpr std::array<const char*, 3> kPool{"and then", "with",
                                                      "near"};
    return kPool[rng.index(kPool.size())];
  }
  switch (c) {
    case Clause::kCausal: return "caused";
    case Clause::kBefore: return "preceded";
    case Clause::kOverlap: return "coincided with";
    case Clause::kSubevent: return "included";
    default: return "";
  }
}

class Builder {
 public:
  std::size_t add_event(const std::string& word) {
    text_ += "the ";
    const std::size_t start = text_.size();
    text_ += word;
    const std::string id = "e" + std::to_string(events_.size());
    events_.push_back({{"id", id}, {"start", start}, {"end", text_.size()}});
    words_.push_back(word);
    return events_.size() - 1;
  }
  void add(const std::string& s) { text_ += s; }
  std::string id(std::size_t k) const { return "e" + std::to_string(k); }
  const std::string& word(std::size_t k) const { return words_[k]; }
  std::size_t events() const { return events_.size(); }

  void relate(const char* family, std::size_t a, std::size_t b,
              const char* raw) {
    relations_[family].push_back({id(a), id(b), raw});
  }
  void corefer(std::size_t earlier, std::size_t later) {
    std::size_t c = cluster_of_.contains(earlier) ? cluster_of_[earlier]
                                                  : new_cluster(earlier);
    clusters_[c].push_back(id(later));
    cluster_of_[later] = c;
  }

  nlohmann::json finish(const std::string& doc_id,
                        const std::string& source) const {
    nlohmann::json rec{{"doc_id", doc_id}, {"text", text_}, {"events", events_}};
    if (!source.empty()) rec["media_source"] = source;
    rec["clusters"] = clusters_;
    for (const char* f : {"temporal", "causal", "subevent"})
      rec[f] = relations_.contains(f) ? nlohmann::json(relations_.at(f))
                                      : nlohmann::json::array();
    return rec;
  }

 private:
  std::size_t new_cluster(std::size_t k) {
    clusters_.push_back({id(k)});
    cluster_of_[k] = clusters_.size() - 1;
    return clusters_.size() - 1;
  }

  std::string text_;
  nlohmann::json events_ = nlohmann::json::array();
  std::vector<std::string> words_;
  std::vector<std::vector<std::string>> clusters_;
  std::map<std::size_t, std::size_t> cluster_of_;
  std::map<std::string, std::vector<std::array<std::string, 3>>> relations_;
};

inline Clause pick_clause(const ClauseMix& mix, nn::Rng& rng) {
  double total = 0.0;
  for (double w : mix) total += w;
  double u = rng.uniform() * total;
  for (std::size_t k = 0; k < kNumClauses; ++k) {
    if (u < mix[k]) return static_cast<Clause>(k);
    u -= mix[k];
  }
  return Clause::kPlain;
}

}  // namespace detail

// One annotated article record (the annotated-corpus JSON schema).
inline nlohmann::json synthetic_annotated_record(const std::string& doc_id,
                                                 const std::string& source,
                                                 const SyntheticOptions& opt,
                                                 nn::Rng& rng) {
  std::vector<std::size_t> pool(detail::kTriggers.size());
  for (std::size_t k = 0; k < pool.size(); ++k) pool[k] = k;
  rng.shuffle(pool);
  std::size_t next_word = 0;
  auto fresh = [&] { return std::string(detail::kTriggers[pool[next_word++]]); };

  detail::Builder b;
  const std::size_t clauses =
      opt.min_clauses + rng.index(opt.max_clauses - opt.min_clauses + 1);
  for (std::size_t c = 0; c < clauses; ++c) {
    if (c > 0) b.add(" ");
    b.add(std::string(detail::kSubjects[rng.index(detail::kSubjects.size())]) +
          " said ");
    Clause kind = detail::pick_clause(opt.mix, rng);
    if (kind == Clause::kCoref && b.events() == 0) kind = Clause::kPlain;
    if (next_word + 2 > pool.size()) kind = Clause::kCoref;
    switch (kind) {
      case Clause::kPlain:
        b.add_event(fresh());
        b.add(" ended");
        break;
      case Clause::kCoref: {
        const std::size_t earlier = rng.index(b.events());
        const std::size_t later = b.add_event(b.word(earlier));
        b.add(" went on");
        b.corefer(earlier, later);
        break;
      }
      default: {
        const std::size_t x = b.add_event(fresh());
        b.add(" " + std::string(detail::connector(kind, opt.neutral_connectors,
                                                  rng)) + " ");
        const std::size_t y = b.add_event(fresh());
        if (kind == Clause::kCausal) {
          b.relate("causal", x, y, "CAUSES");
          b.relate("temporal", x, y, "BEFORE");
        } else if (kind == Clause::kBefore) {
          b.relate("temporal", x, y, "BEFORE");
        } else if (kind == Clause::kOverlap) {
          b.relate("temporal", x, y, "SIMULTANEOUS");
        } else {
          b.relate("subevent", x, y, "CONTAINS");
        }
      }
    }
    b.add(" .");
  }
  return b.finish(doc_id, source);
}

inline std::vector<AnnotatedDocument> synthetic_annotated_corpus(
    std::size_t count, std::uint64_t seed, const SyntheticOptions& opt = {},
    const std::string& prefix = "syn") {
  nn::Rng rng(seed);
  std::vector<AnnotatedDocument> out;
  const SimpleTokenizer tok;
  for (std::size_t k = 0; k < count; ++k)
    out.push_back(parse_annotated_document(
        synthetic_annotated_record(prefix + std::to_string(k), "", opt, rng),
        tok));
  return out;
}

// Labeled articles whose classes differ in relation structure only: both
// classes share vocabulary and (by default) neutral connectors, conspiracy
// articles are causal-heavy. Each media source carries `per_source` articles
// of one class.
struct LabeledFixture {
  Corpus corpus;
  std::vector<AnnotatedDocument> annotations;  // same order as corpus
};

inline LabeledFixture synthetic_labeled_corpus(std::size_t per_class,
                                               std::uint64_t seed,
                                               std::size_t per_source = 2,
                                               bool neutral_connectors = true) {
  nn::Rng rng(seed);
  LabeledFixture out;
  const SimpleTokenizer tok;
  for (Label label : {Label::kConspiracy, Label::kBenign}) {
    SyntheticOptions opt;
    opt.min_clauses = 3;
    opt.max_clauses = 5;
    opt.neutral_connectors = neutral_connectors;
    opt.mix = label == Label::kConspiracy ? kCausalHeavyMix : kCausalLightMix;
    const std::string tag = label == Label::kConspiracy ? "c" : "b";
    for (std::size_t k = 0; k < per_class; ++k) {
      const std::string id = tag + std::to_string(k);
      const std::string source =
          tag + "-outlet" + std::to_string(k / std::max<std::size_t>(per_source, 1));
      AnnotatedDocument a = parse_annotated_document(
          synthetic_annotated_record(id, source, opt, rng), tok);
      Document d = a.document;
      d.label = label;
      out.corpus.documents.push_back(std::move(d));
      out.annotations.push_back(std::move(a));
    }
  }
  return out;
}

}  // namespace erg
