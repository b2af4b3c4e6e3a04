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

// The per-document event relation graph: event nodes, an implicit document
// node, soft labels for every event pair and the hard edges derived from them.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "erg/error.hpp"
#include "erg/relations.hpp"

namespace erg {

inline constexpr int kGraphSchemaVersion = 1;
inline constexpr double kDistributionTolerance = 1e-6;

// Argmax with ties going to the lowest index (toward "none").
inline std::size_t argmax(std::span<const double> p) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < p.size(); ++k)
    if (p[k] > p[best]) best = k;
  return best;
}

inline bool is_distribution(std::span<const double> p,
                            double tol = kDistributionTolerance) {
  double s = 0.0;
  for (double x : p) {
    if (!(x >= 0.0)) return false;
    s += x;
  }
  return std::abs(s - 1.0) <= tol;
}

// Soft labels for one ordered pair: coref(2), temporal(4), causal(3),
// subevent(3).
struct PairRelationProbs {
  std::array<std::vector<double>, 4> dist;

  std::vector<double>& of(Family f) { return dist[family_index(f)]; }
  const std::vector<double>& of(Family f) const {
    return dist[family_index(f)];
  }

  CanonicalLabel hard(Family f) const { return {f, argmax(of(f))}; }

  bool valid() const {
    for (Family f : kFamilies)
      if (of(f).size() != arity(f) || !is_distribution(of(f))) return false;
    return true;
  }

  friend bool operator==(const PairRelationProbs&,
                         const PairRelationProbs&) = default;
};

struct EventNode {
  std::size_t id = 0;
  std::size_t token_begin = 0;  // token range, end exclusive
  std::size_t token_end = 0;
  std::string trigger;

  friend bool operator==(const EventNode&, const EventNode&) = default;
};

struct HardEdge {
  std::size_t source = 0;
  std::size_t target = 0;
  EdgeType type = EdgeType::kCoreference;

  friend bool operator==(const HardEdge&, const HardEdge&) = default;
  friend auto operator<=>(const HardEdge& a, const HardEdge& b) {
    return std::tie(a.source, a.target, a.type) <=>
           std::tie(b.source, b.target, b.type);
  }
};

using EventPair = std::pair<std::size_t, std::size_t>;

// Event node ids are 0..n-1 in textual order; the document node has id n.
struct EventRelationGraph {
  std::string doc_id;
  std::vector<EventNode> events;
  std::vector<std::array<double, 2>> token_event_probs;  // (non-event, event)
  std::map<EventPair, PairRelationProbs> soft_labels;
  std::vector<HardEdge> hard_edges;
  std::vector<std::size_t> doc_edges;  // event ids linked to the document node

  std::size_t document_node() const { return events.size(); }

  friend bool operator==(const EventRelationGraph&,
                         const EventRelationGraph&) = default;
};

// Hard edges implied by one pair's soft labels. Coreference is stored in
// both directions; every other edge points from the textually earlier event,
// with the label read relative to that order.
inline std::vector<HardEdge> hard_edges_for_pair(const EventPair& pair,
                                                 const PairRelationProbs& p) {
  std::vector<HardEdge> out;
  for (Family f : kFamilies) {
    auto type = edge_type(p.hard(f));
    if (!type) continue;
    out.push_back({pair.first, pair.second, *type});
    if (*type == EdgeType::kCoreference)
      out.push_back({pair.second, pair.first, *type});
  }
  return out;
}

// Rebuilds hard_edges and doc_edges from the stored soft labels.
inline void derive_hard_edges(EventRelationGraph& g) {
  g.hard_edges.clear();
  for (const auto& [pair, probs] : g.soft_labels)
    for (const HardEdge& e : hard_edges_for_pair(pair, probs))
      g.hard_edges.push_back(e);
  std::sort(g.hard_edges.begin(), g.hard_edges.end());
  g.doc_edges.resize(g.events.size());
  std::iota(g.doc_edges.begin(), g.doc_edges.end(), std::size_t{0});
}

inline void validate_graph(const EventRelationGraph& g) {
  const std::size_t n = g.events.size();
  for (std::size_t k = 0; k < n; ++k)
    if (g.events[k].id != k)
      throw ValidationError("event node ids must be 0..n-1 in order");
  for (const auto& p : g.token_event_probs)
    if (!is_distribution(p))
      throw ValidationError("token event probabilities are not a distribution");
  for (const auto& [pair, probs] : g.soft_labels) {
    if (pair.first >= pair.second || pair.second >= n)
      throw ValidationError("soft label pair out of order or range");
    if (!probs.valid())
      throw ValidationError("soft label is not a valid distribution");
  }
  for (const HardEdge& e : g.hard_edges)
    if (e.source >= n || e.target >= n || e.source == e.target)
      throw ValidationError("hard edge references a missing node");
  std::vector<std::size_t> expect(n);
  std::iota(expect.begin(), expect.end(), std::size_t{0});
  std::vector<std::size_t> got = g.doc_edges;
  std::sort(got.begin(), got.end());
  if (got != expect)
    throw ValidationError("document node must link to every event node");
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::json to_json(const EventRelationGraph& g) {
  nlohmann::json j;
  j["doc_id"] = g.doc_id;
  j["schema_version"] = kGraphSchemaVersion;
  j["events"] = nlohmann::json::array();
  for (const EventNode& e : g.events)
    j["events"].push_back({{"id", e.id},
                           {"token_start", e.token_begin},
                           {"token_end", e.token_end},
                           {"trigger", e.trigger}});
  nlohmann::json soft;
  soft["token_event"] = nlohmann::json::array();
  for (const auto& p : g.token_event_probs)
    soft["token_event"].push_back({p[0], p[1]});
  soft["pairs"] = nlohmann::json::array();
  for (const auto& [pair, probs] : g.soft_labels) {
    nlohmann::json item{{"i", pair.first}, {"j", pair.second}};
    for (Family f : kFamilies) item[std::string(to_string(f))] = probs.of(f);
    soft["pairs"].push_back(std::move(item));
  }
  j["soft_labels"] = std::move(soft);
  j["hard_edges"] = nlohmann::json::array();
  for (const HardEdge& e : g.hard_edges)
    j["hard_edges"].push_back(
        {e.source, e.target, std::string(to_string(e.type))});
  j["doc_edges"] = g.doc_edges;
  return j;
}

inline EventRelationGraph graph_from_json(const nlohmann::json& j) {
  EventRelationGraph g;
  try {
    const int version = j.at("schema_version").get<int>();
    if (version != kGraphSchemaVersion)
      throw VersionError("graph schema_version " + std::to_string(version) +
                         " is not supported (expected " +
                         std::to_string(kGraphSchemaVersion) + ")");
    g.doc_id = j.at("doc_id").get<std::string>();
    for (const auto& e : j.at("events"))
      g.events.push_back({e.at("id").get<std::size_t>(),
                          e.at("token_start").get<std::size_t>(),
                          e.at("token_end").get<std::size_t>(),
                          e.at("trigger").get<std::string>()});
    const auto& soft = j.at("soft_labels");
    for (const auto& p : soft.at("token_event")) {
      if (p.size() != 2) throw ParseError("token_event entries need 2 values");
      g.token_event_probs.push_back({p[0].get<double>(), p[1].get<double>()});
    }
    for (const auto& item : soft.at("pairs")) {
      PairRelationProbs probs;
      for (Family f : kFamilies)
        probs.of(f) =
            item.at(std::string(to_string(f))).get<std::vector<double>>();
      g.soft_labels.emplace(EventPair{item.at("i").get<std::size_t>(),
                                      item.at("j").get<std::size_t>()},
                            std::move(probs));
    }
    for (const auto& e : j.at("hard_edges")) {
      if (e.size() != 3) throw ParseError("hard edges are [src, dst, type]");
      g.hard_edges.push_back({e[0].get<std::size_t>(), e[1].get<std::size_t>(),
                              parse_edge_type(e[2].get<std::string>())});
    }
    g.doc_edges = j.at("doc_edges").get<std::vector<std::size_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("corrupt graph payload: ") + e.what());
  }
  try {
    validate_graph(g);
  } catch (const ValidationError& e) {
    throw ParseError(std::string("corrupt graph payload: ") + e.what());
  }
  return g;
}

inline std::string serialize_graph(const EventRelationGraph& g) {
  return to_json(g).dump();
}

inline EventRelationGraph deserialize_graph(std::string_view bytes) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("corrupt graph payload: ") + e.what());
  }
  return graph_from_json(j);
}

// ---------------------------------------------------------------------------
// Coreference clusters

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n), rank_(n, 0) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent_[b] = a;
    if (rank_[a] == rank_[b]) ++rank_[a];
  }

 private:
  std::vector<std::size_t> parent_;
  std::vector<unsigned> rank_;
};

using Partition = std::vector<std::vector<std::size_t>>;

// Sorts members and orders clusters by smallest member.
inline Partition canonical_partition(Partition p) {
  for (auto& c : p) std::sort(c.begin(), c.end());
  std::sort(p.begin(), p.end());
  return p;
}

// Connected components over coreference edges; edgeless events are
// singletons.
inline Partition coref_clusters(const EventRelationGraph& g) {
  const std::size_t n = g.events.size();
  DisjointSets sets(n);
  for (const HardEdge& e : g.hard_edges)
    if (e.type == EdgeType::kCoreference) sets.unite(e.source, e.target);
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t k = 0; k < n; ++k) groups[sets.find(k)].push_back(k);
  Partition out;
  for (auto& [root, members] : groups) out.push_back(std::move(members));
  return canonical_partition(std::move(out));
}

// ---------------------------------------------------------------------------
// Relation profile

enum class SubeventCounting {
  kChildOnly,  // events on the contained side of a containment edge
  kBothSides,  // any event incident to a subevent edge
};

struct ProfileOptions {
  SubeventCounting subevent = SubeventCounting::kChildOnly;
};

// Raw event counts; additive over graphs.
struct ProfileCounts {
  std::size_t events = 0;
  std::size_t singleton = 0;
  std::size_t temporal = 0;
  std::size_t causal = 0;
  std::size_t subevent = 0;

  ProfileCounts& operator+=(const ProfileCounts& o) {
    events += o.events;
    singleton += o.singleton;
    temporal += o.temporal;
    causal += o.causal;
    subevent += o.subevent;
    return *this;
  }
};

// Percentages of all events.
struct RelationProfile {
  double singleton_pct = 0.0;
  double temporal_pct = 0.0;
  double causal_pct = 0.0;
  double subevent_pct = 0.0;
};

inline ProfileCounts profile_counts(const EventRelationGraph& g,
                                    const ProfileOptions& options = {}) {
  const std::size_t n = g.events.size();
  ProfileCounts c;
  c.events = n;
  for (const auto& cluster : coref_clusters(g))
    if (cluster.size() == 1) ++c.singleton;
  std::vector<bool> temporal(n), causal(n), subevent(n);
  for (const HardEdge& e : g.hard_edges) {
    switch (family_of(e.type)) {
      case Family::kTemporal:
        temporal[e.source] = temporal[e.target] = true;
        break;
      case Family::kCausal:
        causal[e.source] = causal[e.target] = true;
        break;
      case Family::kSubevent:
        if (options.subevent == SubeventCounting::kBothSides)
          subevent[e.source] = subevent[e.target] = true;
        else if (e.type == EdgeType::kContains)
          subevent[e.target] = true;
        else
          subevent[e.source] = true;
        break;
      case Family::kCoref:
        break;
    }
  }
  c.temporal = static_cast<std::size_t>(std::count(temporal.begin(), temporal.end(), true));
  c.causal = static_cast<std::size_t>(std::count(causal.begin(), causal.end(), true));
  c.subevent = static_cast<std::size_t>(std::count(subevent.begin(), subevent.end(), true));
  return c;
}

inline RelationProfile to_profile(const ProfileCounts& c) {
  if (c.events == 0)
    throw ValidationError("relation profile over zero events is undefined");
  const double n = static_cast<double>(c.events);
  return {100.0 * static_cast<double>(c.singleton) / n,
          100.0 * static_cast<double>(c.temporal) / n,
          100.0 * static_cast<double>(c.causal) / n,
          100.0 * static_cast<double>(c.subevent) / n};
}

inline RelationProfile relation_profile(
    std::span<const EventRelationGraph> graphs,
    const ProfileOptions& options = {}) {
  ProfileCounts total;
  for (const EventRelationGraph& g : graphs) total += profile_counts(g, options);
  return to_profile(total);
}

}  // namespace erg
