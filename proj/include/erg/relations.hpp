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

// Relation families, their canonical label sets, the eight event-event edge
// types, and the mapping from raw annotation labels to canonical labels.

#include <algorithm>
#include <array>
#include <cctype>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

#include "erg/error.hpp"

namespace erg {

enum class Family { kCoref, kTemporal, kCausal, kSubevent };

inline constexpr std::array<Family, 4> kFamilies = {
    Family::kCoref, Family::kTemporal, Family::kCausal, Family::kSubevent};

inline constexpr std::size_t family_index(Family f) {
  return static_cast<std::size_t>(f);
}

// Distribution arity per family: (2, 4, 3, 3).
inline constexpr std::size_t arity(Family f) {
  switch (f) {
    case Family::kCoref: return 2;
    case Family::kTemporal: return 4;
    case Family::kCausal: return 3;
    case Family::kSubevent: return 3;
  }
  return 0;
}

inline std::string_view to_string(Family f) {
  switch (f) {
    case Family::kCoref: return "coref";
    case Family::kTemporal: return "temporal";
    case Family::kCausal: return "causal";
    case Family::kSubevent: return "subevent";
  }
  return "?";
}

inline Family parse_family(std::string_view s) {
  for (Family f : kFamilies)
    if (to_string(f) == s) return f;
  throw ValidationError("unknown relation family '" + std::string(s) + "'");
}

// Index 0 is always the "none" label of the family.
struct CanonicalLabel {
  Family family = Family::kCoref;
  std::size_t index = 0;

  friend bool operator==(const CanonicalLabel&, const CanonicalLabel&) = default;
};

inline constexpr std::size_t kNone = 0;

namespace label {
inline constexpr CanonicalLabel kCorefer{Family::kCoref, 1};
inline constexpr CanonicalLabel kBefore{Family::kTemporal, 1};
inline constexpr CanonicalLabel kAfter{Family::kTemporal, 2};
inline constexpr CanonicalLabel kOverlap{Family::kTemporal, 3};
inline constexpr CanonicalLabel kCauses{Family::kCausal, 1};
inline constexpr CanonicalLabel kCausedBy{Family::kCausal, 2};
inline constexpr CanonicalLabel kContains{Family::kSubevent, 1};
inline constexpr CanonicalLabel kContainedBy{Family::kSubevent, 2};
}  // namespace label

inline std::string_view label_name(CanonicalLabel l) {
  static constexpr std::array<std::array<std::string_view, 4>, 4> names = {{
      {"none", "corefer", "", ""},
      {"none", "before", "after", "overlap"},
      {"none", "causes", "caused_by", ""},
      {"none", "contains", "contained_by", ""},
  }};
  if (l.index >= arity(l.family))
    throw ValidationError("label index out of range for family");
  return names[family_index(l.family)][l.index];
}

// The eight typed event-event edges.
enum class EdgeType {
  kCoreference,
  kBefore,
  kAfter,
  kOverlap,
  kCauses,
  kCausedBy,
  kContains,
  kContainedBy,
};

inline constexpr std::size_t kNumEdgeTypes = 8;

inline constexpr std::array<EdgeType, kNumEdgeTypes> kEdgeTypes = {
    EdgeType::kCoreference, EdgeType::kBefore,   EdgeType::kAfter,
    EdgeType::kOverlap,     EdgeType::kCauses,   EdgeType::kCausedBy,
    EdgeType::kContains,    EdgeType::kContainedBy};

inline std::string_view to_string(EdgeType t) {
  static constexpr std::array<std::string_view, kNumEdgeTypes> names = {
      "coreference", "before",    "after",    "overlap",
      "causes",      "caused_by", "contains", "contained_by"};
  return names[static_cast<std::size_t>(t)];
}

inline EdgeType parse_edge_type(std::string_view s) {
  for (EdgeType t : kEdgeTypes)
    if (to_string(t) == s) return t;
  throw ParseError("unknown edge type '" + std::string(s) + "'");
}

// Word whose embedding seeds the relation representation.
inline std::string_view relation_word(EdgeType t) {
  static constexpr std::array<std::string_view, kNumEdgeTypes> words = {
      "coreference", "before",   "after",    "overlap",
      "causes",      "caused",   "contains", "contained"};
  return words[static_cast<std::size_t>(t)];
}

inline Family family_of(EdgeType t) {
  switch (t) {
    case EdgeType::kCoreference: return Family::kCoref;
    case EdgeType::kBefore:
    case EdgeType::kAfter:
    case EdgeType::kOverlap: return Family::kTemporal;
    case EdgeType::kCauses:
    case EdgeType::kCausedBy: return Family::kCausal;
    case EdgeType::kContains:
    case EdgeType::kContainedBy: return Family::kSubevent;
  }
  return Family::kCoref;
}

// The same relation seen from the other endpoint.
inline EdgeType inverse(EdgeType t) {
  switch (t) {
    case EdgeType::kBefore: return EdgeType::kAfter;
    case EdgeType::kAfter: return EdgeType::kBefore;
    case EdgeType::kCauses: return EdgeType::kCausedBy;
    case EdgeType::kCausedBy: return EdgeType::kCauses;
    case EdgeType::kContains: return EdgeType::kContainedBy;
    case EdgeType::kContainedBy: return EdgeType::kContains;
    default: return t;
  }
}

inline std::optional<EdgeType> edge_type(CanonicalLabel l) {
  if (l.index == kNone) return std::nullopt;
  switch (l.family) {
    case Family::kCoref: return EdgeType::kCoreference;
    case Family::kTemporal:
      return l.index == 1   ? EdgeType::kBefore
             : l.index == 2 ? EdgeType::kAfter
                            : EdgeType::kOverlap;
    case Family::kCausal:
      return l.index == 1 ? EdgeType::kCauses : EdgeType::kCausedBy;
    case Family::kSubevent:
      return l.index == 1 ? EdgeType::kContains : EdgeType::kContainedBy;
  }
  return std::nullopt;
}

// Upper-case with '-' and ' ' folded to '_'.
inline std::string normalize_raw_label(std::string_view raw) {
  std::string s(raw);
  for (char& c : s) {
    if (c == '-' || c == ' ') c = '_';
    c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  }
  return s;
}

// Raw annotation labels accepted per family.
inline constexpr std::array<std::string_view, 3> kRawCoref = {
    "COREFERENCE", "COREF", "COREFER"};
inline constexpr std::array<std::string_view, 6> kRawTemporal = {
    "BEFORE", "SIMULTANEOUS", "OVERLAP", "BEGINS_ON", "ENDS_ON", "CONTAINS"};
inline constexpr std::array<std::string_view, 3> kRawCausal = {
    "CAUSES", "CAUSE", "PRECONDITION"};
inline constexpr std::array<std::string_view, 2> kRawSubevent = {"CONTAINS",
                                                                 "SUBEVENT"};

// Maps a raw label on a pair to the canonical label of the textually ordered
// pair. `aligned` is true when the annotation's first argument is the
// textually earlier event.
inline CanonicalLabel map_annotation_label(Family family, std::string_view raw,
                                           bool aligned) {
  const std::string s = normalize_raw_label(raw);
  auto in = [&s](const auto& set) {
    return std::find(set.begin(), set.end(), s) != set.end();
  };
  switch (family) {
    case Family::kCoref:
      if (in(kRawCoref)) return label::kCorefer;
      break;
    case Family::kTemporal:
      if (s == "BEFORE") return aligned ? label::kBefore : label::kAfter;
      if (in(kRawTemporal)) return label::kOverlap;
      break;
    case Family::kCausal:
      if (in(kRawCausal)) return aligned ? label::kCauses : label::kCausedBy;
      break;
    case Family::kSubevent:
      if (in(kRawSubevent))
        return aligned ? label::kContains : label::kContainedBy;
      break;
  }
  throw ValidationError("unknown " + std::string(to_string(family)) +
                        " label '" + std::string(raw) + "'");
}

}  // namespace erg
