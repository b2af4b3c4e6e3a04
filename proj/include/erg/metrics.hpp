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

// Classification and coreference evaluation. All scores are percentages.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "erg/error.hpp"

namespace erg::metrics {

struct PRF {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  // Set when a zero denominator forced a score to 0.
  bool degenerate = false;
};

inline double f1_of(double p, double r) {
  return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
}

// Builds a PRF from count ratios; empty denominators score 0 and flag.
inline PRF prf_from_counts(double p_num, double p_den, double r_num,
                           double r_den) {
  PRF out;
  const double p = p_den > 0.0 ? p_num / p_den : 0.0;
  const double r = r_den > 0.0 ? r_num / r_den : 0.0;
  out.degenerate = p_den <= 0.0 || r_den <= 0.0;
  out.precision = 100.0 * p;
  out.recall = 100.0 * r;
  out.f1 = 100.0 * f1_of(p, r);
  return out;
}

inline double round2(double x) { return std::round(x * 100.0) / 100.0; }

inline nlohmann::json to_json(const PRF& s) {
  nlohmann::json j{{"precision", round2(s.precision)},
                   {"recall", round2(s.recall)},
                   {"f1", round2(s.f1)}};
  if (s.degenerate) j["degenerate"] = true;
  return j;
}

template <typename T>
PRF binary_prf(std::span<const T> preds, std::span<const T> gold,
               const T& positive) {
  if (preds.size() != gold.size())
    throw std::invalid_argument("binary_prf: " + std::to_string(preds.size()) +
                                " predictions vs " +
                                std::to_string(gold.size()) + " gold labels");
  if (preds.empty()) throw std::invalid_argument("binary_prf: empty input");
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t k = 0; k < preds.size(); ++k) {
    const bool p = preds[k] == positive, g = gold[k] == positive;
    tp += p && g;
    fp += p && !g;
    fn += !p && g;
  }
  return prf_from_counts(tp, tp + fp, tp, tp + fn);
}

template <typename T>
PRF binary_prf(const std::vector<T>& preds, const std::vector<T>& gold,
               const T& positive) {
  return binary_prf(std::span<const T>(preds), std::span<const T>(gold),
                    positive);
}

// Unweighted mean of per-class precision, recall and F1.
template <typename T>
PRF macro_prf(std::span<const T> preds, std::span<const T> gold,
              std::span<const T> classes) {
  if (classes.empty()) throw std::invalid_argument("macro_prf: no classes");
  PRF out;
  for (const T& c : classes) {
    const PRF s = binary_prf(preds, gold, c);
    out.precision += s.precision;
    out.recall += s.recall;
    out.f1 += s.f1;
    out.degenerate = out.degenerate || s.degenerate;
  }
  const double n = static_cast<double>(classes.size());
  out.precision /= n;
  out.recall /= n;
  out.f1 /= n;
  return out;
}

template <typename T>
PRF macro_prf(const std::vector<T>& preds, const std::vector<T>& gold,
              const std::vector<T>& classes) {
  return macro_prf(std::span<const T>(preds), std::span<const T>(gold),
                   std::span<const T>(classes));
}

// ---------------------------------------------------------------------------
// Coreference

using Mention = std::size_t;
using Entity = std::vector<Mention>;
using EntityPartition = std::vector<Entity>;

struct CorefScores {
  PRF muc;
  PRF b3;
  PRF ceaf_e;
  PRF blanc;
};

inline nlohmann::json to_json(const CorefScores& s) {
  return {{"muc", to_json(s.muc)},
          {"b3", to_json(s.b3)},
          {"ceaf_e", to_json(s.ceaf_e)},
          {"blanc", to_json(s.blanc)}};
}

namespace detail {

// Mention -> entity index; throws when a mention repeats.
inline std::map<Mention, std::size_t> entity_of(const EntityPartition& p) {
  std::map<Mention, std::size_t> out;
  for (std::size_t e = 0; e < p.size(); ++e)
    for (Mention m : p[e])
      if (!out.emplace(m, e).second)
        throw ValidationError("mention " + std::to_string(m) +
                              " appears in two entities");
  return out;
}

inline std::size_t overlap(const Entity& a, const Entity& b) {
  std::set<Mention> s(a.begin(), a.end());
  std::size_t n = 0;
  for (Mention m : b) n += s.count(m);
  return n;
}

// Sum over key entities of |K| - |partition of K induced by response|.
inline void muc_counts(const EntityPartition& key,
                       const std::map<Mention, std::size_t>& response_of,
                       double& num, double& den) {
  num = den = 0.0;
  for (const Entity& k : key) {
    if (k.empty()) continue;
    std::set<std::size_t> parts;
    for (Mention m : k) parts.insert(response_of.at(m));
    num += static_cast<double>(k.size() - parts.size());
    den += static_cast<double>(k.size() - 1);
  }
}

}  // namespace detail

// Maximum-weight assignment on a rectangular weight matrix (rows x cols).
// Returns the assigned column per row, or -1 when a row is left unmatched.
inline std::vector<long> max_weight_assignment(
    const std::vector<std::vector<double>>& weight) {
  const std::size_t rows = weight.size();
  const std::size_t cols = rows ? weight[0].size() : 0;
  const std::size_t n = std::max(rows, cols);
  if (n == 0) return {};
  // Hungarian algorithm (potentials, O(n^3)) on the negated, padded matrix.
  auto cost = [&](std::size_t i, std::size_t j) {
    return (i < rows && j < cols) ? -weight[i][j] : 0.0;
  };
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = match[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<long> out(rows, -1);
  for (std::size_t j = 1; j <= n; ++j)
    if (match[j] >= 1 && match[j] <= rows && j <= cols)
      out[match[j] - 1] = static_cast<long>(j - 1);
  return out;
}

// Entity similarity 2|K ∩ R| / (|K| + |R|).
inline double phi4(const Entity& k, const Entity& r) {
  const double denom = static_cast<double>(k.size() + r.size());
  return denom > 0.0 ? 2.0 * static_cast<double>(detail::overlap(k, r)) / denom
                     : 0.0;
}

inline PRF muc(const EntityPartition& pred, const EntityPartition& gold) {
  const auto pred_of = detail::entity_of(pred);
  const auto gold_of = detail::entity_of(gold);
  double r_num, r_den, p_num, p_den;
  detail::muc_counts(gold, pred_of, r_num, r_den);
  detail::muc_counts(pred, gold_of, p_num, p_den);
  return prf_from_counts(p_num, p_den, r_num, r_den);
}

inline PRF b_cubed(const EntityPartition& pred, const EntityPartition& gold) {
  const auto pred_of = detail::entity_of(pred);
  const auto gold_of = detail::entity_of(gold);
  double p = 0.0, r = 0.0;
  for (const auto& [m, ge] : gold_of) {
    const Entity& k = gold[ge];
    const Entity& s = pred[pred_of.at(m)];
    const double common = static_cast<double>(detail::overlap(k, s));
    p += common / static_cast<double>(s.size());
    r += common / static_cast<double>(k.size());
  }
  const double n = static_cast<double>(gold_of.size());
  return prf_from_counts(p, n, r, n);
}

inline PRF ceaf_e(const EntityPartition& pred, const EntityPartition& gold) {
  std::vector<std::vector<double>> sim(gold.size(),
                                       std::vector<double>(pred.size()));
  for (std::size_t i = 0; i < gold.size(); ++i)
    for (std::size_t j = 0; j < pred.size(); ++j)
      sim[i][j] = phi4(gold[i], pred[j]);
  double best = 0.0;
  const auto assign = max_weight_assignment(sim);
  for (std::size_t i = 0; i < assign.size(); ++i)
    if (assign[i] >= 0) best += sim[i][static_cast<std::size_t>(assign[i])];
  return prf_from_counts(best, static_cast<double>(pred.size()), best,
                         static_cast<double>(gold.size()));
}

// Pair counts behind BLANC; additive across documents.
struct BlancCounts {
  double link_both = 0, link_pred = 0, link_gold = 0;
  double nonlink_both = 0, nonlink_pred = 0, nonlink_gold = 0;

  BlancCounts& operator+=(const BlancCounts& o) {
    link_both += o.link_both;
    link_pred += o.link_pred;
    link_gold += o.link_gold;
    nonlink_both += o.nonlink_both;
    nonlink_pred += o.nonlink_pred;
    nonlink_gold += o.nonlink_gold;
    return *this;
  }
};

inline BlancCounts blanc_counts(const EntityPartition& pred,
                                const EntityPartition& gold) {
  const auto pred_of = detail::entity_of(pred);
  const auto gold_of = detail::entity_of(gold);
  std::vector<Mention> ms;
  for (const auto& [m, e] : gold_of) ms.push_back(m);
  BlancCounts c;
  for (std::size_t a = 0; a < ms.size(); ++a)
    for (std::size_t b = a + 1; b < ms.size(); ++b) {
      const bool in_pred = pred_of.at(ms[a]) == pred_of.at(ms[b]);
      const bool in_gold = gold_of.at(ms[a]) == gold_of.at(ms[b]);
      c.link_pred += in_pred;
      c.link_gold += in_gold;
      c.link_both += in_pred && in_gold;
      c.nonlink_pred += !in_pred;
      c.nonlink_gold += !in_gold;
      c.nonlink_both += !in_pred && !in_gold;
    }
  return c;
}

// Mean of the coreference-link and non-link scores. When neither side has a
// coreference link (all singletons), only the non-link class is scored and
// the result is flagged; likewise for the non-link class when both sides are
// one single entity.
inline PRF blanc_from_counts(const BlancCounts& c) {
  const PRF link =
      prf_from_counts(c.link_both, c.link_pred, c.link_both, c.link_gold);
  const PRF nonlink = prf_from_counts(c.nonlink_both, c.nonlink_pred,
                                      c.nonlink_both, c.nonlink_gold);
  const bool no_links = c.link_pred == 0 && c.link_gold == 0;
  const bool no_nonlinks = c.nonlink_pred == 0 && c.nonlink_gold == 0;
  if (no_links && no_nonlinks) return PRF{100.0, 100.0, 100.0, true};
  if (no_links) {
    PRF out = nonlink;
    out.degenerate = true;
    return out;
  }
  if (no_nonlinks) {
    PRF out = link;
    out.degenerate = true;
    return out;
  }
  PRF out;
  out.precision = (link.precision + nonlink.precision) / 2.0;
  out.recall = (link.recall + nonlink.recall) / 2.0;
  out.f1 = (link.f1 + nonlink.f1) / 2.0;
  out.degenerate = link.degenerate || nonlink.degenerate;
  return out;
}

inline PRF blanc(const EntityPartition& pred, const EntityPartition& gold) {
  return blanc_from_counts(blanc_counts(pred, gold));
}

// Scores a predicted partition against gold over the same mention universe.
inline CorefScores coref_score(const EntityPartition& pred,
                               const EntityPartition& gold) {
  std::set<Mention> pu, gu;
  for (const auto& [m, e] : detail::entity_of(pred)) pu.insert(m);
  for (const auto& [m, e] : detail::entity_of(gold)) gu.insert(m);
  if (pu != gu)
    throw ValidationError(
        "coref_score: predicted and gold partitions cover different mentions");
  for (const auto* p : {&pred, &gold})
    for (const Entity& e : *p)
      if (e.empty()) throw ValidationError("coref_score: empty entity");
  return {muc(pred, gold), b_cubed(pred, gold), ceaf_e(pred, gold),
          blanc(pred, gold)};
}

// Corpus-level scores: MUC, B3 and CEAF_e over the disjoint union of
// documents; BLANC from per-document pair counts so no cross-document pair
// is ever counted.
class CorefAccumulator {
 public:
  void add(const EntityPartition& pred, const EntityPartition& gold) {
    coref_score(pred, gold);  // validates the universes
    blanc_ += blanc_counts(pred, gold);
    Mention max_id = 0;
    for (const auto* part : {&pred, &gold})
      for (const Entity& e : *part)
        for (Mention m : e) max_id = std::max(max_id, m);
    for (const auto& [src, dst] : {std::pair{&pred, &pred_}, std::pair{&gold, &gold_}})
      for (Entity e : *src) {
        for (Mention& m : e) m += offset_;
        dst->push_back(std::move(e));
      }
    offset_ += max_id + 1;
  }

  bool empty() const { return gold_.empty(); }

  CorefScores score() const {
    return {muc(pred_, gold_), b_cubed(pred_, gold_), ceaf_e(pred_, gold_),
            blanc_from_counts(blanc_)};
  }

 private:
  EntityPartition pred_;
  EntityPartition gold_;
  BlancCounts blanc_;
  Mention offset_ = 0;
};

}  // namespace erg::metrics
