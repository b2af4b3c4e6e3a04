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

// Brute-force scorers written from the metric definitions, independent of
// erg/metrics.hpp. Results are {precision, recall, f1} in percent.

#include <algorithm>
#include <array>
#include <map>
#include <numeric>
#include <set>
#include <tuple>
#include <vector>

#include "erg/metrics.hpp"
#include "erg/nn.hpp"

namespace erg::testing::oracle {

using Part = std::vector<std::vector<std::size_t>>;
using Score = std::array<double, 3>;

inline double hm(double p, double r) {
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

inline Score pct(double p, double r) { return {100 * p, 100 * r, 100 * hm(p, r)}; }

// Random partition of mentions 0..n-1, entities in arbitrary order.
inline Part random_partition(std::size_t n, nn::Rng& rng) {
  std::map<std::size_t, std::vector<std::size_t>> by_label;
  for (std::size_t m = 0; m < n; ++m) by_label[rng.index(n)].push_back(m);
  Part out;
  for (auto& [l, e] : by_label) out.push_back(e);
  rng.shuffle(out);
  return out;
}

inline std::size_t owner(const Part& p, std::size_t m) {
  for (std::size_t e = 0; e < p.size(); ++e)
    if (std::count(p[e].begin(), p[e].end(), m)) return e;
  return static_cast<std::size_t>(-1);
}

inline std::size_t common(const std::vector<std::size_t>& a,
                          const std::vector<std::size_t>& b) {
  std::size_t c = 0;
  for (std::size_t x : a) c += std::count(b.begin(), b.end(), x);
  return c;
}

// Number of pieces `other` cuts entity k into.
inline std::size_t pieces(const std::vector<std::size_t>& k, const Part& other) {
  std::set<std::size_t> owners;
  for (std::size_t m : k) owners.insert(owner(other, m));
  return owners.size();
}

inline Score muc(const Part& pred, const Part& gold) {
  double rn = 0, rd = 0, pn = 0, pd = 0;
  for (const auto& k : gold) {
    rn += static_cast<double>(k.size() - pieces(k, pred));
    rd += static_cast<double>(k.size() - 1);
  }
  for (const auto& r : pred) {
    pn += static_cast<double>(r.size() - pieces(r, gold));
    pd += static_cast<double>(r.size() - 1);
  }
  return pct(pd ? pn / pd : 0.0, rd ? rn / rd : 0.0);
}

inline Score b_cubed(const Part& pred, const Part& gold) {
  double p = 0, r = 0, n = 0;
  for (const auto& k : gold)
    for (std::size_t m : k) {
      const auto& s = pred[owner(pred, m)];
      const double c = static_cast<double>(common(k, s));
      p += c / static_cast<double>(s.size());
      r += c / static_cast<double>(k.size());
      n += 1;
    }
  return pct(p / n, r / n);
}

// Best total weight over all partial injective row -> column maps.
inline double best_assignment(const std::vector<std::vector<double>>& w) {
  const std::size_t rows = w.size(), cols = w.empty() ? 0 : w[0].size();
  // Permute the larger side; pad columns with "unmatched" slots.
  const std::size_t n = std::max(rows, cols);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  double best = 0.0;
  do {
    double total = 0.0;
    for (std::size_t i = 0; i < rows; ++i)
      if (perm[i] < cols) total += w[i][perm[i]];
    best = std::max(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

inline Score ceaf_e(const Part& pred, const Part& gold) {
  std::vector<std::vector<double>> w(gold.size(),
                                     std::vector<double>(pred.size()));
  for (std::size_t i = 0; i < gold.size(); ++i)
    for (std::size_t j = 0; j < pred.size(); ++j)
      w[i][j] = 2.0 * static_cast<double>(common(gold[i], pred[j])) /
                static_cast<double>(gold[i].size() + pred[j].size());
  const double best = best_assignment(w);
  return pct(best / static_cast<double>(pred.size()),
             best / static_cast<double>(gold.size()));
}

// Link / non-link averaged BLANC. A class that neither side has is dropped.
inline Score blanc(const Part& pred, const Part& gold) {
  std::vector<std::size_t> ms;
  for (const auto& e : gold) ms.insert(ms.end(), e.begin(), e.end());
  double lp = 0, lg = 0, lb = 0, np = 0, ng = 0, nb = 0;
  for (std::size_t a : ms)
    for (std::size_t b : ms) {
      if (a >= b) continue;
      const bool sp = owner(pred, a) == owner(pred, b);
      const bool sg = owner(gold, a) == owner(gold, b);
      lp += sp, lg += sg, lb += sp && sg;
      np += !sp, ng += !sg, nb += !sp && !sg;
    }
  const Score link = pct(lp ? lb / lp : 0, lg ? lb / lg : 0);
  const Score non = pct(np ? nb / np : 0, ng ? nb / ng : 0);
  const bool has_link = lp + lg > 0, has_non = np + ng > 0;
  if (!has_link && !has_non) return {100, 100, 100};
  if (!has_link) return non;
  if (!has_non) return link;
  return {(link[0] + non[0]) / 2, (link[1] + non[1]) / 2,
          (link[2] + non[2]) / 2};
}

// Unweighted macro average over classes 0..k-1.
inline std::tuple<double, double, double> macro(const std::vector<int>& p,
                                                const std::vector<int>& g,
                                                int k) {
  double sp = 0, sr = 0, sf = 0;
  for (int c = 0; c < k; ++c) {
    double tp = 0, pp = 0, gp = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      tp += p[i] == c && g[i] == c;
      pp += p[i] == c;
      gp += g[i] == c;
    }
    const double prec = pp ? tp / pp : 0, rec = gp ? tp / gp : 0;
    sp += 100 * prec;
    sr += 100 * rec;
    sf += 100 * hm(prec, rec);
  }
  return {sp / k, sr / k, sf / k};
}

}  // namespace erg::testing::oracle
