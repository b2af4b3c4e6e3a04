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

// Layers, a portable seeded RNG, and the Adam optimizer.

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "erg/autodiff.hpp"

namespace erg::nn {

using ad::Matrix;
using ad::Parameter;
using ad::Tape;
using ad::Var;

// mt19937_64 with hand-rolled distributions; the standard library's
// distributions are implementation-defined, this is bit-stable everywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n) by rejection sampling.
  std::uint64_t index(std::uint64_t n) {
    if (n == 0) return 0;
    const std::uint64_t limit =
        std::numeric_limits<std::uint64_t>::max() -
        std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  double normal() {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i)
      std::swap(v[i - 1], v[index(i)]);
  }

  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

inline Matrix xavier(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = rng.uniform(-bound, bound);
  return m;
}

// Named parameter references; order defines checkpoint layout.
using ParamList = std::vector<std::pair<std::string, Parameter*>>;

// y = x W + b with W stored as (in x out).
struct Linear {
  Parameter weight;
  Parameter bias;

  Linear() = default;
  Linear(Eigen::Index in, Eigen::Index out, Rng& rng)
      : weight(xavier(in, out, rng)), bias(Matrix::Zero(1, out)) {}

  Eigen::Index in_dim() const { return weight.value.rows(); }
  Eigen::Index out_dim() const { return weight.value.cols(); }

  Var operator()(Tape& t, Var x) {
    if (x.cols() != in_dim())
      throw ad::DimensionError("Linear: input width " +
                               std::to_string(x.cols()) + " != " +
                               std::to_string(in_dim()));
    return ad::add_row(ad::matmul(x, t.param(weight)), t.param(bias));
  }

  void collect(const std::string& prefix, ParamList& out) {
    out.emplace_back(prefix + ".weight", &weight);
    out.emplace_back(prefix + ".bias", &bias);
  }
};

enum class Activation { kIdentity, kTanh };

// softmax(W2 act(W1 x + b1) + b2), one distribution per input row.
struct TwoLayerSoftmax {
  Linear first;
  Linear second;
  Activation activation = Activation::kIdentity;

  TwoLayerSoftmax() = default;
  TwoLayerSoftmax(Eigen::Index in, Eigen::Index hidden, Eigen::Index classes,
                  Activation act, Rng& rng)
      : first(in, hidden, rng), second(hidden, classes, rng), activation(act) {}

  Eigen::Index in_dim() const { return first.in_dim(); }
  Eigen::Index arity() const { return second.out_dim(); }

  Var logits(Tape& t, Var x) {
    Var h = first(t, x);
    if (activation == Activation::kTanh) h = ad::tanh(h);
    return second(t, h);
  }

  Var operator()(Tape& t, Var x) { return ad::softmax_rows(logits(t, x)); }

  void collect(const std::string& prefix, ParamList& out) {
    first.collect(prefix + ".1", out);
    second.collect(prefix + ".2", out);
  }
};

// Residual window-3 convolution: y_i = x_i + tanh([x_{i-1} x_i x_{i+1}] W + b).
struct ContextLayer {
  Linear mix;

  ContextLayer() = default;
  ContextLayer(Eigen::Index dim, Rng& rng) : mix(3 * dim, dim, rng) {}

  Var operator()(Tape& t, Var x) {
    const Eigen::Index n = x.rows();
    Var padded = ad::concat_rows(
        {t.constant(Matrix::Zero(1, x.cols())), x,
         t.constant(Matrix::Zero(1, x.cols()))});
    std::vector<Eigen::Index> prev(n), next(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      prev[i] = i;
      next[i] = i + 2;
    }
    Var window = ad::concat_cols(
        {ad::gather_rows(padded, prev), x, ad::gather_rows(padded, next)});
    return ad::add(x, ad::tanh(mix(t, window)));
  }

  void collect(const std::string& prefix, ParamList& out) {
    mix.collect(prefix, out);
  }
};

// One LSTM direction; gates packed as [input, forget, cell, output].
struct LstmCell {
  Linear input;       // x -> 4h (carries the bias)
  Parameter recurrent;  // h -> 4h

  LstmCell() = default;
  LstmCell(Eigen::Index in, Eigen::Index hidden, Rng& rng)
      : input(in, 4 * hidden, rng), recurrent(xavier(hidden, 4 * hidden, rng)) {
    // Forget-gate bias starts at 1.
    input.bias.value.middleCols(hidden, hidden).setOnes();
  }

  Eigen::Index hidden() const { return recurrent.value.rows(); }

  // Returns the hidden state per row of x, in the order visited.
  Var run(Tape& t, Var x, bool reverse) {
    const Eigen::Index n = x.rows(), h = hidden();
    Var projected = input(t, x);
    Var wh = t.param(recurrent);
    Var state = t.constant(Matrix::Zero(1, h));
    Var cell = t.constant(Matrix::Zero(1, h));
    std::vector<Var> outputs(static_cast<std::size_t>(n));
    for (Eigen::Index k = 0; k < n; ++k) {
      const Eigen::Index step = reverse ? n - 1 - k : k;
      Var gates = ad::add(ad::row(projected, step), ad::matmul(state, wh));
      Var i = ad::sigmoid(ad::slice_cols(gates, 0, h));
      Var f = ad::sigmoid(ad::slice_cols(gates, h, h));
      Var g = ad::tanh(ad::slice_cols(gates, 2 * h, h));
      Var o = ad::sigmoid(ad::slice_cols(gates, 3 * h, h));
      cell = ad::add(ad::mul(f, cell), ad::mul(i, g));
      state = ad::mul(o, ad::tanh(cell));
      outputs[static_cast<std::size_t>(step)] = state;
    }
    return ad::concat_rows(outputs);
  }

  void collect(const std::string& prefix, ParamList& out) {
    input.collect(prefix + ".input", out);
    out.emplace_back(prefix + ".recurrent", &recurrent);
  }
};

// Bidirectional LSTM; output width = 2 * hidden.
struct BiLstm {
  LstmCell forward;
  LstmCell backward;

  BiLstm() = default;
  BiLstm(Eigen::Index in, Eigen::Index hidden, Rng& rng)
      : forward(in, hidden, rng), backward(in, hidden, rng) {}

  Var operator()(Tape& t, Var x) {
    return ad::concat_cols({forward.run(t, x, false), backward.run(t, x, true)});
  }

  void collect(const std::string& prefix, ParamList& out) {
    forward.collect(prefix + ".fwd", out);
    backward.collect(prefix + ".bwd", out);
  }
};

struct AdamConfig {
  double lr = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 5.0;  // global gradient-norm clip; <= 0 disables
};

class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  void zero_grad(const ParamList& params) const {
    for (const auto& [name, p] : params) p->zero_grad();
  }

  void step(const ParamList& params) {
    ++t_;
    double scale = 1.0;
    if (config_.clip_norm > 0.0) {
      double sq = 0.0;
      for (const auto& [name, p] : params) sq += p->grad.squaredNorm();
      const double norm = std::sqrt(sq);
      if (norm > config_.clip_norm) scale = config_.clip_norm / norm;
    }
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    for (const auto& [name, p] : params) {
      const Matrix g = p->grad * scale;
      p->adam_m = config_.beta1 * p->adam_m + (1.0 - config_.beta1) * g;
      p->adam_v = config_.beta2 * p->adam_v +
                  (1.0 - config_.beta2) * g.cwiseProduct(g);
      p->value.array() -= config_.lr * (p->adam_m.array() / c1) /
                          ((p->adam_v.array() / c2).sqrt() + config_.eps);
    }
  }

  long steps() const { return t_; }

 private:
  AdamConfig config_;
  long t_ = 0;
};

}  // namespace erg::nn
