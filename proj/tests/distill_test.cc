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

#include <cmath>
#include <cstring>
#include <filesystem>

#include <gtest/gtest.h>

#include "erg/distill.hpp"
#include "erg/erg.hpp"
#include "erg/synthetic.hpp"
#include "testing.hpp"

namespace erg {
namespace {

DistillConfig tiny_config() {
  DistillConfig c;
  c.encoder.dim = 4;
  c.encoder.vocab_buckets = 16;
  c.encoder.context_layers = 1;
  c.head_hidden = 3;
  c.seed = 7;
  return c;
}

std::map<std::string, EventRelationGraph> gold_graphs(
    const std::vector<AnnotatedDocument>& docs) {
  std::map<std::string, EventRelationGraph> out;
  for (const auto& d : docs) out.emplace(d.document.doc_id, annotation_graph(d));
  return out;
}

std::vector<Document> documents(const std::vector<AnnotatedDocument>& docs) {
  std::vector<Document> out;
  for (const auto& d : docs) out.push_back(d.document);
  return out;
}

// Two-layer softmax recomputed directly from the parameter matrices.
nn::Matrix recompute(nn::TwoLayerSoftmax& h, const nn::Matrix& x) {
  nn::Matrix z = (x * h.first.weight.value).rowwise() +
                 h.first.bias.value.row(0);
  z = (z * h.second.weight.value).rowwise() + h.second.bias.value.row(0);
  nn::Matrix out(z.rows(), z.cols());
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const double mx = z.row(r).maxCoeff();
    double s = 0.0;
    for (Eigen::Index c = 0; c < z.cols(); ++c) s += std::exp(z(r, c) - mx);
    for (Eigen::Index c = 0; c < z.cols(); ++c)
      out(r, c) = std::exp(z(r, c) - mx) / s;
  }
  return out;
}

void zero_biases(nn::TwoLayerSoftmax& h) {
  h.first.bias.value.setZero();
  h.second.bias.value.setZero();
}

TEST(EventHead, ZeroInputGivesHalfHalf) {
  EventAwareEncoder m = EventAwareEncoder::create(tiny_config());
  zero_biases(m.event_layers());
  nn::Tape t;
  const nn::Matrix q =
      m.event_head(t, t.constant(nn::Matrix::Zero(3, 4))).value();
  for (Eigen::Index r = 0; r < 3; ++r) {
    EXPECT_DOUBLE_EQ(q(r, 0), 0.5);
    EXPECT_DOUBLE_EQ(q(r, 1), 0.5);
  }
}

TEST(EventHead, MatchesDirectRecomputation) {
  EventAwareEncoder m = EventAwareEncoder::create(tiny_config());
  nn::Rng rng(1);
  const nn::Matrix x = testing::random_matrix(20, 4, rng, 3.0);
  nn::Tape t;
  const nn::Matrix q = m.event_head(t, t.constant(x)).value();
  EXPECT_LT((q - recompute(m.event_layers(), x)).cwiseAbs().maxCoeff(), 1e-6);
  for (Eigen::Index r = 0; r < q.rows(); ++r)
    EXPECT_NEAR(q.row(r).sum(), 1.0, 1e-6);
}

TEST(EventHead, WidthMismatchIsAnError) {
  EventAwareEncoder m = EventAwareEncoder::create(tiny_config());
  nn::Tape t;
  EXPECT_THROW(m.event_head(t, t.constant(nn::Matrix::Zero(1, 5))),
               ValidationError);
  EXPECT_THROW(m.relation_head(t, Family::kCausal,
                               t.constant(nn::Matrix::Zero(1, 4)),
                               t.constant(nn::Matrix::Zero(1, 3))),
               ValidationError);
  EXPECT_THROW(parse_family("motive"), std::exception);
}

TEST(RelationHead, AritiesAndUniformOnZeroInput) {
  EventAwareEncoder m = EventAwareEncoder::create(tiny_config());
  for (Family f : kFamilies) {
    zero_biases(m.relation_layers(f));
    nn::Tape t;
    const nn::Matrix q =
        m.relation_head(t, f, t.constant(nn::Matrix::Zero(2, 4)),
                        t.constant(nn::Matrix::Zero(2, 4)))
            .value();
    ASSERT_EQ(q.cols(), static_cast<Eigen::Index>(arity(f)));
    for (Eigen::Index c = 0; c < q.cols(); ++c)
      EXPECT_DOUBLE_EQ(q(0, c), 1.0 / static_cast<double>(arity(f)));
  }
}

TEST(RelationHead, ConcatenationIsOrderSensitive) {
  EventAwareEncoder m = EventAwareEncoder::create(tiny_config());
  nn::Rng rng(2);
  const nn::Matrix a = testing::random_matrix(1, 4, rng, 2.0);
  const nn::Matrix b = testing::random_matrix(1, 4, rng, 2.0);
  for (Family f : kFamilies) {
    nn::Tape t;
    const nn::Matrix ab =
        m.relation_head(t, f, t.constant(a), t.constant(b)).value();
    const nn::Matrix ba =
        m.relation_head(t, f, t.constant(b), t.constant(a)).value();
    EXPECT_GT((ab - ba).cwiseAbs().maxCoeff(), 1e-6);
    nn::Matrix cat(1, 8);
    cat << a, b;
    EXPECT_LT((ab - recompute(m.relation_layers(f), cat)).cwiseAbs().maxCoeff(),
              1e-6);
  }
}

TEST(SoftCrossEntropy, HandValuesAndErrors) {
  nn::Tape t;
  nn::Matrix p(1, 2), q(1, 2);
  p << 0.5, 0.5;
  q << 0.25, 0.75;
  EXPECT_NEAR(soft_cross_entropy(p, t.constant(q)).scalar(),
              -(0.5 * std::log(0.25) + 0.5 * std::log(0.75)), 1e-12);
  EXPECT_NEAR(soft_cross_entropy(p, t.constant(q)).scalar(), 0.8370, 5e-5);
  nn::Matrix one(1, 3);
  one << 0, 1, 0;
  EXPECT_DOUBLE_EQ(soft_cross_entropy(one, t.constant(one)).scalar(), 0.0);
  EXPECT_THROW(soft_cross_entropy(p, t.constant(one)), std::invalid_argument);
}

TEST(SoftCrossEntropy, MinimizedAtTarget) {
  nn::Rng rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    const auto target = testing::random_distribution(4, rng);
    nn::Matrix p(1, 4);
    for (int k = 0; k < 4; ++k) p(0, k) = target[k];
    nn::Parameter z(nn::Matrix::Zero(1, 4));
    for (int step = 0; step < 3000; ++step) {
      z.zero_grad();
      nn::Tape t;
      nn::Var loss = soft_cross_entropy(p, ad::softmax_rows(t.param(z)));
      t.backward(loss);
      z.value -= 0.5 * z.grad;
    }
    const nn::Matrix q = ad::softmax_rows_value(z.value);
    EXPECT_LT((q - p).cwiseAbs().maxCoeff(), 1e-4);
  }
}

TEST(TotalDistillLoss, SumsComponents) {
  EXPECT_DOUBLE_EQ(total_distill_loss(std::array<double, 5>{}), 0.0);
  EXPECT_DOUBLE_EQ(total_distill_loss(std::array<double, 5>{1, 2, 3, 4, 5}),
                   15.0);
  const auto docs = synthetic_annotated_corpus(3, 4);
  const auto graphs = gold_graphs(docs);
  const auto plain = documents(docs);
  EventAwareEncoder m = EventAwareEncoder::create(tiny_config());
  const auto batches = make_distill_batches(plain, graphs, tiny_config());
  for (const DistillBatch& b : batches) {
    nn::Tape t;
    std::array<double, 5> c{};
    const double total = distill_loss(t, m, b, kAllComponents, &c).scalar();
    EXPECT_NEAR(total, c[0] + c[1] + c[2] + c[3] + c[4], 1e-12);
    for (double x : c) EXPECT_GT(x, 0.0);
  }
}

TEST(DistillLoss, EqualsTargetEntropyWhenQEqualsP) {
  // With Q = P the loss is the entropy of P.
  nn::Rng rng(5);
  const auto d = testing::random_distribution(3, rng);
  nn::Matrix p(1, 3);
  p << d[0], d[1], d[2];
  nn::Tape t;
  double h = 0.0;
  for (double x : d) h -= x * std::log(x);
  EXPECT_NEAR(soft_cross_entropy(p, t.constant(p)).scalar(), h, 1e-12);
}

TEST(DistillLoss, GradientsMatchFiniteDifferences) {
  const auto docs = synthetic_annotated_corpus(1, 8);
  const auto graphs = gold_graphs(docs);
  const auto plain = documents(docs);
  EventAwareEncoder m = EventAwareEncoder::create(tiny_config());
  const auto batches = make_distill_batches(plain, graphs, tiny_config());
  const auto report = testing::check_gradients(m.params(), [&](nn::Tape& t) {
    return distill_loss(t, m, batches[0]);
  });
  EXPECT_LT(report.max_relative_error, 1e-4) << report.worst;
}

TEST(DistillBatch, MissingGraphIsAnError) {
  const auto docs = synthetic_annotated_corpus(2, 8);
  auto graphs = gold_graphs(docs);
  graphs.erase(docs[1].document.doc_id);
  EXPECT_THROW(
      train_event_aware_encoder(documents(docs), graphs, tiny_config()),
      PrerequisiteError);
}

TEST(DistillBatch, SubsamplingOnlyDropsNearCertainNonePairs) {
  const auto docs = synthetic_annotated_corpus(5, 8, {.min_clauses = 4,
                                                     .max_clauses = 6});
  for (const auto& d : docs) {
    const EventRelationGraph g = annotation_graph(d, 0.001);
    nn::Rng rng(1);
    const DistillBatch all = make_distill_batch(d.document, g, 1.0, rng);
    const DistillBatch some = make_distill_batch(d.document, g, 0.01, rng);
    EXPECT_EQ(all.pairs.size(), g.soft_labels.size());
    for (const auto& pair : all.pairs) {
      const auto& p = g.soft_labels.at(pair);
      bool none = true;
      for (Family f : kFamilies) none &= argmax(p.of(f)) == kNone;
      if (!none)
        EXPECT_NE(std::find(some.pairs.begin(), some.pairs.end(), pair),
                  some.pairs.end());
    }
  }
}

TEST(TrainEventAware, HalvesLossOnTwentyDocuments) {
  const auto docs = synthetic_annotated_corpus(20, 11);
  DistillConfig c;
  c.encoder.dim = 16;
  c.head_hidden = 16;
  c.epochs = 8;
  DistillLog log;
  EventAwareEncoder m =
      train_event_aware_encoder(documents(docs), gold_graphs(docs), c, &log);
  EXPECT_LT(log.final_loss, 0.5 * log.initial_loss)
      << log.initial_loss << " -> " << log.final_loss;
}

TEST(TrainEventAware, CheckpointRoundTripAndDeterminism) {
  const auto docs = synthetic_annotated_corpus(3, 12);
  DistillConfig c = tiny_config();
  c.epochs = 2;
  EventAwareEncoder a =
      train_event_aware_encoder(documents(docs), gold_graphs(docs), c);
  EventAwareEncoder b =
      train_event_aware_encoder(documents(docs), gold_graphs(docs), c);
  const auto path = std::filesystem::temp_directory_path() /
                    ("erg_distill_" + std::to_string(::getpid()));
  save_event_aware(path, a);
  EventAwareEncoder back = load_event_aware(path);
  std::filesystem::remove(path);
  const auto pa = a.params(), pb = b.params(), pc = back.params();
  ASSERT_EQ(pa.size(), pc.size());
  for (std::size_t k = 0; k < pa.size(); ++k) {
    const std::size_t bytes = sizeof(double) * pa[k].second->value.size();
    EXPECT_EQ(std::memcmp(pa[k].second->value.data(),
                          pb[k].second->value.data(), bytes), 0);
    EXPECT_EQ(std::memcmp(pa[k].second->value.data(),
                          pc[k].second->value.data(), bytes), 0);
  }
}

}  // namespace
}  // namespace erg
