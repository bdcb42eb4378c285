// Copyright 2026 The gmix Authors.
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

#include "gmix/model.hpp"

#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "gradient_check.hpp"

namespace gmix {
namespace {

GraphBridgeParams default_params() {
  const BridgeParams p{-0.5, NoiseSchedule(1.0, 0.04)};
  return {p, p};
}

GraphState noisy_state(int n, int f, Rng& rng) {
  GraphState g = sample_prior(n, f, rng);
  g.A.array() += 0.4;
  g.A.diagonal().setZero();
  return g;
}

TEST(MixtureNet, ZeroParametersGiveNeutralHeads) {
  const MixtureNet net(FeatureKind{EdgeKind::binary, 3}, 16, 2);
  Rng rng(1);
  const auto D = net(noisy_state(5, 3, rng), 0.3);
  for (int i = 0; i < 5; ++i) {
    EXPECT_EQ(D.DA(i, i), 0.0);
    for (int j = 0; j < 5; ++j)
      if (i != j) EXPECT_EQ(D.DA(i, j), 0.5);
    for (int c = 0; c < 3; ++c) EXPECT_NEAR(D.DX(i, c), 1.0 / 3.0, 1e-15);
  }
}

TEST(MixtureNet, PermutationEquivariantExactly) {
  Rng rng(2);
  const MixtureNet net(FeatureKind{EdgeKind::binary, 3}, 32, 3, rng);
  for (int trial = 0; trial < 20; ++trial) {
    const GraphState G = noisy_state(7, 3, rng);
    const Permutation perm = random_permutation(7, rng);
    const double t = 0.05 * trial;
    const auto D = net(G, t);
    const auto PD = net(permute(G, perm), t);
    EXPECT_TRUE(PD.DA == permute_square(D.DA, perm));
    EXPECT_TRUE(PD.DX == permute_rows(D.DX, perm));
  }
}

TEST(MixtureNet, OutputRanges) {
  Rng rng(3);
  const MixtureNet net(FeatureKind{EdgeKind::bond, 4}, 24, 2, rng);
  for (int trial = 0; trial < 20; ++trial) {
    const auto D = net(noisy_state(6, 4, rng), 0.9);
    EXPECT_TRUE(D.DA == D.DA.transpose());
    EXPECT_TRUE(D.DA.diagonal().isZero(0.0));
    for (int i = 0; i < 6; ++i) {
      EXPECT_NEAR(D.DX.row(i).sum(), 1.0, 1e-12);
      for (int j = 0; j < 6; ++j)
        if (i != j) {
          EXPECT_GT(D.DA(i, j), 0.0);
          EXPECT_LT(D.DA(i, j), 1.0);
        }
    }
  }
}

TEST(MixtureNet, FeaturelessHasEmptyNodeHead) {
  Rng rng(4);
  const MixtureNet net(FeatureKind{}, 8, 1, rng);
  const auto D = net(noisy_state(4, 0, rng), 0.2);
  EXPECT_EQ(D.DX.rows(), 4);
  EXPECT_EQ(D.DX.cols(), 0);
}

TEST(MixtureNet, ShapeMismatchRejected) {
  const MixtureNet net(FeatureKind{EdgeKind::binary, 2}, 8, 1);
  Rng rng(5);
  EXPECT_THROW(net(noisy_state(4, 3, rng), 0.1), std::invalid_argument);
  GraphState bad{Matrix::Zero(3, 2), Matrix::Zero(3, 4)};
  EXPECT_THROW(net(bad, 0.1), std::invalid_argument);
}

TEST(Loss, GammaAtStart) {
  const auto p = default_params().a;
  // Reference value evaluated at 40 significant digits.
  EXPECT_NEAR(loss_gamma(p, 0.0, 1e-3), 1.901579924565174851, 1e-13);
  const auto s = uv(p, 0.0);
  EXPECT_NEAR(loss_gamma(p, 0.0, 1e-3), 1.0 / (s.u * s.v), 1e-13);
}

TEST(Loss, GammaGuard) {
  const auto p = default_params().a;
  EXPECT_TRUE(std::isfinite(loss_gamma(p, 1.0 - 1e-6, 1e-6)));
  EXPECT_THROW(loss_gamma(p, 1.0 - 1e-4, 1e-3), std::domain_error);
  EXPECT_THROW(loss_gamma(p, 1.0, 1e-6), std::domain_error);
}

TEST(Loss, ZeroAtTargetAndSimplifiedUnit) {
  const auto bridge = default_params();
  GraphState target{Matrix::Zero(3, 2), Matrix::Zero(3, 3)};
  target.A(0, 1) = target.A(1, 0) = 1.0;
  target.X(0, 1) = 1.0;
  const TrainExample ex{target, 0.4, target};
  MixturePrediction D{target.X, target.A, {}, {}};
  TrainConfig cfg;
  EXPECT_EQ(example_loss(D, ex, bridge, cfg).loss, 0.0);
  cfg.loss_mode = LossMode::simplified_c;
  cfg.c = 1.0;
  D.DX(2, 0) = 1.0;
  EXPECT_DOUBLE_EQ(example_loss(D, ex, bridge, cfg).loss, 0.5);
  D.DX(2, 0) = 0.0;
  D.DA(1, 2) = D.DA(2, 1) = 1.0;
  EXPECT_DOUBLE_EQ(example_loss(D, ex, bridge, cfg).loss, 0.5 * cfg.lambda);
}

TEST(Loss, TimeBeyondEpsilonRejected) {
  const auto bridge = default_params();
  GraphState g{Matrix::Zero(2, 0), Matrix::Zero(2, 2)};
  const MixturePrediction D{g.X, g.A, {}, {}};
  TrainConfig cfg;
  EXPECT_THROW(example_loss(D, {g, 0.9995, g}, bridge, cfg), std::domain_error);
  cfg.loss_mode = LossMode::simplified_c;
  EXPECT_THROW(example_loss(D, {g, 0.9995, g}, bridge, cfg), std::domain_error);
}

std::vector<TrainExample> probe_batch(const MixtureNet& net, int n, Rng& rng) {
  const int f = net.shape().categories;
  LabeledGraph g = make_cycle(n);
  if (f > 0) {
    std::vector<int> labels(n);
    for (int i = 0; i < n; ++i) labels[i] = i % f;
    g.set_labels(labels);
  }
  const GraphState target = to_state(g, net.kind());
  std::vector<TrainExample> batch;
  for (double t : {0.21, 0.63}) batch.push_back({noisy_state(n, f, rng), t, target});
  return batch;
}

TEST(Gradients, MatchFiniteDifferencesPerBlock) {
  Rng rng(6);
  for (const FeatureKind kind : {FeatureKind{EdgeKind::binary, 3}, FeatureKind{}}) {
    MixtureNet net(kind, 12, 2, rng);
    const auto batch = probe_batch(net, 4, rng);
    for (LossMode mode : {LossMode::weighted_gamma, LossMode::simplified_c}) {
      TrainConfig cfg;
      cfg.loss_mode = mode;
      cfg.c = 1.0;
      const auto report = testing::check_gradients(net, batch, default_params(), cfg);
      for (const auto& block : report) {
        EXPECT_LT(block.rel_error, 1e-4) << block.name;
      }
    }
  }
}

TEST(Gradients, ZeroLossGivesZeroGradients) {
  Rng rng(7);
  const MixtureNet net(FeatureKind{EdgeKind::binary, 2}, 8, 2, rng);
  GraphState G = noisy_state(4, 2, rng);
  const auto D = net(G, 0.3);
  const std::vector<TrainExample> batch{{G, 0.3, GraphState{D.DX, D.DA}}};
  Gradients grads;
  EXPECT_EQ(batch_loss(net, batch, default_params(), TrainConfig{}, &grads), 0.0);
  for (const auto& g : grads) EXPECT_EQ(g.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Gradients, InvariantUnderNodePermutation) {
  Rng rng(8);
  const MixtureNet net(FeatureKind{EdgeKind::binary, 2}, 16, 2, rng);
  const auto batch = probe_batch(net, 5, rng);
  std::vector<TrainExample> permuted;
  for (const auto& ex : batch) {
    const Permutation perm = random_permutation(5, rng);
    permuted.push_back({permute(ex.state, perm), ex.t, permute(ex.target, perm)});
  }
  Gradients a, b;
  const double la = batch_loss(net, batch, default_params(), TrainConfig{}, &a);
  const double lb = batch_loss(net, permuted, default_params(), TrainConfig{}, &b);
  EXPECT_NEAR(la, lb, 1e-12 * la);
  for (size_t k = 0; k < a.size(); ++k) {
    const double scale = std::max(a[k].norm(), 1e-300);
    EXPECT_LT((a[k] - b[k]).norm() / scale, 1e-12) << net.params()[k].name;
  }
}

TrainConfig fit_config(int epochs) {
  TrainConfig cfg;
  cfg.loss_mode = LossMode::simplified_c;
  cfg.c = 1.0;
  cfg.optimizer = OptimizerKind::adam;
  cfg.lr = 3e-3;
  cfg.epochs = epochs;
  cfg.batch = 4;
  return cfg;
}

double probe_error(const MixtureNet& net, const Dataset& data, const GraphBridgeParams& bridge,
                   double t, Rng& rng) {
  double worst = 0.0;
  for (int probe = 0; probe < 20; ++probe) {
    const GraphState G0 = sample_prior(4, 0, rng);
    const GraphState Gt = sample_interpolant(bridge, t, G0, data.state(0), rng);
    worst = std::max(worst, (net(Gt, t).DA - data.state(0).A).cwiseAbs().maxCoeff());
  }
  return worst;
}

TEST(Training, OneGraphDatasetFits) {
  // An equivariant predictor cannot tell the graph from its relabellings, so
  // its best output at time t is the mixture over the orbit of the graph. That
  // mixture concentrates on the graph itself only late in time; probe there.
  const Dataset data(std::vector<LabeledGraph>(4, make_path(4)));
  const auto bridge = default_params();
  Rng rng(9);
  MixtureNet net(data.kind(), 32, 2, rng);
  const auto result = train(net, data, bridge, fit_config(4000), rng);
  ASSERT_EQ(result.losses.size(), 4000u);
  EXPECT_LT(probe_error(net, data, bridge, 0.9, rng), 0.05);
}

TEST(Training, LossTrendsDown) {
  Rng rng(10);
  const Dataset data(gen_toy(ToyFamily::cycles_paths, 6, 8, rng));
  const auto bridge = default_params();
  MixtureNet net(data.kind(), 16, 2, rng);
  TrainConfig cfg;
  cfg.epochs = 60;
  cfg.batch = 4;
  cfg.lr = 1e-4;
  const auto result = train(net, data, bridge, cfg, rng);
  const auto& L = result.losses;
  const size_t q = L.size() / 4;
  double first = 0.0, last = 0.0;
  for (size_t i = 0; i < q; ++i) {
    first += L[i];
    last += L[L.size() - 1 - i];
  }
  EXPECT_LT(last, first);
}

TEST(Training, NonFiniteLossAborts) {
  Rng rng(11);
  const Dataset data({make_cycle(4)});
  MixtureNet net(data.kind(), 8, 1, rng);
  net.params()[0].value(0, 0) = std::numeric_limits<double>::quiet_NaN();
  TrainConfig cfg;
  cfg.epochs = 2;
  EXPECT_THROW(train(net, data, default_params(), cfg, rng), std::runtime_error);
}

TEST(Training, DeterministicGivenSeed) {
  const Dataset data({make_cycle(5), make_path(5)});
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.batch = 2;
  auto run = [&] {
    Rng rng(12);
    MixtureNet net(data.kind(), 8, 1, rng);
    train(net, data, default_params(), cfg, rng);
    return net;
  };
  const MixtureNet a = run(), b = run();
  for (size_t k = 0; k < a.params().size(); ++k) {
    EXPECT_TRUE(a.params()[k].value == b.params()[k].value);
  }
}

TEST(Serialization, RoundTripBitExact) {
  Rng rng(13);
  const BridgeParams px{-0.25, NoiseSchedule(0.9, 0.1)};
  ModelFile m{MixtureNet(FeatureKind{EdgeKind::bond, 3}, 8, 2, rng), {px, default_params().a}};
  const std::string text = to_json(m).dump();
  const ModelFile back = model_from_json(nlohmann::ordered_json::parse(text));
  EXPECT_EQ(to_json(back).dump(), text);
  EXPECT_EQ(back.net.kind(), m.net.kind());
  EXPECT_EQ(back.net.shape(), m.net.shape());
  EXPECT_EQ(back.bridge.x.alpha, -0.25);
  for (size_t k = 0; k < m.net.params().size(); ++k) {
    EXPECT_TRUE(back.net.params()[k].value == m.net.params()[k].value);
  }
}

TEST(Serialization, RejectsCorruptDocuments) {
  Rng rng(14);
  ModelFile m{MixtureNet(FeatureKind{}, 4, 1, rng), default_params()};
  auto j = to_json(m);
  auto missing = j;
  missing["params"].erase("edge.W1");
  EXPECT_THROW(model_from_json(missing), std::runtime_error);
  auto wrong = j;
  wrong["params"]["in.b"]["rows"] = 5;
  EXPECT_THROW(model_from_json(wrong), std::runtime_error);
  EXPECT_THROW(model_from_json(nlohmann::ordered_json::object()), std::runtime_error);
}

}  // namespace
}  // namespace gmix
