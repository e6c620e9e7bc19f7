// Copyright 2026 The DCL Authors.
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
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "dcl/losses.hpp"
#include "dcl/random.hpp"
#include "support/oracles.hpp"

namespace dcl {
namespace {

FeatureBatch make(std::vector<Vec> a, std::vector<Vec> b) { return {std::move(a), std::move(b), {}}; }

// ---- DC loss values --------------------------------------------------------

TEST(DcLoss, SinglePairIsExactlyZero) {
  for (double tau : {0.01, 0.5, 3.0}) {
    const LossValue v = dc_loss(make({{1, 2}}, {{-3, 0.5}}), {tau});
    EXPECT_EQ(v.value, 0.0);
    ASSERT_EQ(v.per_sample_terms.size(), 2u);
  }
}

TEST(DcLoss, OrthonormalPairTauOne) {
  const LossValue v = dc_loss(make({{1, 0}, {0, 1}}, {{1, 0}, {0, 1}}), {1.0});
  EXPECT_NEAR(v.value, 2.0 * std::log(1.0 + std::exp(-1.0)), 1e-12);
  EXPECT_NEAR(v.value, 0.626524, 1e-6);
}

TEST(DcLoss, IdenticalFeaturesGiveTwoLogN) {
  const Vec x{0.3, -1.2, 2.0};
  for (double tau : {0.05, 1.0, 7.0}) {
    const LossValue v = dc_loss(make({x, x, x}, {x, x, x}), {tau});
    EXPECT_NEAR(v.value, 2.0 * std::log(3.0), 1e-9);
  }
}

TEST(DcLoss, ValueIsMeanOfEachDirection) {
  Rng rng(1);
  const FeatureBatch b = oracle::random_batch(rng, 5, 4);
  const LossValue v = dc_loss(b, {0.5});
  ASSERT_EQ(v.per_sample_terms.size(), 10u);
  const double d1 = std::accumulate(v.per_sample_terms.begin(), v.per_sample_terms.begin() + 5, 0.0);
  const double d2 = std::accumulate(v.per_sample_terms.begin() + 5, v.per_sample_terms.end(), 0.0);
  EXPECT_NEAR(v.value, d1 / 5 + d2 / 5, 1e-12);
}

TEST(DcLoss, MatchesBruteForceOracle) {
  Rng rng(2);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + rng.below(8), d = 1 + rng.below(10);
    const double tau = rng.uniform(0.1, 3.0);
    const FeatureBatch b = oracle::random_batch(rng, n, d);
    EXPECT_NEAR(dc_loss(b, {tau}).value, oracle::dc_loss_ref(b.side_a, b.side_b, tau), 1e-10);
  }
}

TEST(DcLoss, PerSampleTermsNonnegativeProperty) {
  Rng rng(3);
  for (int t = 0; t < 500; ++t) {
    const FeatureBatch b = oracle::random_batch(rng, 1 + rng.below(8), 1 + rng.below(8));
    const LossValue v = dc_loss(b, {rng.uniform(0.05, 5.0)});
    EXPECT_GE(v.value, 0.0);
    for (double term : v.per_sample_terms) EXPECT_GE(term, 0.0);
  }
}

TEST(DcLoss, PermutationEquivariance) {
  Rng rng(4);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 2 + rng.below(7);
    const FeatureBatch b = oracle::random_batch(rng, n, 5);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    FeatureBatch p;
    for (std::size_t i : perm) {
      p.side_a.push_back(b.side_a[i]);
      p.side_b.push_back(b.side_b[i]);
    }
    EXPECT_NEAR(dc_loss(b, {0.5}).value, dc_loss(p, {0.5}).value, 1e-12);
  }
}

TEST(DcLoss, LargeTemperatureApproachesTwoLogN) {
  Rng rng(5);
  for (std::size_t n : {2u, 4u, 8u}) {
    const FeatureBatch b = oracle::random_batch(rng, n, 6);
    EXPECT_NEAR(dc_loss(b, {1e6}).value, 2.0 * std::log(static_cast<double>(n)), 1e-3);
  }
}

TEST(DcLoss, SmallTemperatureWithStrictRowMaximaApproachesZero) {
  // Positives are near-copies of an orthogonal set, so each positive strictly
  // dominates its row and column.
  Rng rng(6);
  std::vector<Vec> a, b;
  for (std::size_t i = 0; i < 4; ++i) {
    Vec e(6, 0.0);
    e[i] = 1.0;
    Vec f = e;
    for (double& x : f) x += 0.05 * rng.normal();
    a.push_back(e);
    b.push_back(f);
  }
  EXPECT_LT(dc_loss(make(a, b), {1e-3}).value, 1e-3);
}

TEST(DcLoss, Errors) {
  EXPECT_THROW(dc_loss(make({{0, 0}}, {{1, 0}}), {0.5}), DomainError);
  EXPECT_THROW(dc_loss(make({{1, 0}}, {{1, 0}}), {0.0}), DomainError);
  EXPECT_THROW(dc_loss(make({{1, 0}}, {{1, 0}}), {-1.0}), DomainError);
  EXPECT_THROW(dc_loss(make({{1, 0}}, {{1, 0}, {0, 1}}), {0.5}), ShapeError);
  EXPECT_THROW(dc_loss(make({{1, 0}}, {{1, 0, 0}}), {0.5}), ShapeError);
  EXPECT_THROW(dc_loss(make({}, {}), {0.5}), DomainError);
}

// ---- DC loss gradients -------------------------------------------------------

TEST(DcLossGrad, SinglePairIsZero) {
  const BatchGradient g = dc_loss_grad(make({{1, 2, 3}}, {{-1, 0, 4}}), {0.5});
  for (double x : g.grad_a[0]) EXPECT_EQ(x, 0.0);
  for (double x : g.grad_b[0]) EXPECT_EQ(x, 0.0);
}

TEST(DcLossGrad, MatchesFiniteDifferencesSmallCase) {
  Rng rng(7);
  const FeatureBatch b = oracle::random_batch(rng, 4, 8);
  const LossConfig cfg{0.5};
  const double err = oracle::max_gradient_rel_error(
      b, dc_loss_grad(b, cfg), [&](const FeatureBatch& x) { return dc_loss(x, cfg).value; });
  EXPECT_LT(err, 1e-5);
}

TEST(DcLossGrad, MatchesFiniteDifferencesProperty) {
  Rng rng(8);
  const double taus[] = {0.1, 0.5, 1.0};
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 2 + rng.below(7), d = 2 + rng.below(15);
    const LossConfig cfg{taus[rng.below(3)]};
    const FeatureBatch b = oracle::random_batch(rng, n, d);
    const double err = oracle::max_gradient_rel_error(
        b, dc_loss_grad(b, cfg), [&](const FeatureBatch& x) { return dc_loss(x, cfg).value; });
    EXPECT_LT(err, 1e-5) << "n=" << n << " d=" << d << " tau=" << cfg.tau;
  }
}

TEST(DcLossGrad, AlignedOrthogonalPairsHaveNoRadialComponent) {
  // a_i = b_i, mutually orthogonal: each gradient is orthogonal to its own
  // vector because the cosine Jacobian annihilates the radial direction.
  std::vector<Vec> basis;
  for (std::size_t i = 0; i < 3; ++i) {
    Vec e(3, 0.0);
    e[i] = 2.0 + static_cast<double>(i);
    basis.push_back(e);
  }
  const FeatureBatch b = make(basis, basis);
  const BatchGradient g = dc_loss_grad(b, {0.5});
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(dot(g.grad_a[i], basis[i]), 0.0, 1e-15);
    EXPECT_NEAR(dot(g.grad_b[i], basis[i]), 0.0, 1e-15);
  }
}

TEST(DcLossGrad, ScaleInvarianceMeansRadialGradientVanishesProperty) {
  Rng rng(9);
  for (int t = 0; t < 100; ++t) {
    const FeatureBatch b = oracle::random_batch(rng, 2 + rng.below(6), 2 + rng.below(6));
    const BatchGradient g = dc_loss_grad(b, {0.5});
    for (std::size_t i = 0; i < b.size(); ++i) {
      EXPECT_NEAR(dot(g.grad_a[i], b.side_a[i]), 0.0, 1e-12);
      EXPECT_NEAR(dot(g.grad_b[i], b.side_b[i]), 0.0, 1e-12);
    }
  }
}

TEST(DcLossGrad, SaturatedIdentityPairingHasTinyGradient) {
  // Positives identical and far apart from the negatives in angle: at small
  // temperature the softmax is one-hot and the gradient vanishes.
  std::vector<Vec> a;
  for (std::size_t i = 0; i < 4; ++i) {
    Vec e(4, 0.0);
    e[i] = 1.0;
    a.push_back(e);
  }
  const BatchGradient g = dc_loss_grad(make(a, a), {0.02});
  double worst = 0.0;
  for (std::size_t i = 0; i < 4; ++i) worst = std::max({worst, norm(g.grad_a[i]), norm(g.grad_b[i])});
  EXPECT_LT(worst, 1e-6);
}

TEST(DcLossGrad, IdentityPairingAtModerateTemperatureStillPushesNegatives) {
  // The uniformity part of the softmax keeps a nonzero gradient at tau 0.5
  // even with perfectly matched pairs.
  const std::vector<Vec> a{{1, 0.2}, {0.2, 1}};
  const BatchGradient g = dc_loss_grad(make(a, a), {0.5});
  EXPECT_GT(norm(g.grad_a[0]), 1e-3);
}

// ---- Triplet --------------------------------------------------------------

TEST(Triplet, SingleSampleHasNoNegatives) {
  EXPECT_EQ(triplet_loss(make({{1, 2}}, {{3, 4}})).value, 0.0);
}

TEST(Triplet, SeparatedPairsHaveZeroHinge) {
  // a = b = orthonormal basis: |b_1 - a_2|^2 = 2, hinge max(0 - 2 + 0.5, 0) = 0.
  EXPECT_EQ(triplet_loss(make({{1, 0}, {0, 1}}, {{1, 0}, {0, 1}})).value, 0.0);
}

TEST(Triplet, IdenticalVectorsGiveMarginPerRow) {
  const Vec x{0.4, -0.7};
  const LossValue v = triplet_loss(make({x, x}, {x, x}));
  ASSERT_EQ(v.per_sample_terms.size(), 2u);
  EXPECT_DOUBLE_EQ(v.per_sample_terms[0], 0.5);
  EXPECT_DOUBLE_EQ(v.per_sample_terms[1], 0.5);
  // The row sums total 1.0; the loss value is their mean.
  EXPECT_DOUBLE_EQ(v.per_sample_terms[0] + v.per_sample_terms[1], 1.0);
  EXPECT_DOUBLE_EQ(v.value, 0.5);
}

TEST(Triplet, MatchesBruteForce) {
  Rng rng(10);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 1 + rng.below(6);
    const FeatureBatch b = oracle::random_batch(rng, n, 3);
    double ref = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double pos = 0.0;
      for (std::size_t k = 0; k < 3; ++k) pos += std::pow(b.side_b[i][k] - b.side_a[i][k], 2);
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        double neg = 0.0;
        for (std::size_t k = 0; k < 3; ++k) neg += std::pow(b.side_b[i][k] - b.side_a[j][k], 2);
        ref += std::max(pos - neg + 0.5, 0.0);
      }
    }
    EXPECT_NEAR(triplet_loss(b).value, ref / static_cast<double>(n), 1e-12);
  }
}

TEST(Triplet, TranslationInvarianceProperty) {
  Rng rng(11);
  for (int t = 0; t < 100; ++t) {
    FeatureBatch b = oracle::random_batch(rng, 2 + rng.below(6), 4);
    const double before = triplet_loss(b).value;
    const Vec shift = oracle::random_vec(rng, 4);
    for (auto* side : {&b.side_a, &b.side_b})
      for (Vec& v : *side) axpy(3.0, shift, v);
    EXPECT_NEAR(triplet_loss(b).value, before, 1e-9);
  }
}

TEST(Triplet, GradientMatchesFiniteDifferences) {
  Rng rng(12);
  for (int t = 0; t < 30; ++t) {
    const FeatureBatch b = oracle::random_batch(rng, 2 + rng.below(5), 3);
    const double err = oracle::max_gradient_rel_error(
        b, triplet_loss_and_grad(b).grad,
        [](const FeatureBatch& x) { return triplet_loss(x).value; }, 1e-6);
    EXPECT_LT(err, 1e-5);
  }
}

// ---- MMD ------------------------------------------------------------------

TEST(Mmd, IdenticalSetsGiveZero) {
  Rng rng(13);
  std::vector<Vec> a;
  for (int i = 0; i < 10; ++i) a.push_back(oracle::random_vec(rng, 3));
  EXPECT_NEAR(mmd_rbf(a, a, 1.0), 0.0, 1e-12);
}

TEST(Mmd, SingletonsExpandByHand) {
  const Vec u{0.0, 1.0}, v{1.0, 3.0};
  const double k = std::exp(-5.0 / (2.0 * 1.5 * 1.5));
  EXPECT_NEAR(mmd_rbf({u}, {v}, 1.5), 2.0 - 2.0 * k, 1e-15);
}

TEST(Mmd, FarClustersApproachTwo) {
  std::vector<Vec> a{{0, 0}, {0.1, 0}}, b{{100, 0}, {100.1, 0}};
  const double bw = 0.01;
  // Within-set kernels: exp(-0.01 / 2e-4) = e^-50.
  EXPECT_NEAR(mmd_rbf(a, b, bw), 1.0, 1e-12);
  EXPECT_NEAR(mmd_rbf({{0, 0}}, {{100, 0}}, 1.0), 2.0, 1e-12);
}

TEST(Mmd, SymmetricAndNonnegativeProperty) {
  Rng rng(14);
  for (int t = 0; t < 100; ++t) {
    std::vector<Vec> a, b;
    for (std::size_t i = 0, n = 1 + rng.below(6); i < n; ++i) a.push_back(oracle::random_vec(rng, 3));
    for (std::size_t i = 0, n = 1 + rng.below(6); i < n; ++i) b.push_back(oracle::random_vec(rng, 3));
    const double bw = rng.uniform(0.2, 3.0);
    EXPECT_GE(mmd_rbf(a, b, bw), 0.0);
    EXPECT_NEAR(mmd_rbf(a, b, bw), mmd_rbf(b, a, bw), 1e-14);
  }
}

TEST(Mmd, GradientMatchesFiniteDifferences) {
  Rng rng(15);
  FeatureBatch b = oracle::random_batch(rng, 4, 3);
  b.side_b.pop_back();
  const MmdAndGradient g = mmd_rbf_and_grad(b.side_a, b.side_b, 1.3);
  const double err = oracle::max_gradient_rel_error(
      b, {g.grad_a, g.grad_b},
      [](const FeatureBatch& x) { return mmd_rbf(x.side_a, x.side_b, 1.3); });
  EXPECT_LT(err, 1e-5);
}

TEST(Mmd, Errors) {
  EXPECT_THROW(mmd_rbf({}, {{1.0}}, 1.0), DomainError);
  EXPECT_THROW(mmd_rbf({{1.0}}, {{1.0}}, 0.0), DomainError);
  EXPECT_THROW(mmd_rbf({{1.0}}, {{1.0}}, -2.0), DomainError);
  EXPECT_THROW(mmd_rbf({{1.0}}, {{1.0, 2.0}}, 1.0), ShapeError);
}

TEST(Mmd, MedianHeuristic) {
  // Pooled points 0, 1, 3 on a line: distances {1, 2, 3}, median 2.
  EXPECT_DOUBLE_EQ(median_heuristic_bandwidth({{0.0}, {1.0}}, {{3.0}}), 2.0);
  EXPECT_DOUBLE_EQ(median_heuristic_bandwidth({{0.0}}, {}), 1.0);
  EXPECT_DOUBLE_EQ(median_heuristic_bandwidth({{2.0}}, {{2.0}}), 1.0);
}

}  // namespace
}  // namespace dcl
