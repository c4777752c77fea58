// Copyright 2026 The qpulse Authors
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

#include "qpulse/encoding.hpp"

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "qpulse/rng.hpp"

namespace enc = qpulse::encoding;
using qpulse::kPi;
using qpulse::Mat2;

namespace {

double min_eigenvalue(const Mat2& m) {
  Eigen::SelfAdjointEigenSolver<Mat2> es(m);
  return es.eigenvalues().minCoeff();
}

}  // namespace

TEST(Povm, ElementsArePositiveAndCompleteTheIdentity) {
  const auto& m = enc::povm_operators();
  Mat2 sum = Mat2::Zero();
  for (const auto& op : m) {
    EXPECT_GE(min_eigenvalue(op), -1e-15);
    EXPECT_LT((op - op.adjoint()).cwiseAbs().maxCoeff(), 1e-15);
    sum += op;
  }
  EXPECT_LT((sum - Mat2::Identity()).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_NEAR(m[0].trace().real(), 1.0 / 3.0, 1e-15);
}

TEST(Povm, FourthElementMatchesHandComputedEntries) {
  const Mat2& m4 = enc::povm_operators()[3];
  EXPECT_NEAR(m4(0, 0).real(), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(m4(1, 1).real(), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(m4(0, 1).real(), -1.0 / 6.0, 1e-15);
  EXPECT_NEAR(m4(0, 1).imag(), 1.0 / 6.0, 1e-15);
}

TEST(Encode, KnownStatesGiveHandComputedDistributions) {
  const auto p0 = enc::encode_density(qpulse::bloch_density(0.0, 0.0));
  EXPECT_NEAR(p0[0], 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(p0[1], 1.0 / 6.0, 1e-12);
  EXPECT_NEAR(p0[2], 1.0 / 6.0, 1e-12);
  EXPECT_NEAR(p0[3], 1.0 / 3.0, 1e-12);

  const auto pm = enc::encode_density(0.5 * Mat2::Identity());
  EXPECT_NEAR(pm[0], 1.0 / 6.0, 1e-12);
  EXPECT_NEAR(pm[1], 1.0 / 6.0, 1e-12);
  EXPECT_NEAR(pm[2], 1.0 / 6.0, 1e-12);
  EXPECT_NEAR(pm[3], 1.0 / 2.0, 1e-12);

  const auto pp = enc::encode_density(qpulse::bloch_density(kPi / 2.0, 0.0));
  EXPECT_NEAR(pp[0], 1.0 / 6.0, 1e-12);
  EXPECT_NEAR(pp[1], 1.0 / 6.0, 1e-12);
  EXPECT_NEAR(pp[2], 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(pp[3], 1.0 / 3.0, 1e-12);
}

TEST(Encode, DistributionsLiveOnTheSimplexAndAreLinear) {
  qpulse::Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    const Mat2 a = oracles::random_density(rng);
    const Mat2 b = oracles::random_density(rng);
    const auto pa = enc::encode_density(a);
    double sum = 0.0;
    for (const double v : pa) {
      EXPECT_GE(v, -1e-9);
      EXPECT_LE(v, 1.0 + 1e-9);
      sum += v;
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);

    const double alpha = rng.uniform();
    const auto pmix = enc::encode_density(alpha * a + (1.0 - alpha) * b);
    const auto pb = enc::encode_density(b);
    for (std::size_t k = 0; k < 4; ++k) {
      EXPECT_NEAR(pmix[k], alpha * pa[k] + (1.0 - alpha) * pb[k], 1e-12);
    }
  }
}

TEST(Decode, InvertsEncodeOnRandomStates) {
  qpulse::Rng rng(9);
  for (int i = 0; i < 100; ++i) {
    const Mat2 rho = oracles::random_density(rng, i % 4 == 0);
    const Mat2 back = enc::decode_distribution(enc::encode_density(rho));
    EXPECT_LT((back - rho).cwiseAbs().maxCoeff(), 1e-10);
  }
  const Mat2 from_p0 = enc::decode_distribution({1.0 / 3, 1.0 / 6, 1.0 / 6, 1.0 / 3});
  EXPECT_LT((from_p0 - qpulse::bloch_density(0.0, 0.0)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Decode, RejectsDistributionsThatAreNotStates) {
  EXPECT_THROW(enc::decode_distribution({0.9, 0.9, 0.9, 0.9}), std::domain_error);
}

TEST(Features, WidthAndLayoutFollowTheCase) {
  const auto p_ini = enc::encode_density(qpulse::bloch_density(0.0, 0.0));
  const auto p_tar = enc::encode_density(qpulse::bloch_density(kPi, 0.0));
  const qpulse::dynamics::BathParams bath{0.1, 4.0, 10.0};

  const auto f1 = enc::build_features(p_ini, p_tar, bath, 1);
  const auto f2 = enc::build_features(p_ini, p_tar, bath, 2);
  const auto f3 = enc::build_features(p_ini, p_tar, bath, 3);
  EXPECT_EQ(f1.size(), 8u);
  EXPECT_EQ(f2.size(), 8u);
  ASSERT_EQ(f3.size(), 11u);
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_DOUBLE_EQ(f3[k], p_ini[k]);
    EXPECT_DOUBLE_EQ(f3[4 + k], p_tar[k]);
  }
  EXPECT_DOUBLE_EQ(f3[8], 0.1);
  EXPECT_DOUBLE_EQ(f3[9], 4.0);
  EXPECT_DOUBLE_EQ(f3[10], 10.0);
  EXPECT_THROW(enc::build_features(p_ini, p_tar, bath, 4), std::invalid_argument);
  EXPECT_EQ(enc::feature_width(3), 11);
}
