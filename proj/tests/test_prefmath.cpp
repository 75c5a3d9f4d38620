// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MRPO Authors

#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "mrpo/errors.hpp"
#include "mrpo/prefmath.hpp"

using namespace mrpo;
using Vec = Vector<double>;

namespace {

Vec vec(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  std::copy(xs.begin(), xs.end(), v.data());
  return v;
}

ReferenceWeights<double> weights(std::initializer_list<double> xs) {
  return ReferenceWeights<double>(vec(xs));
}

Vec random_weights(std::mt19937_64 &rng, Eigen::Index k) {
  std::exponential_distribution<double> e(1.0);
  Vec v(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    v[i] = e(rng);
  }
  v /= v.sum();
  return v / v.sum();
}

} // namespace

TEST_CASE("scalar helpers are stable at extreme arguments") {
  CHECK(softplus(0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(softplus(800.0) == 800.0);
  CHECK(softplus(-800.0) == 0.0);
  CHECK(std::isfinite(log_sigmoid(-800.0)));
  CHECK(log_sigmoid(-800.0) == doctest::Approx(-800.0));
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(-800.0) >= 0.0);
  CHECK(log_sum_exp(vec({1000.0, 1000.0})) == doctest::Approx(1000.0 + std::log(2.0)));
}

TEST_CASE("log_virtual_reference examples") {
  CHECK(log_virtual_reference(vec({-1.0}), weights({1.0})) == -1.0);
  CHECK(log_virtual_reference(vec({-2.0, -2.0}), weights({0.5, 0.5})) ==
        doctest::Approx(-2.0).epsilon(1e-15));
  // -log(0.5 e^1 + 0.5 e^3), evaluated with 30-digit arithmetic.
  CHECK(log_virtual_reference(vec({-1.0, -3.0}), weights({0.5, 0.5})) ==
        doctest::Approx(-2.4337808304830271870).epsilon(1e-14));
}

TEST_CASE("log_virtual_reference skips zero weights and rejects all-zero weights") {
  CHECK(log_virtual_reference(vec({-1.0, -50.0}), weights({1.0, 0.0})) == -1.0);
  CHECK_THROWS_AS(ReferenceWeights<double>(vec({0.0, 0.0})), Error);
  CHECK_THROWS_AS(log_virtual_reference(vec({-1.0}), weights({0.5, 0.5})), Error);
}

TEST_CASE("reference weights validation") {
  CHECK_THROWS_AS(ReferenceWeights<double>(Vec(0)), Error);
  CHECK_THROWS_AS(weights({0.7, 0.4}), Error);
  CHECK_THROWS_AS(weights({1.5, -0.5}), Error);
  CHECK_NOTHROW(weights({0.25, 0.75}));
  try {
    weights({0.6, 0.6});
  } catch (const Error &e) {
    CHECK(e.kind() == ErrorKind::InvalidWeights);
  }
}

TEST_CASE("log-probability validation") {
  CHECK_NOTHROW(PairRefLogProbs<double>(vec({0.0}), vec({-3.0})));
  CHECK_THROWS_AS(PairRefLogProbs<double>(vec({-INFINITY}), vec({-1.0})), Error);
  CHECK_THROWS_AS(PairRefLogProbs<double>(vec({0.5}), vec({-1.0})), Error);
  CHECK_THROWS_AS(PairRefLogProbs<double>(vec({NAN}), vec({-1.0})), Error);
  CHECK_THROWS_AS(PairRefLogProbs<double>(vec({-1.0, -2.0}), vec({-1.0})), Error);
}

TEST_CASE("clip_reference_logprob examples") {
  CHECK(clip_reference_logprob(-2.1, -2.0, 0.1) == -2.1);
  CHECK(clip_reference_logprob(-5.0, -2.0, 0.1) == doctest::Approx(-2.2).epsilon(1e-15));
  CHECK(clip_reference_logprob(-1.0, -2.0, 0.0) == -2.0);
  CHECK(clip_reference_logprob(-1.0, -2.0, 0.1) == doctest::Approx(-1.8).epsilon(1e-15));
  CHECK_THROWS_AS(clip_reference_logprob(-1.0, -2.0, -0.1), Error);
}

TEST_CASE("clip_references leaves the initializing reference alone") {
  const Vec clipped = clip_references(vec({-2.0, -5.0, -1.0}), 0.1);
  CHECK(clipped[0] == -2.0);
  CHECK(clipped[1] == doctest::Approx(-2.2));
  CHECK(clipped[2] == doctest::Approx(-1.8));
}

TEST_CASE("adaptive_epsilon examples") {
  const auto a = adaptive_epsilon(-6.0, -18.0, 0.1);
  CHECK(a.chosen == doctest::Approx(0.025).epsilon(1e-15));
  CHECK(a.rejected == doctest::Approx(0.075).epsilon(1e-15));
  const auto b = adaptive_epsilon(-7.0, -7.0, 0.1);
  CHECK(b.chosen == doctest::Approx(0.05).epsilon(1e-15));
  CHECK(b.rejected == doctest::Approx(0.05).epsilon(1e-15));
  const auto c = adaptive_epsilon(0.0, 0.0, 0.2);
  CHECK(c.chosen == 0.1);
  CHECK(c.rejected == 0.1);
}

TEST_CASE("clip_radii by mode") {
  const PairRefLogProbs<double> refs(vec({-2.0, -4.0}), vec({-6.0, -12.0}));
  CHECK(clip_radii(refs, ClipConfig<double>{0.1, ClipMode::none}).chosen == 0.0);
  const auto fixed = clip_radii(refs, ClipConfig<double>{0.1, ClipMode::fixed});
  CHECK(fixed.chosen == 0.1);
  CHECK(fixed.rejected == 0.1);
  const auto adaptive = clip_radii(refs, ClipConfig<double>{0.1, ClipMode::adaptive});
  CHECK(adaptive.chosen == doctest::Approx(0.025));
  CHECK(adaptive.rejected == doctest::Approx(0.075));
}

TEST_CASE("reference_weights_arwc examples") {
  const auto a = reference_weights_arwc(PairRefLogProbs<double>(vec({-1, -2}), vec({-4, -3})));
  CHECK(a[0] == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(a[1] == doctest::Approx(0.25).epsilon(1e-15));
  const auto b = reference_weights_arwc(PairRefLogProbs<double>(vec({-1, -5}), vec({-3, -7})));
  CHECK(b[0] == doctest::Approx(0.5));
  CHECK(b[1] == doctest::Approx(0.5));
  const auto c = reference_weights_arwc(PairRefLogProbs<double>(vec({-1}), vec({-9})));
  CHECK(c.size() == 1);
  CHECK(c[0] == 1.0);
  const auto d = reference_weights_arwc(PairRefLogProbs<double>(vec({-2, -3}), vec({-2, -3})));
  CHECK(d[0] == 0.5);
  CHECK(d[1] == 0.5);
}

TEST_CASE("uniform_weights") {
  CHECK(uniform_weights(1)[0] == 1.0);
  CHECK(uniform_weights(2)[1] == 0.5);
  const auto w = uniform_weights(4);
  for (Eigen::Index k = 0; k < 4; ++k) {
    CHECK(w[k] == 0.25);
  }
  CHECK_THROWS_AS(uniform_weights(0), Error);
}

TEST_CASE("implicit_reward examples") {
  CHECK(implicit_reward(-1.5, -1.5, 0.1) == 0.0);
  CHECK(implicit_reward(-1.0, -1.5, 0.1) == doctest::Approx(0.05).epsilon(1e-15));
  CHECK(implicit_reward(-2.0, -1.5, 0.1) == doctest::Approx(-0.05).epsilon(1e-15));
}

TEST_CASE("templated on scalar: long double agrees with double") {
  using LVec = Vector<long double>;
  LVec lr(2);
  lr << -1.0L, -3.0L;
  LVec lw(2);
  lw << 0.5L, 0.5L;
  const long double v = log_virtual_reference(lr, ReferenceWeights<long double>(lw));
  CHECK(static_cast<double>(v) == doctest::Approx(-2.4337808304830271870).epsilon(1e-15));
}

// --------------------------------------------------------------------------
// Properties on random instances
// --------------------------------------------------------------------------

TEST_CASE("property: virtual reference lies between the extreme references") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> kk(1, 5);
  std::uniform_real_distribution<double> lp(-60.0, 0.0);
  for (int t = 0; t < 10000; ++t) {
    const int k = kk(rng);
    Vec refs(k);
    for (int i = 0; i < k; ++i) {
      refs[i] = lp(rng);
    }
    const double v = log_virtual_reference(refs, ReferenceWeights<double>(random_weights(rng, k)));
    REQUIRE(v >= refs.minCoeff());
    REQUIRE(v <= refs.maxCoeff());
  }
}

TEST_CASE("property: Jensen step against the virtual reference") {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> kk(1, 5);
  std::uniform_real_distribution<double> lp(-40.0, 0.0);
  for (int t = 0; t < 10000; ++t) {
    const int k = kk(rng);
    Vec refs(k);
    for (int i = 0; i < k; ++i) {
      refs[i] = lp(rng);
    }
    const ReferenceWeights<double> w(random_weights(rng, k));
    const double log_pi = lp(rng);
    double lhs = 0.0;
    for (int i = 0; i < k; ++i) {
      lhs += w[i] * (log_pi - refs[i]);
    }
    REQUIRE(lhs <= log_pi - log_virtual_reference(refs, w) + 1e-9);
  }
}

TEST_CASE("property: clipping is idempotent") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> lp(-30.0, 0.0);
  std::uniform_real_distribution<double> eps(0.0, 0.5);
  for (int t = 0; t < 10000; ++t) {
    const double init = lp(rng);
    const double e = eps(rng);
    const double once = clip_reference_logprob(lp(rng), init, e);
    REQUIRE(clip_reference_logprob(once, init, e) == once);
  }
}

TEST_CASE("property: adaptive radii sum to eps_max") {
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<double> s(-100.0, 0.0);
  std::uniform_real_distribution<double> eps(0.0, 1.0);
  for (int t = 0; t < 10000; ++t) {
    const double e = eps(rng);
    const auto r = adaptive_epsilon(s(rng), s(rng), e);
    REQUIRE(std::abs(r.chosen + r.rejected - e) <= 1e-12);
    REQUIRE(r.chosen >= 0.0);
    REQUIRE(r.rejected >= 0.0);
  }
}

TEST_CASE("property: ARWC weights are valid and permutation-equivariant") {
  std::mt19937_64 rng(15);
  std::uniform_int_distribution<int> kk(1, 6);
  std::uniform_real_distribution<double> lp(-30.0, 0.0);
  for (int t = 0; t < 10000; ++t) {
    const int k = kk(rng);
    Vec c(k);
    Vec r(k);
    for (int i = 0; i < k; ++i) {
      c[i] = lp(rng);
      r[i] = lp(rng);
    }
    const auto w = reference_weights_arwc(PairRefLogProbs<double>(c, r));
    REQUIRE(std::abs(w.alphas().sum() - 1.0) <= 1e-12);

    std::vector<int> perm(static_cast<std::size_t>(k));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Vec pc(k);
    Vec pr(k);
    for (int i = 0; i < k; ++i) {
      pc[i] = c[perm[static_cast<std::size_t>(i)]];
      pr[i] = r[perm[static_cast<std::size_t>(i)]];
    }
    const auto pw = reference_weights_arwc(PairRefLogProbs<double>(pc, pr));
    for (int i = 0; i < k; ++i) {
      REQUIRE(pw[i] == doctest::Approx(w[perm[static_cast<std::size_t>(i)]]).epsilon(1e-12));
    }
  }
}

TEST_CASE("property: one-hot weights select that reference exactly") {
  std::mt19937_64 rng(16);
  std::uniform_int_distribution<int> kk(1, 5);
  std::uniform_real_distribution<double> lp(-50.0, 0.0);
  for (int t = 0; t < 10000; ++t) {
    const int k = kk(rng);
    Vec refs(k);
    for (int i = 0; i < k; ++i) {
      refs[i] = lp(rng);
    }
    const int j = std::uniform_int_distribution<int>(0, k - 1)(rng);
    Vec w = Vec::Zero(k);
    w[j] = 1.0;
    REQUIRE(log_virtual_reference(refs, ReferenceWeights<double>(w)) == refs[j]);
  }
}
