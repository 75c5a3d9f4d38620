// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MRPO Authors

#include <doctest.h>

#include <cmath>
#include <random>

#include "mrpo/ad.hpp"
#include "mrpo/errors.hpp"
#include "mrpo/prefmath.hpp"

using namespace mrpo;

namespace {

ad::Var input(ad::Tape &tape, Eigen::Index slot, double v) {
  return tape.leaf(v, [slot](double a, Eigen::Ref<Eigen::VectorXd> g) { g[slot] += a; });
}

} // namespace

TEST_CASE("constants have zero gradient") {
  ad::Tape tape(3);
  const ad::Var c(2.5);
  CHECK(c.is_constant());
  const Eigen::VectorXd g = tape.backward(c * c + 1.0);
  CHECK(g.size() == 3);
  CHECK(g.isZero());
}

TEST_CASE("a tape can only be differentiated once") {
  ad::Tape tape(1);
  const ad::Var x = input(tape, 0, 1.0);
  const ad::Var y = x * x;
  CHECK(tape.backward(y)[0] == doctest::Approx(2.0));
  CHECK(tape.consumed());
  try {
    tape.backward(y);
    FAIL("expected a state error");
  } catch (const Error &e) {
    CHECK(e.kind() == ErrorKind::State);
  }
}

TEST_CASE("elementary derivatives") {
  ad::Tape tape(4);
  const ad::Var a = input(tape, 0, 0.7);
  const ad::Var b = input(tape, 1, -1.3);
  const ad::Var c = input(tape, 2, 2.0);
  const ad::Var d = input(tape, 3, 40.0);
  const ad::Var out = a * b + ad::exp(a) - ad::log(c) / b + ad::softplus(d) - (-a);
  const Eigen::VectorXd g = tape.backward(out);
  CHECK(out.value() == doctest::Approx(0.7 * -1.3 + std::exp(0.7) - std::log(2.0) / -1.3 +
                                       softplus(40.0) + 0.7));
  CHECK(g[0] == doctest::Approx(-1.3 + std::exp(0.7) + 1.0));
  CHECK(g[1] == doctest::Approx(0.7 + std::log(2.0) / (1.3 * 1.3)));
  CHECK(g[2] == doctest::Approx(-1.0 / (2.0 * -1.3)));
  CHECK(g[3] == doctest::Approx(sigmoid(40.0)));
}

TEST_CASE("shared subexpressions accumulate adjoints") {
  ad::Tape tape(1);
  const ad::Var x = input(tape, 0, 3.0);
  ad::Var acc(0.0);
  for (int i = 0; i < 5; ++i) {
    acc += x * x;
  }
  CHECK(tape.backward(acc)[0] == doctest::Approx(30.0));
}

TEST_CASE("softplus is stable on the tape") {
  ad::Tape tape(2);
  const ad::Var big = input(tape, 0, 800.0);
  const ad::Var small = input(tape, 1, -800.0);
  const ad::Var out = ad::softplus(big) + ad::softplus(small);
  CHECK(out.value() == doctest::Approx(800.0));
  const Eigen::VectorXd g = tape.backward(out);
  CHECK(g[0] == doctest::Approx(1.0));
  CHECK(g[1] == doctest::Approx(0.0));
  CHECK(g.allFinite());
}

TEST_CASE("property: gradients match central differences") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.2, 2.0);
  auto f = [](auto x, auto y) {
    using std::exp;
    using std::log;
    using ad::exp;
    using ad::log;
    return exp(x * y) / (x + y) - log(x * x + 1.0) * y;
  };
  for (int t = 0; t < 500; ++t) {
    const double x0 = u(rng);
    const double y0 = u(rng);
    ad::Tape tape(2);
    const ad::Var out = f(input(tape, 0, x0), input(tape, 1, y0));
    const Eigen::VectorXd g = tape.backward(out);
    const double h = 1e-6;
    const double gx = (f(x0 + h, y0) - f(x0 - h, y0)) / (2 * h);
    const double gy = (f(x0, y0 + h) - f(x0, y0 - h)) / (2 * h);
    REQUIRE(g[0] == doctest::Approx(gx).epsilon(1e-6));
    REQUIRE(g[1] == doctest::Approx(gy).epsilon(1e-6));
  }
}

TEST_CASE("gradient scales linearly with a constant factor") {
  for (double beta : {0.05, 0.1, 1.0, 3.0}) {
    ad::Tape tape(1);
    const ad::Var x = input(tape, 0, -2.0);
    const double base = [] {
      ad::Tape t(1);
      const ad::Var y = input(t, 0, -2.0);
      return t.backward(y * y)[0];
    }();
    CHECK(tape.backward(beta * (x * x))[0] == doctest::Approx(beta * base));
  }
}
