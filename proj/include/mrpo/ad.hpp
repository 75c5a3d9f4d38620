// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MRPO Authors

#pragma once

// Minimal scalar reverse-mode differentiation.
//
// A Tape is a Wengert list of scalar nodes. Leaves may carry a pullback that
// scatters their adjoint into a dense parameter gradient; this is how policy
// log-probabilities connect the scalar loss graph to the policy parameters.
// Tapes are single-owner and single-use: backward() consumes them.

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include <Eigen/Core>

#include "mrpo/errors.hpp"

namespace mrpo::ad {

class Tape;

namespace detail {
struct TapeState;
}

class Var {
public:
  Var() = default;
  // Implicit so that doubles mix freely with tracked values.
  Var(double constant) : value_(constant) {} // NOLINT

  double value() const { return value_; }
  bool is_constant() const { return state_ == nullptr; }

private:
  friend class Tape;
  friend Var record_unary(const Var &, double, double);
  friend Var record_binary(const Var &, const Var &, double, double, double);

  Var(detail::TapeState *state, std::int64_t index, double value)
      : state_(state), index_(index), value_(value) {}

  detail::TapeState *state_ = nullptr;
  std::int64_t index_ = -1;
  double value_ = 0.0;
};

class Tape {
public:
  using Pullback = std::function<void(double adjoint, Eigen::Ref<Eigen::VectorXd> gradient)>;

  explicit Tape(Eigen::Index gradient_size);
  ~Tape();
  Tape(Tape &&) noexcept;
  Tape &operator=(Tape &&) noexcept;
  Tape(const Tape &) = delete;
  Tape &operator=(const Tape &) = delete;

  /// Registers an input whose adjoint is routed through `pullback`.
  Var leaf(double value, Pullback pullback);

  /// d(output)/d(parameters). Throws a state error on a consumed tape.
  Eigen::VectorXd backward(const Var &output);
  /// Differentiates the most recently recorded node (zero if none).
  Eigen::VectorXd backward();

  bool consumed() const;
  Eigen::Index gradient_size() const;
  std::size_t node_count() const;

private:
  std::unique_ptr<detail::TapeState> state_;
};

Var record_unary(const Var &a, double value, double da);
Var record_binary(const Var &a, const Var &b, double value, double da, double db);

inline double value_of(const Var &v) { return v.value(); }

inline Var operator+(const Var &a, const Var &b) {
  return record_binary(a, b, a.value() + b.value(), 1.0, 1.0);
}
inline Var operator-(const Var &a, const Var &b) {
  return record_binary(a, b, a.value() - b.value(), 1.0, -1.0);
}
inline Var operator*(const Var &a, const Var &b) {
  return record_binary(a, b, a.value() * b.value(), b.value(), a.value());
}
inline Var operator/(const Var &a, const Var &b) {
  const double inv = 1.0 / b.value();
  return record_binary(a, b, a.value() * inv, inv, -a.value() * inv * inv);
}
inline Var operator-(const Var &a) { return record_unary(a, -a.value(), -1.0); }

inline Var &operator+=(Var &a, const Var &b) { return a = a + b; }
inline Var &operator-=(Var &a, const Var &b) { return a = a - b; }

Var exp(const Var &a);
Var log(const Var &a);
/// log(1 + e^a), stable for large |a|.
Var softplus(const Var &a);

} // namespace mrpo::ad

namespace mrpo {
inline double value_of(double v) { return v; }
using ad::value_of;
} // namespace mrpo
