// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MRPO Authors

#pragma once

// Per-example scalar math shared by every preference loss: aggregation of
// several reference log-probabilities into one virtual reference, trust-region
// clipping of non-initializing references, the adaptive clip radius, adaptive
// reference weights and the implicit reward.
//
// Everything is computed in log space. Reference index 0 is always the
// initializing reference (the one the trained policy starts from).

#include <algorithm>
#include <cmath>
#include <concepts>
#include <limits>
#include <string>
#include <utility>

#include <Eigen/Core>

#include "mrpo/errors.hpp"

namespace mrpo {

template <typename Scalar> using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// --------------------------------------------------------------------------
// Stable scalar numerics
// --------------------------------------------------------------------------

/// log(1 + e^z) without overflow for large |z|.
template <std::floating_point Scalar> Scalar softplus(Scalar z) {
  using std::abs;
  using std::exp;
  using std::log1p;
  return std::max(z, Scalar(0)) + log1p(exp(-abs(z)));
}

template <std::floating_point Scalar> Scalar sigmoid(Scalar z) {
  using std::exp;
  if (z >= Scalar(0)) {
    return Scalar(1) / (Scalar(1) + exp(-z));
  }
  const Scalar e = exp(z);
  return e / (Scalar(1) + e);
}

template <std::floating_point Scalar> Scalar log_sigmoid(Scalar z) {
  return -softplus(-z);
}

template <typename Derived>
typename Derived::Scalar log_sum_exp(const Eigen::MatrixBase<Derived> &values) {
  using Scalar = typename Derived::Scalar;
  if (values.size() == 0) {
    return -std::numeric_limits<Scalar>::infinity();
  }
  const Scalar shift = values.maxCoeff();
  if (!std::isfinite(shift)) {
    return shift;
  }
  return shift + std::log((values.array() - shift).exp().sum());
}

/// Rejects -inf, NaN and positive values.
template <std::floating_point Scalar>
void check_logprob(Scalar value, const std::string &what) {
  require(std::isfinite(value), ErrorKind::NumericInput,
          what + ": log-probability must be finite");
  require(value <= Scalar(0), ErrorKind::NumericInput,
          what + ": log-probability must be <= 0");
}

// --------------------------------------------------------------------------
// Domain types
// --------------------------------------------------------------------------

/// Non-negative weights over K references summing to one.
template <std::floating_point Scalar> class ReferenceWeights {
public:
  static constexpr Scalar kSumTolerance = Scalar(1e-12);

  explicit ReferenceWeights(Vector<Scalar> alphas) : alphas_(std::move(alphas)) {
    require(alphas_.size() >= 1, ErrorKind::InvalidWeights,
            "reference weights need at least one entry");
    for (Eigen::Index k = 0; k < alphas_.size(); ++k) {
      require(std::isfinite(alphas_[k]) && alphas_[k] >= Scalar(0),
              ErrorKind::InvalidWeights,
              "reference weights must be finite and non-negative");
    }
    require(std::abs(alphas_.sum() - Scalar(1)) <= kSumTolerance,
            ErrorKind::InvalidWeights, "reference weights must sum to 1");
  }

  Eigen::Index size() const { return alphas_.size(); }
  Scalar operator[](Eigen::Index k) const { return alphas_[k]; }
  const Vector<Scalar> &alphas() const { return alphas_; }

private:
  Vector<Scalar> alphas_;
};

enum class ClipMode { none, fixed, adaptive };

template <std::floating_point Scalar> struct ClipConfig {
  Scalar eps_max = Scalar(0.1);
  ClipMode mode = ClipMode::adaptive;

  void validate() const {
    require(std::isfinite(eps_max) && eps_max >= Scalar(0),
            ErrorKind::InvalidConfig, "eps_max must be finite and >= 0");
  }
};

/// Clip radii for the chosen and the rejected output of one pair.
template <std::floating_point Scalar> struct EpsilonPair {
  Scalar chosen = Scalar(0);
  Scalar rejected = Scalar(0);
};

/// Reference log-probabilities of one preference pair, one entry per
/// reference; index 0 is the initializing reference.
template <std::floating_point Scalar> class PairRefLogProbs {
public:
  PairRefLogProbs(Vector<Scalar> chosen, Vector<Scalar> rejected)
      : chosen_(std::move(chosen)), rejected_(std::move(rejected)) {
    require(chosen_.size() >= 1, ErrorKind::InvalidArgument,
            "need at least one reference");
    require(chosen_.size() == rejected_.size(), ErrorKind::InvalidArgument,
            "chosen and rejected reference vectors differ in length");
    for (Eigen::Index k = 0; k < chosen_.size(); ++k) {
      check_logprob(chosen_[k], "reference chosen[" + std::to_string(k) + "]");
      check_logprob(rejected_[k], "reference rejected[" + std::to_string(k) + "]");
    }
  }

  Eigen::Index size() const { return chosen_.size(); }
  const Vector<Scalar> &chosen() const { return chosen_; }
  const Vector<Scalar> &rejected() const { return rejected_; }

private:
  Vector<Scalar> chosen_;
  Vector<Scalar> rejected_;
};

// --------------------------------------------------------------------------
// Operations
// --------------------------------------------------------------------------

/// log of the weighted harmonic mean (sum_k alpha_k / p_k)^-1, evaluated as
/// -LSE_k(log alpha_k - log p_k). References with alpha_k = 0 are omitted.
template <typename Derived, std::floating_point Scalar>
Scalar log_virtual_reference(const Eigen::MatrixBase<Derived> &log_refs,
                             const ReferenceWeights<Scalar> &weights) {
  require(log_refs.size() == weights.size(), ErrorKind::InvalidArgument,
          "log_refs and weights differ in length");
  Scalar shift = -std::numeric_limits<Scalar>::infinity();
  Scalar lo = std::numeric_limits<Scalar>::infinity();
  Scalar hi = -std::numeric_limits<Scalar>::infinity();
  for (Eigen::Index k = 0; k < log_refs.size(); ++k) {
    if (weights[k] > Scalar(0)) {
      shift = std::max(shift, std::log(weights[k]) - Scalar(log_refs[k]));
      lo = std::min(lo, Scalar(log_refs[k]));
      hi = std::max(hi, Scalar(log_refs[k]));
    }
  }
  require(std::isfinite(shift), ErrorKind::InvalidWeights,
          "all reference weights are zero");
  Scalar sum = 0;
  for (Eigen::Index k = 0; k < log_refs.size(); ++k) {
    if (weights[k] > Scalar(0)) {
      sum += std::exp(std::log(weights[k]) - Scalar(log_refs[k]) - shift);
    }
  }
  // The exact value is a weighted mean of the active references; the clamp
  // only removes last-ulp rounding.
  return std::clamp(-(shift + std::log(sum)), lo, hi);
}

/// Clamps a non-initializing reference into the band
/// [(1 + eps) * log_ref_init, (1 - eps) * log_ref_init].
template <std::floating_point Scalar>
Scalar clip_reference_logprob(Scalar log_ref_k, Scalar log_ref_init, Scalar eps) {
  require(std::isfinite(eps) && eps >= Scalar(0), ErrorKind::InvalidConfig,
          "clip radius must be >= 0");
  require(log_ref_init <= Scalar(0), ErrorKind::NumericInput,
          "initializing reference log-probability must be <= 0");
  const Scalar lower = (Scalar(1) + eps) * log_ref_init;
  const Scalar upper = (Scalar(1) - eps) * log_ref_init;
  return std::clamp(log_ref_k, lower, upper);
}

/// Splits eps_max between the two outputs of a pair in proportion to the
/// magnitude of their summed (raw) reference log-probabilities.
template <std::floating_point Scalar>
EpsilonPair<Scalar> adaptive_epsilon(Scalar sum_logref_chosen,
                                     Scalar sum_logref_rejected, Scalar eps_max) {
  require(std::isfinite(eps_max) && eps_max >= Scalar(0), ErrorKind::InvalidConfig,
          "eps_max must be >= 0");
  const Scalar a = std::abs(sum_logref_chosen);
  const Scalar b = std::abs(sum_logref_rejected);
  const Scalar denom = a + b;
  if (denom == Scalar(0)) {
    return {eps_max / Scalar(2), eps_max / Scalar(2)};
  }
  return {eps_max * a / denom, eps_max * b / denom};
}

template <std::floating_point Scalar = double>
ReferenceWeights<Scalar> uniform_weights(Eigen::Index k) {
  require(k >= 1, ErrorKind::InvalidArgument, "uniform_weights needs k >= 1");
  return ReferenceWeights<Scalar>(Vector<Scalar>::Constant(k, Scalar(1) / Scalar(k)));
}

/// Weights proportional to each reference's |log p(chosen) - log p(rejected)|.
/// Falls back to uniform weights when every reference is indifferent.
template <std::floating_point Scalar>
ReferenceWeights<Scalar> reference_weights_arwc(const PairRefLogProbs<Scalar> &refs) {
  const Vector<Scalar> gaps = (refs.chosen() - refs.rejected()).cwiseAbs();
  const Scalar total = gaps.sum();
  if (total == Scalar(0)) {
    return uniform_weights<Scalar>(refs.size());
  }
  Vector<Scalar> alphas = gaps / total;
  return ReferenceWeights<Scalar>(std::move(alphas));
}

/// beta * (log pi_theta - log pi_ref). The policy term may be an autodiff
/// variable; the reference term is always a constant.
template <typename T, std::floating_point Scalar>
T implicit_reward(const T &log_policy, Scalar log_ref, Scalar beta) {
  return beta * (log_policy - log_ref);
}

/// Applies the configured clip to references k > 0 of one output.
/// Reference 0 is returned unchanged.
template <std::floating_point Scalar>
Vector<Scalar> clip_references(const Vector<Scalar> &log_refs, Scalar eps) {
  Vector<Scalar> out = log_refs;
  for (Eigen::Index k = 1; k < out.size(); ++k) {
    out[k] = clip_reference_logprob(log_refs[k], log_refs[0], eps);
  }
  return out;
}

/// Clip radii for a pair under `config`. Adaptive radii use the raw sums over
/// all references, including the initializing one.
template <std::floating_point Scalar>
EpsilonPair<Scalar> clip_radii(const PairRefLogProbs<Scalar> &refs,
                               const ClipConfig<Scalar> &config) {
  config.validate();
  switch (config.mode) {
  case ClipMode::none:
    return {Scalar(0), Scalar(0)};
  case ClipMode::fixed:
    return {config.eps_max, config.eps_max};
  case ClipMode::adaptive:
    return adaptive_epsilon(refs.chosen().sum(), refs.rejected().sum(), config.eps_max);
  }
  return {Scalar(0), Scalar(0)};
}

} // namespace mrpo
