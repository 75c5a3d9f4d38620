// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MRPO Authors

#pragma once

// Brute-force checks on finite outcome spaces.
//
// For a single prompt with outcomes y = 1..n, K reference distributions,
// weights alpha and a reward vector r, the multi-reference objective (to be
// minimized) is
//
//   original(pi)  = sum_y pi(y) [ sum_k alpha_k log(pi(y)/ref_k(y)) - r(y)/beta ]
//
// and Jensen's inequality on the inner log gives the upper bound
//
//   surrogate(pi) = sum_y pi(y) [ log(sum_k alpha_k pi(y)/ref_k(y)) - r(y)/beta ]
//                 = KL(pi || pi*) - log Z,
//
// with pi*(y) = vref(y) exp(r(y)/beta) / Z and vref the weighted harmonic mean
// of the references. Everything here is exact enumeration.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mrpo/dataio.hpp"
#include "mrpo/losses.hpp"
#include "mrpo/prefmath.hpp"
#include "mrpo/toy_policy.hpp"

namespace mrpo::oracle {

template <std::floating_point Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <std::floating_point Scalar> struct FiniteInstance {
  Matrix<Scalar> refs; // K x n, one distribution per row
  ReferenceWeights<Scalar> weights = uniform_weights<Scalar>(1);
  Vector<Scalar> reward; // n
  Scalar beta = Scalar(1);

  Eigen::Index outcome_count() const { return refs.cols(); }
  Eigen::Index reference_count() const { return refs.rows(); }

  void validate() const {
    require(refs.cols() >= 2 && refs.cols() <= 64, ErrorKind::InvalidArgument,
            "outcome count must lie in [2, 64]");
    require(refs.rows() == weights.size(), ErrorKind::InvalidArgument,
            "one weight per reference is required");
    require(reward.size() == refs.cols(), ErrorKind::InvalidArgument,
            "reward length must equal the outcome count");
    require(beta > Scalar(0), ErrorKind::InvalidArgument, "beta must be > 0");
    for (Eigen::Index k = 0; k < refs.rows(); ++k) {
      require((refs.row(k).array() > Scalar(0)).all(), ErrorKind::InvalidArgument,
              "reference probabilities must be strictly positive");
      require(std::abs(refs.row(k).sum() - Scalar(1)) <= Scalar(1e-12),
              ErrorKind::InvalidArgument, "reference rows must sum to 1");
    }
  }
};

template <std::floating_point Scalar> struct OracleSolution {
  Vector<Scalar> pi_star;
  Scalar z = Scalar(0);
  Scalar log_z = Scalar(0);
  Scalar surrogate_value = Scalar(0);
  Scalar original_value = Scalar(0);
};

template <std::floating_point Scalar>
void check_distribution(const Vector<Scalar> &pi, Eigen::Index n) {
  require(pi.size() == n, ErrorKind::InvalidArgument, "distribution has the wrong length");
  require((pi.array() > Scalar(0)).all(), ErrorKind::InvalidArgument,
          "distribution must be strictly positive");
  require(std::abs(pi.sum() - Scalar(1)) <= Scalar(1e-9), ErrorKind::InvalidArgument,
          "distribution must sum to 1");
}

/// sum p log(p/q) with 0 log 0 = 0.
template <std::floating_point Scalar>
Scalar kl_divergence(const Vector<Scalar> &p, const Vector<Scalar> &q) {
  require(p.size() == q.size(), ErrorKind::InvalidArgument, "length mismatch");
  Scalar total = 0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    require(p[i] >= Scalar(0), ErrorKind::InvalidArgument, "negative probability");
    if (p[i] == Scalar(0)) {
      continue;
    }
    require(q[i] > Scalar(0), ErrorKind::InvalidArgument, "q has no support where p > 0");
    total += p[i] * (std::log(p[i]) - std::log(q[i]));
  }
  return std::max(total, Scalar(0));
}

template <std::floating_point Scalar>
Scalar surrogate_objective(const Vector<Scalar> &pi, const FiniteInstance<Scalar> &inst) {
  check_distribution(pi, inst.outcome_count());
  Scalar total = 0;
  for (Eigen::Index y = 0; y < inst.outcome_count(); ++y) {
    Scalar inner = 0;
    for (Eigen::Index k = 0; k < inst.reference_count(); ++k) {
      inner += inst.weights[k] * pi[y] / inst.refs(k, y);
    }
    total += pi[y] * (std::log(inner) - inst.reward[y] / inst.beta);
  }
  return total;
}

template <std::floating_point Scalar>
Scalar original_objective(const Vector<Scalar> &pi, const FiniteInstance<Scalar> &inst) {
  check_distribution(pi, inst.outcome_count());
  Scalar total = 0;
  for (Eigen::Index y = 0; y < inst.outcome_count(); ++y) {
    Scalar inner = 0;
    for (Eigen::Index k = 0; k < inst.reference_count(); ++k) {
      inner += inst.weights[k] * (std::log(pi[y]) - std::log(inst.refs(k, y)));
    }
    total += pi[y] * (inner - inst.reward[y] / inst.beta);
  }
  return total;
}

/// pi* and Z via the log-space virtual reference; exponentials are shifted by
/// their maximum.
template <std::floating_point Scalar>
OracleSolution<Scalar> solve_closed_form(const FiniteInstance<Scalar> &inst) {
  inst.validate();
  const Eigen::Index n = inst.outcome_count();
  Vector<Scalar> logits(n);
  for (Eigen::Index y = 0; y < n; ++y) {
    const Vector<Scalar> log_refs = inst.refs.col(y).array().log();
    logits[y] = log_virtual_reference(log_refs, inst.weights) + inst.reward[y] / inst.beta;
  }
  OracleSolution<Scalar> sol;
  sol.log_z = log_sum_exp(logits);
  sol.z = std::exp(sol.log_z);
  sol.pi_star = (logits.array() - sol.log_z).exp();
  sol.surrogate_value = surrogate_objective(sol.pi_star, inst);
  sol.original_value = original_objective(sol.pi_star, inst);
  return sol;
}

// --------------------------------------------------------------------------
// Randomized suites
// --------------------------------------------------------------------------

struct SuiteReport {
  std::string name;
  long trials = 0;
  long failures = 0;
  double max_deviation = 0.0;
  /// Instances where the checked inequality is not tight (> 1e-12 apart).
  long strict = 0;
  /// When set, at least one strict instance is needed to pass.
  bool require_strict = false;

  bool passed() const { return failures == 0 && (!require_strict || strict > 0); }
};

/// Dirichlet(1) / Normal(0,1) / beta in {0.1, 1} instance with
/// n in [2, max_outcomes] and K in [1, max_refs].
FiniteInstance<double> random_instance(std::uint64_t seed, int max_outcomes = 16,
                                       int max_refs = 4);

/// (a) surrogate(pi) - surrogate(pi*) = KL(pi || pi*) within 1e-8 for 10
/// random pi, (b) no tested pi beats pi*, (c) original <= surrogate.
SuiteReport verify_prop1(std::uint64_t seed, long trials);

/// Pointwise sum_k alpha_k log(pi/ref_k) <= log sum_k alpha_k pi/ref_k on
/// random (y, instance) draws; slack -1e-12.
SuiteReport verify_jensen(std::uint64_t seed, long draws);

/// Gradient-scale comparison between mrpo and multi_dpo on pairs whose
/// per-reference reward errors d_k share a sign. Returns the d >= 0 and d <= 0
/// suites for the stated inequality, then the same two suites for the
/// arithmetic-mean form sigma(sum_k alpha_k d_k) vs sum_k alpha_k sigma(d_k).
std::vector<SuiteReport> verify_prop2(std::uint64_t seed, long trials);

/// Max relative error between `analytic` and central differences of `f` on
/// `coords` randomly chosen coordinates. The denominator is
/// max(|analytic|, |numeric|, 1e-8).
double finite_difference_check(const std::function<double(const Eigen::VectorXd &)> &f,
                               const Eigen::VectorXd &x, const Eigen::VectorXd &analytic,
                               int coords, double h, std::uint64_t seed);

/// Gradient of the mean batch loss over the policy parameters vs central
/// differences.
double finite_difference_check(const ToyPolicy &policy, const LossConfig &config,
                               std::span<const PreferenceExample> data,
                               const RefLogProbCache &refs, int coords, double h,
                               std::uint64_t seed);

/// Gradient check for dpo, multi_dpo and mrpo over a toy policy with K = 3
/// references, adaptive clipping and adaptive weights.
std::vector<SuiteReport> verify_gradients(std::uint64_t seed, int coords = 64, double h = 1e-5,
                                          double tolerance = 1e-4);

} // namespace mrpo::oracle
