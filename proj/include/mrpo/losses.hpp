// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MRPO Authors

#pragma once

// Preference losses over sequence log-probabilities.
//
//   dpo        softplus(-m), m = beta (log pi/ref_0)(y_w) - beta (log pi/ref_0)(y_l)
//   mrpo       same shape with ref_0 replaced by the virtual reference built
//              from all K (weighted, clipped) references
//   multi_dpo  sum_k alpha_k softplus(-h_k), h_k the DPO margin against ref_k
//
// The policy log-probabilities are templated so the same code evaluates plain
// doubles and records onto an autodiff tape (ad::Var). Reference terms are
// always constants.

#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mrpo/ad.hpp"
#include "mrpo/prefmath.hpp"

namespace mrpo {

enum class LossKind { dpo, multi_dpo, mrpo };

std::string_view to_string(LossKind kind);
LossKind parse_loss_kind(std::string_view text);
std::string_view to_string(ClipMode mode);
ClipMode parse_clip_mode(std::string_view text);

/// How per-example reference weights are obtained.
struct WeightMode {
  enum class Kind { uniform, arwc, fixed };
  Kind kind = Kind::arwc;
  /// For Kind::fixed: either K weights, or a single weight for the
  /// initializing reference with the remainder split evenly over the others.
  std::vector<double> fixed;

  static WeightMode uniform() { return {Kind::uniform, {}}; }
  static WeightMode arwc() { return {Kind::arwc, {}}; }
  static WeightMode fixed_weights(std::vector<double> w) { return {Kind::fixed, std::move(w)}; }

  /// Parses "uniform", "arwc", "fixed=0.3" or "fixed=0.2,0.8".
  static WeightMode parse(std::string_view text);
  std::string to_string() const;
};

struct LossConfig {
  double beta = 0.1;
  LossKind kind = LossKind::mrpo;
  ClipConfig<double> clip{};
  WeightMode weights = WeightMode::arwc();

  void validate() const;
};

/// Result of one preference pair. For multi_dpo the reward fields are the
/// alpha-weighted averages of the per-reference rewards and `reward_error`
/// holds the actual gradient multiplier sum_k alpha_k sigma(-h_k).
template <typename T> struct PairLoss {
  T loss{};
  T reward_chosen{};
  T reward_rejected{};
  T margin{};
  double grad_scale = 0.5;   // sigma(reward_rejected - reward_chosen)
  double reward_error = 0.5; // coefficient multiplying beta * grad(log-ratio)
  ReferenceWeights<double> weights_used = uniform_weights(1);
  EpsilonPair<double> eps_used{};
  std::pair<double, double> virtual_ref{0.0, 0.0};
};

template <typename T> struct PolicyPair {
  T chosen{};
  T rejected{};
};

/// Reference-side quantities of one pair; these never depend on the policy.
struct PreparedReferences {
  ReferenceWeights<double> weights = uniform_weights(1);
  EpsilonPair<double> eps{};
  Vector<double> clipped_chosen;
  Vector<double> clipped_rejected;
  double virtual_chosen = 0.0;
  double virtual_rejected = 0.0;
};

/// Resolves the configured weight mode for one pair.
ReferenceWeights<double> resolve_weights(const PairRefLogProbs<double> &refs,
                                         const WeightMode &mode);

/// Weights (raw refs) -> radii (raw refs) -> clip refs k > 0 -> aggregate.
PreparedReferences prepare_references(const PairRefLogProbs<double> &refs,
                                      const LossConfig &config);

namespace detail {

template <typename T> void check_finite(const T &v, const char *what) {
  require(std::isfinite(value_of(v)), ErrorKind::NumericInput,
          std::string(what) + " is not finite");
}

template <typename T> T softplus_any(const T &z) {
  using ad::softplus;
  using mrpo::softplus;
  return softplus(z);
}

template <typename T>
PairLoss<T> single_reference_loss(const PolicyPair<T> &policy, double ref_chosen,
                                  double ref_rejected, double beta) {
  PairLoss<T> out;
  out.reward_chosen = implicit_reward(policy.chosen, ref_chosen, beta);
  out.reward_rejected = implicit_reward(policy.rejected, ref_rejected, beta);
  out.margin = out.reward_chosen - out.reward_rejected;
  out.loss = softplus_any(T(-1.0) * out.margin);
  out.grad_scale = sigmoid(-value_of(out.margin));
  out.reward_error = out.grad_scale;
  out.virtual_ref = {ref_chosen, ref_rejected};
  return out;
}

} // namespace detail

template <typename T>
PairLoss<T> dpo_pair_loss(const T &log_policy_chosen, const T &log_policy_rejected,
                          double log_ref_chosen, double log_ref_rejected, double beta) {
  require(beta > 0.0, ErrorKind::InvalidConfig, "beta must be > 0");
  detail::check_finite(log_policy_chosen, "policy chosen log-probability");
  detail::check_finite(log_policy_rejected, "policy rejected log-probability");
  detail::check_finite(log_ref_chosen, "reference chosen log-probability");
  detail::check_finite(log_ref_rejected, "reference rejected log-probability");
  return detail::single_reference_loss(PolicyPair<T>{log_policy_chosen, log_policy_rejected},
                                       log_ref_chosen, log_ref_rejected, beta);
}

template <typename T>
PairLoss<T> mrpo_pair_loss(const PolicyPair<T> &log_policy, const PairRefLogProbs<double> &refs,
                           const LossConfig &config) {
  require(config.kind == LossKind::mrpo, ErrorKind::InvalidConfig,
          "mrpo_pair_loss needs kind = mrpo");
  config.validate();
  detail::check_finite(log_policy.chosen, "policy chosen log-probability");
  detail::check_finite(log_policy.rejected, "policy rejected log-probability");
  PreparedReferences prep = prepare_references(refs, config);
  PairLoss<T> out = detail::single_reference_loss(log_policy, prep.virtual_chosen,
                                                  prep.virtual_rejected, config.beta);
  out.weights_used = std::move(prep.weights);
  out.eps_used = prep.eps;
  return out;
}

template <typename T>
PairLoss<T> multi_dpo_pair_loss(const PolicyPair<T> &log_policy,
                                const PairRefLogProbs<double> &refs, const LossConfig &config) {
  require(config.kind == LossKind::multi_dpo, ErrorKind::InvalidConfig,
          "multi_dpo_pair_loss needs kind = multi_dpo");
  config.validate();
  detail::check_finite(log_policy.chosen, "policy chosen log-probability");
  detail::check_finite(log_policy.rejected, "policy rejected log-probability");
  PreparedReferences prep = prepare_references(refs, config);

  const double beta = config.beta;
  PairLoss<T> out;
  out.loss = T(0.0);
  out.reward_chosen = T(0.0);
  out.reward_rejected = T(0.0);
  double error = 0.0;
  for (Eigen::Index k = 0; k < refs.size(); ++k) {
    const double alpha = prep.weights[k];
    if (alpha == 0.0) {
      continue;
    }
    const T r_w = implicit_reward(log_policy.chosen, prep.clipped_chosen[k], beta);
    const T r_l = implicit_reward(log_policy.rejected, prep.clipped_rejected[k], beta);
    const T h = r_w - r_l;
    out.loss = out.loss + alpha * detail::softplus_any(T(-1.0) * h);
    out.reward_chosen = out.reward_chosen + alpha * r_w;
    out.reward_rejected = out.reward_rejected + alpha * r_l;
    error += alpha * sigmoid(-value_of(h));
  }
  out.margin = out.reward_chosen - out.reward_rejected;
  out.grad_scale = sigmoid(-value_of(out.margin));
  out.reward_error = error;
  out.weights_used = std::move(prep.weights);
  out.eps_used = prep.eps;
  out.virtual_ref = {prep.virtual_chosen, prep.virtual_rejected};
  return out;
}

/// Dispatches on config.kind. The dpo kind uses reference 0 only.
template <typename T>
PairLoss<T> pair_loss(const PolicyPair<T> &log_policy, const PairRefLogProbs<double> &refs,
                      const LossConfig &config) {
  switch (config.kind) {
  case LossKind::dpo:
    return dpo_pair_loss(log_policy.chosen, log_policy.rejected, refs.chosen()[0],
                         refs.rejected()[0], config.beta);
  case LossKind::multi_dpo:
    return multi_dpo_pair_loss(log_policy, refs, config);
  case LossKind::mrpo:
    return mrpo_pair_loss(log_policy, refs, config);
  }
  fail(ErrorKind::InvalidConfig, "unknown loss kind");
}

template <typename T> struct PairInput {
  PolicyPair<T> policy;
  PairRefLogProbs<double> refs;
};

template <typename T> struct BatchLoss {
  T mean_loss{};
  std::vector<PairLoss<T>> per_example;
};

template <typename T>
BatchLoss<T> batch_loss(std::span<const PairInput<T>> examples, const LossConfig &config) {
  require(!examples.empty(), ErrorKind::InvalidArgument, "batch is empty");
  BatchLoss<T> out;
  out.per_example.reserve(examples.size());
  T total(0.0);
  for (const auto &ex : examples) {
    out.per_example.push_back(pair_loss(ex.policy, ex.refs, config));
    total = total + out.per_example.back().loss;
  }
  out.mean_loss = total * (1.0 / static_cast<double>(examples.size()));
  return out;
}

/// Implicit rewards used for evaluation: reference 0 for dpo and multi_dpo,
/// the virtual reference for mrpo.
struct EvalRewards {
  double chosen = 0.0;
  double rejected = 0.0;
};

EvalRewards evaluation_rewards(const PolicyPair<double> &log_policy,
                               const PairRefLogProbs<double> &refs, const LossConfig &config);

} // namespace mrpo
