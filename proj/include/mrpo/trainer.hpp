// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MRPO Authors

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "mrpo/dataio.hpp"
#include "mrpo/losses.hpp"
#include "mrpo/optimizer.hpp"
#include "mrpo/toy_policy.hpp"

namespace mrpo {

struct TrainConfig {
  LossConfig loss{};
  double learning_rate = 1e-3;
  OptimizerConfig optimizer{};
  int epochs = 3;
  int batch_size = 8;
  std::uint64_t seed = 0;
  /// Record metrics every this many steps; 0 records at the end of each epoch.
  int eval_every = 0;
  double divergence_threshold = 10.0;

  void validate() const;
  nlohmann::json to_json() const;
  /// Missing keys keep their defaults; unknown keys are a config error.
  static TrainConfig from_json(const nlohmann::json &j);
};

struct MetricsRecord {
  long step = 0;
  int epoch = 0;
  double train_loss = 0.0;
  double test_accuracy = 0.0;
  double test_margin = 0.0;
  double tie_rate = 0.0;
  double wall_time = 0.0; // seconds since the start of train()

  /// `with_wall_time = false` drops the only non-deterministic field.
  nlohmann::json to_json(bool with_wall_time) const;
};

struct DivergenceReport {
  long step = 0;
  int epoch = 0;
  double loss = 0.0;
  double threshold = 0.0;
};

struct TrainResult {
  ToyPolicy policy;
  std::vector<MetricsRecord> history;
  std::optional<DivergenceReport> divergence;
};

struct EvalResult {
  double accuracy = 0.0;
  double mean_margin = 0.0;
  double tie_rate = 0.0;
  std::size_t count = 0;
};

/// A dataset together with the frozen reference scores of its examples.
struct ScoredData {
  std::span<const PreferenceExample> examples;
  const RefLogProbCache *refs = nullptr;
};

/// Accuracy counts r_w > r_l strictly; ties are counted as incorrect and
/// reported separately in tie_rate.
EvalResult evaluate(const ToyPolicy &policy, const RefLogProbCache &refs,
                    std::span<const PreferenceExample> data, const LossConfig &config);

/// Fraction of pairs the policy itself ranks correctly, log pi(y_w|x) > log pi(y_l|x).
double likelihood_accuracy(const ToyPolicy &policy, std::span<const PreferenceExample> data);

/// Mean pair loss over `indices` (all examples when empty).
double batch_objective(const ToyPolicy &policy, const ScoredData &data, const LossConfig &config,
                       std::span<const std::size_t> indices = {});

/// Mean pair loss and its gradient with respect to the policy parameters.
std::pair<double, Eigen::VectorXd>
batch_objective_and_gradient(const ToyPolicy &policy, const ScoredData &data,
                             const LossConfig &config, std::span<const std::size_t> indices = {});

/// Called after every optimizer step with (step, parameters).
using StepObserver = std::function<void(long, const Eigen::VectorXd &)>;

/// Minibatch training of `policy` (normally a clone of reference 0) on the
/// configured loss. Deterministic under config.seed. Aborts early, with a
/// divergence report, when a batch loss exceeds the divergence threshold or
/// is not finite. Metrics are evaluated on `eval` when given, otherwise on the
/// training data.
TrainResult train(ToyPolicy policy, const ScoredData &train_data,
                  const std::optional<ScoredData> &eval, const TrainConfig &config,
                  const StepObserver &observer = {});

} // namespace mrpo
