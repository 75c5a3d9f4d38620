// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MRPO Authors

#pragma once

// Method comparisons on synthetic planted-reward worlds. Per seed: generate a
// world and its data, build a weak base reference plus stronger references,
// score them once, then train every method from a clone of the base.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mrpo/reference_family.hpp"
#include "mrpo/synthetic.hpp"
#include "mrpo/trainer.hpp"

namespace mrpo {

struct MethodSpec {
  std::string name;
  LossConfig loss;
};

struct ExperimentSpec {
  SyntheticSpec world;
  /// Quality of reference 0, which also initializes every trained policy.
  double base_quality = 0.2;
  /// Qualities of references 1..K-1.
  std::vector<double> reference_qualities{0.9};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::vector<MethodSpec> methods;
  /// Shared training settings; `loss` is replaced by each method's.
  TrainConfig train;
  PolicyDims dims;
  FamilyTraining family;

  void validate() const;
  nlohmann::json to_json() const;
  static ExperimentSpec from_json(const nlohmann::json &j);

  /// 5000 train / 500 test pairs, noise 0.1, base quality 0.2, second reference
  /// quality 0.9, five seeds; methods dpo, mrpo (adaptive eps and alpha),
  /// mrpo with fixed eps 0.1, and mrpo with fixed alpha 0.1 / 0.5 / 0.9.
  static ExperimentSpec weak_base_strong_reference();
};

struct ExperimentCell {
  std::string method;
  std::uint64_t seed = 0;
  double accuracy = 0.0;
  double margin = 0.0;
  double tie_rate = 0.0;
  double initial_train_loss = 0.0;
  double final_train_loss = 0.0;
  /// Likelihood-ranking accuracy of the untrained base policy on the test set.
  double base_accuracy = 0.0;
  bool diverged = false;
};

struct MethodSummary {
  std::string method;
  std::size_t runs = 0;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
  double mean_margin = 0.0;
  double std_margin = 0.0;
  std::size_t diverged = 0;
};

struct ExperimentReport {
  std::vector<ExperimentCell> cells;
  std::vector<MethodSummary> summaries;
  double mean_base_accuracy = 0.0;

  const MethodSummary &summary(const std::string &method) const;
  /// Cohen's d of final accuracy between two methods (a minus b).
  double cohens_d(const std::string &a, const std::string &b) const;

  std::string to_text() const;
  std::string to_csv() const;
  nlohmann::json to_json() const;
};

/// Sample standard deviation (n - 1); 0 for fewer than two values.
double sample_std(const std::vector<double> &values);

/// (mean(a) - mean(b)) / sqrt((s_a^2 + s_b^2) / 2). Returns 0 when both the
/// difference and the pooled deviation are 0, and +-inf when only the pooled
/// deviation is.
double cohens_d(const std::vector<double> &a, const std::vector<double> &b);

using ProgressFn = std::function<void(const ExperimentCell &)>;

ExperimentReport run_experiment(const ExperimentSpec &spec, const ProgressFn &progress = {});

} // namespace mrpo
