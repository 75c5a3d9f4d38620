// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MRPO Authors

#pragma once

// Synthetic preference worlds with a planted reward.
//
// Prompts and outputs are strings over a small alphabet. The planted reward of
// an output is the sum over its characters of score(key, c), where the key is
// the prompt's last character and `score` a fixed Gaussian table. Labels are
// the strict reward ordering of two distinct outputs, flipped with a fixed
// probability.

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

#include <Eigen/Core>
#include <json.hpp>

#include "mrpo/dataio.hpp"

namespace mrpo {

class PlantedReward {
public:
  PlantedReward(std::string alphabet, Eigen::MatrixXd token_scores);

  /// Standard-normal score table drawn from `seed`.
  static PlantedReward random(std::string alphabet, std::uint64_t seed);

  double score(std::string_view prompt, std::string_view output) const;

  const std::string &alphabet() const { return alphabet_; }
  const Eigen::MatrixXd &token_scores() const { return scores_; }

  nlohmann::json to_json() const;
  static PlantedReward from_json(const nlohmann::json &j);

private:
  int index_of(char c) const;

  std::string alphabet_;
  Eigen::MatrixXd scores_; // rows: key character, cols: output character
};

struct SyntheticSpec {
  std::uint64_t seed = 7;
  std::string alphabet = "abcdefgh";
  int prompt_min_len = 2;
  int prompt_max_len = 4;
  int output_min_len = 1;
  int output_max_len = 3;
  int pairs = 1000;
  double noise = 0.0;
  double test_fraction = 0.1;

  /// Invalid config unless noise in [0, 0.5), lengths ordered and positive,
  /// test_fraction in [0, 1) and pairs >= 0.
  void validate() const;
  /// Planted reward derived deterministically from `seed`.
  PlantedReward reward() const;

  nlohmann::json to_json() const;
  static SyntheticSpec from_json(const nlohmann::json &j);
};

/// Samples prompts from the spec's prompt distribution and outputs uniformly.
class WorldSampler {
public:
  WorldSampler(const SyntheticSpec &spec, std::uint64_t seed);
  std::string prompt();
  std::string output();
  std::mt19937_64 &rng() { return rng_; }

private:
  std::string draw(int min_len, int max_len);

  SyntheticSpec spec_;
  std::mt19937_64 rng_;
};

struct SyntheticData {
  Dataset train;
  Dataset test;
  std::size_t flipped = 0; // labels flipped by the noise process
};

SyntheticData generate_synthetic(const SyntheticSpec &spec);

} // namespace mrpo
