// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MRPO Authors

#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "mrpo/prefmath.hpp"
#include "mrpo/toy_policy.hpp"

namespace mrpo {

struct PreferenceExample {
  std::string id;
  std::string prompt;
  std::string chosen;
  std::string rejected;

  bool operator==(const PreferenceExample &) const = default;
};

using Dataset = std::vector<PreferenceExample>;

/// Throws InvalidArgument when a field is empty or chosen == rejected.
void validate_example(const PreferenceExample &example);

/// JSON Lines with keys {id, prompt, chosen, rejected}. Blank lines are
/// skipped; a malformed line raises a parse error naming its line number and a
/// repeated id raises an integrity error.
Dataset parse_preference_jsonl(std::string_view text);
Dataset load_preference_file(const std::filesystem::path &path);

std::string format_preference_jsonl(std::span<const PreferenceExample> examples);
void write_preference_file(const std::filesystem::path &path,
                           std::span<const PreferenceExample> examples);

/// SHA-256 of the canonical JSON Lines rendering.
std::string dataset_hash(std::span<const PreferenceExample> examples);

/// Frozen sequence log-probabilities of every reference on every example.
/// values(i, 2k) is log pi_ref^k(chosen_i), values(i, 2k + 1) is the rejected
/// one. Reference 0 is the initializing reference.
struct RefLogProbCache {
  static constexpr int kFormatVersion = 1;

  std::string dataset_hash;
  std::vector<std::string> reference_ids;
  bool eos_appended = true;
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> values;

  Eigen::Index example_count() const { return values.rows(); }
  Eigen::Index reference_count() const { return static_cast<Eigen::Index>(reference_ids.size()); }

  PairRefLogProbs<double> pair(Eigen::Index example) const;
  /// Throws InvalidArgument on a shape mismatch and NumericInput on a value
  /// that is not a valid log-probability.
  void validate() const;
};

/// Integrity error unless `cache` was built from exactly `dataset`.
void check_cache_matches(const RefLogProbCache &cache, std::span<const PreferenceExample> dataset);

/// Scores every (example, output, reference) triple; outputs get eos appended.
RefLogProbCache score_references(std::span<const PreferenceExample> dataset,
                                 std::span<const ToyPolicy> references,
                                 std::vector<std::string> reference_ids);

// Container: magic line, JSON header line {format_version, dataset_hash,
// reference_ids, eos_appended, shape [N, K, 2], dtype, byte_order}, then the
// values row-major as little-endian float64.
std::string serialize_cache(const RefLogProbCache &cache);
RefLogProbCache deserialize_cache(std::string_view bytes);
void write_cache(const std::filesystem::path &path, const RefLogProbCache &cache);
RefLogProbCache read_cache(const std::filesystem::path &path);

/// Appends a reference whose per-token log-probability on every rejected
/// output (eos included) is `per_token_offset` lower than reference 0's.
/// Used to build the divergent-reference fixture.
RefLogProbCache with_offset_reference(const RefLogProbCache &cache,
                                      std::span<const PreferenceExample> dataset,
                                      double per_token_offset, std::string reference_id);

} // namespace mrpo
