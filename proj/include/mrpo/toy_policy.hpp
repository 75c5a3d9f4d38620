// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MRPO Authors

#pragma once

// A small fixed-window autoregressive character model.
//
// For every scored position the previous `context_width` tokens are embedded,
// concatenated, passed through one tanh layer and projected to vocabulary
// logits:
//
//   h      = tanh(W1 [E(t_{-w}); ...; E(t_{-1})] + b1)
//   logits = W2 h + b2
//
// A sequence is laid out as `prompt <bos> output` (left padded with <bos>);
// only output positions are scored, so sequence_logprob is log pi(y | x).

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "mrpo/ad.hpp"

namespace mrpo {

using Token = int;

class Vocab {
public:
  static constexpr Token bos = 0;
  static constexpr Token eos = 1;

  /// `symbols` are the distinct ordinary characters; ids start at 2.
  explicit Vocab(std::string symbols);

  /// Printable ASCII (space through '~').
  static Vocab printable();

  int size() const { return static_cast<int>(symbols_.size()) + 2; }
  const std::string &symbols() const { return symbols_; }
  bool is_symbol(Token t) const { return t >= 2 && t < size(); }

  std::vector<Token> encode(std::string_view text) const;
  std::string decode(std::span<const Token> tokens) const;
  std::string hash() const;

  bool operator==(const Vocab &other) const { return symbols_ == other.symbols_; }

private:
  std::string symbols_;
  std::array<int, 256> index_{};
};

struct PolicyDims {
  int embedding = 16;
  int hidden = 32;
  int context_width = 4;

  bool operator==(const PolicyDims &) const = default;
};

Eigen::Index parameter_count(int vocab_size, const PolicyDims &dims);

class ToyPolicy {
public:
  ToyPolicy(Vocab vocab, PolicyDims dims, std::uint64_t seed, Eigen::VectorXd params);

  static ToyPolicy zeros(Vocab vocab, PolicyDims dims = {}, std::uint64_t seed = 0);
  /// Gaussian init with standard deviation `init_scale`, biases zero.
  static ToyPolicy random(Vocab vocab, PolicyDims dims, std::uint64_t seed,
                          double init_scale = 0.3);

  const Vocab &vocab() const { return vocab_; }
  const PolicyDims &dims() const { return dims_; }
  std::uint64_t seed() const { return seed_; }
  Eigen::Index parameter_count() const { return params_.size(); }

  const Eigen::VectorXd &parameters() const { return params_; }
  Eigen::VectorXd &parameters() { return params_; }

  /// Next-token log-probabilities given exactly `context_width` tokens.
  Eigen::VectorXd next_token_log_probs(std::span<const Token> window) const;

  /// log pi(output | prompt). `output` must be non-empty and end in eos.
  double sequence_logprob(std::span<const Token> prompt, std::span<const Token> output) const;

  /// Same value, recorded on `tape` as a leaf whose pullback accumulates
  /// d/dparams. The policy must outlive the tape's backward pass and must not
  /// be modified before it.
  ad::Var sequence_logprob(ad::Tape &tape, std::span<const Token> prompt,
                           std::span<const Token> output) const;

  /// Per-position log-probabilities of the output tokens.
  Eigen::VectorXd position_logprobs(std::span<const Token> prompt,
                                    std::span<const Token> output) const;

  /// Encodes text and appends eos to the output before scoring.
  double score_text(std::string_view prompt, std::string_view output) const;
  ad::Var score_text(ad::Tape &tape, std::string_view prompt, std::string_view output) const;

private:
  struct Layout;
  void validate_sequence(std::span<const Token> prompt, std::span<const Token> output) const;
  std::vector<Token> stream(std::span<const Token> prompt, std::span<const Token> output) const;

  Vocab vocab_;
  PolicyDims dims_;
  std::uint64_t seed_ = 0;
  Eigen::VectorXd params_;
};

inline ToyPolicy clone_policy(const ToyPolicy &policy) { return policy; }

/// Scores one sequence on a fresh tape sized for the policy's parameters.
std::pair<double, ad::Tape> sequence_logprob_with_tape(const ToyPolicy &policy,
                                                       std::span<const Token> prompt,
                                                       std::span<const Token> output);

/// Text output with eos appended.
std::vector<Token> encode_output(const Vocab &vocab, std::string_view output);

// Checkpoint container: a magic line, one JSON header line (format version,
// vocab, vocab hash, dims, seed, parameter count, byte order) and the flat
// parameter vector as little-endian float64.
std::string serialize_checkpoint(const ToyPolicy &policy);
ToyPolicy deserialize_checkpoint(std::string_view bytes);
void write_checkpoint(const std::filesystem::path &path, const ToyPolicy &policy);
ToyPolicy read_checkpoint(const std::filesystem::path &path);

} // namespace mrpo
