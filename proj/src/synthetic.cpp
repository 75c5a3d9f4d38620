// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MRPO Authors

#include "mrpo/synthetic.hpp"

#include <cmath>
#include <cstdio>

#include "mrpo/errors.hpp"

namespace mrpo {

PlantedReward::PlantedReward(std::string alphabet, Eigen::MatrixXd token_scores)
    : alphabet_(std::move(alphabet)), scores_(std::move(token_scores)) {
  const auto n = static_cast<Eigen::Index>(alphabet_.size());
  require(n >= 2, ErrorKind::InvalidArgument, "alphabet needs at least two characters");
  require(scores_.rows() == n && scores_.cols() == n, ErrorKind::InvalidArgument,
          "score table must be |alphabet| x |alphabet|");
  Vocab check(alphabet_); // rejects duplicate characters
}

PlantedReward PlantedReward::random(std::string alphabet, std::uint64_t seed) {
  const auto n = static_cast<Eigen::Index>(alphabet.size());
  Eigen::MatrixXd scores(n, n);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      scores(i, j) = normal(rng);
    }
  }
  return PlantedReward(std::move(alphabet), std::move(scores));
}

int PlantedReward::index_of(char c) const {
  const auto pos = alphabet_.find(c);
  require(pos != std::string::npos, ErrorKind::Encoding,
          std::string("character '") + c + "' is not in the alphabet");
  return static_cast<int>(pos);
}

double PlantedReward::score(std::string_view prompt, std::string_view output) const {
  require(!prompt.empty(), ErrorKind::InvalidArgument, "prompt is empty");
  const int key = index_of(prompt.back());
  double total = 0.0;
  for (char c : output) {
    total += scores_(key, index_of(c));
  }
  return total;
}

nlohmann::json PlantedReward::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < scores_.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < scores_.cols(); ++j) {
      row.push_back(scores_(i, j));
    }
    rows.push_back(std::move(row));
  }
  return {{"alphabet", alphabet_}, {"token_scores", rows}};
}

PlantedReward PlantedReward::from_json(const nlohmann::json &j) {
  auto alphabet = j.at("alphabet").get<std::string>();
  const auto rows = j.at("token_scores").get<std::vector<std::vector<double>>>();
  const auto n = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd scores(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    require(static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)].size()) == n,
            ErrorKind::Parse, "token_scores must be square");
    for (Eigen::Index c = 0; c < n; ++c) {
      scores(i, c) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)];
    }
  }
  return PlantedReward(std::move(alphabet), std::move(scores));
}

void SyntheticSpec::validate() const {
  require(std::isfinite(noise) && noise >= 0.0 && noise < 0.5, ErrorKind::InvalidConfig,
          "noise must lie in [0, 0.5)");
  require(prompt_min_len >= 1 && prompt_min_len <= prompt_max_len, ErrorKind::InvalidConfig,
          "bad prompt length range");
  require(output_min_len >= 1 && output_min_len <= output_max_len, ErrorKind::InvalidConfig,
          "bad output length range");
  require(test_fraction >= 0.0 && test_fraction < 1.0, ErrorKind::InvalidConfig,
          "test_fraction must lie in [0, 1)");
  require(pairs >= 0, ErrorKind::InvalidConfig, "pairs must be >= 0");
  require(alphabet.size() >= 2, ErrorKind::InvalidConfig, "alphabet needs two characters");
}

PlantedReward SyntheticSpec::reward() const {
  return PlantedReward::random(alphabet, seed * 0x9E3779B97F4A7C15ULL + 1);
}

nlohmann::json SyntheticSpec::to_json() const {
  return {{"seed", seed},
          {"alphabet", alphabet},
          {"prompt_min_len", prompt_min_len},
          {"prompt_max_len", prompt_max_len},
          {"output_min_len", output_min_len},
          {"output_max_len", output_max_len},
          {"pairs", pairs},
          {"noise", noise},
          {"test_fraction", test_fraction}};
}

SyntheticSpec SyntheticSpec::from_json(const nlohmann::json &j) {
  SyntheticSpec s;
  s.seed = j.at("seed").get<std::uint64_t>();
  s.alphabet = j.at("alphabet").get<std::string>();
  s.prompt_min_len = j.at("prompt_min_len").get<int>();
  s.prompt_max_len = j.at("prompt_max_len").get<int>();
  s.output_min_len = j.at("output_min_len").get<int>();
  s.output_max_len = j.at("output_max_len").get<int>();
  s.pairs = j.at("pairs").get<int>();
  s.noise = j.at("noise").get<double>();
  s.test_fraction = j.at("test_fraction").get<double>();
  s.validate();
  return s;
}

WorldSampler::WorldSampler(const SyntheticSpec &spec, std::uint64_t seed)
    : spec_(spec), rng_(seed) {}

std::string WorldSampler::draw(int min_len, int max_len) {
  std::uniform_int_distribution<int> len(min_len, max_len);
  std::uniform_int_distribution<std::size_t> pick(0, spec_.alphabet.size() - 1);
  std::string s(static_cast<std::size_t>(len(rng_)), ' ');
  for (char &c : s) {
    c = spec_.alphabet[pick(rng_)];
  }
  return s;
}

std::string WorldSampler::prompt() { return draw(spec_.prompt_min_len, spec_.prompt_max_len); }
std::string WorldSampler::output() { return draw(spec_.output_min_len, spec_.output_max_len); }

SyntheticData generate_synthetic(const SyntheticSpec &spec) {
  spec.validate();
  const PlantedReward reward = spec.reward();
  WorldSampler sampler(spec, spec.seed);
  std::bernoulli_distribution flip(spec.noise);

  SyntheticData data;
  Dataset all;
  all.reserve(static_cast<std::size_t>(spec.pairs));
  for (int i = 0; i < spec.pairs; ++i) {
    const std::string prompt = sampler.prompt();
    std::string a = sampler.output();
    std::string b = sampler.output();
    // No ties: outputs must differ and their rewards must be strictly ordered.
    while (a == b || reward.score(prompt, a) == reward.score(prompt, b)) {
      b = sampler.output();
    }
    if (reward.score(prompt, a) < reward.score(prompt, b)) {
      std::swap(a, b);
    }
    if (flip(sampler.rng())) {
      std::swap(a, b);
      ++data.flipped;
    }
    char id[32];
    std::snprintf(id, sizeof id, "syn-%06d", i);
    all.push_back({id, prompt, std::move(a), std::move(b)});
  }
  const auto n_test = static_cast<std::size_t>(std::llround(spec.pairs * spec.test_fraction));
  const std::size_t n_train = all.size() - n_test;
  data.train.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_train));
  data.test.assign(all.begin() + static_cast<std::ptrdiff_t>(n_train), all.end());
  return data;
}

} // namespace mrpo
