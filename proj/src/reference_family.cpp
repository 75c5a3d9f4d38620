// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MRPO Authors

#include "mrpo/reference_family.hpp"

#include <cmath>

#include "mrpo/errors.hpp"
#include "mrpo/optimizer.hpp"

namespace mrpo {

ToyPolicy make_reference_family(const SyntheticSpec &world, std::uint64_t seed, double quality,
                                const PolicyDims &dims, const FamilyTraining &training) {
  world.validate();
  require(quality >= 0.0 && quality <= 1.0, ErrorKind::InvalidArgument,
          "quality must lie in [0, 1]");
  require(training.prompts_per_step >= 1 && training.candidates >= 1 && training.max_steps >= 0,
          ErrorKind::InvalidConfig, "bad reference training settings");

  ToyPolicy policy = ToyPolicy::random(Vocab(world.alphabet), dims, seed, training.init_scale);
  const auto steps = static_cast<int>(std::lround(quality * training.max_steps));
  if (steps == 0) {
    return policy;
  }

  const PlantedReward reward = world.reward();
  WorldSampler sampler(world, seed ^ 0xD1B54A32D192ED03ULL);
  Optimizer opt(OptimizerConfig{}, training.learning_rate, policy.parameter_count());
  const double scale = 1.0 / training.prompts_per_step;
  for (int step = 0; step < steps; ++step) {
    ad::Tape tape(policy.parameter_count());
    ad::Var loss(0.0);
    for (int i = 0; i < training.prompts_per_step; ++i) {
      const std::string prompt = sampler.prompt();
      std::string best = sampler.output();
      double best_score = reward.score(prompt, best);
      for (int c = 1; c < training.candidates; ++c) {
        std::string cand = sampler.output();
        const double s = reward.score(prompt, cand);
        if (s > best_score) {
          best_score = s;
          best = std::move(cand);
        }
      }
      loss = loss - scale * policy.score_text(tape, prompt, best);
    }
    const Eigen::VectorXd grad = tape.backward(loss);
    opt.step(policy.parameters(), grad);
  }
  return policy;
}

} // namespace mrpo
