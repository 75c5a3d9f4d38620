// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MRPO Authors

#pragma once

#include <cstdint>

#include "mrpo/synthetic.hpp"
#include "mrpo/toy_policy.hpp"

namespace mrpo {

struct FamilyTraining {
  int max_steps = 300;
  int prompts_per_step = 16;
  int candidates = 8;
  double learning_rate = 1e-2;
  double init_scale = 0.3;
};

/// Reference policy of controllable quality for a synthetic world.
///
/// Starts from a random init drawn from `seed` and runs round(quality *
/// max_steps) steps of maximum likelihood on the best-of-`candidates` output
/// (under the planted reward) for freshly sampled prompts. quality = 0 returns
/// the random init.
ToyPolicy make_reference_family(const SyntheticSpec &world, std::uint64_t seed, double quality,
                                const PolicyDims &dims = {}, const FamilyTraining &training = {});

} // namespace mrpo
