// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MRPO Authors

#include "mrpo/oracle.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "mrpo/errors.hpp"
#include "mrpo/synthetic.hpp"
#include "mrpo/trainer.hpp"

namespace mrpo::oracle {

namespace {

// One engine per trial so reports do not depend on evaluation order.
std::mt19937_64 trial_rng(std::uint64_t seed, std::uint64_t suite, std::uint64_t trial) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(suite), static_cast<std::uint32_t>(trial),
                    static_cast<std::uint32_t>(trial >> 32)};
  return std::mt19937_64(seq);
}

Vector<double> dirichlet(std::mt19937_64 &rng, Eigen::Index n) {
  std::exponential_distribution<double> expo(1.0);
  Vector<double> v(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    // Keep entries strictly positive; the floor is far below anything that
    // matters numerically.
    v[i] = std::max(expo(rng), 1e-300);
  }
  return v / v.sum();
}

// Renormalized a second time so the sum is within the weight contract.
Vector<double> dirichlet_exact(std::mt19937_64 &rng, Eigen::Index n) {
  Vector<double> v = dirichlet(rng, n);
  v /= v.sum();
  return v;
}

FiniteInstance<double> draw_instance(std::mt19937_64 &rng, int max_outcomes, int max_refs) {
  std::uniform_int_distribution<int> outcomes(2, max_outcomes);
  std::uniform_int_distribution<int> refs(1, max_refs);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int n = outcomes(rng);
  const int k = refs(rng);
  FiniteInstance<double> inst;
  inst.refs.resize(k, n);
  for (int r = 0; r < k; ++r) {
    inst.refs.row(r) = dirichlet_exact(rng, n).transpose();
  }
  inst.weights = ReferenceWeights<double>(dirichlet_exact(rng, k));
  inst.reward.resize(n);
  for (int y = 0; y < n; ++y) {
    inst.reward[y] = normal(rng);
  }
  inst.beta = std::bernoulli_distribution(0.5)(rng) ? 0.1 : 1.0;
  inst.validate();
  return inst;
}

void note(SuiteReport &report, double deviation) {
  report.max_deviation = std::max(report.max_deviation, deviation);
}

} // namespace

FiniteInstance<double> random_instance(std::uint64_t seed, int max_outcomes, int max_refs) {
  require(max_outcomes >= 2 && max_outcomes <= 64, ErrorKind::InvalidArgument,
          "max_outcomes must lie in [2, 64]");
  require(max_refs >= 1, ErrorKind::InvalidArgument, "max_refs must be >= 1");
  std::mt19937_64 rng = trial_rng(seed, 0, 0);
  return draw_instance(rng, max_outcomes, max_refs);
}

SuiteReport verify_prop1(std::uint64_t seed, long trials) {
  require(trials >= 1, ErrorKind::InvalidArgument, "trials must be >= 1");
  SuiteReport report{"prop1", trials};
  for (long t = 0; t < trials; ++t) {
    std::mt19937_64 rng = trial_rng(seed, 1, static_cast<std::uint64_t>(t));
    const FiniteInstance<double> inst = draw_instance(rng, 16, 4);
    const OracleSolution<double> sol = solve_closed_form(inst);
    bool ok = std::abs(sol.pi_star.sum() - 1.0) <= 1e-12 && sol.z > 0.0;
    // surrogate(pi*) = -log Z since KL(pi* || pi*) = 0.
    const double at_opt = std::abs(sol.surrogate_value + sol.log_z);
    note(report, at_opt);
    ok = ok && at_opt <= 1e-8 && sol.original_value <= sol.surrogate_value + 1e-12;
    for (int draw = 0; draw < 10; ++draw) {
      const Vector<double> pi = dirichlet_exact(rng, inst.outcome_count());
      const double sur = surrogate_objective(pi, inst);
      const double orig = original_objective(pi, inst);
      const double gap = sur - sol.surrogate_value;
      const double kl = kl_divergence(pi, sol.pi_star);
      note(report, std::abs(gap - kl));
      ok = ok && std::abs(gap - kl) <= 1e-8; // (a)
      ok = ok && gap >= -1e-10;              // (b)
      ok = ok && orig <= sur + 1e-12;        // (c)
      if (sur - orig > 1e-12) {
        ++report.strict;
      }
    }
    if (!ok) {
      ++report.failures;
    }
  }
  return report;
}

SuiteReport verify_jensen(std::uint64_t seed, long draws) {
  require(draws >= 1, ErrorKind::InvalidArgument, "trials must be >= 1");
  SuiteReport report{"jensen", draws};
  for (long t = 0; t < draws; ++t) {
    std::mt19937_64 rng = trial_rng(seed, 2, static_cast<std::uint64_t>(t));
    const FiniteInstance<double> inst = draw_instance(rng, 16, 4);
    const Vector<double> pi = dirichlet_exact(rng, inst.outcome_count());
    const auto y = std::uniform_int_distribution<Eigen::Index>(0, inst.outcome_count() - 1)(rng);
    double lhs = 0.0;
    double inner = 0.0;
    for (Eigen::Index k = 0; k < inst.reference_count(); ++k) {
      lhs += inst.weights[k] * (std::log(pi[y]) - std::log(inst.refs(k, y)));
      inner += inst.weights[k] * pi[y] / inst.refs(k, y);
    }
    const double rhs = std::log(inner);
    if (lhs - rhs > 1e-12) {
      ++report.failures;
      note(report, lhs - rhs);
    } else if (rhs - lhs > 1e-12) {
      ++report.strict;
    }
  }
  return report;
}

namespace {

struct Prop2Draw {
  double mrpo_scale = 0.0;  // sigma(-m) with m the virtual-reference margin
  double multi_scale = 0.0; // sum_k alpha_k sigma(-h_k)
  double mean_scale = 0.0;  // sigma(sum_k alpha_k d_k)
};

// Draws instances until all d_k = -h_k share the requested sign. Policy
// log-probabilities are uniform in [-20, -1]; each reference perturbs them by
// Normal(0, 2) noise, capped at 0.
Prop2Draw draw_prop2(std::mt19937_64 &rng, bool nonnegative) {
  std::uniform_int_distribution<int> refs(2, 4);
  std::uniform_real_distribution<double> lp(-20.0, -1.0);
  std::normal_distribution<double> noise(0.0, 2.0);
  LossConfig mrpo_cfg;
  mrpo_cfg.kind = LossKind::mrpo;
  mrpo_cfg.clip.mode = ClipMode::none;
  LossConfig multi_cfg = mrpo_cfg;
  multi_cfg.kind = LossKind::multi_dpo;
  for (;;) {
    const int k = refs(rng);
    const double beta = std::bernoulli_distribution(0.5)(rng) ? 0.1 : 1.0;
    const Vector<double> alpha = dirichlet_exact(rng, k);
    const PolicyPair<double> policy{lp(rng), lp(rng)};
    Vector<double> chosen(k);
    Vector<double> rejected(k);
    for (int r = 0; r < k; ++r) {
      chosen[r] = std::min(0.0, policy.chosen + noise(rng));
      rejected[r] = std::min(0.0, policy.rejected + noise(rng));
    }
    Vector<double> d(k);
    for (int r = 0; r < k; ++r) {
      d[r] = beta * ((policy.rejected - rejected[r]) - (policy.chosen - chosen[r]));
    }
    const bool shared = nonnegative ? (d.array() >= 0.0).all() : (d.array() <= 0.0).all();
    if (!shared) {
      continue;
    }
    const PairRefLogProbs<double> pair(chosen, rejected);
    mrpo_cfg.beta = beta;
    multi_cfg.beta = beta;
    std::vector<double> w(alpha.data(), alpha.data() + k);
    mrpo_cfg.weights = WeightMode::fixed_weights(w);
    multi_cfg.weights = WeightMode::fixed_weights(w);
    Prop2Draw out;
    out.mrpo_scale = mrpo_pair_loss(policy, pair, mrpo_cfg).grad_scale;
    out.multi_scale = multi_dpo_pair_loss(policy, pair, multi_cfg).reward_error;
    out.mean_scale = sigmoid(alpha.dot(d));
    return out;
  }
}

} // namespace

std::vector<SuiteReport> verify_prop2(std::uint64_t seed, long trials) {
  require(trials >= 1, ErrorKind::InvalidArgument, "trials must be >= 1");
  std::vector<SuiteReport> reports{
      {"prop2 d>=0", trials, 0, 0.0, 0, true},
      {"prop2 d<=0", trials, 0, 0.0, 0, true},
      {"prop2 mean-form d>=0", trials, 0, 0.0, 0, true},
      {"prop2 mean-form d<=0", trials, 0, 0.0, 0, true},
  };
  for (int sign = 0; sign < 2; ++sign) {
    const bool nonnegative = sign == 0;
    SuiteReport &stated = reports[static_cast<std::size_t>(sign)];
    SuiteReport &mean = reports[static_cast<std::size_t>(sign + 2)];
    for (long t = 0; t < trials; ++t) {
      std::mt19937_64 rng = trial_rng(seed, 3 + static_cast<std::uint64_t>(sign),
                                      static_cast<std::uint64_t>(t));
      const Prop2Draw draw = draw_prop2(rng, nonnegative);
      // Orient both checks so that a positive `excess` is a violation.
      const double stated_excess =
          nonnegative ? draw.multi_scale - draw.mrpo_scale : draw.mrpo_scale - draw.multi_scale;
      const double mean_excess =
          nonnegative ? draw.multi_scale - draw.mean_scale : draw.mean_scale - draw.multi_scale;
      for (auto [report, excess] : {std::pair{&stated, stated_excess}, {&mean, mean_excess}}) {
        if (excess > 1e-12) {
          ++report->failures;
          note(*report, excess);
        } else if (excess < -1e-12) {
          ++report->strict;
        }
      }
    }
  }
  return reports;
}

double finite_difference_check(const std::function<double(const Eigen::VectorXd &)> &f,
                               const Eigen::VectorXd &x, const Eigen::VectorXd &analytic,
                               int coords, double h, std::uint64_t seed) {
  require(h >= 1e-7 && h <= 1e-3, ErrorKind::InvalidArgument, "h must lie in [1e-7, 1e-3]");
  require(coords >= 1, ErrorKind::InvalidArgument, "coords must be >= 1");
  require(analytic.size() == x.size(), ErrorKind::InvalidArgument,
          "gradient length must equal the parameter count");
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(x.size()));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(std::min(idx.size(), static_cast<std::size_t>(coords)));

  double worst = 0.0;
  Eigen::VectorXd probe = x;
  for (Eigen::Index i : idx) {
    probe[i] = x[i] + h;
    const double up = f(probe);
    probe[i] = x[i] - h;
    const double down = f(probe);
    probe[i] = x[i];
    const double numeric = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  return worst;
}

double finite_difference_check(const ToyPolicy &policy, const LossConfig &config,
                               std::span<const PreferenceExample> data,
                               const RefLogProbCache &refs, int coords, double h,
                               std::uint64_t seed) {
  const ScoredData scored{data, &refs};
  const auto [value, grad] = batch_objective_and_gradient(policy, scored, config);
  ToyPolicy probe = policy;
  auto f = [&](const Eigen::VectorXd &theta) {
    probe.parameters() = theta;
    return batch_objective(probe, scored, config);
  };
  return finite_difference_check(f, policy.parameters(), grad, coords, h, seed);
}

std::vector<SuiteReport> verify_gradients(std::uint64_t seed, int coords, double h,
                                          double tolerance) {
  SyntheticSpec world;
  world.seed = seed;
  world.pairs = 6;
  world.test_fraction = 0.0;
  const SyntheticData data = generate_synthetic(world);
  const PolicyDims dims{};
  std::vector<ToyPolicy> family;
  for (std::uint64_t k = 0; k < 3; ++k) {
    family.push_back(ToyPolicy::random(Vocab(world.alphabet), dims, seed * 31 + k + 1));
  }
  const RefLogProbCache refs =
      score_references(data.train, family, {"ref-0", "ref-1", "ref-2"});
  // Move the policy away from reference 0 so the margins are not all zero.
  const ToyPolicy policy = ToyPolicy::random(Vocab(world.alphabet), dims, seed * 31 + 100);

  std::vector<SuiteReport> out;
  for (LossKind kind : {LossKind::dpo, LossKind::multi_dpo, LossKind::mrpo}) {
    LossConfig config;
    config.kind = kind;
    config.clip.mode = ClipMode::adaptive;
    config.weights = WeightMode::arwc();
    const double err =
        finite_difference_check(policy, config, data.train, refs, coords, h, seed + 7);
    SuiteReport report{"gradcheck " + std::string(to_string(kind)), coords};
    report.max_deviation = err;
    report.failures = err < tolerance ? 0 : 1;
    out.push_back(report);
  }
  return out;
}

} // namespace mrpo::oracle
