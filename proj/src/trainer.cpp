// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MRPO Authors

#include "mrpo/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

#include "mrpo/errors.hpp"

namespace mrpo {

void TrainConfig::validate() const {
  loss.validate();
  require(std::isfinite(learning_rate) && learning_rate > 0.0, ErrorKind::InvalidConfig,
          "learning rate must be > 0");
  require(batch_size >= 1, ErrorKind::InvalidConfig, "batch size must be >= 1");
  require(epochs >= 0, ErrorKind::InvalidConfig, "epochs must be >= 0");
  require(eval_every >= 0, ErrorKind::InvalidConfig, "eval_every must be >= 0");
  require(divergence_threshold > 0.0, ErrorKind::InvalidConfig,
          "divergence threshold must be > 0");
}

nlohmann::json TrainConfig::to_json() const {
  nlohmann::json j;
  j["loss"] = std::string(to_string(loss.kind));
  j["beta"] = loss.beta;
  j["clip"] = std::string(to_string(loss.clip.mode));
  j["eps_max"] = loss.clip.eps_max;
  j["alpha_mode"] = loss.weights.to_string();
  j["learning_rate"] = learning_rate;
  if (optimizer.kind == OptimizerConfig::Kind::adam) {
    j["optimizer"] = {{"kind", "adam"},
                      {"beta1", optimizer.adam.beta1},
                      {"beta2", optimizer.adam.beta2},
                      {"epsilon", optimizer.adam.epsilon}};
  } else {
    j["optimizer"] = {{"kind", "sgd"}};
  }
  j["epochs"] = epochs;
  j["batch_size"] = batch_size;
  j["seed"] = seed;
  j["eval_every"] = eval_every;
  j["divergence_threshold"] = divergence_threshold;
  return j;
}

TrainConfig TrainConfig::from_json(const nlohmann::json &j) {
  require(j.is_object(), ErrorKind::InvalidConfig, "training config must be a JSON object");
  TrainConfig c;
  try {
    for (const auto &[key, value] : j.items()) {
      if (key == "loss") {
        c.loss.kind = parse_loss_kind(value.get<std::string>());
      } else if (key == "beta") {
        c.loss.beta = value.get<double>();
      } else if (key == "clip") {
        c.loss.clip.mode = parse_clip_mode(value.get<std::string>());
      } else if (key == "eps_max") {
        c.loss.clip.eps_max = value.get<double>();
      } else if (key == "alpha_mode") {
        c.loss.weights = WeightMode::parse(value.get<std::string>());
      } else if (key == "learning_rate") {
        c.learning_rate = value.get<double>();
      } else if (key == "optimizer") {
        const std::string kind = value.at("kind").get<std::string>();
        if (kind == "sgd") {
          c.optimizer.kind = OptimizerConfig::Kind::sgd;
        } else if (kind == "adam") {
          c.optimizer.kind = OptimizerConfig::Kind::adam;
          c.optimizer.adam.beta1 = value.value("beta1", c.optimizer.adam.beta1);
          c.optimizer.adam.beta2 = value.value("beta2", c.optimizer.adam.beta2);
          c.optimizer.adam.epsilon = value.value("epsilon", c.optimizer.adam.epsilon);
        } else {
          fail(ErrorKind::InvalidConfig, "unknown optimizer '" + kind + "'");
        }
      } else if (key == "epochs") {
        c.epochs = value.get<int>();
      } else if (key == "batch_size") {
        c.batch_size = value.get<int>();
      } else if (key == "seed") {
        c.seed = value.get<std::uint64_t>();
      } else if (key == "eval_every") {
        c.eval_every = value.get<int>();
      } else if (key == "divergence_threshold") {
        c.divergence_threshold = value.get<double>();
      } else {
        fail(ErrorKind::InvalidConfig, "unknown training key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception &e) {
    fail(ErrorKind::InvalidConfig, std::string("training config: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::json MetricsRecord::to_json(bool with_wall_time) const {
  nlohmann::json j{{"step", step},
                   {"epoch", epoch},
                   {"train_loss", train_loss},
                   {"test_accuracy", test_accuracy},
                   {"test_margin", test_margin},
                   {"tie_rate", tie_rate}};
  if (with_wall_time) {
    j["wall_time"] = wall_time;
  }
  return j;
}

namespace {

void check_scored(const ScoredData &data) {
  require(data.refs != nullptr, ErrorKind::InvalidArgument, "missing reference cache");
  check_cache_matches(*data.refs, data.examples);
}

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

} // namespace

namespace {

EvalResult evaluate_unchecked(const ToyPolicy &policy, const RefLogProbCache &refs,
                              std::span<const PreferenceExample> data, const LossConfig &config) {
  EvalResult out;
  out.count = data.size();
  if (data.empty()) {
    return out;
  }
  std::size_t correct = 0;
  std::size_t ties = 0;
  double margin_sum = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const PreferenceExample &ex = data[i];
    const PolicyPair<double> lp{policy.score_text(ex.prompt, ex.chosen),
                                policy.score_text(ex.prompt, ex.rejected)};
    const EvalRewards r = evaluation_rewards(lp, refs.pair(static_cast<Eigen::Index>(i)), config);
    if (r.chosen > r.rejected) {
      ++correct;
    } else if (r.chosen == r.rejected) {
      ++ties;
    }
    margin_sum += r.chosen - r.rejected;
  }
  const auto n = static_cast<double>(data.size());
  out.accuracy = static_cast<double>(correct) / n;
  out.tie_rate = static_cast<double>(ties) / n;
  out.mean_margin = margin_sum / n;
  return out;
}

} // namespace

EvalResult evaluate(const ToyPolicy &policy, const RefLogProbCache &refs,
                    std::span<const PreferenceExample> data, const LossConfig &config) {
  check_cache_matches(refs, data);
  config.validate();
  return evaluate_unchecked(policy, refs, data, config);
}

double likelihood_accuracy(const ToyPolicy &policy, std::span<const PreferenceExample> data) {
  if (data.empty()) {
    return 0.0;
  }
  std::size_t correct = 0;
  for (const auto &ex : data) {
    if (policy.score_text(ex.prompt, ex.chosen) > policy.score_text(ex.prompt, ex.rejected)) {
      ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

namespace {

std::span<const std::size_t> resolve_indices(std::span<const std::size_t> indices,
                                             std::vector<std::size_t> &storage, std::size_t n) {
  if (!indices.empty()) {
    for (std::size_t i : indices) {
      require(i < n, ErrorKind::InvalidArgument, "batch index out of range");
    }
    return indices;
  }
  storage = all_indices(n);
  require(!storage.empty(), ErrorKind::InvalidArgument, "batch is empty");
  return storage;
}

// The callers below have already checked that the cache matches the data.
double objective_unchecked(const ToyPolicy &policy, const ScoredData &data,
                           const LossConfig &config, std::span<const std::size_t> idx) {
  double total = 0.0;
  for (std::size_t i : idx) {
    const PreferenceExample &ex = data.examples[i];
    const PolicyPair<double> lp{policy.score_text(ex.prompt, ex.chosen),
                                policy.score_text(ex.prompt, ex.rejected)};
    total += pair_loss(lp, data.refs->pair(static_cast<Eigen::Index>(i)), config).loss;
  }
  return total * (1.0 / static_cast<double>(idx.size()));
}

std::pair<double, Eigen::VectorXd> gradient_unchecked(const ToyPolicy &policy,
                                                      const ScoredData &data,
                                                      const LossConfig &config,
                                                      std::span<const std::size_t> idx) {
  ad::Tape tape(policy.parameter_count());
  ad::Var total(0.0);
  for (std::size_t i : idx) {
    const PreferenceExample &ex = data.examples[i];
    const PolicyPair<ad::Var> lp{policy.score_text(tape, ex.prompt, ex.chosen),
                                 policy.score_text(tape, ex.prompt, ex.rejected)};
    total = total + pair_loss(lp, data.refs->pair(static_cast<Eigen::Index>(i)), config).loss;
  }
  const ad::Var mean = total * (1.0 / static_cast<double>(idx.size()));
  Eigen::VectorXd grad = tape.backward(mean);
  return {mean.value(), std::move(grad)};
}

} // namespace

double batch_objective(const ToyPolicy &policy, const ScoredData &data, const LossConfig &config,
                       std::span<const std::size_t> indices) {
  check_scored(data);
  config.validate();
  std::vector<std::size_t> storage;
  return objective_unchecked(policy, data, config,
                             resolve_indices(indices, storage, data.examples.size()));
}

std::pair<double, Eigen::VectorXd>
batch_objective_and_gradient(const ToyPolicy &policy, const ScoredData &data,
                             const LossConfig &config, std::span<const std::size_t> indices) {
  check_scored(data);
  config.validate();
  std::vector<std::size_t> storage;
  return gradient_unchecked(policy, data, config,
                            resolve_indices(indices, storage, data.examples.size()));
}

TrainResult train(ToyPolicy policy, const ScoredData &train_data,
                  const std::optional<ScoredData> &eval, const TrainConfig &config,
                  const StepObserver &observer) {
  config.validate();
  check_scored(train_data);
  if (eval) {
    check_scored(*eval);
  }
  const ScoredData &eval_data = eval ? *eval : train_data;
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  TrainResult result{std::move(policy), {}, std::nullopt};
  ToyPolicy &pi = result.policy;

  auto record = [&](long step, int epoch, double train_loss) {
    const EvalResult e =
        evaluate_unchecked(pi, *eval_data.refs, eval_data.examples, config.loss);
    result.history.push_back(
        {step, epoch, train_loss, e.accuracy, e.mean_margin, e.tie_rate, elapsed()});
  };

  const std::size_t n = train_data.examples.size();
  const std::vector<std::size_t> everything = all_indices(n);
  record(0, 0, n > 0 ? objective_unchecked(pi, train_data, config.loss, everything) : 0.0);
  if (n == 0) {
    return result;
  }

  Optimizer opt(config.optimizer, config.learning_rate, pi.parameter_count());
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order = everything;
  const auto batch = static_cast<std::size_t>(config.batch_size);
  long step = 0;
  long last_recorded = 0;
  double loss_since_record = 0.0;
  long batches_since_record = 0;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t begin = 0; begin < n; begin += batch) {
      const std::size_t end = std::min(n, begin + batch);
      const std::span<const std::size_t> idx(order.data() + begin, end - begin);
      auto [loss, grad] = gradient_unchecked(pi, train_data, config.loss, idx);
      if (!std::isfinite(loss) || loss > config.divergence_threshold) {
        result.divergence = DivergenceReport{step + 1, epoch, loss, config.divergence_threshold};
        record(step + 1, epoch, loss);
        return result;
      }
      opt.step(pi.parameters(), grad);
      ++step;
      loss_since_record += loss;
      ++batches_since_record;
      if (observer) {
        observer(step, pi.parameters());
      }
      if (config.eval_every > 0 && step % config.eval_every == 0) {
        record(step, epoch, loss_since_record / static_cast<double>(batches_since_record));
        last_recorded = step;
        loss_since_record = 0.0;
        batches_since_record = 0;
      }
    }
    if (config.eval_every == 0 && step != last_recorded) {
      record(step, epoch, loss_since_record / static_cast<double>(batches_since_record));
      last_recorded = step;
      loss_since_record = 0.0;
      batches_since_record = 0;
    }
  }
  if (step != last_recorded) {
    record(step, config.epochs, loss_since_record / static_cast<double>(batches_since_record));
  }
  return result;
}

} // namespace mrpo
