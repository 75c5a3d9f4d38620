// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MRPO Authors

#include "mrpo/experiment.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "mrpo/dataio.hpp"
#include "mrpo/errors.hpp"

namespace mrpo {

namespace {

std::uint64_t mix(std::uint64_t x) {
  // splitmix64 finalizer
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

double mean(const std::vector<double> &v) {
  if (v.empty()) {
    return 0.0;
  }
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

MethodSpec method(std::string name, LossKind kind, ClipMode clip, WeightMode weights) {
  LossConfig loss;
  loss.kind = kind;
  loss.clip.mode = clip;
  loss.weights = std::move(weights);
  return {std::move(name), loss};
}

nlohmann::json loss_to_json(const LossConfig &loss) {
  return {{"loss", std::string(to_string(loss.kind))},
          {"beta", loss.beta},
          {"clip", std::string(to_string(loss.clip.mode))},
          {"eps_max", loss.clip.eps_max},
          {"alpha_mode", loss.weights.to_string()}};
}

} // namespace

double sample_std(const std::vector<double> &values) {
  if (values.size() < 2) {
    return 0.0;
  }
  const double m = mean(values);
  double ss = 0.0;
  for (double v : values) {
    ss += (v - m) * (v - m);
  }
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

double cohens_d(const std::vector<double> &a, const std::vector<double> &b) {
  const double diff = mean(a) - mean(b);
  const double sa = sample_std(a);
  const double sb = sample_std(b);
  const double pooled = std::sqrt((sa * sa + sb * sb) / 2.0);
  if (pooled == 0.0) {
    if (diff == 0.0) {
      return 0.0;
    }
    return diff > 0.0 ? std::numeric_limits<double>::infinity()
                      : -std::numeric_limits<double>::infinity();
  }
  return diff / pooled;
}

void ExperimentSpec::validate() const {
  world.validate();
  require(!methods.empty(), ErrorKind::InvalidConfig, "experiment needs at least one method");
  require(!seeds.empty(), ErrorKind::InvalidConfig, "experiment needs at least one seed");
  require(base_quality >= 0.0 && base_quality <= 1.0, ErrorKind::InvalidConfig,
          "base quality must lie in [0, 1]");
  for (double q : reference_qualities) {
    require(q >= 0.0 && q <= 1.0, ErrorKind::InvalidConfig,
            "reference quality must lie in [0, 1]");
  }
  for (std::size_t i = 0; i < methods.size(); ++i) {
    methods[i].loss.validate();
    require(!methods[i].name.empty(), ErrorKind::InvalidConfig, "method name is empty");
    for (std::size_t j = 0; j < i; ++j) {
      require(methods[i].name != methods[j].name, ErrorKind::InvalidConfig,
              "duplicate method name '" + methods[i].name + "'");
    }
  }
  train.validate();
}

nlohmann::json ExperimentSpec::to_json() const {
  nlohmann::json j;
  j["world"] = world.to_json();
  j["base_quality"] = base_quality;
  j["reference_qualities"] = reference_qualities;
  j["seeds"] = seeds;
  nlohmann::json ms = nlohmann::json::array();
  for (const auto &m : methods) {
    nlohmann::json e = loss_to_json(m.loss);
    e["name"] = m.name;
    ms.push_back(std::move(e));
  }
  j["methods"] = std::move(ms);
  nlohmann::json t = train.to_json();
  for (const char *key : {"loss", "beta", "clip", "eps_max", "alpha_mode"}) {
    t.erase(key);
  }
  j["train"] = std::move(t);
  j["dims"] = {{"embedding", dims.embedding},
               {"hidden", dims.hidden},
               {"context_width", dims.context_width}};
  j["family"] = {{"max_steps", family.max_steps},
                 {"prompts_per_step", family.prompts_per_step},
                 {"candidates", family.candidates},
                 {"learning_rate", family.learning_rate},
                 {"init_scale", family.init_scale}};
  return j;
}

ExperimentSpec ExperimentSpec::from_json(const nlohmann::json &j) {
  require(j.is_object(), ErrorKind::InvalidConfig, "experiment spec must be a JSON object");
  ExperimentSpec s;
  try {
    if (j.contains("world")) {
      nlohmann::json w = s.world.to_json();
      w.update(j.at("world"));
      s.world = SyntheticSpec::from_json(w);
    }
    s.base_quality = j.value("base_quality", s.base_quality);
    s.reference_qualities = j.value("reference_qualities", s.reference_qualities);
    s.seeds = j.value("seeds", s.seeds);
    if (j.contains("train")) {
      s.train = TrainConfig::from_json(j.at("train"));
    }
    for (const auto &m : j.at("methods")) {
      nlohmann::json cfg = m;
      const std::string name = cfg.at("name").get<std::string>();
      cfg.erase("name");
      s.methods.push_back({name, TrainConfig::from_json(cfg).loss});
    }
    if (j.contains("dims")) {
      const auto &d = j.at("dims");
      s.dims.embedding = d.value("embedding", s.dims.embedding);
      s.dims.hidden = d.value("hidden", s.dims.hidden);
      s.dims.context_width = d.value("context_width", s.dims.context_width);
    }
    if (j.contains("family")) {
      const auto &f = j.at("family");
      s.family.max_steps = f.value("max_steps", s.family.max_steps);
      s.family.prompts_per_step = f.value("prompts_per_step", s.family.prompts_per_step);
      s.family.candidates = f.value("candidates", s.family.candidates);
      s.family.learning_rate = f.value("learning_rate", s.family.learning_rate);
      s.family.init_scale = f.value("init_scale", s.family.init_scale);
    }
  } catch (const nlohmann::json::exception &e) {
    fail(ErrorKind::InvalidConfig, std::string("experiment spec: ") + e.what());
  }
  s.validate();
  return s;
}

ExperimentSpec ExperimentSpec::weak_base_strong_reference() {
  ExperimentSpec s;
  s.world.pairs = 5500;
  s.world.test_fraction = 1.0 / 11.0;
  s.world.noise = 0.1;
  s.base_quality = 0.2;
  s.reference_qualities = {0.9};
  s.seeds = {1, 2, 3, 4, 5};
  s.methods = {
      method("dpo", LossKind::dpo, ClipMode::adaptive, WeightMode::arwc()),
      method("mrpo", LossKind::mrpo, ClipMode::adaptive, WeightMode::arwc()),
      method("mrpo-fixed-eps", LossKind::mrpo, ClipMode::fixed, WeightMode::arwc()),
      method("mrpo-alpha-0.1", LossKind::mrpo, ClipMode::adaptive,
             WeightMode::fixed_weights({0.1})),
      method("mrpo-alpha-0.5", LossKind::mrpo, ClipMode::adaptive,
             WeightMode::fixed_weights({0.5})),
      method("mrpo-alpha-0.9", LossKind::mrpo, ClipMode::adaptive,
             WeightMode::fixed_weights({0.9})),
  };
  return s;
}

const MethodSummary &ExperimentReport::summary(const std::string &method) const {
  for (const auto &s : summaries) {
    if (s.method == method) {
      return s;
    }
  }
  fail(ErrorKind::InvalidArgument, "no method named '" + method + "' in the report");
}

double ExperimentReport::cohens_d(const std::string &a, const std::string &b) const {
  summary(a);
  summary(b);
  std::vector<double> xa;
  std::vector<double> xb;
  for (const auto &c : cells) {
    if (c.method == a) {
      xa.push_back(c.accuracy);
    }
    if (c.method == b) {
      xb.push_back(c.accuracy);
    }
  }
  return mrpo::cohens_d(xa, xb);
}

std::string ExperimentReport::to_text() const {
  std::string out = fmt::format("{:<18} {:>6} {:>9} {:>9} {:>9} {:>9} {:>8}\n", "method", "seed",
                                "accuracy", "margin", "loss0", "lossN", "status");
  for (const auto &c : cells) {
    out += fmt::format("{:<18} {:>6} {:>9.4f} {:>9.4f} {:>9.4f} {:>9.4f} {:>8}\n", c.method,
                       c.seed, c.accuracy, c.margin, c.initial_train_loss, c.final_train_loss,
                       c.diverged ? "diverged" : "ok");
  }
  out += fmt::format("\n{:<18} {:>4} {:>17} {:>17} {:>8}\n", "method", "runs",
                     "accuracy (sd)", "margin (sd)", "diverged");
  for (const auto &s : summaries) {
    out += fmt::format("{:<18} {:>4} {:>8.4f} ({:.4f}) {:>8.4f} ({:.4f}) {:>8}\n", s.method,
                       s.runs, s.mean_accuracy, s.std_accuracy, s.mean_margin, s.std_margin,
                       s.diverged);
  }
  out += fmt::format("\nbase policy likelihood accuracy: {:.4f}\n", mean_base_accuracy);
  if (summaries.size() > 1) {
    out += "\nCohen's d on accuracy vs " + summaries.front().method + ":\n";
    for (std::size_t i = 1; i < summaries.size(); ++i) {
      out += fmt::format("  {:<18} {:+.3f}\n", summaries[i].method,
                         cohens_d(summaries[i].method, summaries.front().method));
    }
  }
  return out;
}

std::string ExperimentReport::to_csv() const {
  std::string out = "method,seed,accuracy,margin,tie_rate,initial_train_loss,final_train_loss,"
                    "base_accuracy,diverged\n";
  for (const auto &c : cells) {
    out += fmt::format("{},{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{}\n", c.method,
                       c.seed, c.accuracy, c.margin, c.tie_rate, c.initial_train_loss,
                       c.final_train_loss, c.base_accuracy, c.diverged ? 1 : 0);
  }
  for (const auto &s : summaries) {
    out += fmt::format("{},mean,{:.17g},{:.17g},,,,,{}\n", s.method, s.mean_accuracy,
                       s.mean_margin, s.diverged);
    out += fmt::format("{},sd,{:.17g},{:.17g},,,,,\n", s.method, s.std_accuracy, s.std_margin);
  }
  return out;
}

nlohmann::json ExperimentReport::to_json() const {
  nlohmann::json j;
  j["mean_base_accuracy"] = mean_base_accuracy;
  for (const auto &s : summaries) {
    j["summaries"].push_back({{"method", s.method},
                              {"runs", s.runs},
                              {"mean_accuracy", s.mean_accuracy},
                              {"std_accuracy", s.std_accuracy},
                              {"mean_margin", s.mean_margin},
                              {"std_margin", s.std_margin},
                              {"diverged", s.diverged}});
  }
  for (const auto &c : cells) {
    j["cells"].push_back({{"method", c.method},
                          {"seed", c.seed},
                          {"accuracy", c.accuracy},
                          {"margin", c.margin},
                          {"tie_rate", c.tie_rate},
                          {"initial_train_loss", c.initial_train_loss},
                          {"final_train_loss", c.final_train_loss},
                          {"base_accuracy", c.base_accuracy},
                          {"diverged", c.diverged}});
  }
  return j;
}

ExperimentReport run_experiment(const ExperimentSpec &spec, const ProgressFn &progress) {
  spec.validate();
  ExperimentReport report;
  std::vector<double> base_accuracies;
  for (std::uint64_t seed : spec.seeds) {
    SyntheticSpec world = spec.world;
    world.seed = mix(spec.world.seed ^ mix(seed));
    const SyntheticData data = generate_synthetic(world);

    std::vector<ToyPolicy> refs;
    std::vector<std::string> ids;
    refs.push_back(
        make_reference_family(world, mix(seed * 16 + 1), spec.base_quality, spec.dims, spec.family));
    ids.push_back(fmt::format("base-q{}", spec.base_quality));
    for (std::size_t k = 0; k < spec.reference_qualities.size(); ++k) {
      refs.push_back(make_reference_family(world, mix(seed * 16 + 2 + k),
                                           spec.reference_qualities[k], spec.dims, spec.family));
      ids.push_back(fmt::format("ref{}-q{}", k + 1, spec.reference_qualities[k]));
    }
    const RefLogProbCache train_cache = score_references(data.train, refs, ids);
    const RefLogProbCache test_cache = score_references(data.test, refs, ids);
    const double base_accuracy = likelihood_accuracy(refs.front(), data.test);
    base_accuracies.push_back(base_accuracy);

    const ScoredData train_data{data.train, &train_cache};
    const std::optional<ScoredData> test_data =
        data.test.empty() ? std::nullopt : std::optional<ScoredData>(ScoredData{data.test, &test_cache});
    for (const auto &m : spec.methods) {
      TrainConfig config = spec.train;
      config.loss = m.loss;
      config.seed = mix(seed ^ 0x5EED);
      const TrainResult run = train(clone_policy(refs.front()), train_data, test_data, config);
      ExperimentCell cell;
      cell.method = m.name;
      cell.seed = seed;
      cell.accuracy = run.history.back().test_accuracy;
      cell.margin = run.history.back().test_margin;
      cell.tie_rate = run.history.back().tie_rate;
      cell.initial_train_loss = run.history.front().train_loss;
      cell.final_train_loss = run.history.back().train_loss;
      cell.base_accuracy = base_accuracy;
      cell.diverged = run.divergence.has_value();
      if (progress) {
        progress(cell);
      }
      report.cells.push_back(std::move(cell));
    }
  }
  report.mean_base_accuracy = mean(base_accuracies);

  for (const auto &m : spec.methods) {
    std::vector<double> acc;
    std::vector<double> margin;
    MethodSummary s;
    s.method = m.name;
    for (const auto &c : report.cells) {
      if (c.method == m.name) {
        acc.push_back(c.accuracy);
        margin.push_back(c.margin);
        s.diverged += c.diverged ? 1 : 0;
      }
    }
    s.runs = acc.size();
    s.mean_accuracy = mean(acc);
    s.std_accuracy = sample_std(acc);
    s.mean_margin = mean(margin);
    s.std_margin = sample_std(margin);
    report.summaries.push_back(std::move(s));
  }
  return report;
}

} // namespace mrpo
