// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MRPO Authors

#include "commands.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "manifest.hpp"
#include "mrpo/dataio.hpp"
#include "mrpo/errors.hpp"
#include "mrpo/experiment.hpp"
#include "mrpo/io_util.hpp"
#include "mrpo/oracle.hpp"
#include "mrpo/reference_family.hpp"
#include "mrpo/synthetic.hpp"
#include "mrpo/trainer.hpp"

#ifndef MRPO_VERSION
#define MRPO_VERSION "0.0.0"
#endif

namespace mrpo::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

// Config files: a JSON object, or key=value lines (INI/TOML subset).
// Reads a --config file as JSON (when it starts with '{') or CLI11's key=value
// format. Keys are option names without dashes and apply to the selected
// subcommand; options given on the command line take precedence.
class JsonOrIniConfig : public CLI::ConfigBase {
public:
  explicit JsonOrIniConfig(const CLI::App &app) : app_(app) {}

  std::vector<CLI::ConfigItem> from_config(std::istream &input) const override {
    std::string text((std::istreambuf_iterator<char>(input)), std::istreambuf_iterator<char>());
    std::vector<CLI::ConfigItem> items;
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first == std::string::npos || text[first] != '{') {
      std::istringstream in(text);
      items = CLI::ConfigBase::from_config(in);
    } else {
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(text);
      } catch (const nlohmann::json::exception &e) {
        throw CLI::ConversionError(std::string("config file: ") + e.what());
      }
      for (const auto &[key, value] : j.items()) {
        CLI::ConfigItem item;
        item.name = key;
        auto scalar = [](const nlohmann::json &v) {
          return v.is_string() ? v.get<std::string>() : v.dump();
        };
        if (value.is_array()) {
          for (const auto &v : value) {
            item.inputs.push_back(scalar(v));
          }
        } else {
          item.inputs.push_back(scalar(value));
        }
        items.push_back(std::move(item));
      }
    }
    const auto subs = app_.get_subcommands();
    for (auto &item : items) {
      std::replace(item.name.begin(), item.name.end(), '_', '-');
      if (item.parents.empty() && !subs.empty()) {
        item.parents = {subs.front()->get_name()};
      }
    }
    return items;
  }

private:
  const CLI::App &app_;
};

int exit_code_for(ErrorKind kind) {
  switch (kind) {
  case ErrorKind::Integrity:
    return kIntegrity;
  case ErrorKind::Io:
  case ErrorKind::Parse:
    return kIo;
  default:
    return kUsage;
  }
}

struct Context {
  std::vector<std::string> argv;
  std::ostream &out;
  std::ostream &err;
};

RunManifest start_manifest(const Context &ctx, std::string command, const OutputTarget &target) {
  RunManifest m;
  m.tool_version = MRPO_VERSION;
  m.command = std::move(command);
  m.argv = ctx.argv;
  m.cwd = fs::current_path().string();
  m.out = target.path.string();
  m.out_is_dir = target.is_dir;
  m.started_at = utc_timestamp();
  // A config file feeds option values, so it is hashed like any other input.
  for (std::size_t i = 0; i < ctx.argv.size(); ++i) {
    if (ctx.argv[i] == "--config" && i + 1 < ctx.argv.size()) {
      m.add_input(ctx.argv[i + 1]);
    } else if (ctx.argv[i].starts_with("--config=")) {
      m.add_input(ctx.argv[i].substr(9));
    }
  }
  return m;
}

// Loss flags shared by train and eval.
struct LossFlags {
  std::string loss = "mrpo";
  double beta = 0.1;
  std::string clip = "adaptive";
  double eps_max = 0.1;
  std::string alpha_mode = "arwc";

  void add(CLI::App *app) {
    app->add_option("--loss", loss, "dpo | multi-dpo | mrpo")->capture_default_str();
    app->add_option("--beta", beta, "KL strength")->capture_default_str();
    app->add_option("--clip", clip, "none | fixed | adaptive")->capture_default_str();
    app->add_option("--eps-max", eps_max, "clip radius budget")->capture_default_str();
    app->add_option("--alpha-mode", alpha_mode, "uniform | arwc | fixed=a[,b,...]")
        ->capture_default_str();
  }

  LossConfig resolve() const {
    LossConfig c;
    c.kind = parse_loss_kind(loss);
    c.beta = beta;
    c.clip.mode = parse_clip_mode(clip);
    c.clip.eps_max = eps_max;
    c.weights = WeightMode::parse(alpha_mode);
    c.validate();
    return c;
  }
};

ojson loss_json(const LossConfig &c) {
  return {{"loss", std::string(to_string(c.kind))},
          {"beta", c.beta},
          {"clip", std::string(to_string(c.clip.mode))},
          {"eps_max", c.clip.eps_max},
          {"alpha_mode", c.weights.to_string()}};
}

// --------------------------------------------------------------------------
// synth
// --------------------------------------------------------------------------

struct SynthFlags {
  SyntheticSpec spec;
  std::string out;
};

int cmd_synth(const Context &ctx, const SynthFlags &f) {
  f.spec.validate();
  const OutputTarget target{f.out, true};
  OutputLock lock(target);
  RunManifest m = start_manifest(ctx, "synth", target);
  const SyntheticData data = generate_synthetic(f.spec);
  write_preference_file(target.resolve("train.jsonl"), data.train);
  write_preference_file(target.resolve("test.jsonl"), data.test);
  nlohmann::ordered_json world;
  world["spec"] = f.spec.to_json();
  world["reward"] = f.spec.reward().to_json();
  write_file_atomic(target.resolve("world.json"), world.dump(2) + "\n");

  m.config = f.spec.to_json();
  m.seeds["seed"] = f.spec.seed;
  for (const char *name : {"train.jsonl", "test.jsonl", "world.json"}) {
    m.add_output(target, name);
  }
  write_manifest(target, m);
  ctx.out << fmt::format("synth: {} train / {} test pairs, {} labels flipped -> {}\n",
                         data.train.size(), data.test.size(), data.flipped, f.out);
  return kOk;
}

SyntheticSpec read_world(const fs::path &path) {
  try {
    const auto j = nlohmann::json::parse(read_file(path));
    return SyntheticSpec::from_json(j.contains("spec") ? j.at("spec") : j);
  } catch (const nlohmann::json::exception &e) {
    fail(ErrorKind::Parse, path.string() + ": " + e.what());
  }
}

// --------------------------------------------------------------------------
// make-ref
// --------------------------------------------------------------------------

struct MakeRefFlags {
  std::string world;
  std::uint64_t seed = 1;
  double quality = 0.5;
  PolicyDims dims;
  FamilyTraining training;
  std::string out;
};

int cmd_make_ref(const Context &ctx, const MakeRefFlags &f) {
  require(f.quality >= 0.0 && f.quality <= 1.0, ErrorKind::InvalidConfig,
          "quality must lie in [0, 1]");
  const SyntheticSpec world = read_world(f.world);
  const OutputTarget target{f.out, false};
  OutputLock lock(target);
  RunManifest m = start_manifest(ctx, "make-ref", target);
  m.add_input(f.world);
  const ToyPolicy policy = make_reference_family(world, f.seed, f.quality, f.dims, f.training);
  write_checkpoint(target.path, policy);
  m.config = {{"quality", f.quality},
              {"embedding", f.dims.embedding},
              {"hidden", f.dims.hidden},
              {"context_width", f.dims.context_width},
              {"max_steps", f.training.max_steps},
              {"prompts_per_step", f.training.prompts_per_step},
              {"candidates", f.training.candidates},
              {"learning_rate", f.training.learning_rate},
              {"init_scale", f.training.init_scale}};
  m.seeds["seed"] = f.seed;
  m.add_output(target, ".");
  write_manifest(target, m);
  ctx.out << fmt::format("make-ref: quality {} ({} parameters) -> {}\n", f.quality,
                         policy.parameter_count(), f.out);
  return kOk;
}

// --------------------------------------------------------------------------
// score-refs
// --------------------------------------------------------------------------

struct ScoreFlags {
  std::string data;
  std::vector<std::string> refs;
  std::vector<std::string> ids;
  std::optional<double> offset_reference;
  std::string out;
};

int cmd_score_refs(const Context &ctx, const ScoreFlags &f) {
  require(f.ids.empty() || f.ids.size() == f.refs.size(), ErrorKind::InvalidConfig,
          "--ids needs one id per reference");
  const Dataset data = load_preference_file(f.data);
  std::vector<ToyPolicy> refs;
  std::vector<std::string> ids;
  for (std::size_t k = 0; k < f.refs.size(); ++k) {
    refs.push_back(read_checkpoint(f.refs[k]));
    ids.push_back(f.ids.empty() ? fs::path(f.refs[k]).stem().string() : f.ids[k]);
  }
  const OutputTarget target{f.out, false};
  OutputLock lock(target);
  RunManifest m = start_manifest(ctx, "score-refs", target);
  m.add_input(f.data);
  for (const auto &r : f.refs) {
    m.add_input(r);
  }
  RefLogProbCache cache = score_references(data, refs, ids);
  if (f.offset_reference) {
    cache = with_offset_reference(cache, data, *f.offset_reference,
                                  fmt::format("offset{}", *f.offset_reference));
  }
  write_cache(target.path, cache);
  m.config = {{"reference_ids", cache.reference_ids}, {"eos_appended", cache.eos_appended}};
  if (f.offset_reference) {
    m.config["offset_reference"] = *f.offset_reference;
  }
  m.add_output(target, ".");
  write_manifest(target, m);

  ctx.out << fmt::format("score-refs: {} examples x {} references -> {}\n", cache.example_count(),
                         cache.reference_count(), f.out);
  for (Eigen::Index k = 0; k < cache.reference_count(); ++k) {
    const double n = std::max<double>(1.0, static_cast<double>(cache.example_count()));
    const double chosen = cache.values.col(2 * k).sum() / n;
    const double rejected = cache.values.col(2 * k + 1).sum() / n;
    ctx.out << fmt::format("  {:<16} mean log p chosen {:9.4f}  rejected {:9.4f}\n",
                           cache.reference_ids[static_cast<std::size_t>(k)], chosen, rejected);
  }
  return kOk;
}

// --------------------------------------------------------------------------
// train
// --------------------------------------------------------------------------

struct TrainFlags {
  std::string data;
  std::string cache;
  std::string eval_data;
  std::string eval_cache;
  std::string init;
  LossFlags loss;
  double lr = 1e-3;
  std::string optimizer = "adam";
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int epochs = 3;
  int batch_size = 8;
  std::uint64_t seed = 0;
  int eval_every = 0;
  double divergence_threshold = 10.0;
  bool wall_time = false;
  std::string out;
};

TrainConfig resolve_train(const TrainFlags &f) {
  TrainConfig c;
  c.loss = f.loss.resolve();
  c.learning_rate = f.lr;
  if (f.optimizer == "adam") {
    c.optimizer.kind = OptimizerConfig::Kind::adam;
  } else if (f.optimizer == "sgd") {
    c.optimizer.kind = OptimizerConfig::Kind::sgd;
  } else {
    fail(ErrorKind::InvalidConfig, "unknown optimizer '" + f.optimizer + "'");
  }
  c.optimizer.adam = {f.adam_beta1, f.adam_beta2, f.adam_eps};
  c.epochs = f.epochs;
  c.batch_size = f.batch_size;
  c.seed = f.seed;
  c.eval_every = f.eval_every;
  c.divergence_threshold = f.divergence_threshold;
  c.validate();
  return c;
}

// Policy initialization should be reference 0; a mismatch is only reported.
void check_initializing_reference(const Context &ctx, const ToyPolicy &policy,
                                  const Dataset &data, const RefLogProbCache &cache) {
  if (data.empty()) {
    return;
  }
  const double lp = policy.score_text(data.front().prompt, data.front().chosen);
  if (std::abs(lp - cache.values(0, 0)) > 1e-9 * std::max(1.0, std::abs(lp))) {
    ctx.err << "warning: the initial policy does not reproduce reference 0's cached scores\n";
  }
}

int cmd_train(const Context &ctx, const TrainFlags &f) {
  const TrainConfig config = resolve_train(f);
  require(f.eval_data.empty() == f.eval_cache.empty(), ErrorKind::InvalidConfig,
          "--eval-data and --eval-cache go together");
  const Dataset data = load_preference_file(f.data);
  const RefLogProbCache cache = read_cache(f.cache);
  check_cache_matches(cache, data);
  Dataset eval_data;
  RefLogProbCache eval_cache;
  std::optional<ScoredData> eval;
  if (!f.eval_data.empty()) {
    eval_data = load_preference_file(f.eval_data);
    eval_cache = read_cache(f.eval_cache);
    check_cache_matches(eval_cache, eval_data);
    require(eval_cache.reference_ids == cache.reference_ids, ErrorKind::Integrity,
            "training and evaluation caches list different references");
    eval = ScoredData{eval_data, &eval_cache};
  }
  ToyPolicy policy = read_checkpoint(f.init);
  check_initializing_reference(ctx, policy, data, cache);

  const OutputTarget target{f.out, true};
  OutputLock lock(target);
  RunManifest m = start_manifest(ctx, "train", target);
  for (const auto &p : {f.data, f.cache, f.eval_data, f.eval_cache, f.init}) {
    if (!p.empty()) {
      m.add_input(p);
    }
  }
  const TrainResult result = train(std::move(policy), ScoredData{data, &cache}, eval, config);

  std::string log;
  for (const auto &r : result.history) {
    log += r.to_json(f.wall_time).dump();
    log += '\n';
  }
  write_file_atomic(target.resolve("metrics.jsonl"), log);
  write_checkpoint(target.resolve("policy.ckpt"), result.policy);
  m.config = config.to_json();
  m.config["wall_time"] = f.wall_time;
  m.seeds["seed"] = config.seed;
  m.add_output(target, "metrics.jsonl");
  m.add_output(target, "policy.ckpt");
  write_manifest(target, m);

  const MetricsRecord &last = result.history.back();
  if (result.divergence) {
    ctx.err << fmt::format("train: diverged at step {} (epoch {}): loss {:.4f} > {}\n",
                           result.divergence->step, result.divergence->epoch,
                           result.divergence->loss, result.divergence->threshold);
    return kDiverged;
  }
  ctx.out << fmt::format("train: {} steps, loss {:.4f}, accuracy {:.4f}, margin {:.4f} -> {}\n",
                         last.step, last.train_loss, last.test_accuracy, last.test_margin, f.out);
  return kOk;
}

// --------------------------------------------------------------------------
// eval
// --------------------------------------------------------------------------

struct EvalFlags {
  std::string policy;
  std::string data;
  std::string cache;
  LossFlags loss;
  std::string out;
};

int cmd_eval(const Context &ctx, const EvalFlags &f) {
  const LossConfig config = f.loss.resolve();
  const Dataset data = load_preference_file(f.data);
  const RefLogProbCache cache = read_cache(f.cache);
  const ToyPolicy policy = read_checkpoint(f.policy);
  const EvalResult r = evaluate(policy, cache, data, config);
  const double likelihood = likelihood_accuracy(policy, data);
  ojson report{{"count", r.count},
               {"accuracy", r.accuracy},
               {"margin", r.mean_margin},
               {"tie_rate", r.tie_rate},
               {"likelihood_accuracy", likelihood}};
  ctx.out << fmt::format("eval: {} pairs, accuracy {:.4f}, margin {:.4f}, ties {:.4f}, "
                         "likelihood accuracy {:.4f}\n",
                         r.count, r.accuracy, r.mean_margin, r.tie_rate, likelihood);
  if (!f.out.empty()) {
    const OutputTarget target{f.out, true};
    OutputLock lock(target);
    RunManifest m = start_manifest(ctx, "eval", target);
    for (const auto &p : {f.policy, f.data, f.cache}) {
      m.add_input(p);
    }
    write_file_atomic(target.resolve("eval.json"), report.dump(2) + "\n");
    m.config = loss_json(config);
    m.add_output(target, "eval.json");
    write_manifest(target, m);
  }
  return kOk;
}

// --------------------------------------------------------------------------
// verify
// --------------------------------------------------------------------------

struct VerifyFlags {
  std::string suite = "all";
  long trials = 1000;
  std::uint64_t seed = 1;
};

int cmd_verify(const Context &ctx, const VerifyFlags &f) {
  require(f.trials >= 1, ErrorKind::InvalidArgument, "--trials must be >= 1");
  const bool all = f.suite == "all";
  std::vector<oracle::SuiteReport> reports;
  if (all || f.suite == "prop1") {
    reports.push_back(oracle::verify_prop1(f.seed, f.trials));
  }
  if (all || f.suite == "jensen") {
    reports.push_back(oracle::verify_jensen(f.seed, f.trials));
  }
  if (all || f.suite == "prop2") {
    for (auto &r : oracle::verify_prop2(f.seed, f.trials)) {
      reports.push_back(std::move(r));
    }
  }
  if (all || f.suite == "gradcheck") {
    for (auto &r : oracle::verify_gradients(f.seed)) {
      reports.push_back(std::move(r));
    }
  }
  bool ok = true;
  for (const auto &r : reports) {
    ok = ok && r.passed();
    ctx.out << fmt::format("{:<22} trials {:>6}  failures {:>6}  strict {:>6}  max_dev {:.3e}  {}\n",
                           r.name, r.trials, r.failures, r.strict, r.max_deviation,
                           r.passed() ? "PASS" : "FAIL");
  }
  return ok ? kOk : kVerificationFailed;
}

// --------------------------------------------------------------------------
// experiment
// --------------------------------------------------------------------------

struct ExperimentFlags {
  std::string spec;
  std::vector<std::uint64_t> seeds;
  std::string out;
};

int cmd_experiment(const Context &ctx, const ExperimentFlags &f) {
  ExperimentSpec spec = ExperimentSpec::weak_base_strong_reference();
  if (!f.spec.empty()) {
    try {
      spec = ExperimentSpec::from_json(nlohmann::json::parse(read_file(f.spec)));
    } catch (const nlohmann::json::exception &e) {
      fail(ErrorKind::Parse, f.spec + ": " + e.what());
    }
  }
  if (!f.seeds.empty()) {
    spec.seeds = f.seeds;
  }
  spec.validate();
  const OutputTarget target{f.out, true};
  OutputLock lock(target);
  RunManifest m = start_manifest(ctx, "experiment", target);
  if (!f.spec.empty()) {
    m.add_input(f.spec);
  }
  const ExperimentReport report = run_experiment(spec, [&](const ExperimentCell &c) {
    ctx.out << fmt::format("  {:<18} seed {:>3}  accuracy {:.4f}  margin {:.4f}{}\n", c.method,
                           c.seed, c.accuracy, c.margin, c.diverged ? "  (diverged)" : "");
    ctx.out.flush();
  });
  write_file_atomic(target.resolve("spec.json"), spec.to_json().dump(2) + "\n");
  write_file_atomic(target.resolve("report.txt"), report.to_text());
  write_file_atomic(target.resolve("report.csv"), report.to_csv());
  write_file_atomic(target.resolve("report.json"), report.to_json().dump(2) + "\n");
  m.config = spec.to_json();
  m.seeds["seeds"] = spec.seeds;
  for (const char *name : {"spec.json", "report.txt", "report.csv", "report.json"}) {
    m.add_output(target, name);
  }
  write_manifest(target, m);
  ctx.out << report.to_text();
  return kOk;
}

// --------------------------------------------------------------------------
// replay
// --------------------------------------------------------------------------

struct ReplayFlags {
  std::string manifest;
  std::string out;
};

// Replaces the value of --out in a recorded command line.
std::vector<std::string> with_out(std::vector<std::string> argv, const std::string &out) {
  for (std::size_t i = 0; i < argv.size(); ++i) {
    if (argv[i] == "--out" && i + 1 < argv.size()) {
      argv[i + 1] = out;
      return argv;
    }
    if (argv[i].starts_with("--out=")) {
      argv[i] = "--out=" + out;
      return argv;
    }
  }
  argv.push_back("--out");
  argv.push_back(out);
  return argv;
}

int cmd_replay(const Context &ctx, const ReplayFlags &f) {
  const RunManifest m = read_manifest(f.manifest);
  require(!m.argv.empty() && m.argv.front() != "replay", ErrorKind::InvalidArgument,
          "manifest does not record a replayable command");
  std::vector<std::string> argv = m.argv;
  fs::path out = m.out;
  if (!f.out.empty()) {
    out = fs::absolute(f.out);
    argv = with_out(argv, out.string());
  }

  struct CwdGuard {
    fs::path saved = fs::current_path();
    ~CwdGuard() {
      std::error_code ec;
      fs::current_path(saved, ec);
    }
  } guard;
  fs::current_path(m.cwd);
  if (out.is_relative()) {
    out = fs::path(m.cwd) / out;
  }

  for (const auto &in : m.inputs) {
    require(fs::exists(in.path), ErrorKind::Io, "replay input missing: " + in.path);
    require(sha256_file(in.path) == in.sha256, ErrorKind::Integrity,
            "replay input changed since the recorded run: " + in.path);
  }
  const int code = run_cli(argv, ctx.out, ctx.err);
  if (code != kOk && code != kDiverged) {
    return code;
  }
  const OutputTarget target{out, m.out_is_dir};
  std::size_t mismatched = 0;
  for (const auto &o : m.outputs) {
    const fs::path p = target.resolve(o.path);
    const bool same = fs::exists(p) && sha256_file(p) == o.sha256;
    if (!same) {
      ++mismatched;
      ctx.err << "replay: output differs: " << p.string() << "\n";
    }
  }
  if (mismatched > 0) {
    ctx.err << fmt::format("replay: {} of {} outputs differ\n", mismatched, m.outputs.size());
    return kIntegrity;
  }
  ctx.out << fmt::format("replay: {} outputs byte-identical\n", m.outputs.size());
  return code;
}

CLI::App *subcommand(CLI::App &app, const char *name, const char *help) {
  CLI::App *sub = app.add_subcommand(name, help);
  sub->fallthrough();
  return sub;
}

} // namespace

int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
  CLI::App app{"Multi-reference preference optimization toolkit", "mrpo"};
  app.require_subcommand(1);
  app.set_version_flag("--version", MRPO_VERSION);
  app.config_formatter(std::make_shared<JsonOrIniConfig>(app));
  app.set_config("--config", "", "key=value or JSON file for the subcommand's options; "
                                 "explicit flags win");

  const Context ctx{args, out, err};
  std::function<int()> action;

  SynthFlags synth;
  {
    CLI::App *s = subcommand(app, "synth", "generate a synthetic planted-reward dataset");
    s->add_option("--seed", synth.spec.seed)->capture_default_str();
    s->add_option("--pairs", synth.spec.pairs)->capture_default_str();
    s->add_option("--noise", synth.spec.noise, "label flip rate in [0, 0.5)")
        ->capture_default_str();
    s->add_option("--test-fraction", synth.spec.test_fraction)->capture_default_str();
    s->add_option("--alphabet", synth.spec.alphabet)->capture_default_str();
    s->add_option("--prompt-min", synth.spec.prompt_min_len)->capture_default_str();
    s->add_option("--prompt-max", synth.spec.prompt_max_len)->capture_default_str();
    s->add_option("--output-min", synth.spec.output_min_len)->capture_default_str();
    s->add_option("--output-max", synth.spec.output_max_len)->capture_default_str();
    s->add_option("--out", synth.out, "output directory")->required();
    s->callback([&] { action = [&] { return cmd_synth(ctx, synth); }; });
  }

  MakeRefFlags make_ref;
  {
    CLI::App *s = subcommand(app, "make-ref", "train a reference policy of a given quality");
    s->add_option("--world", make_ref.world, "world.json written by synth")->required();
    s->add_option("--seed", make_ref.seed)->capture_default_str();
    s->add_option("--quality", make_ref.quality, "in [0, 1]")->capture_default_str();
    s->add_option("--embedding", make_ref.dims.embedding)->capture_default_str();
    s->add_option("--hidden", make_ref.dims.hidden)->capture_default_str();
    s->add_option("--context", make_ref.dims.context_width)->capture_default_str();
    s->add_option("--max-steps", make_ref.training.max_steps)->capture_default_str();
    s->add_option("--prompts-per-step", make_ref.training.prompts_per_step)
        ->capture_default_str();
    s->add_option("--candidates", make_ref.training.candidates)->capture_default_str();
    s->add_option("--lr", make_ref.training.learning_rate)->capture_default_str();
    s->add_option("--init-scale", make_ref.training.init_scale)->capture_default_str();
    s->add_option("--out", make_ref.out, "checkpoint path")->required();
    s->callback([&] { action = [&] { return cmd_make_ref(ctx, make_ref); }; });
  }

  ScoreFlags score;
  {
    CLI::App *s = subcommand(app, "score-refs", "precompute reference log-probabilities");
    s->add_option("--data", score.data, "preference JSONL")->required();
    s->add_option("--refs", score.refs, "checkpoints; the first initializes the policy")
        ->required();
    s->add_option("--ids", score.ids, "reference ids (default: checkpoint file stems)");
    s->add_option("--offset-reference", score.offset_reference,
                  "append a copy of reference 0 shifted by this per-token log-prob on "
                  "rejected outputs");
    s->add_option("--out", score.out, "cache path")->required();
    s->callback([&] { action = [&] { return cmd_score_refs(ctx, score); }; });
  }

  TrainFlags train_flags;
  {
    CLI::App *s = subcommand(app, "train", "train a policy on preference data");
    s->add_option("--data", train_flags.data)->required();
    s->add_option("--cache", train_flags.cache)->required();
    s->add_option("--eval-data", train_flags.eval_data);
    s->add_option("--eval-cache", train_flags.eval_cache);
    s->add_option("--init", train_flags.init, "initial checkpoint (reference 0)")->required();
    train_flags.loss.add(s);
    s->add_option("--lr", train_flags.lr)->capture_default_str();
    s->add_option("--optimizer", train_flags.optimizer, "adam | sgd")->capture_default_str();
    s->add_option("--adam-beta1", train_flags.adam_beta1)->capture_default_str();
    s->add_option("--adam-beta2", train_flags.adam_beta2)->capture_default_str();
    s->add_option("--adam-eps", train_flags.adam_eps)->capture_default_str();
    s->add_option("--epochs", train_flags.epochs)->capture_default_str();
    s->add_option("--batch-size", train_flags.batch_size)->capture_default_str();
    s->add_option("--seed", train_flags.seed)->capture_default_str();
    s->add_option("--eval-every", train_flags.eval_every, "steps; 0 = once per epoch")
        ->capture_default_str();
    s->add_option("--divergence-threshold", train_flags.divergence_threshold)
        ->capture_default_str();
    s->add_flag("--wall-time", train_flags.wall_time,
                "record wall time in metrics (makes the log non-reproducible)");
    s->add_option("--out", train_flags.out, "output directory")->required();
    s->callback([&] { action = [&] { return cmd_train(ctx, train_flags); }; });
  }

  EvalFlags eval_flags;
  {
    CLI::App *s = subcommand(app, "eval", "preference accuracy and reward margin");
    s->add_option("--policy", eval_flags.policy)->required();
    s->add_option("--data", eval_flags.data)->required();
    s->add_option("--cache", eval_flags.cache)->required();
    eval_flags.loss.add(s);
    s->add_option("--out", eval_flags.out, "optional output directory");
    s->callback([&] { action = [&] { return cmd_eval(ctx, eval_flags); }; });
  }

  VerifyFlags verify;
  {
    CLI::App *s = subcommand(app, "verify", "run the numerical verification suites");
    s->add_option("--suite", verify.suite)
        ->check(CLI::IsMember({"prop1", "prop2", "jensen", "gradcheck", "all"}))
        ->capture_default_str();
    s->add_option("--trials", verify.trials)->check(CLI::PositiveNumber)->capture_default_str();
    s->add_option("--seed", verify.seed)->capture_default_str();
    s->callback([&] { action = [&] { return cmd_verify(ctx, verify); }; });
  }

  ExperimentFlags experiment;
  {
    CLI::App *s = subcommand(app, "experiment", "compare methods across seeds");
    s->add_option("--spec", experiment.spec,
                  "experiment JSON (default: weak base with a strong second reference)");
    s->add_option("--seeds", experiment.seeds, "override the seed list");
    s->add_option("--out", experiment.out, "output directory")->required();
    s->callback([&] { action = [&] { return cmd_experiment(ctx, experiment); }; });
  }

  ReplayFlags replay;
  {
    CLI::App *s = app.add_subcommand("replay", "re-run a command from its manifest");
    s->add_option("--manifest", replay.manifest)->required();
    s->add_option("--out", replay.out, "write to this location instead of the recorded one");
    s->callback([&] { action = [&] { return cmd_replay(ctx, replay); }; });
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    return action();
  } catch (const Error &e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const fs::filesystem_error &e) {
    err << "error: " << e.what() << "\n";
    return kIo;
  } catch (const std::exception &e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
}

} // namespace mrpo::cli
