// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MRPO Authors

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "cli_runner.hpp"
#include "mrpo/io_util.hpp"

using namespace mrpo::testing;
namespace fs = std::filesystem;

namespace {

std::size_t line_count(const fs::path &p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) {
    n += line.empty() ? 0 : 1;
  }
  return n;
}

// synth -> make-ref x2 -> score-refs in `dir`.
void build_fixture(const fs::path &dir) {
  REQUIRE(run_mrpo(dir, "synth --seed 3 --pairs 100 --test-fraction 0.1 --out data").exit_code ==
          0);
  const std::string dims = " --embedding 6 --hidden 12 --context 3 --max-steps 20";
  REQUIRE(run_mrpo(dir, "make-ref --world data/world.json --seed 1 --quality 0.2" + dims +
                            " --out base.ckpt")
              .exit_code == 0);
  REQUIRE(run_mrpo(dir, "make-ref --world data/world.json --seed 2 --quality 0.9" + dims +
                            " --out strong.ckpt")
              .exit_code == 0);
  REQUIRE(run_mrpo(dir, "score-refs --data data/train.jsonl --refs base.ckpt strong.ckpt "
                        "--out train.cache")
              .exit_code == 0);
}

} // namespace

TEST_CASE("synth writes the requested split") {
  const fs::path dir = scratch_dir("cli_synth");
  const auto r = run_mrpo(dir, "synth --seed 5 --pairs 100 --test-fraction 0.1 --out d");
  INFO(r.output);
  REQUIRE(r.exit_code == 0);
  CHECK(line_count(dir / "d/train.jsonl") == 90);
  CHECK(line_count(dir / "d/test.jsonl") == 10);
  CHECK(fs::exists(dir / "d/world.json"));
  CHECK(fs::exists(dir / "d/manifest.json"));
  CHECK_FALSE(fs::exists(dir / "d/.lock"));
  fs::remove_all(dir);
}

TEST_CASE("usage errors exit with 1") {
  const fs::path dir = scratch_dir("cli_usage");
  CHECK(run_mrpo(dir, "synth --noise 0.6 --out d").exit_code == 1);
  CHECK(run_mrpo(dir, "verify --suite prop1 --trials 0").exit_code == 1);
  CHECK(run_mrpo(dir, "verify --suite nothing").exit_code == 1);
  CHECK(run_mrpo(dir, "").exit_code == 1);
  CHECK(run_mrpo(dir, "train --bogus").exit_code == 1);
  fs::remove_all(dir);
}

TEST_CASE("missing inputs exit with 2") {
  const fs::path dir = scratch_dir("cli_io");
  CHECK(run_mrpo(dir, "score-refs --data nope.jsonl --refs a.ckpt --out c").exit_code == 2);
  fs::remove_all(dir);
}

TEST_CASE("help and version") {
  const fs::path dir = scratch_dir("cli_help");
  const auto h = run_mrpo(dir, "--help");
  CHECK(h.exit_code == 0);
  CHECK(h.output.find("experiment") != std::string::npos);
  const auto v = run_mrpo(dir, "--version");
  CHECK(v.exit_code == 0);
  fs::remove_all(dir);
}

TEST_CASE("verify prints one line per suite") {
  const fs::path dir = scratch_dir("cli_verify");
  const auto r = run_mrpo(dir, "verify --suite prop1 --trials 50");
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("prop1") != std::string::npos);
  CHECK(r.output.find("PASS") != std::string::npos);
  CHECK(r.output.find("FAIL") == std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("train, eval and replay") {
  const fs::path dir = scratch_dir("cli_train");
  build_fixture(dir);

  const auto t = run_mrpo(dir, "train --data data/train.jsonl --cache train.cache --init "
                               "base.ckpt --epochs 2 --lr 0.01 --out run");
  INFO(t.output);
  REQUIRE(t.exit_code == 0);
  CHECK(line_count(dir / "run/metrics.jsonl") == 3);
  CHECK(fs::exists(dir / "run/policy.ckpt"));

  std::string head;
  std::getline(std::ifstream(dir / "run/metrics.jsonl"), head);
  const auto first = nlohmann::json::parse(head);
  CHECK(first["step"] == 0);
  CHECK_FALSE(first.contains("wall_time"));

  const auto e = run_mrpo(dir, "eval --policy run/policy.ckpt --data data/train.jsonl --cache "
                               "train.cache --out ev");
  CHECK(e.exit_code == 0);
  CHECK(fs::exists(dir / "ev/eval.json"));

  const auto r = run_mrpo(dir, "replay --manifest run/manifest.json --out run2");
  INFO(r.output);
  CHECK(r.exit_code == 0);
  CHECK(mrpo::read_file(dir / "run/metrics.jsonl") == mrpo::read_file(dir / "run2/metrics.jsonl"));
  CHECK(mrpo::read_file(dir / "run/policy.ckpt") == mrpo::read_file(dir / "run2/policy.ckpt"));

  // Writing into a locked output is refused.
  std::ofstream(dir / "run/.lock") << "";
  CHECK(run_mrpo(dir, "train --data data/train.jsonl --cache train.cache --init base.ckpt "
                      "--out run")
            .exit_code == 2);
  fs::remove(dir / "run/.lock");

  // A changed input is detected on replay.
  std::ofstream(dir / "data/train.jsonl", std::ios::app)
      << R"({"id":"extra","prompt":"ab","chosen":"a","rejected":"b"})" << "\n";
  CHECK(run_mrpo(dir, "replay --manifest run/manifest.json --out run3").exit_code == 3);
  // And so is a cache that no longer matches its data.
  CHECK(run_mrpo(dir, "train --data data/train.jsonl --cache train.cache --init base.ckpt "
                      "--out run4")
            .exit_code == 3);
  fs::remove_all(dir);
}

TEST_CASE("an unclipped far-off reference exits with 4") {
  const fs::path dir = scratch_dir("cli_diverge");
  build_fixture(dir);
  REQUIRE(run_mrpo(dir, "score-refs --data data/train.jsonl --refs base.ckpt "
                        "--offset-reference -100 --out far.cache")
              .exit_code == 0);
  const std::string common =
      "train --data data/train.jsonl --cache far.cache --init base.ckpt --alpha-mode uniform ";
  const auto bad = run_mrpo(dir, common + "--clip none --out none");
  INFO(bad.output);
  CHECK(bad.exit_code == 4);
  CHECK(line_count(dir / "none/metrics.jsonl") == 2);
  CHECK(run_mrpo(dir, common + "--clip fixed --out fixed").exit_code == 0);
  CHECK(run_mrpo(dir, common + "--clip adaptive --out adaptive").exit_code == 0);
  fs::remove_all(dir);
}

TEST_CASE("config files supply defaults") {
  const fs::path dir = scratch_dir("cli_config");
  std::ofstream(dir / "s.json") << R"({"seed": 4, "pairs": 30, "test_fraction": 0.1})";
  const auto r = run_mrpo(dir, "synth --config s.json --out d");
  INFO(r.output);
  CHECK(r.exit_code == 0);
  CHECK(line_count(dir / "d/train.jsonl") == 27);
  std::ofstream(dir / "s.ini") << "pairs = 20\ntest-fraction = 0.5\n";
  CHECK(run_mrpo(dir, "synth --config s.ini --out e").exit_code == 0);
  CHECK(line_count(dir / "e/train.jsonl") == 10);
  fs::remove_all(dir);
}
