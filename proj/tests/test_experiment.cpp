// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MRPO Authors

#include <doctest.h>

#include <cmath>

#include "mrpo/errors.hpp"
#include "mrpo/experiment.hpp"

using namespace mrpo;

namespace {

ExperimentSpec tiny() {
  ExperimentSpec s;
  s.world.pairs = 110;
  s.world.test_fraction = 1.0 / 11.0;
  s.seeds = {1, 2};
  s.dims = PolicyDims{6, 12, 3};
  s.family.max_steps = 20;
  s.train.epochs = 1;
  s.train.learning_rate = 1e-2;
  MethodSpec dpo{"dpo", {}};
  dpo.loss.kind = LossKind::dpo;
  MethodSpec mrpo{"mrpo", {}};
  s.methods = {dpo, mrpo};
  return s;
}

} // namespace

TEST_CASE("sample_std and cohens_d") {
  CHECK(sample_std({}) == 0.0);
  CHECK(sample_std({3.0}) == 0.0);
  CHECK(sample_std({1.0, 2.0, 3.0, 4.0}) == doctest::Approx(1.2909944487358056));
  CHECK(cohens_d({1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}) == 0.0);
  CHECK(cohens_d({0.5, 0.5}, {0.5, 0.5}) == 0.0);
  CHECK(cohens_d({2.0, 4.0}, {1.0, 3.0}) == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(std::isinf(cohens_d({1.0, 1.0}, {0.0, 0.0})));
}

TEST_CASE("a small experiment runs every cell") {
  const ExperimentSpec spec = tiny();
  int progress = 0;
  const ExperimentReport r = run_experiment(spec, [&](const ExperimentCell &) { ++progress; });
  CHECK(progress == 4);
  REQUIRE(r.cells.size() == 4);
  REQUIRE(r.summaries.size() == 2);
  for (const auto &cell : r.cells) {
    CHECK(cell.accuracy >= 0.0);
    CHECK(cell.accuracy <= 1.0);
    CHECK(cell.base_accuracy >= 0.0);
    CHECK(cell.base_accuracy <= 1.0);
    CHECK_FALSE(cell.diverged);
  }
  CHECK(r.summary("dpo").runs == 2);
  CHECK_THROWS_AS(r.summary("ipo"), Error);
  CHECK(r.to_json()["cells"].size() == 4);
  CHECK(r.to_csv().find("dpo") != std::string::npos);
  CHECK(r.to_text().find("mrpo") != std::string::npos);

  const ExperimentReport again = run_experiment(spec);
  CHECK(again.to_json() == r.to_json());
}

TEST_CASE("identical methods have zero effect size") {
  ExperimentSpec spec = tiny();
  spec.seeds = {3};
  spec.methods = {spec.methods[1], spec.methods[1]};
  spec.methods[1].name = "mrpo-copy";
  const ExperimentReport r = run_experiment(spec);
  CHECK(r.cells[0].accuracy == r.cells[1].accuracy);
  CHECK(r.cohens_d("mrpo", "mrpo-copy") == 0.0);
}

TEST_CASE("experiment spec JSON") {
  const ExperimentSpec preset = ExperimentSpec::weak_base_strong_reference();
  CHECK(preset.world.pairs == 5500);
  CHECK(preset.methods.size() == 6);
  CHECK_NOTHROW(preset.validate());
  const ExperimentSpec back = ExperimentSpec::from_json(preset.to_json());
  CHECK(back.to_json() == preset.to_json());

  ExperimentSpec bad = tiny();
  bad.methods.clear();
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = tiny();
  bad.methods[1].name = "dpo";
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = tiny();
  bad.base_quality = 2.0;
  CHECK_THROWS_AS(bad.validate(), Error);
}
