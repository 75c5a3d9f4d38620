// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MRPO Authors

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <string>

#include "mrpo/dataio.hpp"
#include "mrpo/errors.hpp"
#include "mrpo/io_util.hpp"
#include "mrpo/synthetic.hpp"
#include "mrpo/toy_policy.hpp"

using namespace mrpo;

namespace {

ErrorKind kind_of(const std::function<void()> &f) {
  try {
    f();
  } catch (const Error &e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::State;
}

std::string message_of(const std::function<void()> &f) {
  try {
    f();
  } catch (const Error &e) {
    return e.what();
  }
  return {};
}

Dataset small_dataset() {
  return {{"a", "ab", "c", "d"}, {"b", "ba", "cc", "dd"}, {"c", "abc", "a", "b"}};
}

} // namespace

TEST_CASE("sha256 of known strings") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("little-endian doubles round-trip") {
  const std::vector<double> xs{0.0, -1.5, 1e-300, -INFINITY, 3.141592653589793};
  std::string bytes;
  append_le_doubles(bytes, xs);
  CHECK(bytes.size() == 40);
  CHECK(read_le_doubles(bytes, 0, xs.size()) == xs);
  CHECK_THROWS_AS(read_le_doubles(bytes, 8, 5), Error);
}

TEST_CASE("parse preference jsonl") {
  const std::string text = R"({"id":"x1","prompt":"ab","chosen":"c","rejected":"d"}

{"id":"x2","prompt":"ba","chosen":"cc","rejected":"dd","extra":1}
)";
  const Dataset d = parse_preference_jsonl(text);
  REQUIRE(d.size() == 2);
  CHECK(d[0] == PreferenceExample{"x1", "ab", "c", "d"});
  CHECK(d[1].rejected == "dd");
}

TEST_CASE("parse errors name the line") {
  const std::string missing = R"({"id":"x1","prompt":"ab","chosen":"c","rejected":"d"}
{"id":"x2","prompt":"ab","chosen":"c"})";
  CHECK(kind_of([&] { parse_preference_jsonl(missing); }) == ErrorKind::Parse);
  const std::string msg = message_of([&] { parse_preference_jsonl(missing); });
  CHECK(msg.find("line 2") != std::string::npos);
  CHECK(msg.find("rejected") != std::string::npos);

  CHECK(kind_of([] { parse_preference_jsonl("{not json}\n"); }) == ErrorKind::Parse);
  CHECK(kind_of([] { parse_preference_jsonl(R"({"id":1,"prompt":"a","chosen":"b","rejected":"c"})"); }) ==
        ErrorKind::Parse);
}

TEST_CASE("an empty file is an empty dataset") {
  CHECK(parse_preference_jsonl("").empty());
  CHECK(parse_preference_jsonl("\n\n").empty());
}

TEST_CASE("duplicate ids are an integrity error") {
  const std::string dup = R"({"id":"x","prompt":"a","chosen":"b","rejected":"c"}
{"id":"x","prompt":"a","chosen":"c","rejected":"b"})";
  CHECK(kind_of([&] { parse_preference_jsonl(dup); }) == ErrorKind::Integrity);
}

TEST_CASE("invalid examples") {
  CHECK_THROWS_AS(validate_example({"", "a", "b", "c"}), Error);
  CHECK_THROWS_AS(validate_example({"x", "a", "b", "b"}), Error);
  CHECK_THROWS_AS(validate_example({"x", "a", "", "b"}), Error);
  CHECK_NOTHROW(validate_example({"x", "a", "b", "c"}));
}

TEST_CASE("jsonl round-trip and stable hash") {
  const Dataset d = small_dataset();
  const std::string text = format_preference_jsonl(d);
  CHECK(parse_preference_jsonl(text) == d);
  CHECK(format_preference_jsonl(parse_preference_jsonl(text)) == text);
  CHECK(dataset_hash(d) == sha256_hex(text));
  Dataset other = d;
  other[1].chosen = "ccc";
  CHECK(dataset_hash(other) != dataset_hash(d));
}

TEST_CASE("files round-trip") {
  const auto dir = std::filesystem::temp_directory_path() / "mrpo_test_dataio";
  std::filesystem::create_directories(dir);
  const Dataset d = small_dataset();
  write_preference_file(dir / "d.jsonl", d);
  CHECK(load_preference_file(dir / "d.jsonl") == d);
  CHECK(kind_of([&] { load_preference_file(dir / "missing.jsonl"); }) == ErrorKind::Io);
  std::filesystem::remove_all(dir);
}

TEST_CASE("reference cache") {
  const Dataset d = small_dataset();
  const Vocab vocab("abcd");
  std::vector<ToyPolicy> refs{ToyPolicy::random(vocab, {}, 1), ToyPolicy::random(vocab, {}, 2)};
  const RefLogProbCache cache = score_references(d, refs, {"r0", "r1"});

  CHECK(cache.example_count() == 3);
  CHECK(cache.reference_count() == 2);
  CHECK(cache.values.size() == 2 * 2 * 3);
  CHECK(cache.dataset_hash == dataset_hash(d));
  CHECK(cache.values(1, 2) == refs[1].score_text("ba", "cc"));
  CHECK(cache.values(2, 1) == refs[0].score_text("abc", "b"));
  const auto pair = cache.pair(0);
  CHECK(pair.chosen()[1] == cache.values(0, 2));
  CHECK(pair.rejected()[0] == cache.values(0, 1));
  CHECK_NOTHROW(check_cache_matches(cache, d));

  SUBCASE("serialization round-trip") {
    const std::string bytes = serialize_cache(cache);
    const RefLogProbCache back = deserialize_cache(bytes);
    CHECK(back.values == cache.values);
    CHECK(back.reference_ids == cache.reference_ids);
    CHECK(back.dataset_hash == cache.dataset_hash);
    CHECK(serialize_cache(back) == bytes);
    CHECK_THROWS_AS(deserialize_cache(bytes.substr(0, bytes.size() - 1)), Error);
  }
  SUBCASE("hash mismatch") {
    Dataset changed = d;
    changed[0].prompt = "abab";
    CHECK(kind_of([&] { check_cache_matches(cache, changed); }) == ErrorKind::Integrity);
  }
  SUBCASE("bad values") {
    RefLogProbCache bad = cache;
    bad.values(0, 0) = 0.5;
    CHECK(kind_of([&] { bad.validate(); }) == ErrorKind::NumericInput);
    bad.values(0, 0) = NAN;
    CHECK(kind_of([&] { bad.validate(); }) == ErrorKind::NumericInput);
  }
  SUBCASE("offset reference") {
    const RefLogProbCache off = with_offset_reference(cache, d, -3.0, "off");
    CHECK(off.reference_count() == 3);
    CHECK(off.values(0, 4) == cache.values(0, 0));
    // "d" plus eos is two tokens.
    CHECK(off.values(0, 5) == doctest::Approx(cache.values(0, 1) - 6.0));
    CHECK(off.values(1, 5) == doctest::Approx(cache.values(1, 1) - 9.0));
  }
}

TEST_CASE("synthetic worlds") {
  SyntheticSpec spec;
  spec.pairs = 5000;
  spec.noise = 0.2;
  spec.test_fraction = 0.2;
  const SyntheticData data = generate_synthetic(spec);
  CHECK(data.train.size() == 4000);
  CHECK(data.test.size() == 1000);

  const PlantedReward reward = spec.reward();
  std::size_t flipped = 0;
  for (const auto *part : {&data.train, &data.test}) {
    for (const auto &ex : *part) {
      REQUIRE(ex.chosen != ex.rejected);
      const double rc = reward.score(ex.prompt, ex.chosen);
      const double rr = reward.score(ex.prompt, ex.rejected);
      REQUIRE(rc != rr);
      flipped += rc < rr ? 1 : 0;
    }
  }
  CHECK(flipped == data.flipped);
  const double rate = static_cast<double>(flipped) / 5000.0;
  CHECK(rate >= 0.18);
  CHECK(rate <= 0.22);

  const SyntheticData again = generate_synthetic(spec);
  CHECK(again.train == data.train);
  CHECK(again.test == data.test);

  SyntheticSpec clean = spec;
  clean.noise = 0.0;
  CHECK(generate_synthetic(clean).flipped == 0);
}

TEST_CASE("synthetic spec validation and JSON") {
  SyntheticSpec spec;
  spec.noise = 0.5;
  CHECK_THROWS_AS(spec.validate(), Error);
  spec.noise = 0.1;
  spec.output_min_len = 4;
  CHECK_THROWS_AS(spec.validate(), Error);
  spec.output_min_len = 1;
  spec.test_fraction = 1.0;
  CHECK_THROWS_AS(spec.validate(), Error);
  spec.test_fraction = 0.25;
  spec.seed = 99;
  const SyntheticSpec back = SyntheticSpec::from_json(spec.to_json());
  CHECK(back.to_json() == spec.to_json());
  const PlantedReward r = spec.reward();
  CHECK(PlantedReward::from_json(r.to_json()).token_scores() == r.token_scores());
}
