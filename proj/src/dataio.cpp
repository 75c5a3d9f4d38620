// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MRPO Authors

#include "mrpo/dataio.hpp"

#include <unordered_set>

#include <json.hpp>

#include "mrpo/errors.hpp"
#include "mrpo/io_util.hpp"

namespace mrpo {

void validate_example(const PreferenceExample &ex) {
  require(!ex.id.empty(), ErrorKind::InvalidArgument, "example id is empty");
  require(!ex.prompt.empty() && !ex.chosen.empty() && !ex.rejected.empty(),
          ErrorKind::InvalidArgument, "example '" + ex.id + "' has an empty field");
  require(ex.chosen != ex.rejected, ErrorKind::InvalidArgument,
          "example '" + ex.id + "' has chosen == rejected");
}

namespace {

std::string string_field(const nlohmann::json &obj, const char *key, std::size_t line) {
  const auto it = obj.find(key);
  require(it != obj.end(), ErrorKind::Parse,
          "line " + std::to_string(line) + ": missing key \"" + key + "\"");
  require(it->is_string(), ErrorKind::Parse,
          "line " + std::to_string(line) + ": key \"" + key + "\" is not a string");
  return it->get<std::string>();
}

} // namespace

Dataset parse_preference_jsonl(std::string_view text) {
  Dataset out;
  std::unordered_set<std::string> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) {
      eol = text.size();
    }
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') {
      line.remove_suffix(1);
    }
    if (line.find_first_not_of(" \t") == std::string_view::npos) {
      continue;
    }
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception &e) {
      fail(ErrorKind::Parse, "line " + std::to_string(line_no) + ": " + e.what());
    }
    require(obj.is_object(), ErrorKind::Parse,
            "line " + std::to_string(line_no) + ": expected a JSON object");
    PreferenceExample ex{string_field(obj, "id", line_no), string_field(obj, "prompt", line_no),
                         string_field(obj, "chosen", line_no),
                         string_field(obj, "rejected", line_no)};
    try {
      validate_example(ex);
    } catch (const Error &e) {
      fail(ErrorKind::Parse, "line " + std::to_string(line_no) + ": " + e.what());
    }
    require(seen.insert(ex.id).second, ErrorKind::Integrity,
            "line " + std::to_string(line_no) + ": duplicate id '" + ex.id + "'");
    out.push_back(std::move(ex));
  }
  return out;
}

Dataset load_preference_file(const std::filesystem::path &path) {
  return parse_preference_jsonl(read_file(path));
}

std::string format_preference_jsonl(std::span<const PreferenceExample> examples) {
  std::string out;
  for (const auto &ex : examples) {
    // Fixed key order so the rendering (and its hash) is canonical.
    nlohmann::ordered_json obj;
    obj["id"] = ex.id;
    obj["prompt"] = ex.prompt;
    obj["chosen"] = ex.chosen;
    obj["rejected"] = ex.rejected;
    out += obj.dump();
    out += '\n';
  }
  return out;
}

void write_preference_file(const std::filesystem::path &path,
                           std::span<const PreferenceExample> examples) {
  write_file_atomic(path, format_preference_jsonl(examples));
}

std::string dataset_hash(std::span<const PreferenceExample> examples) {
  return sha256_hex(format_preference_jsonl(examples));
}

// --------------------------------------------------------------------------
// Reference cache
// --------------------------------------------------------------------------

PairRefLogProbs<double> RefLogProbCache::pair(Eigen::Index example) const {
  require(example >= 0 && example < values.rows(), ErrorKind::InvalidArgument,
          "example index out of range");
  const Eigen::Index k = reference_count();
  Vector<double> chosen(k);
  Vector<double> rejected(k);
  for (Eigen::Index r = 0; r < k; ++r) {
    chosen[r] = values(example, 2 * r);
    rejected[r] = values(example, 2 * r + 1);
  }
  return PairRefLogProbs<double>(std::move(chosen), std::move(rejected));
}

void RefLogProbCache::validate() const {
  require(!reference_ids.empty(), ErrorKind::InvalidArgument, "cache has no references");
  require(values.cols() == 2 * reference_count(), ErrorKind::InvalidArgument,
          "cache value matrix has the wrong width");
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
      check_logprob(values(i, j), "cache entry (" + std::to_string(i) + ", " +
                                      std::to_string(j) + ")");
    }
  }
}

void check_cache_matches(const RefLogProbCache &cache,
                         std::span<const PreferenceExample> dataset) {
  require(cache.dataset_hash == dataset_hash(dataset), ErrorKind::Integrity,
          "reference cache was built from a different dataset");
  require(cache.example_count() == static_cast<Eigen::Index>(dataset.size()),
          ErrorKind::Integrity, "reference cache does not cover the dataset");
}

RefLogProbCache score_references(std::span<const PreferenceExample> dataset,
                                 std::span<const ToyPolicy> references,
                                 std::vector<std::string> reference_ids) {
  require(!references.empty(), ErrorKind::InvalidArgument, "need at least one reference");
  require(reference_ids.size() == references.size(), ErrorKind::InvalidArgument,
          "one id per reference is required");
  RefLogProbCache cache;
  cache.dataset_hash = dataset_hash(dataset);
  cache.reference_ids = std::move(reference_ids);
  cache.eos_appended = true;
  const auto n = static_cast<Eigen::Index>(dataset.size());
  const auto k = static_cast<Eigen::Index>(references.size());
  cache.values.resize(n, 2 * k);
  for (Eigen::Index r = 0; r < k; ++r) {
    const ToyPolicy &ref = references[static_cast<std::size_t>(r)];
    for (Eigen::Index i = 0; i < n; ++i) {
      const PreferenceExample &ex = dataset[static_cast<std::size_t>(i)];
      cache.values(i, 2 * r) = ref.score_text(ex.prompt, ex.chosen);
      cache.values(i, 2 * r + 1) = ref.score_text(ex.prompt, ex.rejected);
    }
  }
  cache.validate();
  return cache;
}

namespace {
constexpr std::string_view kCacheMagic = "MRPO-REFCACHE\n";
}

std::string serialize_cache(const RefLogProbCache &cache) {
  cache.validate();
  nlohmann::json header;
  header["format_version"] = RefLogProbCache::kFormatVersion;
  header["dataset_hash"] = cache.dataset_hash;
  header["reference_ids"] = cache.reference_ids;
  header["eos_appended"] = cache.eos_appended;
  header["shape"] = {cache.example_count(), cache.reference_count(), 2};
  header["dtype"] = "float64";
  header["byte_order"] = "little";
  std::string out(kCacheMagic);
  out += header.dump();
  out += '\n';
  append_le_doubles(out, std::span<const double>(cache.values.data(),
                                                 static_cast<std::size_t>(cache.values.size())));
  return out;
}

RefLogProbCache deserialize_cache(std::string_view bytes) {
  require(bytes.starts_with(kCacheMagic), ErrorKind::Parse, "not a reference cache");
  const std::size_t start = kCacheMagic.size();
  const std::size_t eol = bytes.find('\n', start);
  require(eol != std::string_view::npos, ErrorKind::Parse, "cache header is truncated");
  RefLogProbCache cache;
  try {
    const auto header = nlohmann::json::parse(bytes.substr(start, eol - start));
    const int version = header.at("format_version").get<int>();
    require(version == RefLogProbCache::kFormatVersion, ErrorKind::Parse,
            "unsupported cache format version " + std::to_string(version));
    require(header.at("byte_order").get<std::string>() == "little" &&
                header.at("dtype").get<std::string>() == "float64",
            ErrorKind::Parse, "unsupported cache encoding");
    cache.dataset_hash = header.at("dataset_hash").get<std::string>();
    cache.reference_ids = header.at("reference_ids").get<std::vector<std::string>>();
    cache.eos_appended = header.at("eos_appended").get<bool>();
    const auto shape = header.at("shape").get<std::vector<std::int64_t>>();
    require(shape.size() == 3 && shape[2] == 2 && shape[0] >= 0 &&
                shape[1] == static_cast<std::int64_t>(cache.reference_ids.size()),
            ErrorKind::Parse, "cache shape does not match its reference list");
    const auto count = static_cast<std::size_t>(shape[0] * shape[1] * 2);
    require(bytes.size() - (eol + 1) == 8 * count, ErrorKind::Parse,
            "cache payload length does not match its shape");
    const std::vector<double> flat = read_le_doubles(bytes, eol + 1, count);
    cache.values = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                  Eigen::RowMajor>>(flat.data(), shape[0],
                                                                    2 * shape[1]);
  } catch (const nlohmann::json::exception &e) {
    fail(ErrorKind::Parse, std::string("cache header: ") + e.what());
  }
  cache.validate();
  return cache;
}

void write_cache(const std::filesystem::path &path, const RefLogProbCache &cache) {
  write_file_atomic(path, serialize_cache(cache));
}

RefLogProbCache read_cache(const std::filesystem::path &path) {
  return deserialize_cache(read_file(path));
}

RefLogProbCache with_offset_reference(const RefLogProbCache &cache,
                                      std::span<const PreferenceExample> dataset,
                                      double per_token_offset, std::string reference_id) {
  check_cache_matches(cache, dataset);
  require(per_token_offset <= 0.0, ErrorKind::InvalidArgument,
          "offset must keep log-probabilities <= 0");
  RefLogProbCache out = cache;
  const Eigen::Index k = cache.reference_count();
  out.reference_ids.push_back(std::move(reference_id));
  out.values.conservativeResize(Eigen::NoChange, 2 * (k + 1));
  for (Eigen::Index i = 0; i < out.values.rows(); ++i) {
    const auto tokens =
        static_cast<double>(dataset[static_cast<std::size_t>(i)].rejected.size() + 1);
    out.values(i, 2 * k) = cache.values(i, 0);
    out.values(i, 2 * k + 1) = cache.values(i, 1) + per_token_offset * tokens;
  }
  out.validate();
  return out;
}

} // namespace mrpo
