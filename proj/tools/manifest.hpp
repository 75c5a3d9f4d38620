// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MRPO Authors

#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace mrpo::cli {

/// Where a command writes: a directory of files, or a single file.
struct OutputTarget {
  std::filesystem::path path;
  bool is_dir = true;

  std::filesystem::path manifest_path() const;
  std::filesystem::path lock_path() const;
  /// `name` is relative to the directory, or "." for the file itself.
  std::filesystem::path resolve(const std::string &name) const;
};

/// Exclusive claim on an output location, released on destruction.
class OutputLock {
public:
  explicit OutputLock(const OutputTarget &target);
  ~OutputLock();
  OutputLock(const OutputLock &) = delete;
  OutputLock &operator=(const OutputLock &) = delete;

private:
  std::filesystem::path path_;
};

struct FileDigest {
  std::string path;
  std::string sha256;
};

struct RunManifest {
  static constexpr int kFormatVersion = 1;

  std::string tool_version;
  std::string command;
  std::vector<std::string> argv; // without the program name
  std::string cwd;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  nlohmann::ordered_json seeds = nlohmann::ordered_json::object();
  std::vector<FileDigest> inputs;
  std::string out;
  bool out_is_dir = true;
  std::vector<FileDigest> outputs; // paths relative to `out`
  std::string started_at;
  std::string finished_at;

  void add_input(const std::filesystem::path &path);
  void add_output(const OutputTarget &target, const std::string &name);

  nlohmann::ordered_json to_json() const;
  static RunManifest from_json(const nlohmann::json &j);
};

std::string utc_timestamp();

void write_manifest(const OutputTarget &target, RunManifest manifest);
RunManifest read_manifest(const std::filesystem::path &path);

} // namespace mrpo::cli
