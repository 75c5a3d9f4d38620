// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MRPO Authors

#include "manifest.hpp"

#include <chrono>
#include <fcntl.h>
#include <unistd.h>

#include <fmt/chrono.h>
#include <fmt/format.h>

#include "mrpo/errors.hpp"
#include "mrpo/io_util.hpp"

namespace mrpo::cli {

namespace fs = std::filesystem;

fs::path OutputTarget::manifest_path() const {
  return is_dir ? path / "manifest.json" : fs::path(path.string() + ".manifest.json");
}

fs::path OutputTarget::lock_path() const {
  return is_dir ? path / ".lock" : fs::path(path.string() + ".lock");
}

fs::path OutputTarget::resolve(const std::string &name) const {
  return name == "." ? path : path / name;
}

OutputLock::OutputLock(const OutputTarget &target) : path_(target.lock_path()) {
  std::error_code ec;
  fs::create_directories(target.is_dir ? target.path : target.path.parent_path(), ec);
  const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    if (errno == EEXIST) {
      fail(ErrorKind::Io, "output '" + target.path.string() +
                              "' is in use by another run (remove " + path_.string() +
                              " if it is stale)");
    }
    fail(ErrorKind::Io, "cannot create lock file " + path_.string());
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] const auto written = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

OutputLock::~OutputLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

std::string utc_timestamp() {
  const auto now = std::chrono::time_point_cast<std::chrono::seconds>(
      std::chrono::system_clock::now());
  return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", now);
}

void RunManifest::add_input(const fs::path &path) {
  inputs.push_back({path.string(), sha256_file(path)});
}

void RunManifest::add_output(const OutputTarget &target, const std::string &name) {
  outputs.push_back({name, sha256_file(target.resolve(name))});
}

namespace {

nlohmann::ordered_json digests_to_json(const std::vector<FileDigest> &digests) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto &d : digests) {
    arr.push_back({{"path", d.path}, {"sha256", d.sha256}});
  }
  return arr;
}

std::vector<FileDigest> digests_from_json(const nlohmann::json &arr) {
  std::vector<FileDigest> out;
  for (const auto &d : arr) {
    out.push_back({d.at("path").get<std::string>(), d.at("sha256").get<std::string>()});
  }
  return out;
}

} // namespace

nlohmann::ordered_json RunManifest::to_json() const {
  nlohmann::ordered_json j;
  j["format_version"] = kFormatVersion;
  j["tool"] = "mrpo";
  j["tool_version"] = tool_version;
  j["command"] = command;
  j["argv"] = argv;
  j["cwd"] = cwd;
  j["config"] = config;
  j["seeds"] = seeds;
  j["inputs"] = digests_to_json(inputs);
  j["out"] = out;
  j["out_kind"] = out_is_dir ? "dir" : "file";
  j["outputs"] = digests_to_json(outputs);
  j["started_at"] = started_at;
  j["finished_at"] = finished_at;
  return j;
}

RunManifest RunManifest::from_json(const nlohmann::json &j) {
  RunManifest m;
  try {
    require(j.at("format_version").get<int>() == kFormatVersion, ErrorKind::Parse,
            "unsupported manifest format version");
    m.tool_version = j.at("tool_version").get<std::string>();
    m.command = j.at("command").get<std::string>();
    m.argv = j.at("argv").get<std::vector<std::string>>();
    m.cwd = j.at("cwd").get<std::string>();
    m.config = j.at("config");
    m.seeds = j.at("seeds");
    m.inputs = digests_from_json(j.at("inputs"));
    m.out = j.at("out").get<std::string>();
    m.out_is_dir = j.at("out_kind").get<std::string>() == "dir";
    m.outputs = digests_from_json(j.at("outputs"));
    m.started_at = j.at("started_at").get<std::string>();
    m.finished_at = j.at("finished_at").get<std::string>();
  } catch (const nlohmann::json::exception &e) {
    fail(ErrorKind::Parse, std::string("manifest: ") + e.what());
  }
  return m;
}

void write_manifest(const OutputTarget &target, RunManifest manifest) {
  manifest.finished_at = utc_timestamp();
  write_file_atomic(target.manifest_path(), manifest.to_json().dump(2) + "\n");
}

RunManifest read_manifest(const fs::path &path) {
  const std::string text = read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception &e) {
    fail(ErrorKind::Parse, path.string() + ": " + e.what());
  }
  return RunManifest::from_json(j);
}

} // namespace mrpo::cli
