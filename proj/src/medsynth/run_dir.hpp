#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace medsynth::run {

// Git's blob object id: SHA-1 over "blob <size>\0" + content.
std::string git_blob_sha1(std::string_view content);

// Holds <dir>/.lock (O_EXCL) for its lifetime. A second holder gets RunLocked.
class DirLock {
 public:
  explicit DirLock(std::string dir);
  ~DirLock();
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  std::string lock_path_;
};

// A run directory: <output_dir>/<subcommand>-<hash12>-<seq>. Fresh runs never
// reuse an existing directory. run.json lists inputs and outputs with digests.
class RunDir {
 public:
  static RunDir create(const std::string& output_dir, const std::string& subcommand, const std::string& config_hash,
                       const std::string& config_canonical);
  // Resumable session directory <output_dir>/<subcommand>-<hash12>; created on first use.
  static RunDir session(const std::string& output_dir, const std::string& subcommand, const std::string& config_hash,
                        const std::string& config_canonical);

  RunDir(RunDir&&) = default;

  const std::string& dir() const { return dir_; }
  std::string file(const std::string& name) const;

  void add_input(const std::string& role, const std::string& path);
  // Writes <dir>/<name> and records it.
  void write_output(const std::string& name, std::string_view content);
  // Records a file written by someone else. Mutable outputs are appended to
  // after the run (review decisions); their digest is as of finish().
  void record_output(const std::string& name, bool is_mutable = false);
  void finish(const nlohmann::json& summary);

 private:
  RunDir(std::string dir, std::string subcommand, std::string hash, std::string canonical);

  std::string dir_;
  std::string subcommand_;
  std::string config_hash_;
  std::string config_canonical_;
  std::unique_ptr<DirLock> lock_;
  nlohmann::json inputs_ = nlohmann::json::array();
  std::vector<std::pair<std::string, bool>> outputs_;
};

}  // namespace medsynth::run
