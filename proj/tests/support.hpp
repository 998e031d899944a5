#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

namespace testsupport {

inline std::string data_path(const std::string& rel) { return std::string(MEDSYNTH_TEST_DATA) + "/" + rel; }

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("medsynth-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string str() const { return path_.string(); }
  std::string operator/(const std::string& rel) const { return (path_ / rel).string(); }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Non-empty lines.
inline std::vector<std::string> lines_of(const std::string& content) {
  std::vector<std::string> out;
  std::istringstream in(content);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

inline void spit(const std::string& path, const std::string& content) {
  std::filesystem::create_directories(std::filesystem::path(path).parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
}

// Minimal run config over the fixture dataset.
inline std::string ner_config(const std::string& output_dir, const std::string& extra = "") {
  return "[run]\nmanifest: " + data_path("ner/manifest.txt") + "\nprovider: mock\nrng_seed: 7\noutput_dir: " +
         output_dir + "\n" + extra;
}

inline std::string re_config(const std::string& output_dir, const std::string& extra = "") {
  return "[run]\nmanifest: " + data_path("re/manifest.txt") + "\nprovider: mock\nrng_seed: 7\noutput_dir: " +
         output_dir + "\n" + extra;
}

}  // namespace testsupport
