#include "medsynth/run_dir.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <openssl/evp.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <filesystem>
#include <memory>

#include "medsynth/corpus.hpp"
#include "medsynth/error.hpp"

namespace medsynth::run {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string git_blob_sha1(std::string_view content) {
  const std::string header = "blob " + std::to_string(content.size()) + std::string(1, '\0');
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha1(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), header.data(), header.size()) != 1 ||
      EVP_DigestUpdate(ctx.get(), content.data(), content.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), md, &len) != 1) {
    throw Error(ErrorCode::Internal, "SHA-1 digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

DirLock::DirLock(std::string dir) : lock_path_((fs::path(dir) / ".lock").string()) {
  const int fd = ::open(lock_path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    if (errno == EEXIST) throw Error(ErrorCode::RunLocked, dir + " is in use by another run (" + lock_path_ + ")");
    throw Error(ErrorCode::Io, "cannot create " + lock_path_ + ": " + std::strerror(errno));
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] auto n = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

DirLock::~DirLock() {
  std::error_code ec;
  fs::remove(lock_path_, ec);
}

RunDir::RunDir(std::string dir, std::string subcommand, std::string hash, std::string canonical)
    : dir_(std::move(dir)),
      subcommand_(std::move(subcommand)),
      config_hash_(std::move(hash)),
      config_canonical_(std::move(canonical)) {}

RunDir RunDir::create(const std::string& output_dir, const std::string& subcommand, const std::string& config_hash,
                      const std::string& config_canonical) {
  fs::create_directories(output_dir);
  const std::string prefix = subcommand + "-" + config_hash.substr(0, 12) + "-";
  int seq = 0;
  for (const auto& entry : fs::directory_iterator(output_dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind(prefix, 0) != 0) continue;
    try {
      seq = std::max(seq, std::stoi(name.substr(prefix.size())));
    } catch (const std::exception&) {
    }
  }
  // create_directory is the atomic claim; a concurrent run that took the same
  // number pushes this one to the next.
  for (;;) {
    ++seq;
    char buf[16];
    std::snprintf(buf, sizeof buf, "%03d", seq);
    const fs::path dir = fs::path(output_dir) / (prefix + buf);
    if (fs::create_directory(dir)) {
      RunDir r(dir.string(), subcommand, config_hash, config_canonical);
      r.lock_ = std::make_unique<DirLock>(r.dir_);
      return r;
    }
  }
}

RunDir RunDir::session(const std::string& output_dir, const std::string& subcommand, const std::string& config_hash,
                       const std::string& config_canonical) {
  const fs::path dir = fs::path(output_dir) / (subcommand + "-" + config_hash.substr(0, 12));
  fs::create_directories(dir);
  RunDir r(dir.string(), subcommand, config_hash, config_canonical);
  r.lock_ = std::make_unique<DirLock>(r.dir_);
  return r;
}

std::string RunDir::file(const std::string& name) const { return (fs::path(dir_) / name).string(); }

void RunDir::add_input(const std::string& role, const std::string& path) {
  inputs_.push_back(json{{"role", role}, {"path", path}, {"git_sha1", git_blob_sha1(corpus::read_file(path))}});
}

void RunDir::write_output(const std::string& name, std::string_view content) {
  corpus::write_file(file(name), content);
  record_output(name);
}

void RunDir::record_output(const std::string& name, bool is_mutable) {
  for (const auto& [n, m] : outputs_) {
    if (n == name) return;
  }
  outputs_.emplace_back(name, is_mutable);
}

void RunDir::finish(const json& summary) {
  json outputs = json::array();
  for (const auto& [name, is_mutable] : outputs_) {
    const std::string content = corpus::read_file(file(name));
    json o{{"path", name}, {"bytes", content.size()}, {"git_sha1", git_blob_sha1(content)}};
    if (is_mutable) o["mutable"] = true;
    outputs.push_back(std::move(o));
  }
  const json manifest{{"subcommand", subcommand_},   {"config_hash", config_hash_},
                      {"config", config_canonical_}, {"inputs", inputs_},
                      {"outputs", outputs},          {"summary", summary}};
  corpus::write_file(file("run.json"), manifest.dump(2) + "\n");
}

}  // namespace medsynth::run
