#pragma once

#include <memory>
#include <optional>
#include <string>

#include "medsynth/config.hpp"

// Loopback HTTP API for the review client:
//   GET  /rounds/current               forge session state
//   POST /rounds/current/selection     {"candidate_id", "rationale"}
//   GET  /samples?status=pending       kept samples of a gen run
//   POST /samples/{id}/decision        {"decision": "accept"|"reject", "reason"}
//   GET  /scatter                      projection TSV of a shift run
namespace medsynth::review {

struct ReviewOptions {
  cfg::Config config;
  std::optional<std::string> gen_run_dir;   // default: newest gen run
  std::optional<std::string> scatter_path;  // default: newest shift run's scatter.tsv
  std::optional<std::string> static_dir;    // served at / when set
};

class ReviewServer {
 public:
  explicit ReviewServer(ReviewOptions options);
  ~ReviewServer();
  ReviewServer(const ReviewServer&) = delete;
  ReviewServer& operator=(const ReviewServer&) = delete;

  // Binds 127.0.0.1 on a free port and serves on a background thread.
  int start();
  int port() const;
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace medsynth::review
