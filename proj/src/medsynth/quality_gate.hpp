#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "medsynth/corpus.hpp"
#include "medsynth/generator.hpp"

namespace medsynth::gate {

struct GateConfig {
  double jaccard_threshold = 0.8;
  int shingle_size = 3;
  int min_tokens = 5;
  int max_tokens = 128;

  void validate() const;
};

// NFC, lowercase, whitespace runs collapsed to one space, trimmed.
std::string normalize(std::string_view text);

// Word k-shingles of normalize(text). Texts shorter than k words yield one
// shingle holding all their words.
std::set<std::string> shingles(std::string_view text, int k);
double jaccard(const std::set<std::string>& a, const std::set<std::string>& b);

struct Rejection {
  gen::CandidateSample sample;
  std::string reason;
};

struct DedupResult {
  std::vector<gen::CandidateSample> kept;
  std::vector<Rejection> rejected;  // reason: ExactDuplicate | NearDuplicate
};

// First seen wins, in input order.
DedupResult dedup(const std::vector<gen::CandidateSample>& samples, const GateConfig& cfg);

// nullopt = accept; otherwise the reject reason.
std::optional<std::string> filter_valid(const gen::CandidateSample& sample, corpus::Task task, const GateConfig& cfg);

struct GateReport {
  size_t input_count = 0;
  size_t kept_count = 0;
  size_t exact_dup_count = 0;
  size_t near_dup_count = 0;
  size_t invalid_count = 0;
  std::map<std::string, size_t> reject_reasons;

  bool reconciles() const {
    return input_count == kept_count + exact_dup_count + near_dup_count + invalid_count;
  }
  nlohmann::json to_json() const;
  std::string to_table() const;
  GateReport& operator+=(const GateReport& other);
};

struct GateResult {
  std::vector<gen::CandidateSample> kept;
  std::vector<Rejection> quarantined;
  GateReport report;
};

// Validity filter, then dedup over the valid samples.
GateResult run_gate(const std::vector<gen::CandidateSample>& samples, corpus::Task task, const GateConfig& cfg);

// Incremental form used when generation runs until a target size: each call
// gates new samples against everything kept so far.
class Gate {
 public:
  Gate(corpus::Task task, GateConfig cfg);
  GateResult add(const std::vector<gen::CandidateSample>& samples);
  const std::vector<gen::CandidateSample>& kept() const { return kept_; }

 private:
  std::optional<std::string> duplicate_reason(const std::string& normalized, const std::set<std::string>& sh) const;

  corpus::Task task_;
  GateConfig cfg_;
  std::vector<gen::CandidateSample> kept_;
  std::set<std::string> kept_norm_;
  std::vector<std::set<std::string>> kept_shingles_;
  std::map<std::string, std::vector<size_t>> index_;
};

// Fraction of synthetic texts whose normalized form occurs in the original set.
double exact_overlap_rate(const std::vector<std::string>& synthetic, const std::vector<std::string>& original);

nlohmann::json quarantine_record(const Rejection& r);

}  // namespace medsynth::gate
