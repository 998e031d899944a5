#include "medsynth/quality_gate.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "medsynth/error.hpp"
#include "medsynth/text.hpp"

namespace medsynth::gate {

using json = nlohmann::json;

void GateConfig::validate() const {
  if (!(jaccard_threshold > 0.0 && jaccard_threshold <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "jaccard_threshold must lie in (0, 1]");
  }
  if (shingle_size < 1) throw Error(ErrorCode::InvalidArgument, "shingle_size must be at least 1");
  if (min_tokens < 0 || max_tokens < min_tokens) throw Error(ErrorCode::InvalidArgument, "bad token-count bounds");
}

std::string normalize(std::string_view input) {
  return text::join(text::split_whitespace(text::lowercase(text::nfc(input))), " ");
}

std::set<std::string> shingles(std::string_view input, int k) {
  const auto words = text::split_whitespace(normalize(input));
  std::set<std::string> out;
  if (words.empty()) return out;
  const size_t kk = static_cast<size_t>(k);
  if (words.size() < kk) {
    out.insert(text::join(words, " "));
    return out;
  }
  for (size_t i = 0; i + kk <= words.size(); ++i) {
    std::string s = words[i];
    for (size_t j = 1; j < kk; ++j) s += " " + words[i + j];
    out.insert(std::move(s));
  }
  return out;
}

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() && b.empty()) return 1.0;
  size_t inter = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++inter;
      ++ia;
      ++ib;
    }
  }
  return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

Gate::Gate(corpus::Task task, GateConfig cfg) : task_(task), cfg_(cfg) { cfg_.validate(); }

std::optional<std::string> Gate::duplicate_reason(const std::string& normalized, const std::set<std::string>& sh) const {
  if (kept_norm_.count(normalized)) return "ExactDuplicate";
  // Only kept samples sharing a shingle can reach a positive threshold.
  std::set<size_t> candidates;
  for (const auto& s : sh) {
    if (auto it = index_.find(s); it != index_.end()) candidates.insert(it->second.begin(), it->second.end());
  }
  for (size_t idx : candidates) {
    if (jaccard(sh, kept_shingles_[idx]) >= cfg_.jaccard_threshold) return "NearDuplicate";
  }
  return std::nullopt;
}

GateResult Gate::add(const std::vector<gen::CandidateSample>& samples) {
  GateResult result;
  result.report.input_count = samples.size();
  for (const auto& s : samples) {
    if (auto invalid = filter_valid(s, task_, cfg_)) {
      ++result.report.invalid_count;
      ++result.report.reject_reasons[*invalid];
      result.quarantined.push_back({s, *invalid});
      continue;
    }
    const std::string text = s.text();
    const std::string norm = normalize(text);
    auto sh = shingles(text, cfg_.shingle_size);
    if (auto dup = duplicate_reason(norm, sh)) {
      (*dup == "ExactDuplicate" ? result.report.exact_dup_count : result.report.near_dup_count)++;
      ++result.report.reject_reasons[*dup];
      result.quarantined.push_back({s, *dup});
      continue;
    }
    const size_t idx = kept_.size();
    for (const auto& x : sh) index_[x].push_back(idx);
    kept_shingles_.push_back(std::move(sh));
    kept_norm_.insert(norm);
    kept_.push_back(s);
    result.kept.push_back(s);
    ++result.report.kept_count;
  }
  return result;
}

DedupResult dedup(const std::vector<gen::CandidateSample>& samples, const GateConfig& cfg) {
  cfg.validate();
  DedupResult out;
  std::set<std::string> seen;
  std::vector<std::set<std::string>> kept_shingles;
  std::map<std::string, std::vector<size_t>> index;
  for (const auto& s : samples) {
    const std::string text = s.text();
    const std::string norm = normalize(text);
    if (seen.count(norm)) {
      out.rejected.push_back({s, "ExactDuplicate"});
      continue;
    }
    auto sh = shingles(text, cfg.shingle_size);
    std::set<size_t> candidates;
    for (const auto& x : sh) {
      if (auto it = index.find(x); it != index.end()) candidates.insert(it->second.begin(), it->second.end());
    }
    const bool near = std::any_of(candidates.begin(), candidates.end(), [&](size_t idx) {
      return jaccard(sh, kept_shingles[idx]) >= cfg.jaccard_threshold;
    });
    if (near) {
      out.rejected.push_back({s, "NearDuplicate"});
      continue;
    }
    for (const auto& x : sh) index[x].push_back(out.kept.size());
    kept_shingles.push_back(std::move(sh));
    seen.insert(norm);
    out.kept.push_back(s);
  }
  return out;
}

std::optional<std::string> filter_valid(const gen::CandidateSample& sample, corpus::Task task, const GateConfig& cfg) {
  if (!sample.accepted()) return *sample.reject_reason;
  size_t token_count = 0;
  if (task == corpus::Task::NER) {
    const auto* s = std::get_if<corpus::TaggedSentence>(&sample.payload);
    if (!s) return std::string("TaskMismatch");
    token_count = s->tokens.size();
  } else {
    const auto* r = std::get_if<corpus::REExample>(&sample.payload);
    if (!r) return std::string("TaskMismatch");
    token_count = corpus::tokenize(r->sentence).size();
  }
  if (token_count < static_cast<size_t>(cfg.min_tokens)) return std::string("TooShort");
  if (token_count > static_cast<size_t>(cfg.max_tokens)) return std::string("TooLong");
  if (task == corpus::Task::NER) {
    const auto& s = std::get<corpus::TaggedSentence>(sample.payload);
    if (s.tags.size() != s.tokens.size()) return std::string("InvalidIob");
    try {
      corpus::validate_iob(s.tags, corpus::IobMode::Strict);
    } catch (const Error&) {
      return std::string("InvalidIob");
    }
    if (corpus::spans_from_tags(s.tags).empty()) return std::string("NoEntity");
  } else {
    const auto& r = std::get<corpus::REExample>(sample.payload);
    if (corpus::count_occurrences(r.sentence, corpus::kGenePlaceholder) != 1 ||
        corpus::count_occurrences(r.sentence, corpus::kDiseasePlaceholder) != 1) {
      return std::string("PlaceholderCount");
    }
  }
  return std::nullopt;
}

GateResult run_gate(const std::vector<gen::CandidateSample>& samples, corpus::Task task, const GateConfig& cfg) {
  Gate gate(task, cfg);
  return gate.add(samples);
}

json GateReport::to_json() const {
  return json{{"input_count", input_count},       {"kept_count", kept_count},
              {"exact_dup_count", exact_dup_count}, {"near_dup_count", near_dup_count},
              {"invalid_count", invalid_count},     {"reject_reasons", reject_reasons}};
}

std::string GateReport::to_table() const {
  std::ostringstream out;
  auto row = [&out](const std::string& name, size_t v) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%-22s %10zu\n", name.c_str(), v);
    out << buf;
  };
  row("input", input_count);
  row("kept", kept_count);
  row("exact duplicates", exact_dup_count);
  row("near duplicates", near_dup_count);
  row("invalid", invalid_count);
  for (const auto& [reason, n] : reject_reasons) row("  reason " + reason, n);
  return out.str();
}

GateReport& GateReport::operator+=(const GateReport& other) {
  input_count += other.input_count;
  kept_count += other.kept_count;
  exact_dup_count += other.exact_dup_count;
  near_dup_count += other.near_dup_count;
  invalid_count += other.invalid_count;
  for (const auto& [k, v] : other.reject_reasons) reject_reasons[k] += v;
  return *this;
}

double exact_overlap_rate(const std::vector<std::string>& synthetic, const std::vector<std::string>& original) {
  if (synthetic.empty()) return 0.0;
  std::set<std::string> orig;
  for (const auto& s : original) orig.insert(normalize(s));
  size_t hits = 0;
  for (const auto& s : synthetic) hits += orig.count(normalize(s));
  return static_cast<double>(hits) / static_cast<double>(synthetic.size());
}

json quarantine_record(const Rejection& r) {
  json j = gen::provenance_record(r.sample);
  j["status"] = "quarantined";
  j["reason"] = r.reason;
  j["text"] = r.sample.text();
  return j;
}

}  // namespace medsynth::gate
