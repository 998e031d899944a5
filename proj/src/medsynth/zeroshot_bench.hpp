#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "medsynth/corpus.hpp"
#include "medsynth/llm_gateway.hpp"
#include "medsynth/prompt_forge.hpp"
#include "medsynth/scorer.hpp"

namespace medsynth::bench {

llm::ChatRequest build_task_prompt(const corpus::TaggedSentence& item, const forge::PromptTemplate& tmpl);
llm::ChatRequest build_task_prompt(const corpus::REExample& item, const forge::PromptTemplate& tmpl);

struct IobParse {
  std::vector<std::pair<std::string, corpus::Tag>> pairs;
  std::vector<std::string> diagnostics;
};

// Total: never throws. `entity_types` normalizes tag type case; a type
// outside a non-empty list maps to O with a diagnostic.
IobParse parse_iob_reply(const std::string& reply, const std::vector<std::string>& entity_types = {});

// LCS over lowercased token texts, earliest match on ties. Output has one tag
// per gold token, leniently repaired.
std::vector<corpus::Tag> realign(const std::vector<std::pair<std::string, corpus::Tag>>& pred,
                                 const std::vector<corpus::Token>& gold_tokens);

enum class LabelReply { Yes, No, Invalid };
LabelReply parse_label_reply(const std::string& reply);

struct BenchItem {
  size_t id = 0;
  std::string raw_reply;
  std::vector<corpus::Tag> tags;      // NER prediction over gold tokens
  std::optional<corpus::Label> label; // RE prediction (Invalid scored as No)
  bool invalid = false;               // RE reply was Invalid
  bool failed = false;                // unrecovered: no usable prediction
  std::vector<std::string> diagnostics;
};

struct BenchRun {
  corpus::Task task = corpus::Task::NER;
  forge::PromptTemplate tmpl;
  std::vector<BenchItem> items;

  size_t prediction_count() const;
  size_t failure_count() const;
  double invalid_rate() const;
  score::Metrics score(const corpus::Dataset& gold) const;
};

struct BenchOptions {
  size_t subset = 0;  // first k items in file order; 0 = all
  int workers = 4;
  std::vector<std::string> entity_types;
};

// Takes the first `subset` items of `data` in file order.
corpus::Dataset take_subset(const corpus::Dataset& data, size_t k);

BenchRun run_bench(const corpus::Dataset& data, const forge::PromptTemplate& tmpl, llm::Gateway& gateway,
                   const BenchOptions& options);

nlohmann::json bench_record(const BenchItem& item, corpus::Task task);
std::string bench_jsonl(const BenchRun& run);

}  // namespace medsynth::bench
