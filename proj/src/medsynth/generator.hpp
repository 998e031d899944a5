#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "medsynth/corpus.hpp"
#include "medsynth/llm_gateway.hpp"
#include "medsynth/prompt_forge.hpp"
#include "medsynth/rng.hpp"

namespace medsynth::gen {

struct SeedEntity {
  std::string surface;
  std::string entity_type;
  std::string origin;
};

struct SeedPool {
  corpus::Task task = corpus::Task::NER;
  std::vector<SeedEntity> ner_entities;
  std::vector<corpus::REExample> re_examples;

  size_t positives() const;
  size_t negatives() const;
};

// Unique gold mention surfaces in first-seen order, deduplicated
// case-insensitively. Empty `types` keeps every type.
std::vector<SeedEntity> extract_seed_entities(const corpus::Dataset& gold, const std::vector<std::string>& types = {});

SeedPool make_re_pool(const corpus::Dataset& seeds);

struct GenerationConfig {
  int n_per_entity = 30;
  int pos_per_round = 3;
  int neg_per_round = 3;
  int target_size = 100;
  uint64_t rng_seed = 0;
  int workers = 4;
  int max_rounds = 0;  // RE; 0 derives a bound from target_size

  void validate() const;
};

using Payload = std::variant<corpus::TaggedSentence, corpus::REExample>;

struct CandidateSample {
  Payload payload;
  std::string prompt_id;
  std::string seed_ref;
  int round = 0;
  std::string raw_line;
  std::optional<std::string> reject_reason;  // set when generation already rejected it

  // Ordering key: (entity or round index, batch, line).
  size_t group = 0;
  size_t line = 0;

  bool accepted() const { return !reject_reason.has_value(); }
  std::string text() const;
};

struct ParsedLine {
  size_t position = 0;  // 1-based line number in the reply
  std::string text;
  std::optional<corpus::Label> label;  // RE rows
};

struct RejectedLine {
  size_t position = 0;
  std::string text;
  std::string reason;
};

struct ParsedReply {
  std::vector<ParsedLine> accepts;
  std::vector<RejectedLine> rejects;
};

ParsedReply parse_generation_reply(const std::string& reply, forge::PromptTask task);

// Tags every case-insensitive, non-overlapping occurrence of the seed's token
// sequence. Returns the reject reason when there is none.
std::variant<corpus::TaggedSentence, std::string> annotate_entity(const std::string& sentence, const SeedEntity& entity);

std::vector<CandidateSample> gen_ner_batch(const SeedEntity& entity, const forge::PromptTemplate& tmpl,
                                           const GenerationConfig& cfg, llm::Gateway& gateway, size_t entity_index = 0);

// Renders seed rows in "| sentence | label |" form, one per line.
std::string render_seed_rows(const std::vector<corpus::REExample>& rows);

std::vector<CandidateSample> gen_re_batch(const SeedPool& pool, const forge::PromptTemplate& tmpl,
                                          const GenerationConfig& cfg, llm::Gateway& gateway, SplitMix64& rng,
                                          int round);

// All entities, bounded worker pool, results in (entity, line) order.
std::vector<CandidateSample> generate_ner(const std::vector<SeedEntity>& entities, const forge::PromptTemplate& tmpl,
                                          const GenerationConfig& cfg, llm::Gateway& gateway);

nlohmann::json provenance_record(const CandidateSample& s);

}  // namespace medsynth::gen
