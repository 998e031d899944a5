#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "medsynth/llm_gateway.hpp"

namespace medsynth::forge {

enum class PromptTask { NerGen, ReGen, NerZeroshot, ReZeroshot };

std::string_view to_string(PromptTask task);
PromptTask parse_prompt_task(std::string_view s);

// Placeholder names as they appear in template bodies.
inline constexpr std::string_view kText = "@TEXT";
inline constexpr std::string_view kSeedEntities = "[Seed Entities]";
inline constexpr std::string_view kSeedExamples = "[Seed Examples]";
inline constexpr std::string_view kTaskDescriptions = "[Task Descriptions]";
inline constexpr std::string_view kCount = "N";

const std::set<std::string>& required_placeholders(PromptTask task);

struct PromptTemplate {
  std::string id;
  PromptTask task = PromptTask::NerGen;
  std::string body;
  int round = 0;

  friend bool operator==(const PromptTemplate&, const PromptTemplate&) = default;
};

// Placeholders occurring in a body. "N" counts only as a standalone word.
std::set<std::string> find_placeholders(std::string_view body);
bool satisfies_placeholder_invariant(const PromptTemplate& t);

using Bindings = std::map<std::string, std::string>;

// Single left-to-right substitution pass; bound values are never rescanned.
std::string render(const PromptTemplate& t, const Bindings& bindings);

// Zero-shot task prompts and the generation prompts that came out of three
// refinement rounds. The NER zero-shot prompt names the entity type.
PromptTemplate builtin_template(PromptTask task, const std::string& entity_type = "Disease");

// Meta request asking for five candidate templates for a task.
llm::ChatRequest meta_prompt(const std::string& task_description, PromptTask task);
llm::ChatRequest augmentation_prompt(const PromptTemplate& best);

// Parses a numbered/bulleted reply into exactly five candidates.
std::vector<PromptTemplate> parse_candidates(const std::string& reply, PromptTask task, int round);

enum class RoundStatus { AwaitingSamples, AwaitingSelection, Closed };
std::string_view to_string(RoundStatus s);

struct RoundState {
  int round_index = 1;
  std::vector<PromptTemplate> candidates;  // exactly 5
  int samples_per_candidate = 10;
  std::vector<std::vector<std::string>> samples;  // per candidate
  std::optional<int> selection;                   // 1-based candidate number
  std::string rationale;
  RoundStatus status = RoundStatus::AwaitingSamples;
};

struct RefinementLog {
  PromptTask task = PromptTask::NerGen;
  std::string task_description;
  int budget = 3;
  int samples_per_candidate = 10;
  std::vector<RoundState> rounds;
  std::optional<PromptTemplate> final_prompt;

  const RoundState* current() const { return rounds.empty() ? nullptr : &rounds.back(); }
};

inline constexpr size_t kCandidatesPerRound = 5;

// Supplies the five candidates for a round from a meta or augmentation request.
using CandidateSource = std::function<std::vector<PromptTemplate>(const llm::ChatRequest&, int round)>;
// Produces sample outputs for one candidate.
using SampleSource = std::function<std::vector<std::string>(const PromptTemplate&, int count)>;

CandidateSource gateway_candidates(llm::Gateway& gateway, PromptTask task);

// Opens round 1 from the meta prompt.
RefinementLog open_refinement(PromptTask task, const std::string& description, int budget, int samples_per_candidate,
                              const CandidateSource& source);
RefinementLog record_samples(RefinementLog log, const SampleSource& samples);
// Closes the current round with the selection; opens the next round from an
// augmentation request or, at the budget, fixes the final prompt.
RefinementLog advance_round(RefinementLog log, int selection, const std::string& rationale,
                            const CandidateSource& source);

// Write-through JSONL event log shared by the CLI and the review server.
class RefinementStore {
 public:
  explicit RefinementStore(std::string path);

  bool exists() const;
  RefinementLog load() const;
  // Appends the events that take `before` to `after`.
  void append_transition(const RefinementLog& before, const RefinementLog& after);
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

nlohmann::json to_json(const PromptTemplate& t);
PromptTemplate template_from_json(const nlohmann::json& j);
nlohmann::json round_to_json(const RoundState& r);

// Template file: first line "task: <task>", remaining text is the body.
PromptTemplate load_template_file(const std::string& path);
std::string template_file_content(const PromptTemplate& t);

}  // namespace medsynth::forge
