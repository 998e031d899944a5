#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "medsynth/config.hpp"
#include "medsynth/corpus.hpp"
#include "medsynth/generator.hpp"
#include "medsynth/llm_gateway.hpp"
#include "medsynth/prompt_forge.hpp"
#include "medsynth/quality_gate.hpp"

// Subcommand implementations. Each returns a JSON summary that includes the
// run directory it wrote.
namespace medsynth::pipeline {

std::unique_ptr<llm::Gateway> make_gateway(const cfg::RunConfig& rc, const std::optional<std::string>& transcript);

// Outcome of generation followed by the quality gate. `status[i]` is "kept",
// a reject reason, or "unused" (generated after the target was reached).
struct GenOutcome {
  std::vector<gen::CandidateSample> candidates;
  std::vector<std::string> status;
  gate::GateResult gated;
  bool target_reached = true;
};

GenOutcome generate_ner_corpus(const std::vector<gen::SeedEntity>& entities, const forge::PromptTemplate& tmpl,
                               const gen::GenerationConfig& gcfg, const gate::GateConfig& gate_cfg,
                               llm::Gateway& gateway);
// Rounds of gen_re_batch through an incremental gate until target_size
// examples are kept or max_rounds is spent.
GenOutcome generate_re_corpus(const gen::SeedPool& pool, const forge::PromptTemplate& tmpl,
                              const gen::GenerationConfig& gcfg, const gate::GateConfig& gate_cfg,
                              llm::Gateway& gateway);

corpus::Dataset kept_dataset(const GenOutcome& outcome, corpus::Task task);
std::vector<std::string> dataset_texts(const corpus::Dataset& d);

nlohmann::json ingest(const cfg::Config& config);
nlohmann::json gen(const cfg::Config& config);
nlohmann::json bench(const cfg::Config& config);
nlohmann::json score(const cfg::Config& config, const std::string& predictions_path);
nlohmann::json curve(const cfg::Config& config);

struct ShiftInputs {
  std::string synthetic_path;
  std::optional<std::string> original_embeddings;
  std::optional<std::string> synthetic_embeddings;
};
nlohmann::json shift(const cfg::Config& config, const ShiftInputs& inputs);

// Opens the session on first use; with a selection, closes the current round
// and opens the next (or fixes the final prompt). Without one it reports the
// state and returns.
nlohmann::json forge(const cfg::Config& config, std::optional<int> selection, const std::string& rationale);
std::string forge_session_dir(const cfg::Config& config);
nlohmann::json forge_state_json(const forge::RefinementLog& log, const std::string& session_dir);

// Newest <output_dir>/<subcommand>-* directory containing `file`, if any.
std::optional<std::string> latest_run(const std::string& output_dir, const std::string& subcommand,
                                      const std::string& file);

}  // namespace medsynth::pipeline
