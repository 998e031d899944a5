#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "medsynth/corpus.hpp"
#include "medsynth/generator.hpp"
#include "medsynth/llm_gateway.hpp"
#include "medsynth/prompt_forge.hpp"
#include "medsynth/quality_gate.hpp"

// Run configuration: "[section]" headers followed by "key: value" lines.
// '#' starts a comment line. Relative paths resolve against the config
// file's directory.
namespace medsynth::cfg {

class Config {
 public:
  std::optional<std::string> get(const std::string& section, const std::string& key) const;
  // "section.key" = value; used for command-line overrides.
  void set(const std::string& dotted_key, const std::string& value);
  void set(const std::string& section, const std::string& key, const std::string& value);

  // Sorted "section.key=value" lines; the basis of the config hash.
  std::string canonical() const;
  std::string hash() const;

  const std::map<std::string, std::map<std::string, std::string>>& sections() const { return sections_; }
  std::string base_dir = ".";

 private:
  std::map<std::string, std::map<std::string, std::string>> sections_;
};

Config parse_config(std::string_view text, const std::string& base_dir = ".");
Config load_config(const std::string& path);

enum class SweepKind { PerEntity, SeedRatio, CorpusSize, PoolSize };
std::string_view to_string(SweepKind k);
SweepKind parse_sweep_kind(std::string_view s);

struct RunConfig {
  std::string manifest_path;
  std::optional<corpus::Task> task;  // defaults to the manifest's task
  llm::Provider provider = llm::Provider::Mock;
  uint64_t rng_seed = 0;
  std::string output_dir = "runs";

  llm::ProviderConfig provider_config;
  std::optional<std::string> cache_dir;  // default <output_dir>/cache
  double corruption_rate = 0.0;

  gen::GenerationConfig generation;
  size_t entity_count = 0;  // 0 = every seed entity
  std::optional<std::string> generation_template;
  std::optional<std::string> entity_type;  // default: manifest's first entity type

  gate::GateConfig gate;

  SweepKind sweep_kind = SweepKind::PerEntity;
  std::string grid = "1,2,3,4,5,10,15,20,25,30";
  int trials = 3;
  std::optional<std::string> predictions_dir;

  size_t bench_subset = 0;
  int bench_workers = 4;
  std::optional<std::string> bench_template;

  std::optional<forge::PromptTask> forge_task;
  std::string forge_description;
  int forge_budget = 3;
  int forge_samples = 10;

  std::string config_hash;
};

// Unknown sections or keys are a ConfigError. Referenced files must exist.
RunConfig resolve(const Config& c);

}  // namespace medsynth::cfg
