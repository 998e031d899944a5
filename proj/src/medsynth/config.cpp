#include "medsynth/config.hpp"

#include <filesystem>
#include <set>

#include "medsynth/error.hpp"
#include "medsynth/text.hpp"

namespace medsynth::cfg {

namespace fs = std::filesystem;

namespace {

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"run", {"manifest", "task", "provider", "rng_seed", "output_dir"}},
      {"provider",
       {"endpoint_url", "api_key_env", "max_retries", "backoff_base_ms", "backoff_max_ms",
        "rate_limit_per_min", "timeout_s", "cache_dir", "corruption_rate"}},
      {"generation",
       {"n_per_entity", "pos_per_round", "neg_per_round", "target_size", "workers", "max_rounds", "entity_count",
        "template", "entity_type"}},
      {"gate", {"jaccard_threshold", "shingle_size", "min_tokens", "max_tokens"}},
      {"sweep", {"kind", "grid", "trials", "predictions_dir"}},
      {"bench", {"subset", "workers", "template"}},
      {"forge", {"task", "description", "budget", "samples_per_candidate"}},
  };
  return keys;
}

void check_key(const std::string& section, const std::string& key) {
  if (key == "api_key") {
    throw Error(ErrorCode::ConfigError, "API keys are read from the environment; name the variable with api_key_env");
  }
  auto it = known_keys().find(section);
  if (it == known_keys().end()) throw Error(ErrorCode::ConfigError, "unknown config section [" + section + "]");
  if (!it->second.count(key)) throw Error(ErrorCode::ConfigError, "unknown config key " + section + "." + key);
}

}  // namespace

std::optional<std::string> Config::get(const std::string& section, const std::string& key) const {
  auto s = sections_.find(section);
  if (s == sections_.end()) return std::nullopt;
  auto k = s->second.find(key);
  if (k == s->second.end()) return std::nullopt;
  return k->second;
}

void Config::set(const std::string& section, const std::string& key, const std::string& value) {
  check_key(section, key);
  sections_[section][key] = value;
}

void Config::set(const std::string& dotted_key, const std::string& value) {
  const size_t dot = dotted_key.find('.');
  if (dot == std::string::npos) throw Error(ErrorCode::ConfigError, "override key must be section.key: " + dotted_key);
  set(dotted_key.substr(0, dot), dotted_key.substr(dot + 1), value);
}

std::string Config::canonical() const {
  std::string out;
  for (const auto& [section, kv] : sections_) {
    for (const auto& [key, value] : kv) out += section + "." + key + "=" + value + "\n";
  }
  return out;
}

std::string Config::hash() const { return llm::sha256_hex(canonical()); }

Config parse_config(std::string_view text, const std::string& base_dir) {
  Config c;
  c.base_dir = base_dir;
  std::string section;
  const auto lines = text::split_lines(text);
  for (size_t ln = 0; ln < lines.size(); ++ln) {
    const std::string line = text::trim(lines[ln]);
    if (line.empty() || line[0] == '#') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError(ErrorCode::ConfigError, ln + 1, 1, "unterminated section header");
      section = text::trim(line.substr(1, line.size() - 2));
      if (!known_keys().count(section)) {
        throw ParseError(ErrorCode::ConfigError, ln + 1, 2, "unknown section [" + section + "]");
      }
      continue;
    }
    const size_t colon = line.find(':');
    if (colon == std::string::npos) throw ParseError(ErrorCode::ConfigError, ln + 1, 1, "expected 'key: value'");
    if (section.empty()) throw ParseError(ErrorCode::ConfigError, ln + 1, 1, "key outside any section");
    const std::string key = text::trim(line.substr(0, colon));
    try {
      c.set(section, key, text::trim(line.substr(colon + 1)));
    } catch (const Error& e) {
      throw ParseError(ErrorCode::ConfigError, ln + 1, 1, e.what());
    }
  }
  return c;
}

Config load_config(const std::string& path) {
  const auto dir = fs::path(path).parent_path();
  return parse_config(corpus::read_file(path), dir.empty() ? "." : dir.string());
}

std::string_view to_string(SweepKind k) {
  switch (k) {
    case SweepKind::PerEntity: return "per-entity";
    case SweepKind::SeedRatio: return "seed-ratio";
    case SweepKind::CorpusSize: return "corpus-size";
    case SweepKind::PoolSize: return "pool-size";
  }
  return "per-entity";
}

SweepKind parse_sweep_kind(std::string_view s) {
  for (auto k : {SweepKind::PerEntity, SweepKind::SeedRatio, SweepKind::CorpusSize, SweepKind::PoolSize}) {
    if (s == to_string(k)) return k;
  }
  throw Error(ErrorCode::ConfigError, "unknown sweep kind '" + std::string(s) + "'");
}

namespace {

class Reader {
 public:
  explicit Reader(const Config& c) : c_(c) {}

  std::optional<std::string> str(const char* section, const char* key) const { return c_.get(section, key); }

  std::optional<std::string> path(const char* section, const char* key) const {
    auto v = c_.get(section, key);
    if (!v || v->empty()) return std::nullopt;
    fs::path p(*v);
    if (p.is_relative()) p = fs::path(c_.base_dir) / p;
    return p.lexically_normal().string();
  }

  template <typename T>
  void integer(const char* section, const char* key, T& out, long long lo, long long hi) const {
    auto v = c_.get(section, key);
    if (!v) return;
    try {
      size_t used = 0;
      const long long x = std::stoll(*v, &used);
      if (used != v->size()) throw std::invalid_argument(*v);
      if (x < lo || x > hi) {
        throw Error(ErrorCode::ConfigError, std::string(section) + "." + key + " must be in [" + std::to_string(lo) +
                                                ", " + std::to_string(hi) + "]");
      }
      out = static_cast<T>(x);
    } catch (const Error&) {
      throw;
    } catch (const std::exception&) {
      throw Error(ErrorCode::ConfigError, std::string(section) + "." + key + " is not an integer: '" + *v + "'");
    }
  }

  void real(const char* section, const char* key, double& out) const {
    auto v = c_.get(section, key);
    if (!v) return;
    try {
      size_t used = 0;
      out = std::stod(*v, &used);
      if (used != v->size()) throw std::invalid_argument(*v);
    } catch (const std::exception&) {
      throw Error(ErrorCode::ConfigError, std::string(section) + "." + key + " is not a number: '" + *v + "'");
    }
  }

 private:
  const Config& c_;
};

void require_file(const std::optional<std::string>& p, const char* what) {
  if (p && !fs::exists(*p)) throw Error(ErrorCode::ConfigError, std::string(what) + " not found: " + *p);
}

}  // namespace

RunConfig resolve(const Config& c) {
  RunConfig r;
  Reader in(c);
  constexpr long long kBig = 1LL << 40;

  if (auto m = in.path("run", "manifest")) r.manifest_path = *m;
  require_file(r.manifest_path.empty() ? std::nullopt : std::optional(r.manifest_path), "manifest");
  if (auto t = in.str("run", "task")) r.task = corpus::parse_task(*t);
  if (auto p = in.str("run", "provider")) {
    if (*p == "mock") {
      r.provider = llm::Provider::Mock;
    } else if (*p == "real") {
      r.provider = llm::Provider::Real;
    } else {
      throw Error(ErrorCode::ConfigError, "run.provider must be real or mock");
    }
  }
  if (auto s = in.str("run", "rng_seed")) {
    try {
      size_t used = 0;
      r.rng_seed = std::stoull(*s, &used);
      if (used != s->size()) throw std::invalid_argument(*s);
    } catch (const std::exception&) {
      throw Error(ErrorCode::ConfigError, "run.rng_seed is not an unsigned integer: '" + *s + "'");
    }
  }
  if (auto o = in.path("run", "output_dir")) r.output_dir = *o;

  auto& pc = r.provider_config;
  if (auto v = in.str("provider", "endpoint_url")) pc.endpoint_url = *v;
  if (auto v = in.str("provider", "api_key_env")) pc.api_key_env = *v;
  in.integer("provider", "max_retries", pc.max_retries, 0, 20);
  in.integer("provider", "backoff_base_ms", pc.backoff_base_ms, 0, 600000);
  in.integer("provider", "backoff_max_ms", pc.backoff_max_ms, 0, 3600000);
  in.integer("provider", "rate_limit_per_min", pc.rate_limit_per_min, 1, 1000000);
  in.integer("provider", "timeout_s", pc.timeout_s, 1, 3600);
  r.cache_dir = in.path("provider", "cache_dir");
  in.real("provider", "corruption_rate", r.corruption_rate);
  if (r.corruption_rate < 0.0 || r.corruption_rate > 1.0) {
    throw Error(ErrorCode::ConfigError, "provider.corruption_rate must be in [0, 1]");
  }
  if (r.provider == llm::Provider::Real && pc.api_key_env.empty()) {
    throw Error(ErrorCode::ConfigError, "provider=real requires provider.api_key_env");
  }

  auto& g = r.generation;
  g.rng_seed = r.rng_seed;
  in.integer("generation", "n_per_entity", g.n_per_entity, 1, 10000);
  in.integer("generation", "pos_per_round", g.pos_per_round, 1, 1000);
  in.integer("generation", "neg_per_round", g.neg_per_round, 1, 1000);
  in.integer("generation", "target_size", g.target_size, 1, kBig);
  in.integer("generation", "workers", g.workers, 1, 256);
  in.integer("generation", "max_rounds", g.max_rounds, 0, kBig);
  in.integer("generation", "entity_count", r.entity_count, 0, kBig);
  r.generation_template = in.path("generation", "template");
  require_file(r.generation_template, "generation template");
  r.entity_type = in.str("generation", "entity_type");
  g.validate();

  in.real("gate", "jaccard_threshold", r.gate.jaccard_threshold);
  in.integer("gate", "shingle_size", r.gate.shingle_size, 1, 64);
  in.integer("gate", "min_tokens", r.gate.min_tokens, 0, 100000);
  in.integer("gate", "max_tokens", r.gate.max_tokens, 1, 100000);
  r.gate.validate();

  if (auto k = in.str("sweep", "kind")) r.sweep_kind = parse_sweep_kind(*k);
  if (auto v = in.str("sweep", "grid")) r.grid = *v;
  in.integer("sweep", "trials", r.trials, 1, 1000);
  r.predictions_dir = in.path("sweep", "predictions_dir");

  in.integer("bench", "subset", r.bench_subset, 0, kBig);
  in.integer("bench", "workers", r.bench_workers, 1, 256);
  r.bench_template = in.path("bench", "template");
  require_file(r.bench_template, "bench template");

  if (auto t = in.str("forge", "task")) r.forge_task = forge::parse_prompt_task(*t);
  if (auto d = in.str("forge", "description")) r.forge_description = *d;
  in.integer("forge", "budget", r.forge_budget, 1, 100);
  in.integer("forge", "samples_per_candidate", r.forge_samples, 1, 1000);

  r.config_hash = c.hash();
  return r;
}

}  // namespace medsynth::cfg
