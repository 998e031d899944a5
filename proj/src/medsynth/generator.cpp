#include "medsynth/generator.hpp"

#include <algorithm>
#include <atomic>
#include <map>
#include <mutex>
#include <regex>
#include <thread>

#include "medsynth/error.hpp"
#include "medsynth/text.hpp"

namespace medsynth::gen {

using corpus::Label;
using corpus::Task;
using json = nlohmann::json;

size_t SeedPool::positives() const {
  return static_cast<size_t>(std::count_if(re_examples.begin(), re_examples.end(),
                                           [](const auto& r) { return r.label == Label::Yes; }));
}

size_t SeedPool::negatives() const { return re_examples.size() - positives(); }

void GenerationConfig::validate() const {
  if (n_per_entity <= 0 || pos_per_round <= 0 || neg_per_round <= 0 || target_size <= 0) {
    throw Error(ErrorCode::InvalidArgument, "generation counts must be positive");
  }
  if (workers <= 0) throw Error(ErrorCode::InvalidArgument, "workers must be positive");
}

std::vector<SeedEntity> extract_seed_entities(const corpus::Dataset& gold, const std::vector<std::string>& types) {
  if (gold.task != Task::NER) throw Error(ErrorCode::TaskMismatch, "seed entities come from an NER dataset");
  std::vector<SeedEntity> out;
  std::map<std::pair<std::string, std::string>, size_t> seen;
  for (const auto& s : gold.sentences) {
    for (const auto& span : corpus::spans_from_tags(s.tags)) {
      if (!types.empty() && std::find(types.begin(), types.end(), span.entity_type) == types.end()) continue;
      std::vector<std::string> words;
      for (size_t i = span.start; i <= span.end; ++i) words.push_back(s.tokens[i].text);
      std::string surface = text::join(words, " ");
      auto key = std::pair{text::lowercase(surface), span.entity_type};
      if (auto it = seen.find(key); it != seen.end()) {
        if (surface.size() > out[it->second].surface.size()) out[it->second].surface = std::move(surface);
        continue;
      }
      seen.emplace(std::move(key), out.size());
      out.push_back(SeedEntity{std::move(surface), span.entity_type, gold.name});
    }
  }
  return out;
}

SeedPool make_re_pool(const corpus::Dataset& seeds) {
  if (seeds.task != Task::RE) throw Error(ErrorCode::TaskMismatch, "RE seed pool needs an RE dataset");
  SeedPool pool;
  pool.task = Task::RE;
  pool.re_examples = seeds.relations;
  return pool;
}

std::string CandidateSample::text() const {
  if (const auto* s = std::get_if<corpus::TaggedSentence>(&payload)) return corpus::detokenize(s->tokens);
  return std::get<corpus::REExample>(payload).sentence;
}

namespace {

std::string strip_quotes(std::string s) {
  static const std::vector<std::pair<std::string, std::string>> pairs{
      {"\"", "\""}, {"'", "'"}, {"“", "”"}, {"‘", "’"}};
  for (const auto& [open, close] : pairs) {
    if (s.size() >= open.size() + close.size() && s.compare(0, open.size(), open) == 0 &&
        s.compare(s.size() - close.size(), close.size(), close) == 0) {
      return text::trim(s.substr(open.size(), s.size() - open.size() - close.size()));
    }
  }
  return s;
}

std::string strip_list_marker(const std::string& line) {
  static const std::regex marker(R"(^\s*(?:\(?\d+[.):]|[-*•])\s*)");
  return std::regex_replace(line, marker, "", std::regex_constants::format_first_only);
}

}  // namespace

ParsedReply parse_generation_reply(const std::string& reply, forge::PromptTask task) {
  ParsedReply out;
  const auto lines = text::split_lines(reply);
  for (size_t i = 0; i < lines.size(); ++i) {
    const std::string trimmed = text::trim(lines[i]);
    if (trimmed.empty()) continue;
    const size_t pos = i + 1;
    if (task == forge::PromptTask::NerGen) {
      std::string sentence = strip_quotes(text::trim(strip_list_marker(trimmed)));
      if (sentence.empty()) {
        out.rejects.push_back({pos, trimmed, "EmptyLine"});
      } else {
        out.accepts.push_back({pos, std::move(sentence), std::nullopt});
      }
      continue;
    }
    // RE rows: "| sentence | label |" or "sentence<TAB>label", optionally numbered.
    std::string row = text::trim(strip_list_marker(trimmed));
    std::string sentence;
    std::string label;
    if (!row.empty() && row.front() == '|') {
      std::string body = row.substr(1);
      if (!body.empty() && body.back() == '|') body.pop_back();
      const size_t last = body.rfind('|');
      if (last == std::string::npos) {
        out.rejects.push_back({pos, trimmed, "MissingLabel"});
        continue;
      }
      sentence = text::trim(body.substr(0, last));
      label = text::trim(body.substr(last + 1));
    } else if (const size_t tab = row.rfind('\t'); tab != std::string::npos) {
      sentence = text::trim(row.substr(0, tab));
      label = text::trim(row.substr(tab + 1));
    } else {
      out.rejects.push_back({pos, trimmed, "MalformedRow"});
      continue;
    }
    if (label.empty()) {
      out.rejects.push_back({pos, trimmed, "MissingLabel"});
      continue;
    }
    if (std::all_of(sentence.begin(), sentence.end(), [](char c) { return c == '-' || c == ':' || c == ' ' || c == '|'; })) {
      out.rejects.push_back({pos, trimmed, "HeaderRow"});
      continue;
    }
    auto parsed = corpus::normalize_label(label);
    if (!parsed) {
      out.rejects.push_back({pos, trimmed, text::iequals(sentence, "sentence") ? "HeaderRow" : "BadLabel"});
      continue;
    }
    out.accepts.push_back({pos, strip_quotes(sentence), parsed});
  }
  return out;
}

std::variant<corpus::TaggedSentence, std::string> annotate_entity(const std::string& sentence,
                                                                  const SeedEntity& entity) {
  corpus::TaggedSentence out;
  out.tokens = corpus::tokenize(sentence);
  out.tags.assign(out.tokens.size(), corpus::Tag::outside());
  const auto needle = corpus::tokenize(entity.surface);
  if (needle.empty()) return std::string("EmptySeed");
  if (out.tokens.empty()) return std::string("EmptySentence");
  std::vector<std::string> hay_lower;
  for (const auto& t : out.tokens) hay_lower.push_back(text::lowercase(t.text));
  std::vector<std::string> needle_lower;
  for (const auto& t : needle) needle_lower.push_back(text::lowercase(t.text));

  size_t found = 0;
  for (size_t i = 0; i + needle_lower.size() <= hay_lower.size();) {
    if (std::equal(needle_lower.begin(), needle_lower.end(), hay_lower.begin() + static_cast<std::ptrdiff_t>(i))) {
      out.tags[i] = corpus::Tag::begin(entity.entity_type);
      for (size_t k = 1; k < needle_lower.size(); ++k) out.tags[i + k] = corpus::Tag::inside(entity.entity_type);
      i += needle_lower.size();
      ++found;
    } else {
      ++i;
    }
  }
  if (found == 0) return std::string("EntityNotFound");
  return out;
}

std::vector<CandidateSample> gen_ner_batch(const SeedEntity& entity, const forge::PromptTemplate& tmpl,
                                           const GenerationConfig& cfg, llm::Gateway& gateway, size_t entity_index) {
  if (tmpl.task != forge::PromptTask::NerGen) {
    throw Error(ErrorCode::TaskMismatch, "template '" + tmpl.id + "' is not an NER-gen template");
  }
  cfg.validate();
  const std::string prompt = forge::render(
      tmpl, {{std::string(forge::kSeedEntities), entity.surface}, {std::string(forge::kCount), std::to_string(cfg.n_per_entity)}});
  const auto reply = gateway.complete(llm::user_request(prompt, llm::kGenerationTemperature));
  if (text::trim(reply.content).empty()) throw Error(ErrorCode::EmptyReply, "empty reply for seed '" + entity.surface + "'");

  const ParsedReply parsed = parse_generation_reply(reply.content, forge::PromptTask::NerGen);
  std::vector<CandidateSample> out;
  int accepted = 0;
  auto base = [&](size_t line, const std::string& raw) {
    CandidateSample c;
    c.prompt_id = tmpl.id;
    c.seed_ref = entity.surface;
    c.round = tmpl.round;
    c.raw_line = raw;
    c.group = entity_index;
    c.line = line;
    return c;
  };
  size_t ai = 0;
  size_t ri = 0;
  // Merge accepts and rejects back into reply order.
  while (ai < parsed.accepts.size() || ri < parsed.rejects.size()) {
    const bool take_accept =
        ri >= parsed.rejects.size() || (ai < parsed.accepts.size() && parsed.accepts[ai].position < parsed.rejects[ri].position);
    if (!take_accept) {
      const auto& r = parsed.rejects[ri++];
      CandidateSample c = base(r.position, r.text);
      c.payload = corpus::TaggedSentence{};
      c.reject_reason = r.reason;
      out.push_back(std::move(c));
      continue;
    }
    const auto& line = parsed.accepts[ai++];
    CandidateSample c = base(line.position, line.text);
    auto annotated = annotate_entity(line.text, entity);
    if (auto* reason = std::get_if<std::string>(&annotated)) {
      c.payload = corpus::TaggedSentence{corpus::tokenize(line.text), {}};
      auto& s = std::get<corpus::TaggedSentence>(c.payload);
      s.tags.assign(s.tokens.size(), corpus::Tag::outside());
      c.reject_reason = *reason;
    } else {
      c.payload = std::move(std::get<corpus::TaggedSentence>(annotated));
      if (accepted >= cfg.n_per_entity) {
        c.reject_reason = "ExceedsQuota";
      } else {
        ++accepted;
      }
    }
    out.push_back(std::move(c));
  }
  return out;
}

std::string render_seed_rows(const std::vector<corpus::REExample>& rows) {
  std::string out;
  for (const auto& r : rows) {
    out += "| " + r.sentence + " | " + std::string(corpus::to_string(r.label)) + " |\n";
  }
  if (!out.empty()) out.pop_back();
  return out;
}

std::vector<CandidateSample> gen_re_batch(const SeedPool& pool, const forge::PromptTemplate& tmpl,
                                          const GenerationConfig& cfg, llm::Gateway& gateway, SplitMix64& rng,
                                          int round) {
  if (tmpl.task != forge::PromptTask::ReGen) {
    throw Error(ErrorCode::TaskMismatch, "template '" + tmpl.id + "' is not an RE-gen template");
  }
  if (pool.task != Task::RE) throw Error(ErrorCode::TaskMismatch, "seed pool is not an RE pool");
  cfg.validate();
  std::vector<size_t> pos_idx;
  std::vector<size_t> neg_idx;
  for (size_t i = 0; i < pool.re_examples.size(); ++i) {
    (pool.re_examples[i].label == Label::Yes ? pos_idx : neg_idx).push_back(i);
  }
  if (pos_idx.size() < static_cast<size_t>(cfg.pos_per_round) || neg_idx.size() < static_cast<size_t>(cfg.neg_per_round)) {
    throw Error(ErrorCode::PoolTooSmall, "seed pool has " + std::to_string(pos_idx.size()) + " positive and " +
                                             std::to_string(neg_idx.size()) + " negative examples; a round needs " +
                                             std::to_string(cfg.pos_per_round) + " and " +
                                             std::to_string(cfg.neg_per_round));
  }
  std::vector<corpus::REExample> seeds;
  std::vector<std::string> refs;
  for (size_t k : rng.sample_indices(pos_idx.size(), static_cast<size_t>(cfg.pos_per_round))) {
    seeds.push_back(pool.re_examples[pos_idx[k]]);
    refs.push_back("s" + std::to_string(pos_idx[k]));
  }
  for (size_t k : rng.sample_indices(neg_idx.size(), static_cast<size_t>(cfg.neg_per_round))) {
    seeds.push_back(pool.re_examples[neg_idx[k]]);
    refs.push_back("s" + std::to_string(neg_idx[k]));
  }
  const std::string prompt = forge::render(tmpl, {{std::string(forge::kSeedExamples), "\n" + render_seed_rows(seeds)}});
  const auto reply = gateway.complete(llm::user_request(prompt, llm::kGenerationTemperature));
  if (text::trim(reply.content).empty()) throw Error(ErrorCode::EmptyReply, "empty reply in RE round " + std::to_string(round));

  const ParsedReply parsed = parse_generation_reply(reply.content, forge::PromptTask::ReGen);
  const std::string seed_ref = text::join(refs, ",");
  std::vector<CandidateSample> out;
  int yes = 0;
  int no = 0;
  auto base = [&](size_t line, const std::string& raw) {
    CandidateSample c;
    c.prompt_id = tmpl.id;
    c.seed_ref = seed_ref;
    c.round = round;
    c.raw_line = raw;
    c.group = static_cast<size_t>(round);
    c.line = line;
    return c;
  };
  size_t ai = 0;
  size_t ri = 0;
  while (ai < parsed.accepts.size() || ri < parsed.rejects.size()) {
    const bool take_accept =
        ri >= parsed.rejects.size() || (ai < parsed.accepts.size() && parsed.accepts[ai].position < parsed.rejects[ri].position);
    if (!take_accept) {
      const auto& r = parsed.rejects[ri++];
      CandidateSample c = base(r.position, r.text);
      c.payload = corpus::REExample{r.text, Label::No, corpus::Source::Synthetic};
      c.reject_reason = r.reason;
      out.push_back(std::move(c));
      continue;
    }
    const auto& line = parsed.accepts[ai++];
    CandidateSample c = base(line.position, line.text);
    c.payload = corpus::REExample{line.text, *line.label, corpus::Source::Synthetic};
    if (line.text.find(corpus::kGenePlaceholder) == std::string::npos ||
        line.text.find(corpus::kDiseasePlaceholder) == std::string::npos) {
      c.reject_reason = "MissingPlaceholder";
    } else if (*line.label == Label::Yes) {
      if (yes >= cfg.pos_per_round) c.reject_reason = "ExceedsQuota";
      else ++yes;
    } else {
      if (no >= cfg.neg_per_round) c.reject_reason = "ExceedsQuota";
      else ++no;
    }
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<CandidateSample> generate_ner(const std::vector<SeedEntity>& entities, const forge::PromptTemplate& tmpl,
                                          const GenerationConfig& cfg, llm::Gateway& gateway) {
  cfg.validate();
  std::vector<std::vector<CandidateSample>> per_entity(entities.size());
  std::atomic<size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr first_error;
  size_t first_error_index = SIZE_MAX;
  auto worker = [&] {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= entities.size()) return;
      try {
        per_entity[i] = gen_ner_batch(entities[i], tmpl, cfg, gateway, i);
      } catch (...) {
        std::lock_guard guard(err_mu);
        // Report the lowest-index failure so errors are as reproducible as outputs.
        if (i < first_error_index) {
          first_error_index = i;
          first_error = std::current_exception();
        }
      }
    }
  };
  const size_t n_threads = std::min<size_t>(static_cast<size_t>(cfg.workers), std::max<size_t>(1, entities.size()));
  std::vector<std::thread> threads;
  for (size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);
  std::vector<CandidateSample> out;
  for (auto& batch : per_entity) {
    for (auto& c : batch) out.push_back(std::move(c));
  }
  return out;
}

json provenance_record(const CandidateSample& s) {
  json j{{"prompt_id", s.prompt_id},
         {"seed_ref", s.seed_ref},
         {"round", s.round},
         {"raw_line", s.raw_line},
         {"status", s.accepted() ? "accept" : "reject"}};
  j["reason"] = s.reject_reason ? json(*s.reject_reason) : json(nullptr);
  return j;
}

}  // namespace medsynth::gen
