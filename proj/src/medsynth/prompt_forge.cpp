#include "medsynth/prompt_forge.hpp"

#include <cctype>
#include <filesystem>
#include <fstream>
#include <regex>

#include "medsynth/corpus.hpp"
#include "medsynth/error.hpp"
#include "medsynth/text.hpp"

namespace medsynth::forge {

using json = nlohmann::json;

std::string_view to_string(PromptTask task) {
  switch (task) {
    case PromptTask::NerGen: return "NER-gen";
    case PromptTask::ReGen: return "RE-gen";
    case PromptTask::NerZeroshot: return "NER-zeroshot";
    case PromptTask::ReZeroshot: return "RE-zeroshot";
  }
  return "NER-gen";
}

PromptTask parse_prompt_task(std::string_view s) {
  for (auto t : {PromptTask::NerGen, PromptTask::ReGen, PromptTask::NerZeroshot, PromptTask::ReZeroshot}) {
    if (text::iequals(s, to_string(t))) return t;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown prompt task '" + std::string(s) + "'");
}

const std::set<std::string>& required_placeholders(PromptTask task) {
  static const std::set<std::string> ner_gen{std::string(kSeedEntities), std::string(kCount)};
  static const std::set<std::string> re_gen{std::string(kSeedExamples)};
  static const std::set<std::string> ner_zero{std::string(kText)};
  static const std::set<std::string> re_zero{};
  switch (task) {
    case PromptTask::NerGen: return ner_gen;
    case PromptTask::ReGen: return re_gen;
    case PromptTask::NerZeroshot: return ner_zero;
    case PromptTask::ReZeroshot: return re_zero;
  }
  return re_zero;
}

namespace {

bool is_word_byte(char c) {
  const auto u = static_cast<unsigned char>(c);
  return std::isalnum(u) || u >= 0x80 || c == '_';
}

struct Occurrence {
  size_t pos;
  std::string_view name;
};

// Placeholder occurrences in body order.
std::vector<Occurrence> scan(std::string_view body) {
  static constexpr std::string_view kBracketed[] = {kSeedEntities, kSeedExamples, kTaskDescriptions};
  std::vector<Occurrence> out;
  size_t i = 0;
  while (i < body.size()) {
    bool matched = false;
    if (body.compare(i, kText.size(), kText) == 0 &&
        (i + kText.size() == body.size() || !is_word_byte(body[i + kText.size()]))) {
      out.push_back({i, kText});
      i += kText.size();
      continue;
    }
    for (auto name : kBracketed) {
      if (body.compare(i, name.size(), name) == 0) {
        out.push_back({i, name});
        i += name.size();
        matched = true;
        break;
      }
    }
    if (matched) continue;
    if (body[i] == 'N' && (i == 0 || !is_word_byte(body[i - 1])) &&
        (i + 1 == body.size() || !is_word_byte(body[i + 1]))) {
      out.push_back({i, kCount});
    }
    ++i;
  }
  return out;
}

}  // namespace

std::set<std::string> find_placeholders(std::string_view body) {
  std::set<std::string> names;
  for (const auto& occ : scan(body)) names.emplace(occ.name);
  return names;
}

bool satisfies_placeholder_invariant(const PromptTemplate& t) {
  return find_placeholders(t.body) == required_placeholders(t.task);
}

std::string render(const PromptTemplate& t, const Bindings& bindings) {
  const auto occurrences = scan(t.body);
  std::set<std::string> present;
  for (const auto& occ : occurrences) {
    present.emplace(occ.name);
    if (!bindings.count(std::string(occ.name))) {
      throw Error(ErrorCode::UnboundPlaceholder, "placeholder " + std::string(occ.name) + " in template '" + t.id +
                                                     "' has no binding");
    }
  }
  for (const auto& [key, value] : bindings) {
    if (!present.count(key)) {
      throw Error(ErrorCode::UnknownPlaceholder, "binding '" + key + "' matches no placeholder in template '" + t.id + "'");
    }
  }
  std::string out;
  size_t cursor = 0;
  for (const auto& occ : occurrences) {
    out.append(t.body, cursor, occ.pos - cursor);
    out += bindings.at(std::string(occ.name));
    cursor = occ.pos + occ.name.size();
  }
  out.append(t.body, cursor, std::string::npos);
  return out;
}

PromptTemplate builtin_template(PromptTask task, const std::string& entity_type) {
  PromptTemplate t;
  t.task = task;
  t.round = 0;
  switch (task) {
    case PromptTask::NerZeroshot:
      t.id = "builtin-ner-zeroshot";
      t.body =
          "Please do NER task for \"@TEXT\" (output IOB format, please output the results only without your "
          "explanation, use tab key to separate the word and label, the entity is " +
          text::lowercase(entity_type) + " name, please use the space key to separate the sentences)";
      break;
    case PromptTask::ReZeroshot:
      t.id = "builtin-re-zeroshot";
      t.body =
          "Given a sentence that introduces a gene (denoted as \"@GENE$\") and a disease (denoted as "
          "\"@DISEASE$\"), predict whether the gene and disease have a relation or not. The relation between the "
          "gene and disease can be any functional, causal, or associative connection. If there is a relation, then "
          "the label should be \"Yes\", otherwise \"No\".";
      break;
    case PromptTask::NerGen:
      t.id = "builtin-ner-gen";
      t.body =
          "Please act as a sentence generator for the biological domain and provide N sentences containing the "
          "words [Seed Entities]. These sentences should not include any additional information or explanation. "
          "Generated sentences should mimic the style of PubMed journal articles, using a variety of sentence "
          "structures:";
      break;
    case PromptTask::ReGen:
      t.id = "builtin-re-gen";
      t.body =
          "Generate 3 positive and 3 negative examples for the gene-disease relation extraction task. The target "
          "gene is denoted as \"@GENE$\" and the target disease is denoted as \"@DISEASE$\".  The label is whether "
          "there is a relation between the target gene and disease. The relationship can be any functional, causal, "
          "or associative connection. If there is a relation, then the label should be \"Yes\". If there is no "
          "relation, the label should be \"No\". Sentences mimic the style of PubMed journal articles with various "
          "sentence structures. [Seed Examples]";
      break;
  }
  return t;
}

namespace {

std::string placeholder_clause(PromptTask task) {
  const auto& names = required_placeholders(task);
  if (names.empty()) return "Do not use placeholders.";
  std::vector<std::string> parts(names.begin(), names.end());
  return "Use the placeholders " + text::join(parts, ", ") + " verbatim where the inputs go.";
}

}  // namespace

llm::ChatRequest meta_prompt(const std::string& task_description, PromptTask task) {
  if (text::trim(task_description).empty()) throw Error(ErrorCode::InvalidArgument, "task description is empty");
  std::string prompt = "Provide five concise prompts or templates that can be used to generate data samples of " +
                       text::trim(task_description) + ". Number the templates 1 to 5, one per line. " +
                       placeholder_clause(task);
  return llm::user_request(std::move(prompt), llm::kGenerationTemperature);
}

llm::ChatRequest augmentation_prompt(const PromptTemplate& best) {
  std::string body = best.body;
  for (char& c : body) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  std::string prompt =
      "Augment five prompts based on the previous best prompt. Number the new prompts 1 to 5, one per line. " +
      placeholder_clause(best.task) + "\nPrevious best prompt: " + body;
  return llm::user_request(std::move(prompt), llm::kGenerationTemperature);
}

std::vector<PromptTemplate> parse_candidates(const std::string& reply, PromptTask task, int round) {
  static const std::regex marker(R"(^\s*(?:\d+[.)]|[-*•])\s+(.*)$)");
  std::vector<std::string> items;
  bool continuing = false;
  for (const auto& line : text::split_lines(reply)) {
    std::smatch m;
    const std::string trimmed = text::trim(line);
    if (std::regex_match(line, m, marker)) {
      items.push_back(text::trim(m[1].str()));
      continuing = true;
    } else if (trimmed.empty()) {
      continuing = false;
    } else if (continuing && !items.empty()) {
      items.back() += " " + trimmed;
    }
  }
  if (items.empty()) throw Error(ErrorCode::UnparseableReply, "reply contains no list items");
  if (items.size() != kCandidatesPerRound) {
    throw Error(ErrorCode::CandidateCountMismatch,
                "expected 5 candidates, reply has " + std::to_string(items.size()));
  }
  std::vector<PromptTemplate> out;
  for (size_t i = 0; i < items.size(); ++i) {
    std::string body = items[i];
    if (body.size() >= 2 && ((body.front() == '"' && body.back() == '"') || (body.front() == '\'' && body.back() == '\''))) {
      body = body.substr(1, body.size() - 2);
    }
    out.push_back(PromptTemplate{"r" + std::to_string(round) + "c" + std::to_string(i + 1), task, body, round});
  }
  return out;
}

std::string_view to_string(RoundStatus s) {
  switch (s) {
    case RoundStatus::AwaitingSamples: return "awaiting-samples";
    case RoundStatus::AwaitingSelection: return "awaiting-selection";
    case RoundStatus::Closed: return "closed";
  }
  return "closed";
}

namespace {

RoundState new_round(int index, std::vector<PromptTemplate> candidates, int samples_per_candidate) {
  if (candidates.size() != kCandidatesPerRound) {
    throw Error(ErrorCode::CandidateCountMismatch, "a round needs exactly 5 candidates");
  }
  RoundState r;
  r.round_index = index;
  r.candidates = std::move(candidates);
  r.samples_per_candidate = samples_per_candidate;
  r.status = RoundStatus::AwaitingSamples;
  return r;
}

}  // namespace

CandidateSource gateway_candidates(llm::Gateway& gateway, PromptTask task) {
  return [&gateway, task](const llm::ChatRequest& request, int round) {
    return parse_candidates(gateway.complete(request).content, task, round);
  };
}

RefinementLog open_refinement(PromptTask task, const std::string& description, int budget, int samples_per_candidate,
                              const CandidateSource& source) {
  if (budget < 1) throw Error(ErrorCode::InvalidArgument, "round budget must be at least 1");
  if (samples_per_candidate < 1) throw Error(ErrorCode::InvalidArgument, "samples per candidate must be positive");
  RefinementLog log;
  log.task = task;
  log.task_description = description;
  log.budget = budget;
  log.samples_per_candidate = samples_per_candidate;
  log.rounds.push_back(new_round(1, source(meta_prompt(description, task), 1), samples_per_candidate));
  return log;
}

RefinementLog record_samples(RefinementLog log, const SampleSource& samples) {
  if (log.rounds.empty() || log.rounds.back().status != RoundStatus::AwaitingSamples) {
    throw Error(ErrorCode::RoundNotReady, "current round is not awaiting samples");
  }
  RoundState& round = log.rounds.back();
  round.samples.clear();
  for (const auto& candidate : round.candidates) {
    auto s = samples(candidate, round.samples_per_candidate);
    if (s.size() > static_cast<size_t>(round.samples_per_candidate)) s.resize(round.samples_per_candidate);
    round.samples.push_back(std::move(s));
  }
  round.status = RoundStatus::AwaitingSelection;
  return log;
}

RefinementLog advance_round(RefinementLog log, int selection, const std::string& rationale,
                            const CandidateSource& source) {
  if (log.rounds.empty() || log.rounds.back().status != RoundStatus::AwaitingSelection) {
    throw Error(ErrorCode::RoundNotReady, "current round is not awaiting a selection");
  }
  RoundState& round = log.rounds.back();
  if (selection < 1 || selection > static_cast<int>(round.candidates.size())) {
    throw Error(ErrorCode::InvalidSelection, "candidate " + std::to_string(selection) + " is not in round " +
                                                 std::to_string(round.round_index));
  }
  const PromptTemplate chosen = round.candidates[static_cast<size_t>(selection - 1)];
  if (!satisfies_placeholder_invariant(chosen)) {
    throw Error(ErrorCode::InvalidSelection, "candidate " + std::to_string(selection) +
                                                 " lacks the placeholders its task requires");
  }
  // Build the next round before mutating, so a failed request leaves the log untouched.
  std::optional<RoundState> next;
  if (round.round_index < log.budget) {
    next = new_round(round.round_index + 1, source(augmentation_prompt(chosen), round.round_index + 1),
                     log.samples_per_candidate);
  }
  round.selection = selection;
  round.rationale = rationale;
  round.status = RoundStatus::Closed;
  if (next) {
    log.rounds.push_back(std::move(*next));
  } else {
    log.final_prompt = chosen;
  }
  return log;
}

json to_json(const PromptTemplate& t) {
  return json{{"id", t.id}, {"task", to_string(t.task)}, {"body", t.body}, {"round", t.round}};
}

PromptTemplate template_from_json(const json& j) {
  return PromptTemplate{j.at("id").get<std::string>(), parse_prompt_task(j.at("task").get<std::string>()),
                        j.at("body").get<std::string>(), j.value("round", 0)};
}

json round_to_json(const RoundState& r) {
  json candidates = json::array();
  for (size_t i = 0; i < r.candidates.size(); ++i) {
    json c = to_json(r.candidates[i]);
    c["number"] = i + 1;
    c["samples"] = i < r.samples.size() ? json(r.samples[i]) : json::array();
    candidates.push_back(std::move(c));
  }
  json out{{"round", r.round_index},
           {"status", to_string(r.status)},
           {"samples_per_candidate", r.samples_per_candidate},
           {"candidates", candidates}};
  out["selection"] = r.selection ? json(*r.selection) : json(nullptr);
  out["rationale"] = r.rationale;
  return out;
}

RefinementStore::RefinementStore(std::string path) : path_(std::move(path)) {}

bool RefinementStore::exists() const { return std::filesystem::exists(path_); }

RefinementLog RefinementStore::load() const {
  const std::string content = corpus::read_file(path_);
  RefinementLog log;
  bool have_session = false;
  const auto lines = text::split_lines(content);
  for (size_t ln = 0; ln < lines.size(); ++ln) {
    if (text::trim(lines[ln]).empty()) continue;
    json e;
    try {
      e = json::parse(lines[ln]);
    } catch (const json::exception& ex) {
      throw ParseError(ErrorCode::MalformedLine, ln + 1, 1, std::string("refinement log: ") + ex.what());
    }
    const std::string kind = e.at("event").get<std::string>();
    if (kind == "session") {
      log.task = parse_prompt_task(e.at("task").get<std::string>());
      log.task_description = e.at("description").get<std::string>();
      log.budget = e.at("budget").get<int>();
      log.samples_per_candidate = e.at("samples_per_candidate").get<int>();
      have_session = true;
    } else if (kind == "round_opened") {
      std::vector<PromptTemplate> candidates;
      for (const auto& c : e.at("candidates")) candidates.push_back(template_from_json(c));
      log.rounds.push_back(new_round(e.at("round").get<int>(), std::move(candidates), log.samples_per_candidate));
    } else if (kind == "samples_recorded") {
      if (log.rounds.empty()) throw ParseError(ErrorCode::MalformedLine, ln + 1, 1, "samples before any round");
      log.rounds.back().samples = e.at("samples").get<std::vector<std::vector<std::string>>>();
      log.rounds.back().status = RoundStatus::AwaitingSelection;
    } else if (kind == "selection") {
      if (log.rounds.empty()) throw ParseError(ErrorCode::MalformedLine, ln + 1, 1, "selection before any round");
      auto& r = log.rounds.back();
      r.selection = e.at("candidate").get<int>();
      r.rationale = e.value("rationale", "");
      r.status = RoundStatus::Closed;
    } else if (kind == "final") {
      log.final_prompt = template_from_json(e.at("template"));
    } else {
      throw ParseError(ErrorCode::MalformedLine, ln + 1, 1, "unknown event '" + kind + "'");
    }
  }
  if (!have_session) throw Error(ErrorCode::ConfigError, "refinement log " + path_ + " has no session header");
  return log;
}

void RefinementStore::append_transition(const RefinementLog& before, const RefinementLog& after) {
  std::vector<json> events;
  if (before.rounds.empty()) {
    events.push_back(json{{"event", "session"},
                          {"task", to_string(after.task)},
                          {"description", after.task_description},
                          {"budget", after.budget},
                          {"samples_per_candidate", after.samples_per_candidate}});
  }
  for (size_t i = 0; i < after.rounds.size(); ++i) {
    const RoundState& now = after.rounds[i];
    const RoundState* prev = i < before.rounds.size() ? &before.rounds[i] : nullptr;
    if (!prev) {
      json candidates = json::array();
      for (const auto& c : now.candidates) candidates.push_back(to_json(c));
      events.push_back(json{{"event", "round_opened"}, {"round", now.round_index}, {"candidates", candidates}});
    }
    const RoundStatus prev_status = prev ? prev->status : RoundStatus::AwaitingSamples;
    if (prev_status == RoundStatus::AwaitingSamples && now.status != RoundStatus::AwaitingSamples) {
      events.push_back(json{{"event", "samples_recorded"}, {"round", now.round_index}, {"samples", now.samples}});
    }
    if (prev_status != RoundStatus::Closed && now.status == RoundStatus::Closed) {
      events.push_back(json{{"event", "selection"},
                            {"round", now.round_index},
                            {"candidate", *now.selection},
                            {"rationale", now.rationale}});
    }
  }
  if (!before.final_prompt && after.final_prompt) {
    events.push_back(json{{"event", "final"}, {"template", to_json(*after.final_prompt)}});
  }
  const auto parent = std::filesystem::path(path_).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path_, std::ios::binary | std::ios::app);
  if (!out) throw Error(ErrorCode::Io, "cannot append to " + path_);
  for (const auto& e : events) out << e.dump() << '\n';
  out.flush();
  if (!out) throw Error(ErrorCode::Io, "short write to " + path_);
}

PromptTemplate load_template_file(const std::string& path) {
  const std::string content = corpus::read_file(path);
  const size_t nl = content.find('\n');
  const std::string first = text::trim(content.substr(0, nl));
  if (!text::starts_with(first, "task:")) {
    throw Error(ErrorCode::ConfigError, "template file " + path + " must start with 'task: <task>'");
  }
  PromptTemplate t;
  t.task = parse_prompt_task(text::trim(first.substr(5)));
  t.id = std::filesystem::path(path).stem().string();
  t.body = nl == std::string::npos ? "" : text::trim(content.substr(nl + 1));
  if (!satisfies_placeholder_invariant(t)) {
    throw Error(ErrorCode::ConfigError, "template " + path + " does not carry exactly the placeholders its task requires");
  }
  return t;
}

std::string template_file_content(const PromptTemplate& t) {
  return "task: " + std::string(to_string(t.task)) + "\n" + t.body + "\n";
}

}  // namespace medsynth::forge
