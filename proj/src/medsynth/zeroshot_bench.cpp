#include "medsynth/zeroshot_bench.hpp"

#include <algorithm>
#include <atomic>
#include <regex>
#include <thread>

#include "medsynth/error.hpp"
#include "medsynth/text.hpp"

namespace medsynth::bench {

using corpus::Tag;
using corpus::TagKind;
using json = nlohmann::json;

llm::ChatRequest build_task_prompt(const corpus::TaggedSentence& item, const forge::PromptTemplate& tmpl) {
  if (tmpl.task != forge::PromptTask::NerZeroshot) {
    throw Error(ErrorCode::TaskMismatch, "template '" + tmpl.id + "' is not an NER-zeroshot template");
  }
  return llm::user_request(forge::render(tmpl, {{std::string(forge::kText), corpus::detokenize(item.tokens)}}),
                           llm::kTaskTemperature);
}

llm::ChatRequest build_task_prompt(const corpus::REExample& item, const forge::PromptTemplate& tmpl) {
  if (tmpl.task != forge::PromptTask::ReZeroshot) {
    throw Error(ErrorCode::TaskMismatch, "template '" + tmpl.id + "' is not an RE-zeroshot template");
  }
  return llm::user_request(forge::render(tmpl, {}) + "\n" + item.sentence, llm::kTaskTemperature);
}

namespace {

bool tag_shaped(const std::string& s) {
  if (s == "O" || s == "o") return true;
  return s.size() > 2 && (s[0] == 'B' || s[0] == 'I' || s[0] == 'b' || s[0] == 'i') && (s[1] == '-' || s[1] == '_');
}

std::optional<std::pair<std::string, std::string>> split_pair(const std::string& line) {
  static const std::regex wide_gap(R"(\s{2,})");
  std::vector<std::string> fields;
  if (line.find('\t') != std::string::npos) {
    for (auto& f : text::split(line, '\t')) {
      if (auto t = text::trim(f); !t.empty()) fields.push_back(t);
    }
  } else if (std::regex_search(line, wide_gap)) {
    std::sregex_token_iterator it(line.begin(), line.end(), wide_gap, -1), end;
    for (; it != end; ++it) {
      if (auto t = text::trim(it->str()); !t.empty()) fields.push_back(t);
    }
  } else {
    fields = text::split_whitespace(line);
    if (fields.size() != 2 || !tag_shaped(fields[1])) return std::nullopt;
  }
  if (fields.size() != 2) return std::nullopt;
  return std::pair{fields[0], fields[1]};
}

}  // namespace

IobParse parse_iob_reply(const std::string& reply, const std::vector<std::string>& entity_types) {
  IobParse out;
  const auto lines = text::split_lines(reply);
  for (size_t ln = 0; ln < lines.size(); ++ln) {
    const std::string line = text::trim(lines[ln]);
    const std::string where = "line " + std::to_string(ln + 1) + ": ";
    if (line.empty()) continue;
    if (text::starts_with(line, "```")) {
      out.diagnostics.push_back(where + "code fence skipped");
      continue;
    }
    auto pair = split_pair(line);
    if (!pair) {
      out.diagnostics.push_back(where + "not a word/tag line, skipped");
      continue;
    }
    auto& [word, raw_tag] = *pair;
    Tag tag;
    if (raw_tag == "O" || raw_tag == "o") {
      tag = Tag::outside();
    } else if (tag_shaped(raw_tag)) {
      const bool begin = raw_tag[0] == 'B' || raw_tag[0] == 'b';
      std::string type = raw_tag.substr(2);
      bool known = entity_types.empty();
      for (const auto& t : entity_types) {
        if (text::iequals(t, type)) {
          type = t;
          known = true;
          break;
        }
      }
      if (known) {
        tag = begin ? Tag::begin(type) : Tag::inside(type);
      } else {
        out.diagnostics.push_back(where + "undeclared entity type '" + type + "' mapped to O");
      }
    } else {
      out.diagnostics.push_back(where + "unknown tag '" + raw_tag + "' mapped to O");
    }
    out.pairs.emplace_back(word, std::move(tag));
  }
  if (out.pairs.empty()) out.diagnostics.push_back("no word/tag lines in reply");
  return out;
}

std::vector<Tag> realign(const std::vector<std::pair<std::string, Tag>>& pred, const std::vector<corpus::Token>& gold) {
  const size_t m = pred.size();
  const size_t n = gold.size();
  std::vector<std::string> a(m);
  std::vector<std::string> b(n);
  for (size_t i = 0; i < m; ++i) a[i] = text::lowercase(pred[i].first);
  for (size_t j = 0; j < n; ++j) b[j] = text::lowercase(gold[j].text);
  // suffix[i][j] = LCS length of a[i:] and b[j:]
  std::vector<std::vector<uint32_t>> suffix(m + 1, std::vector<uint32_t>(n + 1, 0));
  for (size_t i = m; i-- > 0;) {
    for (size_t j = n; j-- > 0;) {
      suffix[i][j] = a[i] == b[j] ? suffix[i + 1][j + 1] + 1 : std::max(suffix[i + 1][j], suffix[i][j + 1]);
    }
  }
  std::vector<Tag> tags(n);
  size_t i = 0;
  size_t j = 0;
  while (i < m && j < n) {
    if (a[i] == b[j] && suffix[i][j] == suffix[i + 1][j + 1] + 1) {
      tags[j] = pred[i].second;
      ++i;
      ++j;
    } else if (suffix[i + 1][j] >= suffix[i][j + 1]) {
      ++i;
    } else {
      ++j;
    }
  }
  return corpus::validate_iob(std::move(tags), corpus::IobMode::Lenient);
}

LabelReply parse_label_reply(const std::string& reply) {
  std::string first;
  for (const auto& line : text::split_lines(reply)) {
    if (!text::trim(line).empty()) {
      first = line;
      break;
    }
  }
  bool yes = false;
  bool no = false;
  for (const auto& word : text::split_whitespace(first)) {
    if (auto label = corpus::normalize_label(word)) {
      (*label == corpus::Label::Yes ? yes : no) = true;
    }
  }
  if (yes == no) return LabelReply::Invalid;
  return yes ? LabelReply::Yes : LabelReply::No;
}

size_t BenchRun::prediction_count() const {
  return static_cast<size_t>(std::count_if(items.begin(), items.end(), [](const auto& i) { return !i.failed; }));
}

size_t BenchRun::failure_count() const { return items.size() - prediction_count(); }

double BenchRun::invalid_rate() const {
  if (items.empty()) return 0.0;
  const auto n = std::count_if(items.begin(), items.end(), [](const auto& i) { return i.invalid; });
  return static_cast<double>(n) / static_cast<double>(items.size());
}

score::Metrics BenchRun::score(const corpus::Dataset& gold) const {
  if (gold.size() != items.size()) throw Error(ErrorCode::ShapeMismatch, "bench run and gold differ in size");
  if (task == corpus::Task::NER) {
    std::vector<std::vector<Tag>> pred;
    for (const auto& item : items) pred.push_back(item.tags);
    return score::span_prf(gold.sentences, pred);
  }
  std::vector<corpus::Label> g;
  std::vector<corpus::Label> p;
  for (size_t i = 0; i < items.size(); ++i) {
    g.push_back(gold.relations[i].label);
    p.push_back(items[i].label.value_or(corpus::Label::No));
  }
  return score::cls_prf(g, p);
}

corpus::Dataset take_subset(const corpus::Dataset& data, size_t k) {
  corpus::Dataset out = data;
  if (k == 0) return out;
  if (out.sentences.size() > k) out.sentences.resize(k);
  if (out.relations.size() > k) out.relations.resize(k);
  return out;
}

BenchRun run_bench(const corpus::Dataset& data, const forge::PromptTemplate& tmpl, llm::Gateway& gateway,
                   const BenchOptions& options) {
  const corpus::Dataset subset = take_subset(data, options.subset);
  const bool ner = subset.task == corpus::Task::NER;
  if (tmpl.task != (ner ? forge::PromptTask::NerZeroshot : forge::PromptTask::ReZeroshot)) {
    throw Error(ErrorCode::TaskMismatch, "template '" + tmpl.id + "' does not fit a " +
                                             std::string(corpus::to_string(subset.task)) + " dataset");
  }
  BenchRun run;
  run.task = subset.task;
  run.tmpl = tmpl;
  run.items.resize(subset.size());

  auto process = [&](size_t i) {
    BenchItem& item = run.items[i];
    item.id = i;
    try {
      if (ner) {
        const auto& s = subset.sentences[i];
        item.raw_reply = gateway.complete(build_task_prompt(s, tmpl)).content;
        IobParse parsed = parse_iob_reply(item.raw_reply, options.entity_types);
        item.diagnostics = std::move(parsed.diagnostics);
        if (parsed.pairs.empty()) {
          item.failed = true;
          item.tags.assign(s.tokens.size(), Tag::outside());
        } else {
          item.tags = realign(parsed.pairs, s.tokens);
        }
      } else {
        const auto& r = subset.relations[i];
        item.raw_reply = gateway.complete(build_task_prompt(r, tmpl)).content;
        switch (parse_label_reply(item.raw_reply)) {
          case LabelReply::Yes: item.label = corpus::Label::Yes; break;
          case LabelReply::No: item.label = corpus::Label::No; break;
          case LabelReply::Invalid:
            item.label = corpus::Label::No;
            item.invalid = true;
            item.diagnostics.push_back("reply has no unambiguous Yes/No; scored as No");
            break;
        }
      }
    } catch (const Error& e) {
      item.failed = true;
      item.diagnostics.push_back(std::string(error_class_name(e.code())) + ": " + e.what());
      if (ner) {
        item.tags.assign(subset.sentences[i].tokens.size(), Tag::outside());
      } else {
        item.label = corpus::Label::No;
      }
    }
  };

  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t i = next.fetch_add(1); i < run.items.size(); i = next.fetch_add(1)) process(i);
  };
  const size_t n_threads = std::clamp<size_t>(static_cast<size_t>(std::max(1, options.workers)), 1,
                                              std::max<size_t>(1, run.items.size()));
  std::vector<std::thread> threads;
  for (size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  return run;
}

json bench_record(const BenchItem& item, corpus::Task task) {
  json j{{"id", item.id}, {"raw", item.raw_reply}, {"diagnostics", item.diagnostics}, {"failed", item.failed}};
  if (task == corpus::Task::NER) {
    json tags = json::array();
    for (const auto& t : item.tags) tags.push_back(corpus::to_string(t));
    j["tags"] = std::move(tags);
  } else {
    j["label"] = item.label ? json(corpus::to_string(*item.label)) : json(nullptr);
    j["invalid"] = item.invalid;
  }
  return j;
}

std::string bench_jsonl(const BenchRun& run) {
  std::string out;
  for (const auto& item : run.items) out += bench_record(item, run.task).dump() + "\n";
  return out;
}

}  // namespace medsynth::bench
