#include "medsynth/corpus.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "medsynth/error.hpp"
#include "medsynth/text.hpp"

namespace medsynth::corpus {

std::optional<Tag> parse_tag(std::string_view s) {
  if (s == "O") return Tag::outside();
  if (s.size() > 2 && s[1] == '-' && (s[0] == 'B' || s[0] == 'I')) {
    std::string type(s.substr(2));
    if (type.find_first_of(" \t") != std::string::npos) return std::nullopt;
    return s[0] == 'B' ? Tag::begin(std::move(type)) : Tag::inside(std::move(type));
  }
  return std::nullopt;
}

std::string to_string(const Tag& tag) {
  switch (tag.kind) {
    case TagKind::O: return "O";
    case TagKind::B: return "B-" + tag.entity_type;
    case TagKind::I: return "I-" + tag.entity_type;
  }
  return "O";
}

std::string tags_to_string(const std::vector<Tag>& tags) {
  std::string out;
  for (size_t i = 0; i < tags.size(); ++i) {
    if (i) out += ' ';
    out += to_string(tags[i]);
  }
  return out;
}

std::string_view to_string(Label label) { return label == Label::Yes ? "Yes" : "No"; }

std::optional<Label> normalize_label(std::string_view raw) {
  const auto cps = text::decode(text::trim(raw));
  size_t b = 0;
  size_t e = cps.size();
  while (b < e && (text::is_punctuation(cps[b]) || text::is_space(cps[b]))) ++b;
  while (e > b && (text::is_punctuation(cps[e - 1]) || text::is_space(cps[e - 1]))) --e;
  std::string core;
  for (size_t i = b; i < e; ++i) core += text::encode(cps[i]);
  if (text::iequals(core, "yes")) return Label::Yes;
  if (text::iequals(core, "no")) return Label::No;
  return std::nullopt;
}

size_t count_occurrences(std::string_view haystack, std::string_view needle) {
  if (needle.empty()) return 0;
  size_t n = 0;
  for (size_t pos = haystack.find(needle); pos != std::string_view::npos;
       pos = haystack.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

std::string_view to_string(Task task) { return task == Task::NER ? "NER" : "RE"; }

std::string_view to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Test: return "test";
    case Split::SeedPool: return "seed-pool";
  }
  return "train";
}

Task parse_task(std::string_view s) {
  if (text::iequals(s, "NER")) return Task::NER;
  if (text::iequals(s, "RE")) return Task::RE;
  throw Error(ErrorCode::InvalidArgument, "unknown task '" + std::string(s) + "' (expected NER or RE)");
}

std::optional<Task> task_for_dataset_name(std::string_view name) {
  if (name == "ncbi-disease" || name == "bc5cdr-disease" || name == "bc5cdr-chemical") return Task::NER;
  if (name == "gad" || name == "euadr") return Task::RE;
  return std::nullopt;
}

void check_dataset_consistency(const Dataset& d) {
  if (auto expected = task_for_dataset_name(d.name); expected && *expected != d.task) {
    throw Error(ErrorCode::InvalidArgument,
                "dataset '" + d.name + "' is a " + std::string(to_string(*expected)) + " dataset");
  }
  if (d.task == Task::NER && !d.relations.empty()) throw Error(ErrorCode::InvalidArgument, "NER dataset holds RE items");
  if (d.task == Task::RE && !d.sentences.empty()) throw Error(ErrorCode::InvalidArgument, "RE dataset holds NER items");
}

std::vector<Token> tokenize(std::string_view input) {
  std::vector<Token> tokens;
  auto push = [&tokens](std::string s) { tokens.push_back(Token{std::move(s), tokens.size()}); };
  for (const auto& word : text::split_whitespace(input)) {
    const auto cps = text::decode(word);
    size_t b = 0;
    size_t e = cps.size();
    while (b < e && text::is_punctuation(cps[b])) ++b;
    while (e > b && text::is_punctuation(cps[e - 1])) --e;
    for (size_t i = 0; i < b; ++i) push(text::encode(cps[i]));
    if (b < e) {
      std::string core;
      for (size_t i = b; i < e; ++i) core += text::encode(cps[i]);
      push(std::move(core));
    }
    for (size_t i = std::max(b, e); i < cps.size(); ++i) push(text::encode(cps[i]));
  }
  return tokens;
}

std::string detokenize(const std::vector<Token>& tokens) {
  std::string out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i].text;
  }
  return out;
}

TaggedSentence make_sentence(const std::vector<std::string>& words, std::vector<Tag> tags) {
  TaggedSentence s;
  for (size_t i = 0; i < words.size(); ++i) s.tokens.push_back(Token{words[i], i});
  s.tags = std::move(tags);
  return s;
}

std::vector<Tag> validate_iob(std::vector<Tag> tags, IobMode mode) {
  for (size_t i = 0; i < tags.size(); ++i) {
    if (tags[i].kind != TagKind::I) continue;
    const bool continues = i > 0 && tags[i - 1].kind != TagKind::O && tags[i - 1].entity_type == tags[i].entity_type;
    if (continues) continue;
    if (mode == IobMode::Strict) {
      throw Error(ErrorCode::OrphanInsideTag, "orphan inside tag at position " + std::to_string(i));
    }
    tags[i].kind = TagKind::B;
  }
  return tags;
}

std::vector<EntitySpan> spans_from_tags(const std::vector<Tag>& raw) {
  const auto tags = validate_iob(raw, IobMode::Lenient);
  std::vector<EntitySpan> spans;
  for (size_t i = 0; i < tags.size(); ++i) {
    if (tags[i].kind != TagKind::B) continue;
    size_t end = i;
    while (end + 1 < tags.size() && tags[end + 1].kind == TagKind::I &&
           tags[end + 1].entity_type == tags[i].entity_type) {
      ++end;
    }
    spans.push_back(EntitySpan{i, end, tags[i].entity_type});
    i = end;
  }
  return spans;
}

std::vector<Tag> tags_from_spans(size_t token_count, std::vector<EntitySpan> spans) {
  std::sort(spans.begin(), spans.end());
  std::vector<Tag> tags(token_count);
  for (size_t k = 0; k < spans.size(); ++k) {
    const auto& s = spans[k];
    if (s.start > s.end || s.end >= token_count) {
      throw Error(ErrorCode::SpanOutOfRange, "span [" + std::to_string(s.start) + ", " + std::to_string(s.end) +
                                                 "] outside sentence of " + std::to_string(token_count) + " tokens");
    }
    if (s.entity_type.empty()) throw Error(ErrorCode::InvalidArgument, "span without entity type");
    if (k > 0 && spans[k - 1].end >= s.start) {
      throw Error(ErrorCode::OverlappingSpans, "spans starting at " + std::to_string(spans[k - 1].start) + " and " +
                                                   std::to_string(s.start) + " overlap");
    }
    tags[s.start] = Tag::begin(s.entity_type);
    for (size_t i = s.start + 1; i <= s.end; ++i) tags[i] = Tag::inside(s.entity_type);
  }
  return tags;
}

Dataset parse_conll(std::string_view bytes, std::string name, Split split) {
  Dataset d;
  d.name = std::move(name);
  d.task = Task::NER;
  d.split = split;
  TaggedSentence current;
  auto flush = [&] {
    if (!current.tokens.empty()) d.sentences.push_back(std::move(current));
    current = {};
  };
  const auto lines = text::split_lines(bytes);
  for (size_t ln = 0; ln < lines.size(); ++ln) {
    const std::string& line = lines[ln];
    if (text::trim(line).empty()) {
      flush();
      continue;
    }
    const auto fields = text::split(line, '\t');
    if (fields.size() != 2 || fields[0].empty()) {
      throw ParseError(ErrorCode::MalformedLine, ln + 1, fields.size() < 2 ? line.size() + 1 : fields[0].size() + 2,
                       "expected token<TAB>tag, found " + std::to_string(fields.size()) + " field(s)");
    }
    auto tag = parse_tag(fields[1]);
    if (!tag) {
      throw ParseError(ErrorCode::UnknownTag, ln + 1, fields[0].size() + 2, "unknown tag '" + fields[1] + "'");
    }
    current.tokens.push_back(Token{fields[0], current.tokens.size()});
    current.tags.push_back(std::move(*tag));
  }
  flush();
  if (d.sentences.empty()) throw Error(ErrorCode::EmptyInput, "no sentences in CoNLL input");
  check_dataset_consistency(d);
  return d;
}

std::string serialize_conll(const Dataset& d) {
  std::string out;
  for (const auto& s : d.sentences) {
    for (size_t i = 0; i < s.tokens.size(); ++i) {
      out += s.tokens[i].text;
      out += '\t';
      out += to_string(s.tags[i]);
      out += '\n';
    }
    out += '\n';
  }
  return out;
}

namespace {

void check_placeholders(const std::string& sentence, size_t line) {
  for (auto marker : {kGenePlaceholder, kDiseasePlaceholder}) {
    if (sentence.find(marker) == std::string::npos) {
      throw ParseError(ErrorCode::MissingPlaceholder, line, 1, "sentence lacks " + std::string(marker));
    }
  }
}

// "| sentence | label |"; pipes inside the sentence survive.
std::optional<std::pair<std::string, std::string>> split_pipe_row(const std::string& row) {
  std::string body = text::trim(row);
  if (body.empty() || body.front() != '|') return std::nullopt;
  body.erase(0, 1);
  if (!body.empty() && body.back() == '|') body.pop_back();
  const size_t last = body.rfind('|');
  if (last == std::string::npos) return std::pair{text::trim(body), std::string()};
  return std::pair{text::trim(body.substr(0, last)), text::trim(body.substr(last + 1))};
}

}  // namespace

Dataset parse_re_file(std::string_view bytes, std::string name, Split split, Source source) {
  Dataset d;
  d.name = std::move(name);
  d.task = Task::RE;
  d.split = split;
  const auto lines = text::split_lines(bytes);
  for (size_t ln = 0; ln < lines.size(); ++ln) {
    const std::string& line = lines[ln];
    if (text::trim(line).empty()) continue;
    std::string sentence;
    std::string label;
    if (auto row = split_pipe_row(line)) {
      std::tie(sentence, label) = *row;
    } else {
      const size_t tab = line.rfind('\t');
      if (tab == std::string::npos) {
        throw ParseError(ErrorCode::MalformedLine, ln + 1, line.size() + 1, "expected sentence<TAB>label");
      }
      sentence = line.substr(0, tab);
      label = line.substr(tab + 1);
    }
    if (sentence.empty()) throw ParseError(ErrorCode::MalformedLine, ln + 1, 1, "empty sentence");
    auto parsed = normalize_label(label);
    if (!parsed) throw ParseError(ErrorCode::BadLabel, ln + 1, sentence.size() + 2, "label '" + label + "' is not Yes/No");
    check_placeholders(sentence, ln + 1);
    d.relations.push_back(REExample{sentence, *parsed, source});
  }
  if (d.relations.empty()) throw Error(ErrorCode::EmptyInput, "no examples in RE input");
  check_dataset_consistency(d);
  return d;
}

std::string serialize_re(const Dataset& d) {
  std::string out;
  for (const auto& r : d.relations) {
    out += r.sentence;
    out += '\t';
    out += to_string(r.label);
    out += '\n';
  }
  return out;
}

Manifest parse_manifest(std::string_view content, const std::string& base_dir) {
  Manifest m;
  bool has_task = false;
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path.string() : (std::filesystem::path(base_dir) / path).lexically_normal().string();
  };
  const auto lines = text::split_lines(content);
  for (size_t ln = 0; ln < lines.size(); ++ln) {
    const std::string line = text::trim(lines[ln]);
    if (line.empty() || line[0] == '#') continue;
    const size_t colon = line.find(':');
    if (colon == std::string::npos) throw ParseError(ErrorCode::MalformedLine, ln + 1, 1, "expected key: value");
    const std::string key = text::trim(line.substr(0, colon));
    const std::string value = text::trim(line.substr(colon + 1));
    if (key == "name") {
      m.name = value;
    } else if (key == "task") {
      m.task = parse_task(value);
      has_task = true;
    } else if (key == "train") {
      m.paths[Split::Train] = resolve(value);
    } else if (key == "test") {
      m.paths[Split::Test] = resolve(value);
    } else if (key == "seed_pool" || key == "seed-pool") {
      m.paths[Split::SeedPool] = resolve(value);
    } else if (key == "entity_types") {
      for (const auto& t : text::split(value, ',')) {
        if (auto trimmed = text::trim(t); !trimmed.empty()) m.entity_types.push_back(trimmed);
      }
    } else {
      throw ParseError(ErrorCode::MalformedLine, ln + 1, 1, "unknown manifest key '" + key + "'");
    }
  }
  if (!has_task) {
    auto t = task_for_dataset_name(m.name);
    if (!t) throw Error(ErrorCode::ConfigError, "manifest lacks 'task' and name '" + m.name + "' does not imply one");
    m.task = *t;
  }
  if (auto t = task_for_dataset_name(m.name); t && *t != m.task) {
    throw Error(ErrorCode::ConfigError, "manifest task does not match dataset '" + m.name + "'");
  }
  return m;
}

Manifest load_manifest(const std::string& path) {
  return parse_manifest(read_file(path), std::filesystem::path(path).parent_path().string());
}

Dataset load_dataset(const Manifest& m, Split split) {
  auto it = m.paths.find(split);
  if (it == m.paths.end()) {
    throw Error(ErrorCode::ConfigError, "manifest has no " + std::string(to_string(split)) + " path");
  }
  const std::string bytes = read_file(it->second);
  if (m.task == Task::NER) return parse_conll(bytes, m.name, split);
  return parse_re_file(bytes, m.name, split, Source::Original);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view content) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write '" + path + "'");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error(ErrorCode::Io, "short write to '" + path + "'");
}

}  // namespace medsynth::corpus
