#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

// NER and RE datasets: tokenization, IOB tags, entity spans, and the file
// formats they travel in.
namespace medsynth::corpus {

struct Token {
  std::string text;
  size_t index = 0;

  friend bool operator==(const Token&, const Token&) = default;
};

enum class TagKind { O, B, I };

struct Tag {
  TagKind kind = TagKind::O;
  std::string entity_type;  // empty iff kind == O

  static Tag outside() { return {}; }
  static Tag begin(std::string type) { return {TagKind::B, std::move(type)}; }
  static Tag inside(std::string type) { return {TagKind::I, std::move(type)}; }

  friend bool operator==(const Tag&, const Tag&) = default;
};

// Parses "O", "B-<type>" or "I-<type>"; nullopt for anything else.
std::optional<Tag> parse_tag(std::string_view s);
std::string to_string(const Tag& tag);
std::string tags_to_string(const std::vector<Tag>& tags);

struct TaggedSentence {
  std::vector<Token> tokens;
  std::vector<Tag> tags;

  friend bool operator==(const TaggedSentence&, const TaggedSentence&) = default;
};

struct EntitySpan {
  size_t start = 0;  // inclusive
  size_t end = 0;    // inclusive
  std::string entity_type;

  friend bool operator==(const EntitySpan&, const EntitySpan&) = default;
  friend auto operator<=>(const EntitySpan&, const EntitySpan&) = default;
};

enum class Label { Yes, No };
enum class Source { Original, Synthetic };

std::string_view to_string(Label label);
// Trims whitespace and punctuation, then matches yes/no case-insensitively.
std::optional<Label> normalize_label(std::string_view raw);

struct REExample {
  std::string sentence;
  Label label = Label::No;
  Source source = Source::Original;

  friend bool operator==(const REExample&, const REExample&) = default;
};

inline constexpr std::string_view kGenePlaceholder = "@GENE$";
inline constexpr std::string_view kDiseasePlaceholder = "@DISEASE$";

size_t count_occurrences(std::string_view haystack, std::string_view needle);

enum class Task { NER, RE };
enum class Split { Train, Test, SeedPool };

std::string_view to_string(Task task);
std::string_view to_string(Split split);
Task parse_task(std::string_view s);

struct Dataset {
  std::string name = "custom";
  Task task = Task::NER;
  Split split = Split::Train;
  std::vector<TaggedSentence> sentences;  // task == NER
  std::vector<REExample> relations;       // task == RE

  size_t size() const { return task == Task::NER ? sentences.size() : relations.size(); }
  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// Known dataset names map to a fixed task; "custom" accepts either.
std::optional<Task> task_for_dataset_name(std::string_view name);
void check_dataset_consistency(const Dataset& d);

// Whitespace split, then leading and trailing Unicode punctuation characters
// are detached one per token.
std::vector<Token> tokenize(std::string_view text);
std::string detokenize(const std::vector<Token>& tokens);
TaggedSentence make_sentence(const std::vector<std::string>& words, std::vector<Tag> tags);

enum class IobMode { Strict, Lenient };

// Strict: throws OrphanInsideTag on an I not continuing a same-type B/I.
// Lenient: rewrites each orphan I to B of the same type.
std::vector<Tag> validate_iob(std::vector<Tag> tags, IobMode mode);

std::vector<EntitySpan> spans_from_tags(const std::vector<Tag>& tags);
inline std::vector<EntitySpan> spans_from_tags(const TaggedSentence& s) { return spans_from_tags(s.tags); }
std::vector<Tag> tags_from_spans(size_t token_count, std::vector<EntitySpan> spans);
inline std::vector<Tag> tags_from_spans(const std::vector<Token>& tokens, std::vector<EntitySpan> spans) {
  return tags_from_spans(tokens.size(), std::move(spans));
}

Dataset parse_conll(std::string_view bytes, std::string name = "custom", Split split = Split::Train);
std::string serialize_conll(const Dataset& d);

Dataset parse_re_file(std::string_view bytes, std::string name = "custom", Split split = Split::Train,
                      Source source = Source::Original);
std::string serialize_re(const Dataset& d);

// Line-oriented "key: value" manifest naming a dataset and its files.
struct Manifest {
  std::string name = "custom";
  Task task = Task::NER;
  std::map<Split, std::string> paths;  // resolved against the manifest's directory
  std::vector<std::string> entity_types;
};

Manifest parse_manifest(std::string_view text, const std::string& base_dir = ".");
Manifest load_manifest(const std::string& path);
Dataset load_dataset(const Manifest& m, Split split);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

}  // namespace medsynth::corpus
