#include <functional>
#include <set>
#include <sstream>

#include "doctest.h"
#include "medsynth/error.hpp"
#include "medsynth/generator.hpp"
#include "medsynth/pipeline.hpp"
#include "medsynth/quality_gate.hpp"
#include "medsynth/rng.hpp"
#include "support.hpp"

using namespace medsynth;
using corpus::Label;
using corpus::Tag;
using gen::CandidateSample;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Internal;
}

CandidateSample ner_sample(const std::string& sentence, const std::string& entity) {
  CandidateSample c;
  auto r = gen::annotate_entity(sentence, {entity, "Disease", "t"});
  if (auto* tagged = std::get_if<corpus::TaggedSentence>(&r)) {
    c.payload = *tagged;
  } else {
    corpus::TaggedSentence s;
    s.tokens = corpus::tokenize(sentence);
    s.tags.assign(s.tokens.size(), Tag::outside());
    c.payload = s;
    c.reject_reason = std::get<std::string>(r);
  }
  c.raw_line = sentence;
  return c;
}

CandidateSample re_sample(const std::string& sentence, Label label = Label::Yes) {
  CandidateSample c;
  c.payload = corpus::REExample{sentence, label, corpus::Source::Synthetic};
  c.raw_line = sentence;
  return c;
}

// Independent near-duplicate oracle over ASCII text: lowercase word 3-shingles,
// quadratic comparison against everything kept so far.
std::set<std::string> oracle_shingles(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> w;
  for (std::string x; in >> x;) {
    for (auto& ch : x) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    w.push_back(x);
  }
  std::set<std::string> out;
  if (w.empty()) return out;
  if (w.size() < 3) {
    std::string j = w[0];
    for (size_t i = 1; i < w.size(); ++i) j += " " + w[i];
    out.insert(j);
    return out;
  }
  for (size_t i = 0; i + 3 <= w.size(); ++i) out.insert(w[i] + " " + w[i + 1] + " " + w[i + 2]);
  return out;
}

double oracle_jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
  size_t inter = 0;
  for (const auto& x : a) inter += b.count(x);
  const size_t uni = a.size() + b.size() - inter;
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<std::string> texts(const std::vector<CandidateSample>& v) {
  std::vector<std::string> out;
  for (const auto& c : v) out.push_back(c.text());
  return out;
}

}  // namespace

TEST_CASE("worked example annotates the seed mention") {
  auto r = gen::annotate_entity("The symptoms suggest a possible case of rheumatoid arthritis.",
                                {"rheumatoid arthritis", "Disease", "seed"});
  REQUIRE(std::holds_alternative<corpus::TaggedSentence>(r));
  CHECK(corpus::tags_to_string(std::get<corpus::TaggedSentence>(r).tags) ==
        "O O O O O O O B-Disease I-Disease O");
}

TEST_CASE("annotate_entity tags every occurrence case-insensitively") {
  auto r = gen::annotate_entity("Asthma and ASTHMA, then asthma.", {"asthma", "Disease", "s"});
  REQUIRE(std::holds_alternative<corpus::TaggedSentence>(r));
  CHECK(corpus::tags_to_string(std::get<corpus::TaggedSentence>(r).tags) == "B-Disease O B-Disease O O B-Disease O");
  CHECK(std::get<std::string>(gen::annotate_entity("nothing here", {"asthma", "Disease", "s"})) == "EntityNotFound");
  CHECK(std::get<std::string>(gen::annotate_entity("x", {" ", "Disease", "s"})) == "EmptySeed");
}

TEST_CASE("seed extraction is unique, first-seen, and keeps the longer surface") {
  const auto d = corpus::parse_conll(
      "Asthma\tB-Disease\nand\tO\nbreast\tB-Disease\ncancer\tI-Disease\n\nasthma\tB-Disease\nx\tB-Chemical\n");
  const auto all = gen::extract_seed_entities(d);
  REQUIRE(all.size() == 3);
  CHECK(all[0].surface == "Asthma");
  CHECK(all[1].surface == "breast cancer");
  CHECK(all[2].entity_type == "Chemical");
  CHECK(gen::extract_seed_entities(d, {"Disease"}).size() == 2);
  const auto fixture = corpus::load_dataset(corpus::load_manifest(testsupport::data_path("ner/manifest.txt")),
                                            corpus::Split::Train);
  CHECK(gen::extract_seed_entities(fixture).size() == 12);
}

TEST_CASE("generation reply parsing") {
  const auto ner = gen::parse_generation_reply("1. \"First one.\"\n\n2) Second\n-   \n", forge::PromptTask::NerGen);
  REQUIRE(ner.accepts.size() == 2);
  CHECK(ner.accepts[0].text == "First one.");
  CHECK(ner.accepts[1].position == 3);
  REQUIRE(ner.rejects.size() == 1);
  CHECK(ner.rejects[0].reason == "EmptyLine");

  const auto re = gen::parse_generation_reply(
      "| Sentence | Label |\n|---|---|\n| @GENE$ causes @DISEASE$ | Yes |\n@GENE$ and @DISEASE$\tno\nplain line\n"
      "| @GENE$ x @DISEASE$ | maybe |",
      forge::PromptTask::ReGen);
  REQUIRE(re.accepts.size() == 2);
  CHECK(re.accepts[0].label == Label::Yes);
  CHECK(re.accepts[1].label == Label::No);
  std::vector<std::string> reasons;
  for (const auto& r : re.rejects) reasons.push_back(r.reason);
  CHECK(reasons == std::vector<std::string>{"HeaderRow", "HeaderRow", "MalformedRow", "BadLabel"});
}

TEST_CASE("NER batch against the mock provider honours the quota and records provenance") {
  testsupport::TempDir tmp;
  llm::GatewayOptions o;
  o.mock.seed = 3;
  o.config.rate_limit_per_min = 100000;
  llm::Gateway gw(o);
  gen::GenerationConfig cfg;
  cfg.n_per_entity = 5;
  const auto tmpl = forge::builtin_template(forge::PromptTask::NerGen);
  const auto batch = gen::gen_ner_batch({"asthma", "Disease", "t"}, tmpl, cfg, gw, 4);
  size_t accepted = 0;
  for (const auto& c : batch) {
    CHECK(c.group == 4);
    CHECK(c.seed_ref == "asthma");
    CHECK(c.prompt_id == "builtin-ner-gen");
    if (c.accepted()) {
      ++accepted;
      CHECK_FALSE(corpus::spans_from_tags(std::get<corpus::TaggedSentence>(c.payload).tags).empty());
    }
    const auto prov = gen::provenance_record(c);
    CHECK(prov.at("status") == (c.accepted() ? "accept" : "reject"));
  }
  CHECK(accepted <= 5);
  CHECK(accepted > 0);
  auto zero = cfg;
  zero.n_per_entity = 0;
  CHECK(code_of([&] { gen::gen_ner_batch({"asthma", "Disease", "t"}, tmpl, zero, gw); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([&] { gen::gen_ner_batch({"asthma", "Disease", "t"}, forge::builtin_template(forge::PromptTask::ReGen),
                                         cfg, gw); }) == ErrorCode::TaskMismatch);
}

TEST_CASE("RE batch draws seeds per class and rejects a pool that is too small") {
  llm::GatewayOptions o;
  o.config.rate_limit_per_min = 100000;
  llm::Gateway gw(o);
  const auto pool = gen::make_re_pool(corpus::load_dataset(
      corpus::load_manifest(testsupport::data_path("re/manifest.txt")), corpus::Split::Train));
  CHECK(pool.positives() == 20);
  CHECK(pool.negatives() == 20);
  gen::GenerationConfig cfg;
  SplitMix64 rng(1);
  const auto batch = gen::gen_re_batch(pool, forge::builtin_template(forge::PromptTask::ReGen), cfg, gw, rng, 1);
  int yes = 0;
  int no = 0;
  for (const auto& c : batch) {
    if (!c.accepted()) continue;
    (std::get<corpus::REExample>(c.payload).label == Label::Yes ? yes : no)++;
    CHECK(std::get<corpus::REExample>(c.payload).source == corpus::Source::Synthetic);
  }
  CHECK(yes <= 3);
  CHECK(no <= 3);
  gen::SeedPool small = pool;
  small.re_examples.resize(3);
  CHECK(code_of([&] { gen::gen_re_batch(small, forge::builtin_template(forge::PromptTask::ReGen), cfg, gw, rng, 2); }) ==
        ErrorCode::PoolTooSmall);
}

TEST_CASE("Jaccard hand fixture") {
  CHECK(gate::jaccard({"abc", "bcd", "cde"}, {"abc", "bcd", "cdf"}) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(gate::jaccard(gate::shingles("a b c d e", 3), gate::shingles("A  b c d f", 3)) ==
        doctest::Approx(0.5).epsilon(1e-12));
  CHECK(gate::shingles("two words", 3) == std::set<std::string>{"two words"});
  CHECK(gate::normalize("  Caf\xC3\xA9   X ") == "caf\xC3\xA9 x");
  CHECK(gate::normalize("Cafe\xCC\x81") == "caf\xC3\xA9");
}

TEST_CASE("property: dedup matches a quadratic oracle and is idempotent") {
  SplitMix64 rng(99);
  const std::vector<std::string> vocab{"gene", "disease", "patients", "cohort", "risk", "study", "was", "in"};
  gate::GateConfig cfg;
  for (int iter = 0; iter < 200; ++iter) {
    std::vector<CandidateSample> samples;
    const size_t n = 1 + rng.bounded(20);
    for (size_t i = 0; i < n; ++i) {
      std::string s;
      const size_t len = 1 + rng.bounded(7);
      for (size_t k = 0; k < len; ++k) s += (k ? " " : "") + vocab[rng.bounded(vocab.size())];
      if (rng.bounded(4) == 0) s[0] = static_cast<char>(std::toupper(s[0]));
      samples.push_back(re_sample(s));
    }
    const auto got = gate::dedup(samples, cfg);
    std::vector<std::string> want_kept;
    std::vector<std::set<std::string>> kept_sh;
    std::set<std::string> kept_lower;
    for (const auto& s : samples) {
      std::string lower = s.text();
      for (auto& ch : lower) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
      auto sh = oracle_shingles(s.text());
      bool dup = kept_lower.count(lower) > 0;
      for (const auto& k : kept_sh) dup = dup || oracle_jaccard(sh, k) >= 0.8;
      if (dup) continue;
      want_kept.push_back(s.text());
      kept_sh.push_back(sh);
      kept_lower.insert(lower);
    }
    CHECK(texts(got.kept) == want_kept);
    CHECK(got.kept.size() + got.rejected.size() == samples.size());
    const auto again = gate::dedup(got.kept, cfg);
    CHECK(texts(again.kept) == texts(got.kept));
    CHECK(again.rejected.empty());
  }
}

TEST_CASE("validity filter") {
  gate::GateConfig cfg;
  CHECK(gate::filter_valid(ner_sample("Patients with asthma were followed closely.", "asthma"), corpus::Task::NER, cfg) ==
        std::nullopt);
  CHECK(gate::filter_valid(ner_sample("asthma is bad", "asthma"), corpus::Task::NER, cfg) == "TooShort");
  CHECK(gate::filter_valid(ner_sample("Patients were followed up closely here.", "asthma"), corpus::Task::NER, cfg) ==
        "EntityNotFound");
  auto orphan = ner_sample("Patients with asthma were followed closely.", "asthma");
  std::get<corpus::TaggedSentence>(orphan.payload).tags[2] = Tag::inside("Disease");
  CHECK(gate::filter_valid(orphan, corpus::Task::NER, cfg) == "InvalidIob");
  CHECK(gate::filter_valid(re_sample("@GENE$ is linked to @DISEASE$ in adults."), corpus::Task::RE, cfg) == std::nullopt);
  CHECK(gate::filter_valid(re_sample("@GENE$ and @GENE$ with @DISEASE$ in adults."), corpus::Task::RE, cfg) ==
        "PlaceholderCount");
  CHECK(gate::filter_valid(re_sample("@GENE$ @DISEASE$ x y z"), corpus::Task::NER, cfg) == "TaskMismatch");
  gate::GateConfig tight = cfg;
  tight.max_tokens = 6;
  CHECK(gate::filter_valid(re_sample("@GENE$ is linked to @DISEASE$ in adults."), corpus::Task::RE, tight) == "TooLong");
}

TEST_CASE("gate report reconciles and the incremental gate equals the one-shot gate") {
  gate::GateConfig cfg;
  std::vector<CandidateSample> samples{
      re_sample("Polymorphisms in @GENE$ were significantly associated with the risk of @DISEASE$ in adults."),
      re_sample("Polymorphisms in @GENE$ were significantly associated with the risk of @DISEASE$ in adults."),
      re_sample("Polymorphisms in @GENE$ were  SIGNIFICANTLY associated with the risk of @DISEASE$ in adults."),
      re_sample("Polymorphisms in @GENE$ were significantly associated with the risk of @DISEASE$ in children."),
      re_sample("no placeholders at all in this one"),
      re_sample("Expression of @GENE$ rose sharply in @DISEASE$ tissue.", Label::No),
  };
  samples.back().reject_reason = "ExceedsQuota";
  const auto one = gate::run_gate(samples, corpus::Task::RE, cfg);
  CHECK(one.report.reconciles());
  CHECK(one.report.input_count == 6);
  CHECK(one.report.kept_count == 1);
  CHECK(one.report.exact_dup_count == 2);
  CHECK(one.report.near_dup_count == 1);
  CHECK(one.report.invalid_count == 2);
  CHECK(one.report.reject_reasons.at("ExceedsQuota") == 1);
  CHECK(one.quarantined.size() == 5);

  gate::Gate inc(corpus::Task::RE, cfg);
  gate::GateReport total;
  for (const auto& s : samples) total += inc.add({s}).report;
  CHECK(total.reconciles());
  CHECK(total.to_json() == one.report.to_json());
  CHECK(texts(inc.kept()) == texts(one.kept));
  CHECK(one.report.to_table().find("near duplicates") != std::string::npos);
  const auto q = gate::quarantine_record(one.quarantined[0]);
  CHECK(q.at("status") == "quarantined");
  CHECK(q.at("reason") == "ExactDuplicate");
}

TEST_CASE("exact overlap rate") {
  CHECK(gate::exact_overlap_rate({"A b", "c d", "e"}, {"a  B", "e"}) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(gate::exact_overlap_rate({}, {"x"}) == 0.0);
}

TEST_CASE("RE corpus generation stops at the target and marks leftovers unused") {
  llm::GatewayOptions o;
  o.config.rate_limit_per_min = 100000;
  llm::Gateway gw(o);
  const auto pool = gen::make_re_pool(corpus::load_dataset(
      corpus::load_manifest(testsupport::data_path("re/manifest.txt")), corpus::Split::Train));
  gen::GenerationConfig cfg;
  cfg.target_size = 10;
  const auto out =
      pipeline::generate_re_corpus(pool, forge::builtin_template(forge::PromptTask::ReGen), cfg, gate::GateConfig{}, gw);
  CHECK(out.target_reached);
  CHECK(out.gated.kept.size() == 10);
  CHECK(out.gated.report.reconciles());
  REQUIRE(out.status.size() == out.candidates.size());
  size_t kept = 0;
  size_t unused = 0;
  for (const auto& s : out.status) {
    kept += s == "kept";
    unused += s == "unused";
  }
  CHECK(kept == 10);
  CHECK(out.gated.report.input_count + unused == out.candidates.size());
}
