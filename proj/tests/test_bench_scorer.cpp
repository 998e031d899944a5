#include <cmath>
#include <cstdlib>
#include <deque>
#include <functional>
#include <mutex>
#include <set>
#include <tuple>

#include "doctest.h"
#include "medsynth/error.hpp"
#include "medsynth/rng.hpp"
#include "medsynth/scorer.hpp"
#include "medsynth/zeroshot_bench.hpp"
#include "support.hpp"

using namespace medsynth;
using corpus::Label;
using corpus::Tag;
using json = nlohmann::json;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Internal;
}

using SpanKey = std::tuple<size_t, size_t, size_t, std::string>;  // sentence, start, end, type

// Random valid tag sequence built from spans it records itself, so the span set
// is known without calling the library.
std::vector<Tag> random_tags(SplitMix64& rng, size_t n, size_t sentence, std::set<SpanKey>& spans) {
  static const std::vector<std::string> types{"Disease", "Chemical", "Gene"};
  std::vector<Tag> tags;
  while (tags.size() < n) {
    if (rng.bounded(2) == 0) {
      tags.push_back(Tag::outside());
      continue;
    }
    const std::string& type = types[rng.bounded(types.size())];
    const size_t len = 1 + rng.bounded(std::min<size_t>(3, n - tags.size()));
    spans.emplace(sentence, tags.size(), tags.size() + len - 1, type);
    tags.push_back(Tag::begin(type));
    for (size_t k = 1; k < len; ++k) tags.push_back(Tag::inside(type));
  }
  return tags;
}

class FifoTransport final : public llm::HttpTransport {
 public:
  explicit FifoTransport(std::deque<std::string> replies) : replies_(std::move(replies)) {}
  llm::HttpResult post(const std::string&, const std::map<std::string, std::string>&, const std::string&,
                       std::chrono::seconds) override {
    std::lock_guard guard(mu_);
    std::string content = replies_.front();
    replies_.pop_front();
    return {200, json{{"choices", json::array({json{{"message", json{{"role", "assistant"}, {"content", content}}}}})}}
                     .dump()};
  }

 private:
  std::mutex mu_;
  std::deque<std::string> replies_;
};

}  // namespace

TEST_CASE("metrics formula") {
  const auto m = score::Metrics::from_counts(2, 1, 1);
  CHECK(std::abs(m.precision - 2.0 / 3.0) <= 1e-12);
  CHECK(std::abs(m.recall - 2.0 / 3.0) <= 1e-12);
  CHECK(std::abs(m.f1 - 2.0 / 3.0) <= 1e-12);
  for (auto [tp, fp, fn] : {std::tuple{0, 0, 0}, std::tuple{0, 3, 0}, std::tuple{0, 0, 4}, std::tuple{0, 2, 5}}) {
    const auto z = score::Metrics::from_counts(tp, fp, fn);
    CHECK(z.precision == 0.0);
    CHECK(z.recall == 0.0);
    CHECK(z.f1 == 0.0);
  }
}

TEST_CASE("property: span_prf equals a span-set intersection oracle") {
  SplitMix64 rng(2024);
  for (int iter = 0; iter < 500; ++iter) {
    const size_t n_sent = rng.bounded(11);
    std::vector<corpus::TaggedSentence> gold;
    std::vector<std::vector<Tag>> pred;
    std::set<SpanKey> gs;
    std::set<SpanKey> ps;
    for (size_t i = 0; i < n_sent; ++i) {
      const size_t len = rng.bounded(16);
      corpus::TaggedSentence s;
      for (size_t k = 0; k < len; ++k) s.tokens.push_back({"w" + std::to_string(k), k});
      s.tags = random_tags(rng, len, i, gs);
      gold.push_back(s);
      pred.push_back(rng.bounded(4) == 0 ? s.tags : random_tags(rng, len, i, ps));
      if (pred.back() == s.tags) {
        for (const auto& k : gs) {
          if (std::get<0>(k) == i) ps.insert(k);
        }
      }
    }
    size_t inter = 0;
    for (const auto& k : ps) inter += gs.count(k);
    const auto m = score::span_prf(gold, pred);
    CHECK(m.tp == inter);
    CHECK(m.fp == ps.size() - inter);
    CHECK(m.fn == gs.size() - inter);
  }
}

TEST_CASE("span_prf shape errors and orphan handling") {
  corpus::TaggedSentence s = corpus::make_sentence({"a", "b"}, {Tag::begin("D"), Tag::inside("D")});
  CHECK(code_of([&] { score::span_prf({s}, {}); }) == ErrorCode::ShapeMismatch);
  CHECK(code_of([&] { score::span_prf({s}, {{Tag::outside()}}); }) == ErrorCode::ShapeMismatch);
  // An orphan I is read as a B of its type.
  const auto m = score::span_prf({s}, {{Tag::inside("D"), Tag::inside("D")}});
  CHECK(m.tp == 1);
}

TEST_CASE("classification metrics treat Yes as positive") {
  const auto m = score::cls_prf({Label::Yes, Label::Yes, Label::No, Label::No}, {Label::Yes, Label::No, Label::Yes, Label::No});
  CHECK(m.tp == 1);
  CHECK(m.fp == 1);
  CHECK(m.fn == 1);
  CHECK(code_of([] { score::cls_prf({Label::Yes}, {}); }) == ErrorCode::LengthMismatch);
}

TEST_CASE("trial aggregation uses the sample standard deviation") {
  std::vector<score::Metrics> ms;
  for (double f : {0.5, 0.7, 0.9}) {
    score::Metrics m;
    m.f1 = f;
    ms.push_back(m);
  }
  const auto s = score::aggregate_trials(ms);
  CHECK(s.f1.mean == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(s.f1.std == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(score::aggregate_trials({ms[0]}).f1.std == 0.0);
  CHECK(code_of([] { score::aggregate_trials({}); }) == ErrorCode::EmptyInput);
}

TEST_CASE("grids") {
  CHECK(score::parse_grid("1,2,3,4,5,10,15,20,25,30").size() == 10);
  const auto g = score::parse_grid("400:6400:400");
  REQUIRE(g.size() == 16);
  CHECK(g.front() == 400);
  CHECK(g.back() == 6400);
  CHECK(score::parse_grid("0.1:0.5:0.1").size() == 5);
  CHECK(score::parse_grid("1:10:4") == std::vector<double>{1, 5, 9});
  CHECK(code_of([] { score::parse_grid("1,x"); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { score::parse_grid("1:5:0"); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { score::parse_grid("1:5"); }) == ErrorCode::ConfigError);
}

TEST_CASE("learning curve records hook failures per point") {
  const auto pts = score::learning_curve({1, 2, 3}, 2, [](double x, int t) {
    if (x == 2) throw Error(ErrorCode::PoolTooSmall, "too few");
    return score::Metrics::from_counts(static_cast<size_t>(x), static_cast<size_t>(t), 1);
  });
  REQUIRE(pts.size() == 3);
  CHECK(pts[0].summary->trials.size() == 2);
  CHECK_FALSE(pts[1].summary);
  CHECK(pts[1].error->find("PoolTooSmall") == 0);
  const auto tsv = score::curve_tsv(pts);
  CHECK(tsv.rfind("x\ttrial\ttp", 0) == 0);
  size_t rows = 0;
  for (char c : tsv) rows += c == '\n';
  CHECK(rows == 1 + 2 + 1 + 2);
  CHECK(code_of([] { score::learning_curve({1}, 0, {}); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("prediction files") {
  const auto gold = corpus::parse_re_file("@GENE$ @DISEASE$ a\tYes\n@GENE$ @DISEASE$ b\tNo\n");
  const auto preds = score::parse_predictions("{\"id\":1,\"label\":\"no\"}\n\n{\"id\":0,\"label\":\"Yes\"}\n");
  const auto m = score::score_file(gold, preds);
  CHECK(m.tp == 1);
  CHECK(m.fp == 0);
  CHECK(code_of([&] { score::score_file(gold, {preds[0]}); }) == ErrorCode::ShapeMismatch);
  CHECK(code_of([&] { score::score_file(gold, {preds[0], preds[0]}); }) == ErrorCode::ShapeMismatch);
  CHECK(code_of([] { score::parse_predictions("{\"id\":0,\"tags\":[\"Q\"]}"); }) == ErrorCode::UnknownTag);
  CHECK(code_of([] { score::parse_predictions("{oops"); }) == ErrorCode::MalformedLine);
}

TEST_CASE("IOB reply parsing tolerates chat formatting") {
  const auto p = bench::parse_iob_reply("Here you go:\n```\nAsthma\tb-disease\nis  O\nbad O\nx Y\n```", {"Disease"});
  REQUIRE(p.pairs.size() == 3);
  CHECK(p.pairs[0].second == Tag::begin("Disease"));
  CHECK(p.pairs[1].first == "is");
  CHECK(p.pairs[2].first == "bad");
  CHECK_FALSE(p.diagnostics.empty());
  const auto unknown = bench::parse_iob_reply("aspirin\tB-Chemical", {"Disease"});
  REQUIRE(unknown.pairs.size() == 1);
  CHECK(unknown.pairs[0].second == Tag::outside());
  CHECK(bench::parse_iob_reply("").pairs.empty());
}

TEST_CASE("realign maps retokenized output onto gold tokens") {
  const auto gold = corpus::tokenize("Patients with breast cancer improved.");
  std::vector<std::pair<std::string, Tag>> pred{{"patients", Tag::outside()},
                                                {"breast", Tag::begin("Disease")},
                                                {"cancer", Tag::inside("Disease")},
                                                {"improved.", Tag::outside()}};
  CHECK(corpus::tags_to_string(bench::realign(pred, gold)) == "O O B-Disease I-Disease O O");
  CHECK(bench::realign({}, gold).size() == gold.size());
  std::vector<std::pair<std::string, Tag>> orphan{{"cancer", Tag::inside("Disease")}};
  CHECK(corpus::tags_to_string(bench::realign(orphan, gold)) == "O O O B-Disease O O");
}

TEST_CASE("property: realign always returns one valid tag per gold token") {
  SplitMix64 rng(8);
  const std::vector<std::string> words{"a", "b", "c", "d", "e"};
  for (int iter = 0; iter < 500; ++iter) {
    std::vector<corpus::Token> gold;
    for (size_t i = 0, n = rng.bounded(12); i < n; ++i) gold.push_back({words[rng.bounded(5)], i});
    std::vector<std::pair<std::string, Tag>> pred;
    for (size_t i = 0, n = rng.bounded(12); i < n; ++i) {
      const auto k = rng.bounded(3);
      pred.emplace_back(words[rng.bounded(5)], k == 0 ? Tag::outside() : k == 1 ? Tag::begin("X") : Tag::inside("X"));
    }
    const auto tags = bench::realign(pred, gold);
    CHECK(tags.size() == gold.size());
    CHECK_NOTHROW(corpus::validate_iob(tags, corpus::IobMode::Strict));
  }
}

TEST_CASE("label replies") {
  using bench::LabelReply;
  CHECK(bench::parse_label_reply("Yes.") == LabelReply::Yes);
  CHECK(bench::parse_label_reply("\n  no, none\n") == LabelReply::No);
  CHECK(bench::parse_label_reply("Yes and no") == LabelReply::Invalid);
  CHECK(bench::parse_label_reply("Unclear\nYes") == LabelReply::Invalid);
  CHECK(bench::parse_label_reply("") == LabelReply::Invalid);
}

TEST_CASE("bench over the noisy reply corpus never throws") {
  ::setenv("MEDSYNTH_BENCH_KEY", "k", 1);
  std::deque<std::string> ner_replies;
  std::deque<std::string> re_replies;
  corpus::Dataset ner;
  ner.task = corpus::Task::NER;
  corpus::Dataset re;
  re.task = corpus::Task::RE;
  size_t planted = 0;
  for (const auto& line : testsupport::lines_of(testsupport::slurp(testsupport::data_path("noisy_replies.jsonl")))) {
    const auto j = json::parse(line);
    if (j.at("task") == "NER") {
      std::vector<Tag> tags;
      for (const auto& t : j.at("tags")) tags.push_back(*corpus::parse_tag(t.get<std::string>()));
      ner.sentences.push_back(corpus::make_sentence(j.at("tokens").get<std::vector<std::string>>(), tags));
      ner_replies.push_back(j.at("reply").get<std::string>());
    } else {
      re.relations.push_back({j.at("sentence").get<std::string>(), *corpus::normalize_label(j.at("label").get<std::string>())});
      re_replies.push_back(j.at("reply").get<std::string>());
      planted += j.at("planted_invalid").get<bool>();
    }
  }
  llm::GatewayOptions o;
  o.provider = llm::Provider::Real;
  o.config.api_key_env = "MEDSYNTH_BENCH_KEY";
  o.config.rate_limit_per_min = 100000;
  bench::BenchOptions opts;
  opts.workers = 1;
  opts.entity_types = {"Disease"};

  llm::Gateway ner_gw(o, std::make_unique<FifoTransport>(ner_replies));
  const auto ner_run = bench::run_bench(ner, forge::builtin_template(forge::PromptTask::NerZeroshot), ner_gw, opts);
  REQUIRE(ner_run.items.size() == ner.sentences.size());
  for (size_t i = 0; i < ner_run.items.size(); ++i) {
    CHECK(ner_run.items[i].tags.size() == ner.sentences[i].tokens.size());
    for (const auto& d : ner_run.items[i].diagnostics) CHECK(d.find("Error") == std::string::npos);
  }
  CHECK_NOTHROW(ner_run.score(ner));

  llm::Gateway re_gw(o, std::make_unique<FifoTransport>(re_replies));
  const auto re_run = bench::run_bench(re, forge::builtin_template(forge::PromptTask::ReZeroshot), re_gw, opts);
  CHECK(re_run.invalid_rate() == static_cast<double>(planted) / static_cast<double>(re.relations.size()));
  CHECK(re_run.failure_count() == 0);
  CHECK(code_of([&] { bench::run_bench(re, forge::builtin_template(forge::PromptTask::NerZeroshot), re_gw, opts); }) ==
        ErrorCode::TaskMismatch);
  ::unsetenv("MEDSYNTH_BENCH_KEY");
}

TEST_CASE("take_subset keeps the first k items") {
  const auto d = corpus::parse_re_file("@GENE$ @DISEASE$ a\tYes\n@GENE$ @DISEASE$ b\tNo\n@GENE$ @DISEASE$ c\tNo\n");
  CHECK(bench::take_subset(d, 2).relations.size() == 2);
  CHECK(bench::take_subset(d, 2).relations[1].sentence == "@GENE$ @DISEASE$ b");
  CHECK(bench::take_subset(d, 0).relations.size() == 3);
  CHECK(bench::take_subset(d, 10).relations.size() == 3);
}
