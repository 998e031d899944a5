#include "medsynth/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <map>

#include "medsynth/baselines.hpp"
#include "medsynth/error.hpp"
#include "medsynth/rng.hpp"
#include "medsynth/run_dir.hpp"
#include "medsynth/scorer.hpp"
#include "medsynth/shift_analyzer.hpp"
#include "medsynth/text.hpp"
#include "medsynth/zeroshot_bench.hpp"

namespace medsynth::pipeline {

namespace fs = std::filesystem;
using json = nlohmann::json;
using corpus::Split;
using corpus::Task;

std::unique_ptr<llm::Gateway> make_gateway(const cfg::RunConfig& rc, const std::optional<std::string>& transcript) {
  llm::GatewayOptions o;
  o.provider = rc.provider;
  o.config = rc.provider_config;
  o.mock = {rc.rng_seed, rc.corruption_rate};
  // Mock replies depend on seed and corruption rate, which the cache key does not cover.
  const fs::path root = rc.cache_dir ? fs::path(*rc.cache_dir) : fs::path(rc.output_dir) / "cache";
  if (rc.provider == llm::Provider::Real) {
    const char* key = std::getenv(rc.provider_config.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
      throw Error(ErrorCode::MissingApiKey, "environment variable " + rc.provider_config.api_key_env + " is not set");
    }
    o.cache_dir = (root / "real").string();
  } else {
    char buf[64];
    std::snprintf(buf, sizeof buf, "mock-%llu-%g", static_cast<unsigned long long>(rc.rng_seed), rc.corruption_rate);
    o.cache_dir = (root / buf).string();
  }
  o.transcript_path = transcript;
  return std::make_unique<llm::Gateway>(std::move(o));
}

namespace {

struct Context {
  cfg::RunConfig rc;
  corpus::Manifest manifest;
  Task task = Task::NER;
  std::string entity_type = "Disease";
};

Context load_context(const cfg::Config& config, bool need_manifest = true) {
  Context c;
  c.rc = cfg::resolve(config);
  if (c.rc.manifest_path.empty()) {
    if (need_manifest) throw Error(ErrorCode::ConfigError, "run.manifest is required");
    c.task = c.rc.task.value_or(Task::NER);
  } else {
    c.manifest = corpus::load_manifest(c.rc.manifest_path);
    c.task = c.manifest.task;
    if (c.rc.task && *c.rc.task != c.manifest.task) {
      throw Error(ErrorCode::TaskMismatch, "run.task is " + std::string(corpus::to_string(*c.rc.task)) +
                                               " but the manifest declares " +
                                               std::string(corpus::to_string(c.manifest.task)));
    }
  }
  if (c.rc.entity_type) {
    c.entity_type = *c.rc.entity_type;
  } else if (!c.manifest.entity_types.empty()) {
    c.entity_type = c.manifest.entity_types.front();
  }
  return c;
}

Split seed_split(const corpus::Manifest& m) { return m.paths.count(Split::SeedPool) ? Split::SeedPool : Split::Train; }

void require_split(const corpus::Manifest& m, Split s) {
  if (!m.paths.count(s)) {
    throw Error(ErrorCode::ConfigError, "manifest has no " + std::string(corpus::to_string(s)) + " split");
  }
}

run::RunDir open_run(const cfg::Config& config, const cfg::RunConfig& rc, const std::string& subcommand) {
  return run::RunDir::create(rc.output_dir, subcommand, config.hash(), config.canonical());
}

void add_manifest_inputs(run::RunDir& dir, const Context& c, std::initializer_list<Split> splits) {
  dir.add_input("manifest", c.rc.manifest_path);
  for (Split s : splits) {
    if (auto it = c.manifest.paths.find(s); it != c.manifest.paths.end()) {
      dir.add_input(std::string(corpus::to_string(s)), it->second);
    }
  }
}

forge::PromptTemplate generation_template(const Context& c) {
  const auto task = c.task == Task::NER ? forge::PromptTask::NerGen : forge::PromptTask::ReGen;
  if (c.rc.generation_template) {
    auto t = forge::load_template_file(*c.rc.generation_template);
    if (t.task != task) {
      throw Error(ErrorCode::TaskMismatch, "generation template is " + std::string(forge::to_string(t.task)) +
                                               ", expected " + std::string(forge::to_string(task)));
    }
    return t;
  }
  return forge::builtin_template(task, c.entity_type);
}

forge::PromptTemplate bench_template(const Context& c) {
  const auto task = c.task == Task::NER ? forge::PromptTask::NerZeroshot : forge::PromptTask::ReZeroshot;
  if (c.rc.bench_template) return forge::load_template_file(*c.rc.bench_template);
  return forge::builtin_template(task, c.entity_type);
}

std::vector<gen::SeedEntity> seed_entities(const Context& c) {
  const auto seeds = corpus::load_dataset(c.manifest, seed_split(c.manifest));
  auto entities = gen::extract_seed_entities(seeds, c.manifest.entity_types);
  if (c.rc.entity_count && entities.size() > c.rc.entity_count) entities.resize(c.rc.entity_count);
  if (entities.empty()) throw Error(ErrorCode::EmptyInput, "seed split contains no entity mentions");
  return entities;
}

std::string corpus_file_name(Task t) { return t == Task::NER ? "corpus.conll" : "corpus.tsv"; }

std::string serialize(const corpus::Dataset& d) {
  return d.task == Task::NER ? corpus::serialize_conll(d) : corpus::serialize_re(d);
}

void fill_status(GenOutcome& out) {
  std::map<std::pair<size_t, size_t>, std::string> by_key;
  for (const auto& k : out.gated.kept) by_key[{k.group, k.line}] = "kept";
  for (const auto& q : out.gated.quarantined) by_key[{q.sample.group, q.sample.line}] = q.reason;
  out.status.clear();
  for (const auto& c : out.candidates) {
    auto it = by_key.find({c.group, c.line});
    out.status.push_back(it == by_key.end() ? "unused" : it->second);
  }
}

}  // namespace

GenOutcome generate_ner_corpus(const std::vector<gen::SeedEntity>& entities, const forge::PromptTemplate& tmpl,
                               const gen::GenerationConfig& gcfg, const gate::GateConfig& gate_cfg,
                               llm::Gateway& gateway) {
  GenOutcome out;
  out.candidates = gen::generate_ner(entities, tmpl, gcfg, gateway);
  out.gated = gate::run_gate(out.candidates, Task::NER, gate_cfg);
  fill_status(out);
  return out;
}

GenOutcome generate_re_corpus(const gen::SeedPool& pool, const forge::PromptTemplate& tmpl,
                              const gen::GenerationConfig& gcfg, const gate::GateConfig& gate_cfg,
                              llm::Gateway& gateway) {
  gcfg.validate();
  GenOutcome out;
  gate::Gate g(Task::RE, gate_cfg);
  SplitMix64 rng(gcfg.rng_seed);
  const size_t target = static_cast<size_t>(gcfg.target_size);
  const int per_round = gcfg.pos_per_round + gcfg.neg_per_round;
  const int max_rounds = gcfg.max_rounds > 0 ? gcfg.max_rounds : 4 * ((gcfg.target_size + per_round - 1) / per_round) + 8;
  for (int round = 1; round <= max_rounds && g.kept().size() < target; ++round) {
    auto batch = gen::gen_re_batch(pool, tmpl, gcfg, gateway, rng, round);
    for (auto& c : batch) {
      if (g.kept().size() < target) {
        auto r = g.add({c});
        out.gated.report += r.report;
        for (auto& k : r.kept) out.gated.kept.push_back(std::move(k));
        for (auto& q : r.quarantined) out.gated.quarantined.push_back(std::move(q));
      }
      out.candidates.push_back(std::move(c));
    }
  }
  out.target_reached = g.kept().size() >= target;
  fill_status(out);
  return out;
}

corpus::Dataset kept_dataset(const GenOutcome& outcome, Task task) {
  corpus::Dataset d;
  d.name = "synthetic";
  d.task = task;
  for (const auto& k : outcome.gated.kept) {
    if (task == Task::NER) {
      d.sentences.push_back(std::get<corpus::TaggedSentence>(k.payload));
    } else {
      d.relations.push_back(std::get<corpus::REExample>(k.payload));
    }
  }
  return d;
}

std::vector<std::string> dataset_texts(const corpus::Dataset& d) {
  std::vector<std::string> out;
  if (d.task == Task::NER) {
    for (const auto& s : d.sentences) out.push_back(corpus::detokenize(s.tokens));
  } else {
    for (const auto& r : d.relations) out.push_back(r.sentence);
  }
  return out;
}

json ingest(const cfg::Config& config) {
  const Context c = load_context(config);
  run::RunDir dir = open_run(config, c.rc, "ingest");
  add_manifest_inputs(dir, c, {Split::Train, Split::Test, Split::SeedPool});
  json splits = json::object();
  for (const auto& [split, path] : c.manifest.paths) {
    const auto d = corpus::load_dataset(c.manifest, split);
    json s{{"path", path}, {"items", d.size()}};
    if (d.task == Task::NER) {
      std::map<std::string, size_t> per_type;
      size_t tokens = 0;
      for (const auto& sent : d.sentences) {
        tokens += sent.tokens.size();
        for (const auto& span : corpus::spans_from_tags(sent.tags)) ++per_type[span.entity_type];
      }
      s["tokens"] = tokens;
      s["entities"] = per_type;
      s["unique_surfaces"] = gen::extract_seed_entities(d, c.manifest.entity_types).size();
    } else {
      size_t yes = 0;
      for (const auto& r : d.relations) yes += r.label == corpus::Label::Yes;
      s["yes"] = yes;
      s["no"] = d.relations.size() - yes;
    }
    splits[std::string(corpus::to_string(split))] = std::move(s);
  }
  json summary{{"run_dir", dir.dir()},
               {"dataset", c.manifest.name},
               {"task", corpus::to_string(c.task)},
               {"entity_types", c.manifest.entity_types},
               {"splits", splits}};
  dir.write_output("ingest_report.json", summary.dump(2) + "\n");
  dir.finish(summary);
  return summary;
}

json gen(const cfg::Config& config) {
  const Context c = load_context(config);
  const Split split = seed_split(c.manifest);
  require_split(c.manifest, split);
  run::RunDir dir = open_run(config, c.rc, "gen");
  add_manifest_inputs(dir, c, {split});
  if (c.rc.generation_template) dir.add_input("template", *c.rc.generation_template);
  const auto tmpl = generation_template(c);
  auto gateway = make_gateway(c.rc, dir.file("transcript.jsonl"));

  GenOutcome outcome;
  size_t seeds = 0;
  if (c.task == Task::NER) {
    const auto entities = seed_entities(c);
    seeds = entities.size();
    outcome = generate_ner_corpus(entities, tmpl, c.rc.generation, c.rc.gate, *gateway);
  } else {
    const auto pool = gen::make_re_pool(corpus::load_dataset(c.manifest, split));
    seeds = pool.re_examples.size();
    outcome = generate_re_corpus(pool, tmpl, c.rc.generation, c.rc.gate, *gateway);
  }

  std::string provenance;
  for (size_t i = 0; i < outcome.candidates.size(); ++i) {
    json p = gen::provenance_record(outcome.candidates[i]);
    p["gate"] = outcome.status[i];
    provenance += p.dump() + "\n";
  }
  std::string quarantine;
  for (const auto& q : outcome.gated.quarantined) quarantine += gate::quarantine_record(q).dump() + "\n";

  dir.write_output(corpus_file_name(c.task), serialize(kept_dataset(outcome, c.task)));
  dir.write_output("provenance.jsonl", provenance);
  dir.write_output("quarantine.jsonl", quarantine);
  dir.record_output("quarantine.jsonl", true);
  dir.write_output("gate_report.jsonl", outcome.gated.report.to_json().dump() + "\n");
  dir.write_output("gate_report.txt", outcome.gated.report.to_table());
  dir.write_output("review.jsonl", "");
  dir.record_output("review.jsonl", true);
  if (fs::exists(dir.file("transcript.jsonl"))) dir.record_output("transcript.jsonl");

  if (!outcome.gated.report.reconciles()) throw Error(ErrorCode::Internal, "gate report does not reconcile");
  json summary{{"run_dir", dir.dir()},
               {"task", corpus::to_string(c.task)},
               {"template", tmpl.id},
               {"seeds", seeds},
               {"candidates", outcome.candidates.size()},
               {"kept", outcome.gated.kept.size()},
               {"gate", outcome.gated.report.to_json()},
               {"target_reached", outcome.target_reached},
               {"corpus", dir.file(corpus_file_name(c.task))},
               {"network_calls", gateway->network_calls()}};
  dir.finish(summary);
  return summary;
}

json bench(const cfg::Config& config) {
  const Context c = load_context(config);
  require_split(c.manifest, Split::Test);
  run::RunDir dir = open_run(config, c.rc, "bench");
  add_manifest_inputs(dir, c, {Split::Test});
  if (c.rc.bench_template) dir.add_input("template", *c.rc.bench_template);
  const auto tmpl = bench_template(c);
  auto gateway = make_gateway(c.rc, dir.file("transcript.jsonl"));
  const auto test = corpus::load_dataset(c.manifest, Split::Test);

  bench::BenchOptions opts;
  opts.subset = c.rc.bench_subset;
  opts.workers = c.rc.bench_workers;
  opts.entity_types = c.manifest.entity_types;
  const auto result = bench::run_bench(test, tmpl, *gateway, opts);
  const auto metrics = result.score(bench::take_subset(test, opts.subset));

  json summary{{"run_dir", dir.dir()},
               {"task", corpus::to_string(c.task)},
               {"template", tmpl.id},
               {"items", result.items.size()},
               {"failures", result.failure_count()},
               {"invalid_rate", result.invalid_rate()},
               {"metrics", metrics.to_json()},
               {"predictions", dir.file("predictions.jsonl")}};
  dir.write_output("predictions.jsonl", bench::bench_jsonl(result));
  dir.write_output("metrics.tsv", score::metrics_tsv(metrics));
  dir.write_output("metrics.json", summary.dump(2) + "\n");
  if (fs::exists(dir.file("transcript.jsonl"))) dir.record_output("transcript.jsonl");
  dir.finish(summary);
  return summary;
}

json score(const cfg::Config& config, const std::string& predictions_path) {
  const Context c = load_context(config);
  require_split(c.manifest, Split::Test);
  const auto predictions = score::parse_predictions(corpus::read_file(predictions_path));
  run::RunDir dir = open_run(config, c.rc, "score");
  add_manifest_inputs(dir, c, {Split::Test});
  dir.add_input("predictions", predictions_path);
  const auto gold = bench::take_subset(corpus::load_dataset(c.manifest, Split::Test), c.rc.bench_subset);
  const auto metrics = score::score_file(gold, predictions);
  json summary{{"run_dir", dir.dir()}, {"task", corpus::to_string(c.task)}, {"items", gold.size()},
               {"metrics", metrics.to_json()}};
  dir.write_output("metrics.tsv", score::metrics_tsv(metrics));
  dir.write_output("metrics.json", summary.dump(2) + "\n");
  dir.finish(summary);
  return summary;
}

namespace {

std::string fmt_x(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", x);
  return buf;
}

uint64_t point_seed(uint64_t seed, double x, int trial) {
  return text::fnv1a64(fmt_x(x) + "/" + std::to_string(trial), seed ^ 0x9E3779B97F4A7C15ULL);
}

score::Metrics evaluate_baseline(const corpus::Dataset& train, const corpus::Dataset& test) {
  if (test.task == Task::NER) {
    baseline::Gazetteer g(train.sentences);
    std::vector<std::vector<corpus::Tag>> pred;
    for (const auto& s : test.sentences) pred.push_back(g.tag(s.tokens));
    return score::span_prf(test.sentences, pred);
  }
  baseline::NearestNeighbor nn(train.relations);
  std::vector<corpus::Label> gold;
  std::vector<corpus::Label> pred;
  for (const auto& r : test.relations) {
    gold.push_back(r.label);
    pred.push_back(nn.predict(r.sentence));
  }
  return score::cls_prf(gold, pred);
}

size_t as_count(double x, const char* what) {
  if (x < 0 || std::floor(x) != x) throw Error(ErrorCode::InvalidArgument, std::string(what) + " must be a whole number");
  return static_cast<size_t>(x);
}

}  // namespace

json curve(const cfg::Config& config) {
  const Context c = load_context(config);
  require_split(c.manifest, Split::Test);
  const auto kind = c.rc.sweep_kind;
  const bool ner_sweep = kind == cfg::SweepKind::PerEntity || kind == cfg::SweepKind::SeedRatio;
  if (ner_sweep != (c.task == Task::NER)) {
    throw Error(ErrorCode::TaskMismatch, "sweep kind " + std::string(cfg::to_string(kind)) + " does not apply to " +
                                             std::string(corpus::to_string(c.task)));
  }
  const auto grid = score::parse_grid(c.rc.grid);
  const Split split = seed_split(c.manifest);
  require_split(c.manifest, split);
  run::RunDir dir = open_run(config, c.rc, "curve");
  add_manifest_inputs(dir, c, {split, Split::Test});
  const auto tmpl = generation_template(c);
  auto gateway = make_gateway(c.rc, dir.file("transcript.jsonl"));
  const auto test = bench::take_subset(corpus::load_dataset(c.manifest, Split::Test), c.rc.bench_subset);
  const uint64_t seed = c.rc.rng_seed;

  // Builds the training set for (x, trial).
  std::function<corpus::Dataset(double, int)> build;
  std::vector<std::vector<corpus::TaggedSentence>> by_entity;
  corpus::Dataset re_corpus;
  gen::SeedPool pool;

  if (kind == cfg::SweepKind::PerEntity || kind == cfg::SweepKind::SeedRatio) {
    const auto entities = seed_entities(c);
    gen::GenerationConfig g = c.rc.generation;
    if (kind == cfg::SweepKind::PerEntity) {
      double top = 1;
      for (double x : grid) top = std::max(top, x);
      g.n_per_entity = static_cast<int>(std::ceil(top));
    }
    const auto outcome = generate_ner_corpus(entities, tmpl, g, c.rc.gate, *gateway);
    by_entity.resize(entities.size());
    for (const auto& k : outcome.gated.kept) by_entity[k.group].push_back(std::get<corpus::TaggedSentence>(k.payload));
    build = [&, kind](double x, int trial) {
      corpus::Dataset d;
      d.task = Task::NER;
      SplitMix64 rng(point_seed(seed, x, trial));
      if (kind == cfg::SweepKind::PerEntity) {
        const size_t per = as_count(x, "sentences per entity");
        for (const auto& sentences : by_entity) {
          std::vector<size_t> idx = rng.sample_indices(sentences.size(), std::min(per, sentences.size()));
          if (trial == 0) std::sort(idx.begin(), idx.end());
          for (size_t i : idx) d.sentences.push_back(sentences[i]);
        }
      } else {
        if (x < 0 || x > 100) throw Error(ErrorCode::InvalidArgument, "seed ratio must be a percentage");
        const auto k = static_cast<size_t>(std::llround(x / 100.0 * static_cast<double>(by_entity.size())));
        auto chosen = rng.sample_indices(by_entity.size(), k);
        std::sort(chosen.begin(), chosen.end());
        for (size_t e : chosen) {
          for (const auto& s : by_entity[e]) d.sentences.push_back(s);
        }
      }
      return d;
    };
  } else {
    pool = gen::make_re_pool(corpus::load_dataset(c.manifest, split));
    if (kind == cfg::SweepKind::CorpusSize) {
      gen::GenerationConfig g = c.rc.generation;
      double top = 1;
      for (double x : grid) top = std::max(top, x);
      g.target_size = static_cast<int>(std::ceil(top));
      re_corpus = kept_dataset(generate_re_corpus(pool, tmpl, g, c.rc.gate, *gateway), Task::RE);
      build = [&](double x, int trial) {
        const size_t n = as_count(x, "corpus size");
        if (n > re_corpus.relations.size()) {
          throw Error(ErrorCode::InvalidArgument, "only " + std::to_string(re_corpus.relations.size()) +
                                                      " synthetic examples available for size " + fmt_x(x));
        }
        SplitMix64 rng(point_seed(seed, x, trial));
        auto idx = rng.sample_indices(re_corpus.relations.size(), n);
        if (trial == 0) std::sort(idx.begin(), idx.end());
        corpus::Dataset d;
        d.task = Task::RE;
        for (size_t i : idx) d.relations.push_back(re_corpus.relations[i]);
        return d;
      };
    } else {
      build = [&](double x, int trial) {
        const size_t n = as_count(x, "pool size");
        if (n > pool.re_examples.size()) {
          throw Error(ErrorCode::PoolTooSmall, "seed pool holds " + std::to_string(pool.re_examples.size()) +
                                                   " examples, fewer than " + fmt_x(x));
        }
        SplitMix64 rng(point_seed(seed, x, trial));
        gen::SeedPool sub;
        sub.task = Task::RE;
        for (size_t i : rng.sample_indices(pool.re_examples.size(), n)) sub.re_examples.push_back(pool.re_examples[i]);
        gen::GenerationConfig g = c.rc.generation;
        g.rng_seed = point_seed(seed, x, trial);
        return kept_dataset(generate_re_corpus(sub, tmpl, g, c.rc.gate, *gateway), Task::RE);
      };
    }
  }

  const std::string ext = c.task == Task::NER ? ".conll" : ".tsv";
  auto hook = [&](double x, int trial) {
    const std::string stem = fmt_x(x) + "-" + std::to_string(trial);
    const corpus::Dataset train = build(x, trial);
    dir.write_output("train/" + stem + ext, serialize(train));
    if (c.rc.predictions_dir) {
      const std::string path = (fs::path(*c.rc.predictions_dir) / (stem + ".jsonl")).string();
      if (!fs::exists(path)) throw Error(ErrorCode::NotFound, "no prediction file " + path);
      return score::score_file(test, score::parse_predictions(corpus::read_file(path)));
    }
    return evaluate_baseline(train, test);
  };
  const auto points = score::learning_curve(grid, c.rc.trials, hook);

  json jpoints = json::array();
  size_t failed = 0;
  for (const auto& p : points) {
    json jp{{"x", p.x}};
    if (p.summary) {
      json trials = json::array();
      for (const auto& m : p.summary->trials) trials.push_back(m.to_json());
      jp["trials"] = trials;
      jp["f1_mean"] = p.summary->f1.mean;
      jp["f1_std"] = p.summary->f1.std;
    } else {
      ++failed;
      jp["error"] = *p.error;
    }
    jpoints.push_back(std::move(jp));
  }
  json summary{{"run_dir", dir.dir()},
               {"kind", cfg::to_string(kind)},
               {"evaluator", c.rc.predictions_dir ? "prediction-files" : "baseline"},
               {"trials", c.rc.trials},
               {"points", jpoints.size()},
               {"failed_points", failed},
               {"curve", dir.file("curve.tsv")}};
  dir.write_output("curve.tsv", score::curve_tsv(points));
  dir.write_output("curve.json", json{{"summary", summary}, {"points", jpoints}}.dump(2) + "\n");
  if (fs::exists(dir.file("transcript.jsonl"))) dir.record_output("transcript.jsonl");
  dir.finish(summary);
  return summary;
}

json shift(const cfg::Config& config, const ShiftInputs& inputs) {
  const Context c = load_context(config);
  require_split(c.manifest, Split::Train);
  if (inputs.original_embeddings.has_value() != inputs.synthetic_embeddings.has_value()) {
    throw Error(ErrorCode::InvalidArgument, "embedding files must be given for both corpora or neither");
  }
  run::RunDir dir = open_run(config, c.rc, "shift");
  add_manifest_inputs(dir, c, {Split::Train});
  dir.add_input("synthetic", inputs.synthetic_path);
  const auto original = corpus::load_dataset(c.manifest, Split::Train);
  const std::string synth_bytes = corpus::read_file(inputs.synthetic_path);
  const auto synthetic = c.task == Task::NER ? corpus::parse_conll(synth_bytes, "synthetic")
                                             : corpus::parse_re_file(synth_bytes, "synthetic", Split::Train,
                                                                     corpus::Source::Synthetic);
  const auto orig_texts = dataset_texts(original);
  const auto synth_texts = dataset_texts(synthetic);
  json report = shift::shift_report(orig_texts, synth_texts);

  std::vector<shift::LabeledVector> vectors;
  if (inputs.original_embeddings) {
    dir.add_input("original_embeddings", *inputs.original_embeddings);
    dir.add_input("synthetic_embeddings", *inputs.synthetic_embeddings);
    vectors = shift::parse_embedding_file(corpus::read_file(*inputs.original_embeddings), shift::PointSource::Original);
    for (auto& v : shift::parse_embedding_file(corpus::read_file(*inputs.synthetic_embeddings),
                                               shift::PointSource::Synthetic)) {
      vectors.push_back(std::move(v));
    }
    report["vectors"] = "file";
  } else {
    std::vector<shift::LabeledVector> orig_v;
    std::vector<shift::LabeledVector> synth_v;
    for (size_t i = 0; i < orig_texts.size(); ++i) {
      orig_v.push_back({"o" + std::to_string(i), shift::PointSource::Original, shift::hashed_vector(orig_texts[i])});
    }
    for (size_t i = 0; i < synth_texts.size(); ++i) {
      synth_v.push_back({"s" + std::to_string(i), shift::PointSource::Synthetic, shift::hashed_vector(synth_texts[i])});
    }
    dir.write_output("embeddings_original.tsv", shift::embedding_file(orig_v));
    dir.write_output("embeddings_synthetic.tsv", shift::embedding_file(synth_v));
    vectors = std::move(orig_v);
    for (auto& v : synth_v) vectors.push_back(std::move(v));
    report["vectors"] = "hashed-bow-256";
  }
  const auto projection = shift::pca_project(vectors);
  report["pca_degenerate"] = projection.degenerate;
  report["explained_variance"] = {projection.explained_variance[0], projection.explained_variance[1]};
  shift::export_scatter(projection, dir.file("scatter.tsv"));
  dir.record_output("scatter.tsv");
  report["run_dir"] = dir.dir();
  report["scatter"] = dir.file("scatter.tsv");
  dir.write_output("shift_report.json", report.dump(2) + "\n");
  dir.finish(report);
  return report;
}

namespace {

std::string default_description(forge::PromptTask task, const std::string& entity_type) {
  switch (task) {
    case forge::PromptTask::NerGen:
      return "biomedical sentences that mention a given " + text::lowercase(entity_type) + " entity";
    case forge::PromptTask::ReGen:
      return "gene-disease relation sentences labeled Yes or No, in the style of given seed examples";
    case forge::PromptTask::NerZeroshot:
      return "instructions for tagging " + text::lowercase(entity_type) + " names in a sentence in IOB format";
    case forge::PromptTask::ReZeroshot:
      return "instructions for deciding whether a gene and a disease in a sentence are related";
  }
  return "";
}

forge::SampleSource sample_source(const Context& c, forge::PromptTask task, const std::string& description,
                                  llm::Gateway& gateway) {
  forge::Bindings values{{std::string(forge::kTaskDescriptions), description}};
  std::vector<std::string> task_items;
  if (!c.rc.manifest_path.empty()) {
    if (task == forge::PromptTask::NerGen && c.task == Task::NER) {
      const auto entities = seed_entities(c);
      values[std::string(forge::kSeedEntities)] = entities.front().surface;
    } else if (task == forge::PromptTask::ReGen && c.task == Task::RE) {
      const auto pool = gen::make_re_pool(corpus::load_dataset(c.manifest, seed_split(c.manifest)));
      std::vector<corpus::REExample> rows;
      size_t yes = 0;
      size_t no = 0;
      for (const auto& r : pool.re_examples) {
        size_t& n = r.label == corpus::Label::Yes ? yes : no;
        if (n < 3) {
          rows.push_back(r);
          ++n;
        }
      }
      values[std::string(forge::kSeedExamples)] = "\n" + gen::render_seed_rows(rows);
    } else if (c.manifest.paths.count(Split::Test)) {
      task_items = dataset_texts(corpus::load_dataset(c.manifest, Split::Test));
    }
  }
  values.try_emplace(std::string(forge::kSeedEntities), "rheumatoid arthritis");
  values.try_emplace(std::string(forge::kSeedExamples), "\n| @GENE$ variants were associated with @DISEASE$ . | Yes |");
  if (task_items.empty()) task_items.push_back("The symptoms suggest a possible case of rheumatoid arthritis.");

  return [values, task_items, task, &gateway](const forge::PromptTemplate& t, int count) {
    std::vector<std::string> out;
    auto bind = [&](const std::string& text) {
      forge::Bindings b;
      for (const auto& name : forge::find_placeholders(t.body)) {
        if (name == forge::kText) {
          b[name] = text;
        } else if (name == forge::kCount) {
          b[name] = std::to_string(count);
        } else if (auto it = values.find(name); it != values.end()) {
          b[name] = it->second;
        }
      }
      return forge::render(t, b);
    };
    if (task == forge::PromptTask::NerGen || task == forge::PromptTask::ReGen) {
      const auto reply = gateway.complete(llm::user_request(bind(""), llm::kGenerationTemperature)).content;
      const auto parsed = gen::parse_generation_reply(reply, task);
      for (const auto& line : parsed.accepts) {
        out.push_back(line.label ? line.text + "\t" + std::string(corpus::to_string(*line.label)) : line.text);
      }
      if (out.empty()) {
        for (const auto& line : text::split_lines(reply)) {
          if (!text::trim(line).empty()) out.push_back(text::trim(line));
        }
      }
    } else {
      for (int i = 0; i < count; ++i) {
        const std::string& item = task_items[static_cast<size_t>(i) % task_items.size()];
        std::string prompt = bind(item);
        if (task == forge::PromptTask::ReZeroshot) prompt += "\n" + item;
        out.push_back(text::trim(gateway.complete(llm::user_request(prompt, llm::kTaskTemperature)).content));
      }
    }
    if (out.size() > static_cast<size_t>(count)) out.resize(static_cast<size_t>(count));
    return out;
  };
}

forge::PromptTask forge_task(const Context& c) {
  if (c.rc.forge_task) return *c.rc.forge_task;
  return c.task == Task::NER ? forge::PromptTask::NerGen : forge::PromptTask::ReGen;
}

}  // namespace

std::string forge_session_dir(const cfg::Config& config) {
  const auto rc = cfg::resolve(config);
  return (fs::path(rc.output_dir) / ("forge-" + config.hash().substr(0, 12))).string();
}

json forge_state_json(const forge::RefinementLog& log, const std::string& session_dir) {
  json j{{"session_dir", session_dir},
         {"task", forge::to_string(log.task)},
         {"description", log.task_description},
         {"budget", log.budget},
         {"samples_per_candidate", log.samples_per_candidate}};
  const auto* r = log.current();
  if (log.final_prompt) {
    j["status"] = "closed";
  } else {
    j["status"] = r ? std::string(forge::to_string(r->status)) : "awaiting-samples";
  }
  j["round"] = r ? json(forge::round_to_json(*r)) : json(nullptr);
  json history = json::array();
  for (const auto& round : log.rounds) {
    if (round.selection) {
      history.push_back(json{{"round", round.round_index},
                             {"selection", *round.selection},
                             {"candidate_id", round.candidates[static_cast<size_t>(*round.selection - 1)].id},
                             {"rationale", round.rationale}});
    }
  }
  j["selections"] = history;
  if (log.final_prompt) {
    j["final_prompt"] = forge::to_json(*log.final_prompt);
    j["final_prompt_file"] = (fs::path(session_dir) / "final_prompt.txt").string();
  }
  return j;
}

json forge(const cfg::Config& config, std::optional<int> selection, const std::string& rationale) {
  const Context c = load_context(config, false);
  run::RunDir dir = run::RunDir::session(c.rc.output_dir, "forge", config.hash(), config.canonical());
  if (!c.rc.manifest_path.empty()) dir.add_input("manifest", c.rc.manifest_path);
  const auto task = forge_task(c);
  const std::string description =
      c.rc.forge_description.empty() ? default_description(task, c.entity_type) : c.rc.forge_description;
  auto gateway = make_gateway(c.rc, dir.file("transcript.jsonl"));
  forge::RefinementStore store(dir.file("refinement.jsonl"));
  const auto candidates = forge::gateway_candidates(*gateway, task);
  const auto samples = sample_source(c, task, description, *gateway);

  forge::RefinementLog before;
  forge::RefinementLog after;
  if (!store.exists()) {
    if (selection) throw Error(ErrorCode::RoundNotReady, "no refinement session yet; run forge without a selection first");
    after = forge::open_refinement(task, description, c.rc.forge_budget, c.rc.forge_samples, candidates);
  } else {
    before = store.load();
    after = before;
    if (selection) after = forge::advance_round(after, *selection, rationale, candidates);
  }
  if (!after.final_prompt && after.current() && after.current()->status == forge::RoundStatus::AwaitingSamples) {
    after = forge::record_samples(after, samples);
  }
  store.append_transition(before, after);
  dir.record_output("refinement.jsonl", true);
  if (after.final_prompt) dir.write_output("final_prompt.txt", forge::template_file_content(*after.final_prompt));
  if (fs::exists(dir.file("transcript.jsonl"))) dir.record_output("transcript.jsonl", true);
  json state = forge_state_json(after, dir.dir());
  dir.finish(json{{"status", state["status"]}, {"rounds", after.rounds.size()}});
  return state;
}

std::optional<std::string> latest_run(const std::string& output_dir, const std::string& subcommand,
                                      const std::string& file) {
  if (!fs::is_directory(output_dir)) return std::nullopt;
  std::optional<std::pair<fs::file_time_type, std::string>> best;
  for (const auto& entry : fs::directory_iterator(output_dir)) {
    const std::string name = entry.path().filename().string();
    if (!entry.is_directory() || name.rfind(subcommand + "-", 0) != 0) continue;
    const fs::path target = entry.path() / file;
    if (!fs::exists(target)) continue;
    const auto key = std::pair{fs::last_write_time(target), entry.path().string()};
    if (!best || key > *best) best = key;
  }
  if (!best) return std::nullopt;
  return best->second;
}

}  // namespace medsynth::pipeline
