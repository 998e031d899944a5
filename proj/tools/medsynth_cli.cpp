// medsynth command-line driver. Talks to the pipeline only through the C API.

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "medsynth/medsynth.h"

using json = nlohmann::json;

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

int report_error() {
  std::fprintf(stderr, "error: %s\n", medsynth_last_error());
  return 1;
}

class Session {
 public:
  ~Session() { medsynth_session_close(s_); }
  medsynth_session* get() { return s_; }
  medsynth_session** out() { return &s_; }

 private:
  medsynth_session* s_ = nullptr;
};

// Takes ownership of a library string.
std::string take(char* s) {
  std::string out = s ? s : "";
  medsynth_string_free(s);
  return out;
}

void print_line(const char* key, const json& v) {
  std::printf("%s: %s\n", key, v.is_string() ? v.get<std::string>().c_str() : v.dump().c_str());
}

void print_summary(const std::string& sub, const json& j, bool as_json) {
  if (as_json) {
    std::printf("%s\n", j.dump(2).c_str());
    return;
  }
  if (sub == "forge") {
    print_line("status", j.at("status"));
    print_line("session", j.at("session_dir"));
    if (j.contains("round") && !j["round"].is_null()) {
      const auto& r = j["round"];
      print_line("round", r.at("round"));
      for (const auto& c : r.at("candidates")) {
        std::printf("  [%d] %s: %s\n", c.at("number").get<int>(), c.at("id").get<std::string>().c_str(),
                    c.at("body").get<std::string>().c_str());
        for (const auto& s : c.at("samples")) std::printf("      - %s\n", s.get<std::string>().c_str());
      }
    }
    if (j.contains("final_prompt_file")) print_line("final_prompt", j["final_prompt_file"]);
    return;
  }
  if (j.contains("run_dir")) print_line("run_dir", j["run_dir"]);
  for (const char* key : {"task", "candidates", "kept", "target_reached", "items", "failures", "invalid_rate",
                          "points", "failed_points", "jsd_1", "jsd_2", "vocab_overlap", "exact_overlap_rate"}) {
    if (j.contains(key)) print_line(key, j[key]);
  }
  if (j.contains("metrics")) {
    const auto& m = j["metrics"];
    std::printf("precision: %.6f\nrecall: %.6f\nf1: %.6f\n", m.at("precision").get<double>(),
                m.at("recall").get<double>(), m.at("f1").get<double>());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic biomedical NER/RE data pipeline"};
  app.require_subcommand(1);
  std::string config_path;
  std::vector<std::string> overrides;
  bool as_json = false;
  app.add_option("-c,--config", config_path, "Run configuration file")->required()->check(CLI::ExistingFile);
  app.add_option("--set", overrides, "Override a config value: section.key=value");
  app.add_flag("--json", as_json, "Print the full JSON summary");

  auto* ingest = app.add_subcommand("ingest", "Parse and validate the dataset splits");
  auto* gen = app.add_subcommand("gen", "Generate a synthetic corpus and run the quality gate");
  auto* bench = app.add_subcommand("bench", "Zero-shot run over the test split, with scores");
  auto* score = app.add_subcommand("score", "Score a prediction file against the test split");
  std::string predictions;
  score->add_option("-p,--predictions", predictions, "Prediction JSONL")->required()->check(CLI::ExistingFile);
  auto* curve = app.add_subcommand("curve", "Learning-curve sweep");
  auto* shift = app.add_subcommand("shift", "Distribution-shift statistics and scatter export");
  std::string synthetic;
  std::string orig_emb;
  std::string synth_emb;
  shift->add_option("-s,--synthetic", synthetic, "Synthetic corpus file")->required()->check(CLI::ExistingFile);
  auto* oe = shift->add_option("--original-embeddings", orig_emb, "Embedding file for the original corpus")
                 ->check(CLI::ExistingFile);
  auto* se = shift->add_option("--synthetic-embeddings", synth_emb, "Embedding file for the synthetic corpus")
                 ->check(CLI::ExistingFile);
  oe->needs(se);
  se->needs(oe);
  auto* forge = app.add_subcommand("forge", "Prompt refinement rounds");
  int selection = 0;
  std::string rationale;
  auto* sel = forge->add_option("--select", selection, "1-based candidate number closing the current round")
                  ->check(CLI::Range(1, 5));
  forge->add_option("--rationale", rationale, "Why the candidate was chosen")->needs(sel);
  auto* review = app.add_subcommand("review", "Review server");
  auto* serve = review->add_subcommand("serve", "Serve the review API on a loopback port");
  review->require_subcommand(1);
  std::string run_dir;
  std::string scatter;
  std::string static_dir;
  serve->add_option("--run", run_dir, "gen run directory whose samples are reviewed")->check(CLI::ExistingDirectory);
  serve->add_option("--scatter", scatter, "Scatter TSV served at /scatter")->check(CLI::ExistingFile);
  serve->add_option("--static", static_dir, "Directory of client files served at /")->check(CLI::ExistingDirectory);

  CLI11_PARSE(app, argc, argv);

  Session session;
  if (medsynth_session_open(config_path.c_str(), session.out()) != MEDSYNTH_OK) return report_error();
  for (const auto& o : overrides) {
    const size_t eq = o.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "error: ConfigError: --set expects section.key=value, got '%s'\n", o.c_str());
      return 1;
    }
    if (medsynth_session_set(session.get(), o.substr(0, eq).c_str(), o.substr(eq + 1).c_str()) != MEDSYNTH_OK) {
      return report_error();
    }
  }

  if (*serve) {
    medsynth_review_server* server = nullptr;
    if (medsynth_review_start(session.get(), run_dir.empty() ? nullptr : run_dir.c_str(),
                              scatter.empty() ? nullptr : scatter.c_str(),
                              static_dir.empty() ? nullptr : static_dir.c_str(), &server) != MEDSYNTH_OK) {
      return report_error();
    }
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::printf("review server listening on http://127.0.0.1:%d\n", medsynth_review_port(server));
    std::fflush(stdout);
    while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    medsynth_review_stop(server);
    return 0;
  }

  char* out = nullptr;
  medsynth_status status = MEDSYNTH_OK;
  std::string sub;
  if (*ingest) {
    sub = "ingest";
    status = medsynth_ingest(session.get(), &out);
  } else if (*gen) {
    sub = "gen";
    status = medsynth_gen(session.get(), &out);
  } else if (*bench) {
    sub = "bench";
    status = medsynth_bench(session.get(), &out);
  } else if (*score) {
    sub = "score";
    status = medsynth_score(session.get(), predictions.c_str(), &out);
  } else if (*curve) {
    sub = "curve";
    status = medsynth_curve(session.get(), &out);
  } else if (*shift) {
    sub = "shift";
    status = medsynth_shift(session.get(), synthetic.c_str(), orig_emb.empty() ? nullptr : orig_emb.c_str(),
                            synth_emb.empty() ? nullptr : synth_emb.c_str(), &out);
  } else if (*forge) {
    sub = "forge";
    status = medsynth_forge(session.get(), selection, rationale.c_str(), &out);
  }
  if (status != MEDSYNTH_OK) return report_error();
  print_summary(sub, json::parse(take(out)), as_json);
  return 0;
}
