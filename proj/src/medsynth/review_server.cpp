#include "medsynth/review_server.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "medsynth/corpus.hpp"
#include "medsynth/error.hpp"
#include "medsynth/pipeline.hpp"
#include "medsynth/text.hpp"

namespace medsynth::review {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::RoundNotReady:
    case ErrorCode::RunLocked:
    case ErrorCode::Conflict: return 409;
    case ErrorCode::NotFound: return 404;
    case ErrorCode::InvalidArgument:
    case ErrorCode::InvalidSelection:
    case ErrorCode::MalformedLine: return 400;
    default: return 500;
  }
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json; charset=utf-8");
}

void send_error(httplib::Response& res, ErrorCode code, const std::string& message) {
  send_json(res, http_status(code), json{{"error", error_class_name(code)}, {"message", message}});
}

struct Sample {
  std::string id;
  json record;  // text, annotation and provenance
  std::string status = "pending";
  std::string reason;
};

void append_line(const std::string& path, const json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw Error(ErrorCode::Io, "cannot append to " + path);
  out << j.dump() << '\n';
  if (!out.flush()) throw Error(ErrorCode::Io, "short write to " + path);
}

}  // namespace

struct ReviewServer::Impl {
  ReviewOptions options;
  cfg::RunConfig rc;
  httplib::Server server;
  std::thread thread;
  int port = 0;

  std::mutex mu;  // serializes writes and guards `samples`
  std::string run_dir;
  std::vector<Sample> samples;
  std::map<std::string, size_t> by_id;

  void load_samples() {
    if (options.gen_run_dir) {
      run_dir = *options.gen_run_dir;
    } else if (auto latest = pipeline::latest_run(rc.output_dir, "gen", "provenance.jsonl")) {
      run_dir = *latest;
    } else {
      return;
    }
    const fs::path dir(run_dir);
    const bool ner = fs::exists(dir / "corpus.conll");
    const std::string corpus_bytes = corpus::read_file((dir / (ner ? "corpus.conll" : "corpus.tsv")).string());
    std::vector<json> items;
    if (ner) {
      if (!text::trim(corpus_bytes).empty()) {
        for (const auto& s : corpus::parse_conll(corpus_bytes, "synthetic").sentences) {
          json tags = json::array();
          for (const auto& t : s.tags) tags.push_back(corpus::to_string(t));
          items.push_back(json{{"text", corpus::detokenize(s.tokens)}, {"tags", tags}});
        }
      }
    } else if (!text::trim(corpus_bytes).empty()) {
      for (const auto& r : corpus::parse_re_file(corpus_bytes, "synthetic").relations) {
        items.push_back(json{{"text", r.sentence}, {"label", corpus::to_string(r.label)}});
      }
    }
    size_t k = 0;
    for (const auto& line : text::split_lines(corpus::read_file((dir / "provenance.jsonl").string()))) {
      if (text::trim(line).empty()) continue;
      const json p = json::parse(line);
      if (p.value("gate", "") != "kept" || k >= items.size()) continue;
      json& item = items[k++];
      item["prompt_id"] = p.value("prompt_id", "");
      item["seed_ref"] = p.value("seed_ref", "");
      item["round"] = p.value("round", 0);
    }
    for (size_t i = 0; i < items.size(); ++i) {
      Sample s;
      s.id = std::to_string(i);
      s.record = std::move(items[i]);
      by_id[s.id] = samples.size();
      samples.push_back(std::move(s));
    }
    const fs::path decisions = dir / "review.jsonl";
    if (fs::exists(decisions)) {
      for (const auto& line : text::split_lines(corpus::read_file(decisions.string()))) {
        if (text::trim(line).empty()) continue;
        const json d = json::parse(line);
        auto it = by_id.find(d.at("id").get<std::string>());
        if (it == by_id.end()) continue;
        samples[it->second].status = d.at("decision").get<std::string>() == "accept" ? "accepted" : "rejected";
        samples[it->second].reason = d.value("reason", "");
      }
    }
  }

  json sample_json(const Sample& s) const {
    json j = s.record;
    j["id"] = s.id;
    j["status"] = s.status;
    if (!s.reason.empty()) j["reason"] = s.reason;
    return j;
  }

  void routes() {
    server.Get("/rounds/current", [this](const httplib::Request&, httplib::Response& res) {
      std::lock_guard guard(mu);
      try {
        const std::string dir = pipeline::forge_session_dir(options.config);
        forge::RefinementStore store((fs::path(dir) / "refinement.jsonl").string());
        if (!store.exists()) return send_error(res, ErrorCode::NotFound, "no refinement session; run forge first");
        send_json(res, 200, pipeline::forge_state_json(store.load(), dir));
      } catch (const Error& e) {
        send_error(res, e.code(), e.what());
      }
    });

    server.Post("/rounds/current/selection", [this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard guard(mu);
      try {
        json body;
        try {
          body = json::parse(req.body);
        } catch (const json::exception&) {
          return send_error(res, ErrorCode::InvalidArgument, "body must be JSON");
        }
        if (!body.is_object() || !body.contains("candidate_id")) {
          return send_error(res, ErrorCode::InvalidArgument, "candidate_id is required");
        }
        const std::string dir = pipeline::forge_session_dir(options.config);
        forge::RefinementStore store((fs::path(dir) / "refinement.jsonl").string());
        if (!store.exists()) return send_error(res, ErrorCode::NotFound, "no refinement session; run forge first");
        const auto log = store.load();
        const auto* round = log.current();
        if (!round || log.final_prompt || round->status != forge::RoundStatus::AwaitingSelection) {
          return send_error(res, ErrorCode::Conflict, "current round is not awaiting a selection");
        }
        int number = 0;
        const json& id = body.at("candidate_id");
        if (id.is_number_integer()) {
          number = id.get<int>();
        } else if (id.is_string()) {
          const std::string sid = id.get<std::string>();
          for (size_t i = 0; i < round->candidates.size(); ++i) {
            if (round->candidates[i].id == sid) number = static_cast<int>(i + 1);
          }
          if (!number) {
            for (const auto& r : log.rounds) {
              for (const auto& c : r.candidates) {
                if (c.id == sid) return send_error(res, ErrorCode::Conflict, "candidate " + sid + " belongs to a closed round");
              }
            }
            return send_error(res, ErrorCode::InvalidArgument, "unknown candidate " + sid);
          }
        } else {
          return send_error(res, ErrorCode::InvalidArgument, "candidate_id must be a string or number");
        }
        const std::string rationale = body.value("rationale", "");
        send_json(res, 200, pipeline::forge(options.config, number, rationale));
      } catch (const Error& e) {
        send_error(res, e.code(), e.what());
      } catch (const std::exception& e) {
        send_error(res, ErrorCode::Internal, e.what());
      }
    });

    server.Get("/samples", [this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard guard(mu);
      const std::string status = req.has_param("status") ? req.get_param_value("status") : "pending";
      if (status != "pending" && status != "accepted" && status != "rejected" && status != "all") {
        return send_error(res, ErrorCode::InvalidArgument, "status must be pending, accepted, rejected or all");
      }
      json out = json::array();
      for (const auto& s : samples) {
        if (status == "all" || s.status == status) out.push_back(sample_json(s));
      }
      send_json(res, 200, json{{"run_dir", run_dir}, {"status", status}, {"samples", out}});
    });

    server.Post(R"(/samples/([^/]+)/decision)", [this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard guard(mu);
      try {
        auto it = by_id.find(req.matches[1].str());
        if (it == by_id.end()) return send_error(res, ErrorCode::NotFound, "no sample " + req.matches[1].str());
        json body;
        try {
          body = json::parse(req.body);
        } catch (const json::exception&) {
          return send_error(res, ErrorCode::InvalidArgument, "body must be JSON");
        }
        const std::string decision = body.is_object() ? body.value("decision", "") : "";
        if (decision != "accept" && decision != "reject") {
          return send_error(res, ErrorCode::InvalidArgument, "decision must be accept or reject");
        }
        Sample& s = samples[it->second];
        if (s.status != "pending") return send_error(res, ErrorCode::Conflict, "sample " + s.id + " is already " + s.status);
        const std::string reason = body.value("reason", "");
        const fs::path dir(run_dir);
        append_line((dir / "review.jsonl").string(), json{{"id", s.id}, {"decision", decision}, {"reason", reason}});
        if (decision == "reject") {
          json q = s.record;
          q["status"] = "quarantined";
          q["reason"] = "ReviewRejected";
          q["detail"] = reason;
          append_line((dir / "quarantine.jsonl").string(), q);
        }
        s.status = decision == "accept" ? "accepted" : "rejected";
        s.reason = reason;
        send_json(res, 200, sample_json(s));
      } catch (const Error& e) {
        send_error(res, e.code(), e.what());
      }
    });

    server.Get("/scatter", [this](const httplib::Request&, httplib::Response& res) {
      std::optional<std::string> path = options.scatter_path;
      if (!path) {
        if (auto latest = pipeline::latest_run(rc.output_dir, "shift", "scatter.tsv")) {
          path = (fs::path(*latest) / "scatter.tsv").string();
        }
      }
      if (!path || !fs::exists(*path)) return send_error(res, ErrorCode::NotFound, "no scatter data; run shift first");
      try {
        res.set_content(corpus::read_file(*path), "text/tab-separated-values; charset=utf-8");
      } catch (const Error& e) {
        send_error(res, e.code(), e.what());
      }
    });

    if (options.static_dir && !server.set_mount_point("/", *options.static_dir)) {
      throw Error(ErrorCode::ConfigError, "cannot serve static files from " + *options.static_dir);
    }
  }
};

ReviewServer::ReviewServer(ReviewOptions options) : impl_(std::make_unique<Impl>()) {
  impl_->options = std::move(options);
  impl_->rc = cfg::resolve(impl_->options.config);
  impl_->load_samples();
  impl_->routes();
}

ReviewServer::~ReviewServer() { stop(); }

int ReviewServer::start() {
  if (impl_->port) return impl_->port;
  const int port = impl_->server.bind_to_any_port("127.0.0.1");
  if (port <= 0) throw Error(ErrorCode::Io, "cannot bind a loopback port");
  impl_->port = port;
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return port;
}

int ReviewServer::port() const { return impl_->port; }

void ReviewServer::stop() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace medsynth::review
