#include <cstdlib>
#include <cstring>
#include <memory>
#include <string>

#include "json.hpp"
#include "medsynth/config.hpp"
#include "medsynth/corpus.hpp"
#include "medsynth/error.hpp"
#include "medsynth/generator.hpp"
#include "medsynth/llm_gateway.hpp"
#include "medsynth/medsynth.h"
#include "medsynth/pipeline.hpp"
#include "medsynth/review_server.hpp"

using medsynth::Error;
using medsynth::ErrorCode;
using json = nlohmann::json;

struct medsynth_session {
  medsynth::cfg::Config config;
};

struct medsynth_review_server {
  std::unique_ptr<medsynth::review::ReviewServer> server;
};

namespace {

thread_local std::string g_last_error;

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

medsynth_status fail(ErrorCode code, const std::string& message) {
  g_last_error = std::string(medsynth::error_class_name(code)) + ": " + message;
  return static_cast<medsynth_status>(code);
}

// Runs `body`, translating exceptions into a status and the last-error text.
template <typename F>
medsynth_status guarded(F&& body) {
  g_last_error.clear();
  try {
    body();
    return MEDSYNTH_OK;
  } catch (const Error& e) {
    return fail(e.code(), e.what());
  } catch (const json::exception& e) {
    return fail(ErrorCode::InvalidArgument, e.what());
  } catch (const std::bad_alloc&) {
    return fail(ErrorCode::Internal, "out of memory");
  } catch (const std::exception& e) {
    return fail(ErrorCode::Internal, e.what());
  } catch (...) {
    return fail(ErrorCode::Internal, "unknown exception");
  }
}

void require(const void* p, const char* name) {
  if (!p) throw Error(ErrorCode::InvalidArgument, std::string(name) + " must not be NULL");
}

void put_string(char** out, const std::string& s) {
  *out = dup_string(s);
  if (!*out) throw std::bad_alloc();
}

}  // namespace

extern "C" {

const char* medsynth_version(void) { return "1.0.0"; }

const char* medsynth_last_error(void) { return g_last_error.c_str(); }

const char* medsynth_status_name(medsynth_status status) {
  if (status == MEDSYNTH_OK) return "Ok";
  if (status < MEDSYNTH_E_INVALID_ARGUMENT || status > MEDSYNTH_E_INTERNAL) return "Unknown";
  return medsynth::error_class_name(static_cast<ErrorCode>(status)).data();
}

void medsynth_string_free(char* s) { std::free(s); }

medsynth_status medsynth_session_open(const char* config_path, medsynth_session** out) {
  return guarded([&] {
    require(config_path, "config_path");
    require(out, "out");
    *out = nullptr;
    auto s = std::make_unique<medsynth_session>();
    s->config = medsynth::cfg::load_config(config_path);
    *out = s.release();
  });
}

medsynth_status medsynth_session_open_text(const char* config_text, const char* base_dir, medsynth_session** out) {
  return guarded([&] {
    require(config_text, "config_text");
    require(out, "out");
    *out = nullptr;
    auto s = std::make_unique<medsynth_session>();
    s->config = medsynth::cfg::parse_config(config_text, base_dir ? base_dir : ".");
    *out = s.release();
  });
}

void medsynth_session_close(medsynth_session* session) { delete session; }

medsynth_status medsynth_session_set(medsynth_session* session, const char* key, const char* value) {
  return guarded([&] {
    require(session, "session");
    require(key, "key");
    require(value, "value");
    session->config.set(key, value);
  });
}

medsynth_status medsynth_session_config_hash(const medsynth_session* session, char** out_hex) {
  return guarded([&] {
    require(session, "session");
    require(out_hex, "out_hex");
    put_string(out_hex, session->config.hash());
  });
}

#define MEDSYNTH_SUBCOMMAND(call)              \
  return guarded([&] {                         \
    require(session, "session");               \
    require(out_json, "out_json");             \
    *out_json = nullptr;                       \
    put_string(out_json, (call).dump());       \
  })

medsynth_status medsynth_ingest(medsynth_session* session, char** out_json) {
  MEDSYNTH_SUBCOMMAND(medsynth::pipeline::ingest(session->config));
}

medsynth_status medsynth_gen(medsynth_session* session, char** out_json) {
  MEDSYNTH_SUBCOMMAND(medsynth::pipeline::gen(session->config));
}

medsynth_status medsynth_bench(medsynth_session* session, char** out_json) {
  MEDSYNTH_SUBCOMMAND(medsynth::pipeline::bench(session->config));
}

medsynth_status medsynth_score(medsynth_session* session, const char* predictions_path, char** out_json) {
  if (!predictions_path) return fail(ErrorCode::InvalidArgument, "predictions_path must not be NULL");
  MEDSYNTH_SUBCOMMAND(medsynth::pipeline::score(session->config, predictions_path));
}

medsynth_status medsynth_curve(medsynth_session* session, char** out_json) {
  MEDSYNTH_SUBCOMMAND(medsynth::pipeline::curve(session->config));
}

medsynth_status medsynth_shift(medsynth_session* session, const char* synthetic_path, const char* original_embeddings,
                               const char* synthetic_embeddings, char** out_json) {
  if (!synthetic_path) return fail(ErrorCode::InvalidArgument, "synthetic_path must not be NULL");
  medsynth::pipeline::ShiftInputs in;
  in.synthetic_path = synthetic_path;
  if (original_embeddings) in.original_embeddings = original_embeddings;
  if (synthetic_embeddings) in.synthetic_embeddings = synthetic_embeddings;
  MEDSYNTH_SUBCOMMAND(medsynth::pipeline::shift(session->config, in));
}

medsynth_status medsynth_forge(medsynth_session* session, int selection, const char* rationale, char** out_json) {
  std::optional<int> sel;
  if (selection > 0) sel = selection;
  MEDSYNTH_SUBCOMMAND(medsynth::pipeline::forge(session->config, sel, rationale ? rationale : ""));
}

#undef MEDSYNTH_SUBCOMMAND

medsynth_status medsynth_review_start(medsynth_session* session, const char* gen_run_dir, const char* scatter_path,
                                      const char* static_dir, medsynth_review_server** out) {
  return guarded([&] {
    require(session, "session");
    require(out, "out");
    *out = nullptr;
    medsynth::review::ReviewOptions opts;
    opts.config = session->config;
    if (gen_run_dir) opts.gen_run_dir = gen_run_dir;
    if (scatter_path) opts.scatter_path = scatter_path;
    if (static_dir) opts.static_dir = static_dir;
    auto handle = std::make_unique<medsynth_review_server>();
    handle->server = std::make_unique<medsynth::review::ReviewServer>(std::move(opts));
    handle->server->start();
    *out = handle.release();
  });
}

int medsynth_review_port(const medsynth_review_server* server) { return server ? server->server->port() : 0; }

void medsynth_review_stop(medsynth_review_server* server) {
  if (!server) return;
  server->server->stop();
  delete server;
}

medsynth_status medsynth_tokenize(const char* text, char** out_json) {
  return guarded([&] {
    require(text, "text");
    require(out_json, "out_json");
    json tokens = json::array();
    for (const auto& t : medsynth::corpus::tokenize(text)) tokens.push_back(t.text);
    put_string(out_json, tokens.dump());
  });
}

medsynth_status medsynth_annotate(const char* sentence, const char* surface, const char* entity_type, char** out_json) {
  return guarded([&] {
    require(sentence, "sentence");
    require(surface, "surface");
    require(entity_type, "entity_type");
    require(out_json, "out_json");
    auto result = medsynth::gen::annotate_entity(sentence, {surface, entity_type, "api"});
    if (auto* reason = std::get_if<std::string>(&result)) throw Error(ErrorCode::NotFound, *reason);
    json tags = json::array();
    for (const auto& t : std::get<medsynth::corpus::TaggedSentence>(result).tags) {
      tags.push_back(medsynth::corpus::to_string(t));
    }
    put_string(out_json, tags.dump());
  });
}

medsynth_status medsynth_cache_key(const char* request_json, char** out_hex) {
  return guarded([&] {
    require(request_json, "request_json");
    require(out_hex, "out_hex");
    put_string(out_hex, medsynth::llm::cache_key(medsynth::llm::request_from_json(json::parse(request_json))));
  });
}

}  // extern "C"
