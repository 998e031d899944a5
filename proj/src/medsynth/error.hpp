#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace medsynth {

// Error classes surfaced through exceptions, the C API status codes, and the
// CLI's one-line error output. Append only: the numeric values are ABI.
enum class ErrorCode : int {
  InvalidArgument = 1,
  Io,
  ConfigError,
  // corpus
  MalformedLine,
  UnknownTag,
  EmptyInput,
  OrphanInsideTag,
  OverlappingSpans,
  SpanOutOfRange,
  MissingPlaceholder,
  BadLabel,
  // llm_gateway
  RateLimited,
  TransportError,
  ProviderError,
  MissingApiKey,
  // prompt_forge
  UnboundPlaceholder,
  UnknownPlaceholder,
  CandidateCountMismatch,
  UnparseableReply,
  InvalidSelection,
  RoundNotReady,
  // generator
  EmptyReply,
  PoolTooSmall,
  // zeroshot_bench
  TaskMismatch,
  // scorer
  ShapeMismatch,
  LengthMismatch,
  // shift_analyzer
  EmptyCorpus,
  DimensionMismatch,
  DegenerateInput,
  // cli
  RunLocked,
  Conflict,
  NotFound,
  Internal,
};

std::string_view error_class_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Parse failures carry the 1-based position of the first bad record.
class ParseError : public Error {
 public:
  ParseError(ErrorCode code, size_t line, size_t column, const std::string& message)
      : Error(code, "line " + std::to_string(line) + ", column " +
                        std::to_string(column) + ": " + message),
        line_(line),
        column_(column) {}

  size_t line() const noexcept { return line_; }
  size_t column() const noexcept { return column_; }

 private:
  size_t line_;
  size_t column_;
};

class ProviderFailure : public Error {
 public:
  ProviderFailure(int status, std::string body)
      : Error(ErrorCode::ProviderError,
              "provider returned HTTP " + std::to_string(status)),
        status_(status),
        body_(std::move(body)) {}

  int status() const noexcept { return status_; }
  const std::string& body() const noexcept { return body_; }

 private:
  int status_;
  std::string body_;
};

}  // namespace medsynth
