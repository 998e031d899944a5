#include "medsynth/error.hpp"

namespace medsynth {

std::string_view error_class_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "IoError";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::MalformedLine: return "MalformedLine";
    case ErrorCode::UnknownTag: return "UnknownTag";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::OrphanInsideTag: return "OrphanInsideTag";
    case ErrorCode::OverlappingSpans: return "OverlappingSpans";
    case ErrorCode::SpanOutOfRange: return "SpanOutOfRange";
    case ErrorCode::MissingPlaceholder: return "MissingPlaceholder";
    case ErrorCode::BadLabel: return "BadLabel";
    case ErrorCode::RateLimited: return "RateLimited";
    case ErrorCode::TransportError: return "TransportError";
    case ErrorCode::ProviderError: return "ProviderError";
    case ErrorCode::MissingApiKey: return "MissingApiKey";
    case ErrorCode::UnboundPlaceholder: return "UnboundPlaceholder";
    case ErrorCode::UnknownPlaceholder: return "UnknownPlaceholder";
    case ErrorCode::CandidateCountMismatch: return "CandidateCountMismatch";
    case ErrorCode::UnparseableReply: return "UnparseableReply";
    case ErrorCode::InvalidSelection: return "InvalidSelection";
    case ErrorCode::RoundNotReady: return "RoundNotReady";
    case ErrorCode::EmptyReply: return "EmptyReply";
    case ErrorCode::PoolTooSmall: return "PoolTooSmall";
    case ErrorCode::TaskMismatch: return "TaskMismatch";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::RunLocked: return "RunLocked";
    case ErrorCode::Conflict: return "Conflict";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::Internal: return "InternalError";
  }
  return "UnknownError";
}

}  // namespace medsynth
