#include "pflow/error.hpp"

namespace pflow {

std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidSchema: return "InvalidSchema";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::TypeMismatch: return "TypeMismatch";
    case ErrorCode::BadOffsets: return "BadOffsets";
    case ErrorCode::NullViolation: return "NullViolation";
    case ErrorCode::MaskLengthMismatch: return "MaskLengthMismatch";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::EmptyList: return "EmptyList";
    case ErrorCode::UnknownField: return "UnknownField";
    case ErrorCode::NullKey: return "NullKey";
    case ErrorCode::CodecFailure: return "CodecFailure";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::Truncated: return "Truncated";
    case ErrorCode::LayoutMismatch: return "LayoutMismatch";
    case ErrorCode::BadChunkSize: return "BadChunkSize";
    case ErrorCode::WindowTooSmall: return "WindowTooSmall";
    case ErrorCode::CrcMismatch: return "CrcMismatch";
    case ErrorCode::PipelineShutdown: return "PipelineShutdown";
    case ErrorCode::JobFailed: return "JobFailed";
    case ErrorCode::UnknownJob: return "UnknownJob";
    case ErrorCode::WrongIdType: return "WrongIdType";
    case ErrorCode::NullId: return "NullId";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::RoutingViolation: return "RoutingViolation";
    case ErrorCode::FileNotFound: return "FileNotFound";
    case ErrorCode::HeaderMismatch: return "HeaderMismatch";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::UnknownExperiment: return "UnknownExperiment";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message, std::optional<std::uint64_t> index)
    : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code), index_(index) {}

}  // namespace pflow
