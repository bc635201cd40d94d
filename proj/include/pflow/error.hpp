#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace pflow {

enum class ErrorCode {
  InvalidArgument,
  InvalidSchema,
  LengthMismatch,
  TypeMismatch,
  BadOffsets,
  NullViolation,
  MaskLengthMismatch,
  SchemaMismatch,
  EmptyList,
  UnknownField,
  NullKey,
  CodecFailure,
  BadMagic,
  UnsupportedVersion,
  Truncated,
  LayoutMismatch,
  BadChunkSize,
  WindowTooSmall,
  CrcMismatch,
  PipelineShutdown,
  JobFailed,
  UnknownJob,
  WrongIdType,
  NullId,
  EmptyInput,
  RoutingViolation,
  FileNotFound,
  HeaderMismatch,
  ParseError,
  IoError,
  UnknownExperiment,
};

std::string_view error_code_name(ErrorCode code) noexcept;

// Every failure raised by the library. `index` carries the buffer, chunk or
// row position when the error concerns one element of a sequence.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::optional<std::uint64_t> index = std::nullopt);

  ErrorCode code() const noexcept { return code_; }
  std::optional<std::uint64_t> index() const noexcept { return index_; }

 private:
  ErrorCode code_;
  std::optional<std::uint64_t> index_;
};

}  // namespace pflow
