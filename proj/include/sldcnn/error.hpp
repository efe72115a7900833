#ifndef SLDCNN_ERROR_HPP
#define SLDCNN_ERROR_HPP

#include <stdexcept>
#include <string>

namespace sldcnn {

/// Failure categories. Each maps onto one status code of the C API.
enum class ErrorCode {
  kShape,
  kRange,
  kDomain,
  kNumeric,
  kParse,
  kConfig,
  kState,
  kFormat,
  kIo,
  kLabel,
  kData,
  kUsage,
  kInternal,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

template <ErrorCode C>
class CodedError : public Error {
 public:
  explicit CodedError(const std::string& what) : Error(C, what) {}
};

using ShapeError = CodedError<ErrorCode::kShape>;
using RangeError = CodedError<ErrorCode::kRange>;
using DomainError = CodedError<ErrorCode::kDomain>;
using NumericError = CodedError<ErrorCode::kNumeric>;
using ParseError = CodedError<ErrorCode::kParse>;
using ConfigError = CodedError<ErrorCode::kConfig>;
using StateError = CodedError<ErrorCode::kState>;
using FormatError = CodedError<ErrorCode::kFormat>;
using IoError = CodedError<ErrorCode::kIo>;
using LabelError = CodedError<ErrorCode::kLabel>;
using DataError = CodedError<ErrorCode::kData>;
using UsageError = CodedError<ErrorCode::kUsage>;
using InternalError = CodedError<ErrorCode::kInternal>;

}  // namespace sldcnn

#endif  // SLDCNN_ERROR_HPP
