#include "sldcnn/error.hpp"

namespace sldcnn {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kShape: return "shape error";
    case ErrorCode::kRange: return "range error";
    case ErrorCode::kDomain: return "domain error";
    case ErrorCode::kNumeric: return "numeric error";
    case ErrorCode::kParse: return "parse error";
    case ErrorCode::kConfig: return "config error";
    case ErrorCode::kState: return "state error";
    case ErrorCode::kFormat: return "format error";
    case ErrorCode::kIo: return "i/o error";
    case ErrorCode::kLabel: return "label error";
    case ErrorCode::kData: return "data error";
    case ErrorCode::kUsage: return "usage error";
    case ErrorCode::kInternal: return "internal error";
  }
  return "unknown error";
}

}  // namespace sldcnn
