#include "fsdc/error.hpp"

namespace fsdc {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::format: return "format";
    case ErrorKind::dimension: return "dimension";
    case ErrorKind::data: return "data";
    case ErrorKind::io: return "io";
    case ErrorKind::spec: return "spec";
    case ErrorKind::domain: return "domain";
    case ErrorKind::undefined_skewness: return "undefined-skewness";
    case ErrorKind::empty_class: return "empty-class";
    case ErrorKind::insufficient_samples: return "insufficient-samples";
    case ErrorKind::missing_class: return "missing-class";
    case ErrorKind::undefined_similarity: return "undefined-similarity";
    case ErrorKind::not_factorizable: return "not-factorizable";
    case ErrorKind::divergence: return "divergence";
    case ErrorKind::precondition: return "precondition";
    case ErrorKind::unsatisfiable: return "unsatisfiable";
    case ErrorKind::usage: return "usage";
  }
  return "unknown";
}

void rethrow_with_context(const Error& e, const std::string& context) {
  throw Error(e.kind(), context + ": " + e.what());
}

}  // namespace fsdc
