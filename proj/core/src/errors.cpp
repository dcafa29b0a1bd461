#include "vcgate/errors.hpp"

namespace vcgate {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::invalid_input: return "invalid-input";
    case ErrorKind::invalid_mean: return "invalid-mean";
    case ErrorKind::singular_weight: return "singular-weight";
    case ErrorKind::design: return "design-error";
    case ErrorKind::degenerate_response: return "degenerate-response";
    case ErrorKind::degenerate_data: return "degenerate-data";
    case ErrorKind::insufficient_df: return "insufficient-residual-df";
    case ErrorKind::invalid_statistic: return "invalid-statistic";
    case ErrorKind::invalid_null: return "invalid-null";
    case ErrorKind::domain: return "domain-error";
    case ErrorKind::ingestion: return "ingestion-error";
    case ErrorKind::non_convergence: return "non-convergence";
  }
  return "unknown";
}

}  // namespace vcgate
