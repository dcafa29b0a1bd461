#pragma once

#include <stdexcept>
#include <string>

namespace vcgate {

/// Classification of library failures; the CLI maps these onto exit codes.
enum class ErrorKind {
  invalid_input,
  invalid_mean,
  singular_weight,
  design,
  degenerate_response,
  degenerate_data,
  insufficient_df,
  invalid_statistic,
  invalid_null,
  domain,
  ingestion,
  non_convergence,
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace vcgate
