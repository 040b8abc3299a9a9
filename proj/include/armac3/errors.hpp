#pragma once

#include <stdexcept>
#include <string>

namespace armac3 {

// Failure categories. The CLI maps each to a distinct exit status.
enum class ErrorKind {
  config = 2,     // bad configuration key/value
  data = 3,       // malformed or invalid input data
  numeric = 4,    // NaN/Inf, degenerate denominators
  format = 5,     // checkpoint / file container problems, I/O
  contract = 6,   // violated precondition (shapes, masks, ranges)
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& m) : Error(ErrorKind::config, m) {}
};
struct DataError : Error {
  explicit DataError(const std::string& m) : Error(ErrorKind::data, m) {}
};
struct NumericError : Error {
  explicit NumericError(const std::string& m) : Error(ErrorKind::numeric, m) {}
};
struct FormatError : Error {
  explicit FormatError(const std::string& m) : Error(ErrorKind::format, m) {}
};
struct ContractError : Error {
  explicit ContractError(const std::string& m) : Error(ErrorKind::contract, m) {}
};

// Shape disagreement between operands.
struct DimensionError : ContractError {
  explicit DimensionError(const std::string& m) : ContractError(m) {}
};

// Argument outside an operation's mathematical domain (e.g. log of 0).
struct DomainError : NumericError {
  explicit DomainError(const std::string& m) : NumericError(m) {}
};

}  // namespace armac3
