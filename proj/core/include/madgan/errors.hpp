#pragma once

#include <stdexcept>
#include <string>

namespace madgan {

// Shapes of operands do not agree.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A precondition of an operation was violated by the caller.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// A numeric input lies outside the function's domain (e.g. log of a negative).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Malformed or invalid configuration. `field` names the offending key path.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& detail)
      : std::runtime_error(field.empty() ? detail : field + ": " + detail), field_(std::move(field)), detail_(detail) {}

  const std::string& field() const noexcept { return field_; }
  // The message without the field prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::string field_;
  std::string detail_;
};

// Malformed input file contents (CSV rows, checkpoint JSON).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Filesystem failure; the message always carries the path.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Training produced a non-finite loss.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace madgan
