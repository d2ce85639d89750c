#pragma once

#include <stdexcept>
#include <string>

namespace zoomnet {

/// Violated precondition of an operation (shape mismatch, out-of-range index).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Invalid user-supplied configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed resource or data file. Carries the 1-based line when known.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(line ? what + " (line " + std::to_string(line) + ")" : what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Filesystem failure; the message always names the path.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unknown label or key.
class LookupError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

#define ZN_REQUIRE(cond, msg)                                  \
  do {                                                         \
    if (!(cond)) throw ::zoomnet::ContractError(std::string(msg)); \
  } while (0)

}  // namespace zoomnet
