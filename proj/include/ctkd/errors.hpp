// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ctkd {

/// Incompatible tensor shapes.
class ShapeError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Argument outside the mathematical domain of an operation (log of a
/// non-positive value, non-positive temperature).
class DomainError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

/// API misuse, e.g. backward from a non-scalar.
class ContractError : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

/// Invalid model spec, label range, class mismatch and similar.
class ValidationError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed binary or text input. Carries the byte offset where parsing
/// stopped.
class FormatError : public std::runtime_error {
public:
  FormatError(const std::string& what, std::uint64_t offset)
      : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::uint64_t offset() const noexcept { return offset_; }

private:
  std::uint64_t offset_;
};

/// Failure during a training run (I/O, non-finite loss).
class RunError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Configuration rejected. Lists every violation found.
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(std::vector<std::string> violations)
      : std::runtime_error(join(violations)), violations_(std::move(violations)) {}
  const std::vector<std::string>& violations() const noexcept { return violations_; }

private:
  static std::string join(const std::vector<std::string>& v) {
    std::string out;
    for (const auto& s : v) {
      if (!out.empty()) out += "; ";
      out += s;
    }
    return out;
  }
  std::vector<std::string> violations_;
};

}  // namespace ctkd
