// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace granulite {

/// Precondition violated by the caller (bad argument value).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// v == v_* for the sigma parametrization: the relative direction is undefined.
class DegeneratePairError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Scenario or simulation configuration that cannot run as requested.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Scenario text that fails to parse or validate. key() names the offending key.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::string key, const std::string& what)
      : std::runtime_error(key.empty() ? what : key + ": " + what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

/// An iterative procedure did not reach its stopping criterion.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A fit or estimate came out below the requested quality threshold.
class QualityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or unsupported binary file.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace granulite
