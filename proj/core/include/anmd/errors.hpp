#pragma once

#include <stdexcept>
#include <string>

namespace anmd {

// Runtime failure: bad data, shape mismatch, broken file. CLI maps this to exit 1.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid configuration: bad key, out-of-range setting. CLI maps this to exit 2.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

}  // namespace anmd
