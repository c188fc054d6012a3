#pragma once

#include <stdexcept>
#include <string>

namespace fedslice {

// Invalid experiment configuration; message carries the offending field path.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Structured failure while decoding a serialized model.
class DeserializeError : public std::runtime_error {
 public:
  enum class Kind { BadMagic, BadVersion, Truncated, Inconsistent };

  DeserializeError(Kind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

}  // namespace fedslice
