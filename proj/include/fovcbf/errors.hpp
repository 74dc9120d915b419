#pragma once

#include <stdexcept>
#include <string>

namespace fovcbf {

/// Invalid geometric input (degenerate camera, impossible shrink, z <= 0 projection).
class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Scenario or CLI configuration problem. key() names the offending field.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& what)
      : std::runtime_error(key + ": " + what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

}  // namespace fovcbf
