#ifndef MAPPRIOR_ERRORS_H_
#define MAPPRIOR_ERRORS_H_

#include <stdexcept>
#include <string>

namespace mapprior {

// Malformed or unreadable input data (files, point clouds, poses).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A configuration value violates its documented constraint. `key()` names the
// offending config key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& message)
      : std::runtime_error(key + ": " + message), key_(std::move(key)) {}

  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

// A numerical procedure could not produce a result (no ICP overlap,
// disconnected pose graph, ...).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mapprior

#endif  // MAPPRIOR_ERRORS_H_
