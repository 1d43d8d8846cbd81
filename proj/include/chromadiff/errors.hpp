#pragma once

#include <stdexcept>
#include <string>

namespace chromadiff {

// Process exit codes used by the command-line tool.
enum class ExitCode : int {
  kSuccess = 0,
  kConfigError = 1,
  kNumericalFault = 2,
  kIoError = 3,
};

/// Invalid or out-of-range configuration values.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Caller broke an operation's precondition (shape mismatch, index out of range).
class ContractError : public std::logic_error {
 public:
  explicit ContractError(const std::string& what) : std::logic_error(what) {}
};

/// A non-finite value appeared during a numerical routine. `location` names
/// the layer, step, or frame where it was detected; `index` is -1 if not
/// applicable.
class NumericalFault : public std::runtime_error {
 public:
  NumericalFault(const std::string& location, long index, const std::string& what)
      : std::runtime_error(what), location_(location), index_(index) {}

  const std::string& location() const noexcept { return location_; }
  long index() const noexcept { return index_; }

 private:
  std::string location_;
  long index_;
};

class IoError : public std::runtime_error {
 public:
  IoError(const std::string& path, const std::string& what)
      : std::runtime_error(what + ": " + path), path_(path) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace chromadiff
