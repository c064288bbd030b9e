#pragma once

#include <stdexcept>
#include <string>

namespace fairaudit {

// Error categories double as CLI exit codes.
enum class ErrorKind { config = 1, data = 2, estimation = 3 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

class EstimationError : public Error {
 public:
  explicit EstimationError(const std::string& what) : Error(ErrorKind::estimation, what) {}
};

}  // namespace fairaudit
