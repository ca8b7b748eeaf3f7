#pragma once

#include <stdexcept>
#include <string>

namespace smlab {

// Status codes shared by the C++ exceptions and the C API.
enum class Status : int {
  kOk = 0,
  kParameter = 1,    // invalid arguments or violated preconditions
  kRange = 2,        // request outside the grid or table coverage
  kNumerical = 3,    // an integration, fit or consistency check failed
  kIo = 4,           // file missing, unreadable or malformed
  kConfig = 5,       // experiment specification rejected
  kInternal = 6,
};

class Error : public std::runtime_error {
 public:
  Error(Status status, const std::string& what)
      : std::runtime_error(what), status_(status) {}
  Status status() const noexcept { return status_; }

 private:
  Status status_;
};

struct ParameterError : Error {
  explicit ParameterError(const std::string& w) : Error(Status::kParameter, w) {}
};

struct RangeError : Error {
  explicit RangeError(const std::string& w) : Error(Status::kRange, w) {}
};

struct NumericalError : Error {
  explicit NumericalError(const std::string& w) : Error(Status::kNumerical, w) {}
};

struct IoError : Error {
  explicit IoError(const std::string& w) : Error(Status::kIo, w) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error(Status::kConfig, w) {}
};

// Precondition helper used throughout the library.
inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ParameterError(msg);
}

}  // namespace smlab
