#pragma once

#include <stdexcept>
#include <string>

namespace sutat {

// Error taxonomy mirrored by the C API status codes and CLI exit codes:
// usage errors -> 1, data errors -> 2, anything else -> 3.
class UsageError : public std::runtime_error {
 public:
  explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

class TrainingError : public std::runtime_error {
 public:
  explicit TrainingError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace sutat
