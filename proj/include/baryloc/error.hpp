#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace baryloc {

enum class ErrorCode {
  InvalidInput,
  PreconditionViolated,
  NegativeSquaredVolume,
  DegenerateAnchors,
  InconsistentRanges,
  IncompleteTriangulation,
  NotAbsorbing,
  NumericalFailure,
  ScheduleRejected,
  DegenerateMeasurement,
  ConfigError,
  IoError,
};

const char* to_string(ErrorCode code) noexcept;

// Single exception type for the library; the code carries the category and
// the C API maps it onto a status value.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Raised by assemble_system when some agents have no triangulation set.
class IncompleteTriangulation : public Error {
 public:
  explicit IncompleteTriangulation(std::vector<int> agents);
  const std::vector<int>& agents() const noexcept { return agents_; }

 private:
  std::vector<int> agents_;
};

// Raised by the config parser; `path` is the dotted field path.
class ConfigError : public Error {
 public:
  ConfigError(std::string path, const std::string& detail)
      : Error(ErrorCode::ConfigError, path.empty() ? detail : path + ": " + detail),
        path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace baryloc
