#include "baryloc/rng.hpp"

#include "baryloc/error.hpp"

namespace baryloc {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t replicate,
                          Stream purpose) noexcept {
  std::uint64_t h = splitmix64(master);
  h = splitmix64(h ^ (replicate * 0xd1b54a32d192ed03ULL));
  h = splitmix64(h ^ static_cast<std::uint64_t>(purpose));
  return h;
}

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::PreconditionViolated: return "PreconditionViolated";
    case ErrorCode::NegativeSquaredVolume: return "NegativeSquaredVolume";
    case ErrorCode::DegenerateAnchors: return "DegenerateAnchors";
    case ErrorCode::InconsistentRanges: return "InconsistentRanges";
    case ErrorCode::IncompleteTriangulation: return "IncompleteTriangulation";
    case ErrorCode::NotAbsorbing: return "NotAbsorbing";
    case ErrorCode::NumericalFailure: return "NumericalFailure";
    case ErrorCode::ScheduleRejected: return "ScheduleRejected";
    case ErrorCode::DegenerateMeasurement: return "DegenerateMeasurement";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

namespace {
std::string describe_agents(const std::vector<int>& agents) {
  std::string s = "no triangulation set for agent(s):";
  for (int a : agents) s += " " + std::to_string(a);
  return s;
}
}  // namespace

IncompleteTriangulation::IncompleteTriangulation(std::vector<int> agents)
    : Error(ErrorCode::IncompleteTriangulation, describe_agents(agents)),
      agents_(std::move(agents)) {}

}  // namespace baryloc
