#include "baryloc/baryloc.h"

#include <cstring>
#include <string>

#include "baryloc/harness.hpp"

struct baryloc_experiment {
  baryloc::harness::ExperimentConfig config;
  std::optional<baryloc::harness::MetricsLog> log;
};

namespace {

thread_local std::string g_last_error;

baryloc_status from_code(baryloc::ErrorCode c) {
  using baryloc::ErrorCode;
  switch (c) {
    case ErrorCode::InvalidInput: return BARYLOC_INVALID_INPUT;
    case ErrorCode::PreconditionViolated: return BARYLOC_PRECONDITION_VIOLATED;
    case ErrorCode::NegativeSquaredVolume: return BARYLOC_NEGATIVE_SQUARED_VOLUME;
    case ErrorCode::DegenerateAnchors: return BARYLOC_DEGENERATE_ANCHORS;
    case ErrorCode::InconsistentRanges: return BARYLOC_INCONSISTENT_RANGES;
    case ErrorCode::IncompleteTriangulation: return BARYLOC_INCOMPLETE_TRIANGULATION;
    case ErrorCode::NotAbsorbing: return BARYLOC_NOT_ABSORBING;
    case ErrorCode::NumericalFailure: return BARYLOC_NUMERICAL_FAILURE;
    case ErrorCode::ScheduleRejected: return BARYLOC_SCHEDULE_REJECTED;
    case ErrorCode::DegenerateMeasurement: return BARYLOC_DEGENERATE_MEASUREMENT;
    case ErrorCode::ConfigError: return BARYLOC_CONFIG_ERROR;
    case ErrorCode::IoError: return BARYLOC_IO_ERROR;
  }
  return BARYLOC_INTERNAL_ERROR;
}

baryloc_status fail(baryloc_status s, std::string msg) {
  g_last_error = std::move(msg);
  return s;
}

// Runs f, mapping exceptions to status codes.
template <class F>
baryloc_status guarded(F&& f) {
  try {
    g_last_error.clear();
    return f();
  } catch (const baryloc::Error& e) {
    return fail(from_code(e.code()), e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail(BARYLOC_CONFIG_ERROR, e.what());
  } catch (const std::bad_alloc&) {
    return fail(BARYLOC_INTERNAL_ERROR, "out of memory");
  } catch (const std::exception& e) {
    return fail(BARYLOC_INTERNAL_ERROR, e.what());
  } catch (...) {
    return fail(BARYLOC_INTERNAL_ERROR, "unknown exception");
  }
}

baryloc_status copy_out(const std::string& s, char* buf, size_t cap, size_t* needed) {
  if (needed == nullptr) return fail(BARYLOC_INVALID_INPUT, "needed must not be null");
  *needed = s.size() + 1;
  if (buf == nullptr || cap < s.size() + 1) {
    return fail(BARYLOC_BUFFER_TOO_SMALL, "buffer needs " + std::to_string(s.size() + 1) + " bytes");
  }
  std::memcpy(buf, s.c_str(), s.size() + 1);
  return BARYLOC_OK;
}

const baryloc::harness::MetricsLog* completed(const baryloc_experiment* exp) {
  if (exp == nullptr) throw baryloc::Error(baryloc::ErrorCode::InvalidInput, "null experiment");
  if (!exp->log) throw baryloc::Error(baryloc::ErrorCode::PreconditionViolated, "experiment has not been run");
  return &*exp->log;
}

void require(bool ok, const char* what) {
  if (!ok) throw baryloc::Error(baryloc::ErrorCode::InvalidInput, what);
}

}  // namespace

extern "C" {

const char* baryloc_version(void) { return "0.1.0"; }

const char* baryloc_status_string(baryloc_status status) {
  switch (status) {
    case BARYLOC_OK: return "Ok";
    case BARYLOC_INVALID_INPUT: return "InvalidInput";
    case BARYLOC_PRECONDITION_VIOLATED: return "PreconditionViolated";
    case BARYLOC_NEGATIVE_SQUARED_VOLUME: return "NegativeSquaredVolume";
    case BARYLOC_DEGENERATE_ANCHORS: return "DegenerateAnchors";
    case BARYLOC_INCONSISTENT_RANGES: return "InconsistentRanges";
    case BARYLOC_INCOMPLETE_TRIANGULATION: return "IncompleteTriangulation";
    case BARYLOC_NOT_ABSORBING: return "NotAbsorbing";
    case BARYLOC_NUMERICAL_FAILURE: return "NumericalFailure";
    case BARYLOC_SCHEDULE_REJECTED: return "ScheduleRejected";
    case BARYLOC_DEGENERATE_MEASUREMENT: return "DegenerateMeasurement";
    case BARYLOC_CONFIG_ERROR: return "ConfigError";
    case BARYLOC_IO_ERROR: return "IoError";
    case BARYLOC_BUFFER_TOO_SMALL: return "BufferTooSmall";
    case BARYLOC_INTERNAL_ERROR: return "InternalError";
  }
  return "Unknown";
}

const char* baryloc_last_error(void) { return g_last_error.c_str(); }

baryloc_status baryloc_experiment_load(const char* config_path, baryloc_experiment** out) {
  return guarded([&] {
    require(config_path != nullptr && out != nullptr, "null argument");
    *out = nullptr;
    auto exp = std::make_unique<baryloc_experiment>();
    exp->config = baryloc::harness::load_config(config_path);
    *out = exp.release();
    return BARYLOC_OK;
  });
}

baryloc_status baryloc_experiment_create(const char* config_json, baryloc_experiment** out) {
  return guarded([&] {
    require(config_json != nullptr && out != nullptr, "null argument");
    *out = nullptr;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(config_json);
    } catch (const nlohmann::json::exception& e) {
      throw baryloc::ConfigError("", std::string("invalid JSON: ") + e.what());
    }
    auto exp = std::make_unique<baryloc_experiment>();
    exp->config = baryloc::harness::parse_config(j);
    *out = exp.release();
    return BARYLOC_OK;
  });
}

void baryloc_experiment_destroy(baryloc_experiment* exp) { delete exp; }

baryloc_status baryloc_experiment_set_seed(baryloc_experiment* exp, uint64_t seed) {
  return guarded([&] {
    require(exp != nullptr, "null experiment");
    exp->config.master_seed = seed;
    exp->log.reset();
    return BARYLOC_OK;
  });
}

baryloc_status baryloc_experiment_set_replicates(baryloc_experiment* exp, int replicates) {
  return guarded([&] {
    require(exp != nullptr, "null experiment");
    exp->config = baryloc::harness::with_param(exp->config, "replicates", replicates);
    exp->log.reset();
    return BARYLOC_OK;
  });
}

baryloc_status baryloc_experiment_set_param(baryloc_experiment* exp, const char* path, const char* json_value) {
  return guarded([&] {
    require(exp != nullptr && path != nullptr && json_value != nullptr, "null argument");
    nlohmann::json v;
    try {
      v = nlohmann::json::parse(json_value);
    } catch (const nlohmann::json::exception&) {
      // Bare words are taken as strings, so "kind=triangle" works unquoted.
      v = std::string(json_value);
    }
    exp->config = baryloc::harness::with_param(exp->config, path, v);
    exp->log.reset();
    return BARYLOC_OK;
  });
}

baryloc_status baryloc_experiment_config_json(const baryloc_experiment* exp, char* buf, size_t cap,
                                              size_t* needed) {
  return guarded([&] {
    require(exp != nullptr, "null experiment");
    return copy_out(baryloc::harness::to_json(exp->config).dump(2), buf, cap, needed);
  });
}

baryloc_status baryloc_experiment_run(baryloc_experiment* exp) {
  return guarded([&] {
    require(exp != nullptr, "null experiment");
    exp->log = baryloc::harness::run_experiment(exp->config);
    return BARYLOC_OK;
  });
}

baryloc_status baryloc_experiment_write_outputs(const baryloc_experiment* exp, const char* dir) {
  return guarded([&] {
    require(dir != nullptr, "null directory");
    baryloc::harness::emit_outputs(*completed(exp), dir);
    return BARYLOC_OK;
  });
}

baryloc_status baryloc_experiment_summary_json(const baryloc_experiment* exp, char* buf, size_t cap,
                                               size_t* needed) {
  return guarded([&] { return copy_out(baryloc::harness::summary_json(*completed(exp)).dump(2), buf, cap, needed); });
}

baryloc_status baryloc_experiment_trace_csv(const baryloc_experiment* exp, char* buf, size_t cap,
                                            size_t* needed) {
  return guarded([&] { return copy_out(baryloc::harness::trace_csv(*completed(exp)), buf, cap, needed); });
}

baryloc_status baryloc_experiment_error_trace(const baryloc_experiment* exp, int replicate, double* out,
                                              size_t cap, size_t* count) {
  return guarded([&] {
    const auto* log = completed(exp);
    require(count != nullptr, "count must not be null");
    require(replicate >= 0 && static_cast<size_t>(replicate) < log->replicates.size(), "replicate out of range");
    const auto& e = log->replicates[static_cast<size_t>(replicate)].error_norms;
    *count = e.size();
    if (out == nullptr || cap < e.size()) return fail(BARYLOC_BUFFER_TOO_SMALL, "output array too small");
    std::copy(e.begin(), e.end(), out);
    return BARYLOC_OK;
  });
}

baryloc_status baryloc_simplex_hypervolume(const double* d2, int n, double* volume) {
  return guarded([&] {
    require(d2 != nullptr && volume != nullptr, "null argument");
    require(n >= 1 && n <= baryloc::geometry::kMaxDim + 1, "n out of range");
    const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> m(d2, n, n);
    *volume = baryloc::geometry::simplex_hypervolume(baryloc::geometry::SquaredDistanceMatrix(m));
    return BARYLOC_OK;
  });
}

baryloc_status baryloc_barycentric_weights(const double* d2, int m, const double* i_dists, double tol_rel,
                                           double* weights, double* relative_error) {
  return guarded([&] {
    require(d2 != nullptr && i_dists != nullptr && weights != nullptr, "null argument");
    require(m >= 1 && m <= baryloc::geometry::kMaxDim, "m out of range");
    const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> mat(d2, m + 1,
                                                                                                      m + 1);
    std::vector<int> members(static_cast<size_t>(m) + 1);
    for (int j = 0; j <= m; ++j) members[j] = j;
    const baryloc::geometry::Simplex s(m, members, baryloc::geometry::SquaredDistanceMatrix(mat));
    const auto res = baryloc::geometry::inclusion_test(std::span<const double>(i_dists, m + 1), s, tol_rel);
    if (relative_error != nullptr) *relative_error = res.relative_error;
    const auto w = baryloc::geometry::weights_from(res);
    for (int j = 0; j <= m; ++j) weights[j] = w[j];
    return BARYLOC_OK;
  });
}

baryloc_status baryloc_trilaterate(const double* anchors, int m, const double* ranges, double* position) {
  return guarded([&] {
    require(anchors != nullptr && ranges != nullptr && position != nullptr, "null argument");
    require(m >= 1 && m <= baryloc::geometry::kMaxDim, "m out of range");
    std::vector<baryloc::geometry::Point> pts;
    for (int j = 0; j <= m; ++j) pts.push_back(Eigen::Map<const Eigen::VectorXd>(anchors + j * m, m));
    const auto x = baryloc::geometry::trilaterate(pts, std::span<const double>(ranges, m + 1));
    for (int c = 0; c < m; ++c) position[c] = x(c);
    return BARYLOC_OK;
  });
}

baryloc_status baryloc_feasibility_check(int anchors, int agents, int dim, int agent_motion_dim,
                                         int anchor_motion_dim, int* feasible, unsigned* failed_mask) {
  return guarded([&] {
    require(feasible != nullptr, "null argument");
    const auto f = baryloc::mobile::feasibility_check(anchors, agents, agent_motion_dim, anchor_motion_dim, dim);
    *feasible = f.feasible ? 1 : 0;
    if (failed_mask != nullptr) *failed_mask = f.failed;
    if (!f.feasible) {
      std::string msg;
      for (const auto& r : f.reasons) msg += (msg.empty() ? "" : "; ") + r;
      g_last_error = msg;
    }
    return BARYLOC_OK;
  });
}

baryloc_status baryloc_validate_geometry(long samples, uint64_t seed, baryloc_geometry_report* report,
                                         int* passed) {
  return guarded([&] {
    require(report != nullptr, "null report");
    const auto r = baryloc::harness::run_geometry_suite(samples, seed);
    *report = {r.samples,           r.volume_checked, r.volume_passed, r.max_volume_rel_error,
               r.inclusion_checked, r.inclusion_agreed, r.band_skipped, r.degenerate_skipped};
    if (passed != nullptr) *passed = r.passed() ? 1 : 0;
    return BARYLOC_OK;
  });
}

}  // extern "C"
