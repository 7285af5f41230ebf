#pragma once

// Experiment configuration, Monte Carlo orchestration and file outputs.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "baryloc/baselines.hpp"
#include "baryloc/mobile.hpp"
#include "baryloc/robust.hpp"

namespace baryloc::harness {

using nlohmann::json;

enum class AlgorithmKind { Diloc, Dlre, Diland, Mobile, Kf, Pf };

const char* to_string(AlgorithmKind a) noexcept;

// Random scene drawn per replicate from the Scene stream.
struct SceneGen {
  enum class Kind { Uniform, Triangle };
  Kind kind = Kind::Uniform;
  int agents = 10;
  int anchors = 1;  // Uniform only; Triangle uses dim + 1
  double side = 20.0;
  double comm_radius = 2.0;
  int dim = 2;
  // Triangle vertices; defaults to {0, side e_1, ..., side e_m}.
  std::vector<std::vector<double>> anchor_positions;

  bool operator==(const SceneGen&) const = default;
};

struct DilocParams {
  // Initial estimates are uniform in [init_lo, init_hi]^m; both unset means
  // the deployment region.
  std::optional<double> init_lo;
  std::optional<double> init_hi;
  scene::SelectionPolicy::Kind selection = scene::SelectionPolicy::Kind::MaxMinWeight;
  int max_subsets = 200;

  bool operator==(const DilocParams&) const = default;
};

struct BaselineParams {
  int N_s = 1000;
  double resample_threshold = 0.5;

  bool operator==(const BaselineParams&) const = default;
};

struct ExperimentConfig {
  // Exactly one scene source.
  std::optional<json> scene;  // inline deployment
  std::string scene_file;
  std::optional<SceneGen> scene_gen;

  AlgorithmKind algorithm = AlgorithmKind::Diloc;
  long steps = 100;
  int replicates = 1;
  std::uint64_t master_seed = 1;

  DilocParams diloc;
  robust::NoiseConfig noise;
  robust::StepSchedule schedule = robust::StepSchedule::harmonic(1.0, 1.0);
  mobile::MotionModel motion;
  mobile::MotionNoise motion_noise;
  mobile::MobileParams mobile;
  BaselineParams baseline;

  // Directory that relative scene_file paths resolve against.
  std::filesystem::path base_dir;
};

// Throws ConfigError naming the offending field path.
ExperimentConfig parse_config(const json& j);
ExperimentConfig load_config(const std::filesystem::path& file);
json to_json(const ExperimentConfig& cfg);

// Deployment JSON: {dim, comm_radius, region: {lo, hi}, nodes: [{id, role, pos}]}.
scene::Deployment parse_scene(const json& j);
json scene_to_json(const scene::Deployment& dep);

// Sets a dotted path (e.g. "mobile.epsilon") in the config JSON, then
// re-parses it.
ExperimentConfig with_param(const ExperimentConfig& cfg, const std::string& path, const json& value);

struct ReplicateLog {
  std::uint64_t seed = 0;  // derived per-replicate scene seed
  std::vector<double> error_norms;  // k = 0..steps
  std::vector<long> updates_cum;    // k = 0..steps
  std::vector<long> histogram;      // agent-steps by neighbor count
  long worst_gap = -1;              // mobile only
};

struct Aggregate {
  double mean = 0.0;
  double stdev = 0.0;  // sample standard deviation, 0 for one replicate
};

Aggregate aggregate(const std::vector<double>& values);

struct MetricsLog {
  ExperimentConfig config;
  std::vector<ReplicateLog> replicates;
  std::vector<std::string> warnings;

  Aggregate final_error() const;
  Aggregate final_updates() const;
  // Fraction of agent-steps with no neighbor, over all replicates.
  double zero_neighbor_fraction() const;
};

// Validates, runs every replicate (in parallel) and aggregates.
MetricsLog run_experiment(const ExperimentConfig& cfg);

// One replicate; exposed for tests.
ReplicateLog run_replicate(const ExperimentConfig& cfg, int replicate);

// The deployment a replicate runs on.
scene::Deployment replicate_scene(const ExperimentConfig& cfg, int replicate);

json summary_json(const MetricsLog& log);

// Writes trace.csv, summary.json and histogram.csv. Throws IoError.
void emit_outputs(const MetricsLog& log, const std::filesystem::path& dir);

std::string trace_csv(const MetricsLog& log);
std::string histogram_csv(const MetricsLog& log);

struct GeometrySuiteReport {
  long samples = 0;
  long volume_checked = 0;
  long volume_passed = 0;
  double max_volume_rel_error = 0.0;
  long inclusion_checked = 0;
  long inclusion_agreed = 0;
  long band_skipped = 0;
  long degenerate_skipped = 0;  // near-flat draws that were redrawn

  bool passed() const {
    return volume_passed == volume_checked && inclusion_agreed == inclusion_checked;
  }
};

// Random simplices in R^2 and R^3 (half each): Cayley-Menger volume against
// the coordinate determinant, and the inclusion test against barycentric
// signs solved from coordinates.
GeometrySuiteReport run_geometry_suite(long samples, std::uint64_t seed);

}  // namespace baryloc::harness
