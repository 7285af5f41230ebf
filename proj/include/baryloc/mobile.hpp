#pragma once

// Opportunistic localization of mobile agents: an agent updates against a
// triangulation set only at steps where it finds one, and otherwise
// dead-reckons with its measured motion.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "baryloc/diloc.hpp"

namespace baryloc::mobile {

using geometry::Point;

struct MotionModel {
  enum class Kind { Static, RandomWaypoint };
  Kind kind = Kind::RandomWaypoint;
  double d_max = 5.0;  // step length ~ U[0, d_max]
  bool anchors_move = true;
};

// Per-node result of one motion step.
struct MotionStep {
  std::vector<Point> motion;     // true motion vector of each node
  std::vector<double> length;    // d
  std::vector<Point> direction;  // unit heading
};

// Moves every node (anchors only when anchors_move) and keeps all of them
// inside the region by resampling (d, heading) until the destination fits.
MotionStep motion_step(scene::Deployment& dep, const MotionModel& model, Rng& rng);

// Motion and ranging noise whose variances grow with the distance travelled
// (K_d^2 D, K_theta^2 D) and with time (K_r^2 k).
struct MotionNoise {
  double K_d = 0.0;
  double K_theta = 0.0;
  double K_r = 0.0;

  bool motion_noisy() const { return K_d > 0.0 || K_theta > 0.0; }
};

// Odometry reading of a step of length d along `direction` after a total
// travelled distance D (this step included).
Point measured_motion(double d, const Point& direction, double travelled, const MotionNoise& noise,
                      Rng& rng);

struct MobileParams {
  double beta = 0.01;          // self-weight floor
  double alpha_k = 0.01;       // self weight used when a set exists, in [beta, 1)
  double alpha_anchor = 0.01;  // floor on anchor barycentric weights
  double epsilon = 0.2;        // relative inclusion error gate
  // Gate updates on the relative inclusion error epsilon; without it the
  // inclusion test is exact (tolerance 1e-9), which noise rarely passes.
  bool modifications = false;
  // At most one (random) eligible agent updates per step.
  bool sequential = false;
  scene::SelectionPolicy::Kind selection = scene::SelectionPolicy::Kind::MaxMinWeight;
  int max_subsets = 200;
  // Check e_{k+1} = P_k e_k and the row classes at every step.
  bool check_invariants = false;

  void validate() const;
};

// Case (i) without a set: x + motion, and alpha_k must be 1. Case (ii):
// alpha_k x + (1 - alpha_k) sum_j a_ij x_j + motion with alpha_k in
// [beta, 1]. Member estimates are read from the deployment.
Point opportunistic_update(const scene::Deployment& dep, std::size_t agent,
                           const std::optional<scene::TriangulationSet>& set, double alpha_k,
                           const Point& motion, double beta);

enum class RowClass { Identity, StochasticRow, SubStochasticRow };

// Non-identity row of P_k / B_k.
struct RowUpdate {
  int row = 0;  // agent row
  double self_weight = 1.0;
  std::vector<std::pair<int, double>> agent_terms;   // (agent row, weight)
  std::vector<std::pair<int, double>> anchor_terms;  // (anchor column, weight)
};

struct StepMatrices {
  Eigen::Index agents = 0;
  Eigen::Index anchors = 0;
  std::vector<RowUpdate> rows;
  std::vector<RowClass> classes;  // one per agent

  Eigen::MatrixXd dense_P() const;
  Eigen::MatrixXd dense_B() const;
};

struct PlannedUpdate {
  std::size_t agent_row = 0;
  scene::TriangulationSet set;
  double alpha_k = 0.01;
};

// P_k, B_k and row classes for the updates performed at one step. Agents
// without an update keep an identity row.
StepMatrices assemble_timevarying(const scene::Deployment& dep,
                                  const std::vector<PlannedUpdate>& updates);

// Running product P_k ... P_0 and its infinity norm.
class ErrorProductMonitor {
 public:
  explicit ErrorProductMonitor(Eigen::Index agents);
  void apply(const StepMatrices& step);
  double norm() const;
  const Eigen::MatrixXd& product() const noexcept { return product_; }
  long steps() const noexcept { return steps_; }

 private:
  Eigen::MatrixXd product_;
  long steps_ = 0;
};

// Tracks when anchor information reaches each agent, directly or through
// agents that received it earlier.
class ConnectivityLog {
 public:
  explicit ConnectivityLog(std::size_t agents);
  void record(const StepMatrices& step, long k);

  struct Stats {
    std::vector<long> arrivals;  // per agent
    std::vector<long> max_gap;   // per agent, including the lead-in and tail
    long worst_gap = 0;
    double mean_gap = 0.0;
  };
  Stats stats(long run_length) const;

 private:
  std::vector<long> info_time_;
  std::vector<std::vector<long>> arrivals_;
};

struct Feasibility {
  bool feasible = true;
  // Bit 0: at least one anchor; bit 1: |anchors| + |agents| >= m + 2;
  // bit 2: |anchors| + motion dims >= m + 1.
  unsigned failed = 0;
  std::vector<std::string> reasons;
};

// Necessary anchor-count conditions for tracking mobile agents.
Feasibility feasibility_check(int num_anchors, int num_agents, int agent_motion_dim,
                              int anchor_motion_dim, int m);

enum class Gate { Accept, RejectM1, RejectM2 };

struct GateResult {
  Gate gate = Gate::RejectM1;
  double relative_error = 0.0;
};

// M1: reject when any needed Cayley-Menger determinant has the infeasible
// sign. M2: reject when the relative inclusion error is not below epsilon.
GateResult noisy_update_gates(const geometry::Simplex& candidate, std::span<const double> i_dists,
                              double epsilon);

struct MobileConfig {
  MotionModel motion;
  MotionNoise noise;
  MobileParams params;
  long steps = 3000;
};

struct MobileRunResult {
  std::vector<double> error_norms;  // k = 0..steps
  std::vector<long> updates_cum;    // k = 0..steps, all agents together
  std::vector<long> updates_per_agent;
  std::vector<long> neighbor_histogram;  // agent-steps by neighbor count
  std::vector<double> product_norm;      // k = 1..steps
  ConnectivityLog::Stats connectivity;
  double max_identity_residual = 0.0;
  long row_class_violations = 0;
};

MobileRunResult run_mobile(scene::Deployment dep, const Eigen::MatrixXd& x0,
                           const MobileConfig& cfg, std::uint64_t master_seed,
                           std::uint64_t replicate);

}  // namespace baryloc::mobile
