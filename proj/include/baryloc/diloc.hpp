#pragma once

// Static-network barycentric iteration x_{k+1} = P x_k + B u.

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "baryloc/scene.hpp"

namespace baryloc::diloc {

// Member of a triangulation set addressed by its column in P (agent) or
// B (anchor).
struct MemberRef {
  bool anchor = false;
  int col = 0;
};

// Per-agent layout of the sets, aligned with the agent rows of P.
struct SetLayout {
  std::vector<MemberRef> members;
};

struct SystemMatrices {
  Eigen::MatrixXd P;  // N x N, agent-to-agent weights
  Eigen::MatrixXd B;  // N x M, agent-to-anchor weights
  std::vector<int> agent_index;   // roster index of each row / P column
  std::vector<int> anchor_index;  // roster index of each B column
  std::vector<SetLayout> layout;

  Eigen::Index agents() const noexcept { return P.rows(); }
  Eigen::Index anchors() const noexcept { return B.cols(); }
};

struct StateVector {
  Eigen::MatrixXd x;  // N x m agent estimates
  Eigen::MatrixXd u;  // M x m anchor positions
};

// One set per agent, in Deployment::agent_indices() order. Throws
// IncompleteTriangulation naming the agent ids without a set.
SystemMatrices assemble_system(const scene::Deployment& dep,
                               const std::vector<std::optional<scene::TriangulationSet>>& sets);

// Finds a set for every agent with true distances, then assembles.
SystemMatrices build_system(const scene::Deployment& dep,
                            const scene::SelectionPolicy& policy = {});

// Anchor positions (M x m) and true agent positions (N x m) from the roster.
Eigen::MatrixXd anchor_positions(const scene::Deployment& dep);
Eigen::MatrixXd true_agent_positions(const scene::Deployment& dep);

// The lifted transition matrix [[I, 0], [B, P]].
Eigen::MatrixXd upsilon(const SystemMatrices& sys);

StateVector diloc_step(const StateVector& s, const SystemMatrices& sys);

struct StopRule {
  long max_iters = 100000;
  // Stop when ||x_{k+1} - x_k||_F <= tol; negative disables the check.
  double tol = 1e-10;
};

struct RunResult {
  std::vector<double> error_norms;  // ||x_k - x*||_2 for k = 0.. when truth is given
  StateVector final_state;
  long iterations = 0;
  bool converged = false;
  // Set when rho(P) >= 1, in which case convergence is not expected.
  bool spectral_warning = false;
  double spectral_radius = 0.0;
};

RunResult diloc_run(const StateVector& s0, const SystemMatrices& sys, const StopRule& stop,
                    const std::optional<Eigen::MatrixXd>& truth = std::nullopt);

// (I - P)^{-1} B u. Throws NotAbsorbing when some agent has no weighted
// path to an anchor.
Eigen::MatrixXd closed_form_limit(const SystemMatrices& sys, const Eigen::MatrixXd& u);

// True iff every agent reaches an anchor through nonzero weights.
bool is_absorbing(const SystemMatrices& sys);

// Largest eigenvalue modulus of |P|.
double spectral_radius(const Eigen::MatrixXd& P);

// Uniform initial estimates in the box [lo, hi].
Eigen::MatrixXd random_initial(Eigen::Index agents, const Eigen::VectorXd& lo,
                               const Eigen::VectorXd& hi, Rng& rng);

}  // namespace baryloc::diloc
