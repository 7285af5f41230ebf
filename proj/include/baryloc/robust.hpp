#pragma once

// Noise models and the two stochastic-approximation variants of the static
// iteration: DLRE (single-shot weights, link drops, communication noise) and
// DILAND (weights from running-mean distances).

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "baryloc/diloc.hpp"

namespace baryloc::robust {

enum class Algorithm { DLRE, DILAND };

struct StepSchedule {
  enum class Kind { Harmonic, PowerLaw, Constant };
  Kind kind = Kind::Harmonic;
  double a = 1.0;    // Harmonic, PowerLaw
  double k0 = 1.0;   // Harmonic
  double tau = 1.0;  // PowerLaw
  double c = 0.5;    // Constant

  static StepSchedule harmonic(double a, double k0) { return {Kind::Harmonic, a, k0, 1.0, 0.0}; }
  static StepSchedule power_law(double a, double tau) { return {Kind::PowerLaw, a, 1.0, tau, 0.0}; }
  static StepSchedule constant(double c) { return {Kind::Constant, 0.0, 1.0, 1.0, c}; }

  // Step size at iteration k >= 0: a/(k+k0), a/(k+1)^tau or c.
  double alpha(long k) const;
};

// DLRE needs sum(alpha) = inf and sum(alpha^2) < inf; DILAND only
// alpha >= 0 and sum(alpha) = inf. Throws ScheduleRejected otherwise.
void validate_schedule(const StepSchedule& s, Algorithm algo);

enum class NoiseKind { Gaussian, Uniform };

// Zero-mean scalar noise with standard deviation sigma.
struct CommNoise {
  NoiseKind kind = NoiseKind::Gaussian;
  double sigma = 0.0;
  double sample(Rng& rng) const;
};

// Measured distance = true distance + bias + zero-mean jitter.
struct RangingNoise {
  double bias = 0.0;
  CommNoise jitter;
  double measure(double true_distance, Rng& rng) const;
};

// Activation probabilities q_ij of the directed links (i <- j), by roster index.
class LinkModel {
 public:
  LinkModel() = default;
  static LinkModel uniform(std::size_t nodes, double q);
  explicit LinkModel(Eigen::MatrixXd q);

  double q(std::size_t i, std::size_t j) const;
  bool empty() const noexcept { return q_.size() == 0; }

 private:
  Eigen::MatrixXd q_;
};

// Link activity e_ij(k) and received-state noise v_ij(k) for one step,
// aligned with SystemMatrices::layout. Empty vectors mean every link is
// active and noise-free.
struct LinkRealization {
  std::vector<std::vector<std::uint8_t>> active;
  std::vector<std::vector<Eigen::RowVectorXd>> noise;
};

LinkRealization sample_links(const diloc::SystemMatrices& sys, const LinkModel& links,
                             const CommNoise& comm, int dim, Rng& link_rng, Rng& comm_rng);

// Running count and mean of every link's past distance measurements.
class ConsistentRangeEstimator {
 public:
  void add(std::size_t a, std::size_t b, double measurement);
  double mean(std::size_t a, std::size_t b) const;
  long count(std::size_t a, std::size_t b) const;

 private:
  struct Entry {
    long count = 0;
    double mean = 0.0;
  };
  static std::uint64_t key(std::size_t a, std::size_t b);
  std::unordered_map<std::uint64_t, Entry> entries_;
};

// x_i <- (1-a) x_i + a [ sum_j e_ij w_ij / q_ij (y_j + v_ij) ] over the set
// members of agent i, where y_j is an agent estimate or anchor position.
diloc::StateVector dlre_step(const diloc::StateVector& s, const diloc::SystemMatrices& sys,
                             const std::vector<Eigen::VectorXd>& weights_hat,
                             const LinkRealization& links, const LinkModel& q, double alpha);

// x_i <- (1-a) x_i + a [ sum_j w_ij y_j ] with running-mean weights.
diloc::StateVector diland_step(const diloc::StateVector& s, const diloc::SystemMatrices& sys,
                               const std::vector<Eigen::VectorXd>& weights_bar, double alpha);

// (I - P - S_P)^{-1} (B + S_B) u, the almost-sure DLRE limit.
Eigen::MatrixXd bias_of_limit(const Eigen::MatrixXd& P, const Eigen::MatrixXd& S_P,
                              const Eigen::MatrixXd& B, const Eigen::MatrixXd& S_B,
                              const Eigen::MatrixXd& u);

// Nominal weights of each agent's set, in layout order.
std::vector<Eigen::VectorXd> layout_weights(const diloc::SystemMatrices& sys);

struct NoiseConfig {
  double link_q = 1.0;
  double comm_sigma = 0.0;
  double range_bias = 0.0;
  double range_sigma = 0.0;
  NoiseKind kind = NoiseKind::Gaussian;
};

struct NoisyRunOptions {
  Algorithm algorithm = Algorithm::DLRE;
  StepSchedule schedule = StepSchedule::harmonic(1.0, 1.0);
  long steps = 1000;
  NoiseConfig noise;
  scene::SelectionPolicy policy;
  // Inclusion tolerance for picking the frozen sets from the first noisy
  // measurement.
  double set_tol = 0.1;
};

struct NoisyRunResult {
  std::vector<double> error_norms;  // k = 0..steps
  Eigen::MatrixXd final_x;
  diloc::SystemMatrices frozen;
};

// Sets are chosen from noisy distance samples (fresh samples for agents
// that find none, up to 100 draws) and then held fixed; weights are recomputed each step (DLRE: fresh sample, DILAND:
// running means). DILAND ignores link drops and communication noise.
NoisyRunResult run_noisy(const scene::Deployment& dep, const Eigen::MatrixXd& x0,
                         const NoisyRunOptions& opt, std::uint64_t master_seed,
                         std::uint64_t replicate);

}  // namespace baryloc::robust
