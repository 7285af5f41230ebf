#pragma once

// Bayesian reference estimators: Kalman filter recursions and a bootstrap
// particle filter with systematic resampling.

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "baryloc/error.hpp"
#include "baryloc/rng.hpp"

namespace baryloc::baselines {

struct GaussianBelief {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

struct LinearGaussianModel {
  Eigen::MatrixXd F;  // transition
  Eigen::MatrixXd Q;  // process covariance
  Eigen::MatrixXd H;  // measurement
  Eigen::MatrixXd R;  // measurement covariance
  GaussianBelief prior;

  // Checks shapes and that Q, R and the prior covariance are PSD.
  void validate() const;
};

// m = F m, P = Q + F P F^T.
GaussianBelief kf_predict(const GaussianBelief& b, const LinearGaussianModel& model);

// S = H P H^T + R, K = P H^T S^-1, m' = m + K (z - H m), P' = P - K H P.
// Throws DegenerateMeasurement when S is singular.
GaussianBelief kf_update(const GaussianBelief& b, const Eigen::VectorXd& z,
                         const LinearGaussianModel& model);

struct ParticleSet {
  std::vector<Eigen::VectorXd> particles;
  Eigen::VectorXd weights;  // sum to 1

  Eigen::VectorXd mean() const;
  double effective_size() const;
};

// Generative model for the particle filter. log_likelihood(x, z, k) may
// return -inf.
struct ParticleModel {
  std::function<Eigen::VectorXd(Rng&)> sample_prior;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&, long, Rng&)> propagate;
  std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&, long)> log_likelihood;
};

struct PfOptions {
  int N_s = 1000;
  // Resample when the effective sample size falls below this fraction of N_s.
  double resample_threshold = 0.5;
};

struct PfResult {
  std::vector<Eigen::VectorXd> means;  // one per measurement
  ParticleSet final;
  long resamples = 0;
  long degenerate_restarts = 0;  // all weights vanished; reset to uniform
};

PfResult pf_run(const ParticleModel& model, const std::vector<Eigen::VectorXd>& z, const PfOptions& opt,
                Rng& rng);

// In-place systematic resampling; weights become uniform.
void systematic_resample(ParticleSet& set, Rng& rng);

// Linear-Gaussian model as a particle model.
ParticleModel particle_model(const LinearGaussianModel& model);

}  // namespace baryloc::baselines
