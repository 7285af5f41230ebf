#include "baryloc/baselines.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace baryloc::baselines {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw Error(ErrorCode::InvalidInput, what);
}

bool is_psd(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols()) return false;
  if (a.size() == 0) return true;
  if (!(a - a.transpose()).isZero(1e-9 * std::max(1.0, a.cwiseAbs().maxCoeff()))) return false;
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (a + a.transpose()));
  return es.eigenvalues().minCoeff() >= -1e-10 * std::max(1.0, a.cwiseAbs().maxCoeff());
}

// Lower Cholesky-like factor that tolerates semidefinite input.
Eigen::MatrixXd sqrt_psd(const Eigen::MatrixXd& a) {
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (a + a.transpose()));
  const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal();
}

Eigen::VectorXd gaussian(const Eigen::MatrixXd& root, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::VectorXd n(root.cols());
  for (Eigen::Index i = 0; i < n.size(); ++i) n(i) = g(rng);
  return root * n;
}

}  // namespace

void LinearGaussianModel::validate() const {
  const Eigen::Index n = F.rows();
  require(F.cols() == n && Q.rows() == n && Q.cols() == n, "F and Q must be n x n");
  require(H.cols() == n && R.rows() == H.rows() && R.cols() == H.rows(), "H is p x n and R is p x p");
  require(prior.mean.size() == n && prior.cov.rows() == n && prior.cov.cols() == n,
          "prior has the wrong dimension");
  require(is_psd(Q) && is_psd(R) && is_psd(prior.cov), "Q, R and the prior covariance must be PSD");
}

GaussianBelief kf_predict(const GaussianBelief& b, const LinearGaussianModel& model) {
  const Eigen::Index n = b.mean.size();
  require(b.cov.rows() == n && b.cov.cols() == n, "belief covariance has the wrong shape");
  require(model.F.rows() == n && model.F.cols() == n, "F does not match the belief");
  require(model.Q.rows() == n && model.Q.cols() == n, "Q does not match the belief");
  return {model.F * b.mean, model.Q + model.F * b.cov * model.F.transpose()};
}

GaussianBelief kf_update(const GaussianBelief& b, const Eigen::VectorXd& z,
                         const LinearGaussianModel& model) {
  const Eigen::Index n = b.mean.size();
  const Eigen::Index p = z.size();
  require(b.cov.rows() == n && b.cov.cols() == n, "belief covariance has the wrong shape");
  require(model.H.rows() == p && model.H.cols() == n, "H does not match");
  require(model.R.rows() == p && model.R.cols() == p, "R does not match");

  const Eigen::MatrixXd S = model.H * b.cov * model.H.transpose() + model.R;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(S);
  if (!lu.isInvertible()) {
    throw Error(ErrorCode::DegenerateMeasurement, "innovation covariance is singular");
  }
  // K = P H^T S^-1, via S^T K^T = H P^T.
  const Eigen::MatrixXd K = lu.solve(model.H * b.cov.transpose()).transpose();
  GaussianBelief out;
  out.mean = b.mean + K * (z - model.H * b.mean);
  out.cov = b.cov - K * model.H * b.cov;
  out.cov = (0.5 * (out.cov + out.cov.transpose())).eval();
  return out;
}

Eigen::VectorXd ParticleSet::mean() const {
  require(!particles.empty(), "empty particle set");
  Eigen::VectorXd m = Eigen::VectorXd::Zero(particles.front().size());
  for (std::size_t i = 0; i < particles.size(); ++i) {
    m += weights(static_cast<Eigen::Index>(i)) * particles[i];
  }
  return m;
}

double ParticleSet::effective_size() const {
  const double s2 = weights.squaredNorm();
  return s2 > 0.0 ? 1.0 / s2 : 0.0;
}

void systematic_resample(ParticleSet& set, Rng& rng) {
  const auto n = set.particles.size();
  std::vector<Eigen::VectorXd> out;
  out.reserve(n);
  const double step = 1.0 / static_cast<double>(n);
  double u = std::uniform_real_distribution<double>(0.0, step)(rng);
  double cum = set.weights(0);
  std::size_t j = 0;
  for (std::size_t i = 0; i < n; ++i) {
    while (u > cum && j + 1 < n) cum += set.weights(static_cast<Eigen::Index>(++j));
    out.push_back(set.particles[j]);
    u += step;
  }
  set.particles = std::move(out);
  set.weights = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), step);
}

PfResult pf_run(const ParticleModel& model, const std::vector<Eigen::VectorXd>& z, const PfOptions& opt,
                Rng& rng) {
  require(opt.N_s >= 1, "N_s must be at least 1");
  require(opt.resample_threshold >= 0.0 && opt.resample_threshold <= 1.0,
          "resample_threshold must lie in [0,1]");
  require(model.sample_prior && model.propagate && model.log_likelihood, "particle model is incomplete");

  PfResult r;
  auto& set = r.final;
  const auto n = static_cast<Eigen::Index>(opt.N_s);
  for (int i = 0; i < opt.N_s; ++i) set.particles.push_back(model.sample_prior(rng));
  set.weights = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));

  Eigen::VectorXd logw(n);
  for (std::size_t k = 0; k < z.size(); ++k) {
    const long kk = static_cast<long>(k);
    for (auto& p : set.particles) p = model.propagate(p, kk, rng);
    for (Eigen::Index i = 0; i < n; ++i) {
      logw(i) = std::log(set.weights(i)) + model.log_likelihood(set.particles[i], z[k], kk);
    }
    const double top = logw.maxCoeff();
    if (!std::isfinite(top)) {
      ++r.degenerate_restarts;
      set.weights.setConstant(1.0 / static_cast<double>(n));
    } else {
      set.weights = (logw.array() - top).exp();
      set.weights /= set.weights.sum();
    }
    r.means.push_back(set.mean());
    if (set.effective_size() < opt.resample_threshold * static_cast<double>(n)) {
      systematic_resample(set, rng);
      ++r.resamples;
    }
  }
  return r;
}

ParticleModel particle_model(const LinearGaussianModel& model) {
  model.validate();
  const Eigen::MatrixXd prior_root = sqrt_psd(model.prior.cov);
  const Eigen::MatrixXd q_root = sqrt_psd(model.Q);
  const Eigen::LLT<Eigen::MatrixXd> r_llt(model.R);
  require(r_llt.info() == Eigen::Success, "R must be positive definite for a particle likelihood");
  const double log_norm = -0.5 * static_cast<double>(model.R.rows()) * std::log(2.0 * std::numbers::pi) -
                          Eigen::MatrixXd(r_llt.matrixL()).diagonal().array().log().sum();

  ParticleModel pm;
  pm.sample_prior = [mean = model.prior.mean, prior_root](Rng& rng) -> Eigen::VectorXd {
    return mean + gaussian(prior_root, rng);
  };
  pm.propagate = [F = model.F, q_root](const Eigen::VectorXd& x, long, Rng& rng) -> Eigen::VectorXd {
    return F * x + gaussian(q_root, rng);
  };
  pm.log_likelihood = [H = model.H, r_llt, log_norm](const Eigen::VectorXd& x, const Eigen::VectorXd& z,
                                                     long) {
    const Eigen::VectorXd w = r_llt.matrixL().solve(z - H * x);
    return log_norm - 0.5 * w.squaredNorm();
  };
  return pm;
}

}  // namespace baryloc::baselines
