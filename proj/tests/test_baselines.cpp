#include <doctest.h>

#include <random>

#include "baryloc/baselines.hpp"

using namespace baryloc;
using namespace baryloc::baselines;

namespace {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

Mat scalar(double v) { return Mat::Constant(1, 1, v); }
Vec vscalar(double v) { return Vec::Constant(1, v); }

LinearGaussianModel scalar_model(double F, double Q, double H, double R, double m0, double P0) {
  return {scalar(F), scalar(Q), scalar(H), scalar(R), {vscalar(m0), scalar(P0)}};
}

Mat random_spd(int n, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Mat a(n, n);
  for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = g(rng);
  return a * a.transpose() + 0.1 * Mat::Identity(n, n);
}

// Constant-velocity target in the plane with position measurements.
LinearGaussianModel tracking_model() {
  LinearGaussianModel m;
  m.F = Mat::Identity(4, 4);
  m.F(0, 2) = m.F(1, 3) = 1.0;
  m.Q = 0.05 * Mat::Identity(4, 4);
  m.H = Mat::Zero(2, 4);
  m.H(0, 0) = m.H(1, 1) = 1.0;
  m.R = 0.5 * Mat::Identity(2, 2);
  m.prior = {Vec::Zero(4), Mat::Identity(4, 4)};
  return m;
}

std::vector<Vec> simulate(const LinearGaussianModel& m, int steps, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  const auto draw = [&](const Mat& cov) {
    Vec v(cov.rows());
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = g(rng);
    return Vec(cov.llt().matrixL() * v);
  };
  Vec x = m.prior.mean + draw(m.prior.cov);
  std::vector<Vec> z;
  for (int k = 0; k < steps; ++k) {
    x = m.F * x + draw(m.Q);
    z.push_back(m.H * x + draw(m.R));
  }
  return z;
}

}  // namespace

TEST_SUITE("baselines") {
  TEST_CASE("predict examples") {
    const auto id = scalar_model(1, 0, 1, 1, 3, 2);
    const auto same = kf_predict(id.prior, id);
    CHECK(same.mean(0) == 3.0);
    CHECK(same.cov(0, 0) == 2.0);
    const auto m = scalar_model(1, 1, 1, 1, 0, 1);
    CHECK(kf_predict(m.prior, m).cov(0, 0) == 2.0);
  }

  TEST_CASE("update examples") {
    const auto m = scalar_model(1, 0, 1, 1, 0, 1);
    const auto post = kf_update(m.prior, vscalar(2.0), m);
    CHECK(post.mean(0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(post.cov(0, 0) == doctest::Approx(0.5).epsilon(1e-15));

    const auto vague = scalar_model(1, 0, 1, 1e12, 0.5, 1);
    const auto p2 = kf_update(vague.prior, vscalar(100.0), vague);
    CHECK(std::abs(p2.mean(0) - 0.5) <= 1e-6 * 0.5);
    CHECK(std::abs(p2.cov(0, 0) - 1.0) <= 1e-6);

    LinearGaussianModel exact{Mat::Identity(2, 2), Mat::Zero(2, 2), Mat::Identity(2, 2),
                              1e-15 * Mat::Identity(2, 2), {Vec::Zero(2), Mat::Identity(2, 2)}};
    const Vec z = Vec{{3.0, -1.0}};
    CHECK((kf_update(exact.prior, z, exact).mean - z).norm() < 1e-9);
  }

  TEST_CASE("singular innovation and bad shapes") {
    LinearGaussianModel m{Mat::Identity(2, 2), Mat::Zero(2, 2), Mat::Zero(1, 2), Mat::Zero(1, 1),
                          {Vec::Zero(2), Mat::Identity(2, 2)}};
    try {
      kf_update(m.prior, vscalar(0.0), m);
      FAIL("expected DegenerateMeasurement");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::DegenerateMeasurement);
    }
    m.H = Mat::Identity(3, 3);
    CHECK_THROWS_AS(kf_update(m.prior, vscalar(0.0), m), Error);
    auto bad = tracking_model();
    bad.R(0, 0) = -1.0;
    CHECK_THROWS_AS(bad.validate(), Error);
  }

  TEST_CASE("recursions match a naive re-implementation") {
    Rng rng(21);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int t = 0; t < 50; ++t) {
      LinearGaussianModel m;
      m.F = Mat::NullaryExpr(4, 4, [&] { return g(rng); });
      m.Q = random_spd(4, rng);
      m.H = Mat::NullaryExpr(3, 4, [&] { return g(rng); });
      m.R = random_spd(3, rng);
      m.prior = {Vec::NullaryExpr(4, [&] { return g(rng); }), random_spd(4, rng)};
      const Vec z = Vec::NullaryExpr(3, [&] { return g(rng); });

      const auto pred = kf_predict(m.prior, m);
      const Vec m1 = m.F * m.prior.mean;
      const Mat P1 = m.Q + m.F * m.prior.cov * m.F.transpose();
      CHECK((pred.mean - m1).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, m1.cwiseAbs().maxCoeff()));
      CHECK((pred.cov - P1).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, P1.cwiseAbs().maxCoeff()));

      const auto post = kf_update(pred, z, m);
      const Mat S = m.H * P1 * m.H.transpose() + m.R;
      const Mat K = P1 * m.H.transpose() * S.inverse();
      const Vec m2 = m1 + K * (z - m.H * m1);
      const Mat P2 = P1 - K * m.H * P1;
      const double scale = std::max({1.0, m2.cwiseAbs().maxCoeff(), P2.cwiseAbs().maxCoeff()});
      CHECK((post.mean - m2).cwiseAbs().maxCoeff() <= 1e-12 * scale);
      CHECK((post.cov - P2).cwiseAbs().maxCoeff() <= 1e-12 * scale);
      CHECK(post.cov.isApprox(post.cov.transpose(), 0.0));
      CHECK(Eigen::SelfAdjointEigenSolver<Mat>(post.cov).eigenvalues().minCoeff() >= -1e-10);
    }
  }

  TEST_CASE("systematic resampling keeps the count and favours heavy particles") {
    ParticleSet s;
    for (int i = 0; i < 4; ++i) s.particles.push_back(vscalar(i));
    s.weights = Vec{{0.7, 0.1, 0.1, 0.1}};
    CHECK(s.effective_size() == doctest::Approx(1.0 / 0.52));
    Rng rng(1);
    systematic_resample(s, rng);
    CHECK(s.particles.size() == 4);
    CHECK(s.weights.sum() == doctest::Approx(1.0).epsilon(1e-15));
    int heavy = 0;
    for (const auto& p : s.particles) heavy += p(0) == 0.0;
    CHECK(heavy >= 2);
    CHECK(heavy <= 3);
  }

  TEST_CASE("fixed point with repeated exact measurements") {
    // Prior N(0, 4), z = 2 observed five times with unit noise.
    const auto m = scalar_model(1, 0, 1, 1, 0, 4);
    const std::vector<Vec> z(5, vscalar(2.0));
    Rng rng(3);
    PfOptions opt;
    opt.N_s = 1000;
    opt.resample_threshold = 0.0;
    const auto r = pf_run(particle_model(m), z, opt, rng);
    const double prec = 0.25 + 5.0;
    const double mean = 10.0 / prec, sd = std::sqrt(1.0 / prec);
    CHECK(std::abs(r.means.back()(0) - mean) <= 3 * sd / std::sqrt(r.final.effective_size()));
    CHECK(r.resamples == 0);
  }

  TEST_CASE("weights are normalized and the count is invariant") {
    const auto m = tracking_model();
    Rng rng(5);
    const auto z = simulate(m, 30, rng);
    PfOptions opt;
    opt.N_s = 500;
    const auto pm = particle_model(m);
    const auto r = pf_run(pm, z, opt, rng);
    CHECK(r.final.particles.size() == 500);
    CHECK(std::abs(r.final.weights.sum() - 1.0) <= 1e-12);
    CHECK(r.means.size() == 30);
    CHECK(r.resamples > 0);
  }

  TEST_CASE("single particle runs") {
    const auto m = tracking_model();
    Rng rng(6);
    const auto z = simulate(m, 10, rng);
    PfOptions opt;
    opt.N_s = 1;
    const auto r = pf_run(particle_model(m), z, opt, rng);
    CHECK(r.means.size() == 10);
    CHECK(r.final.weights(0) == 1.0);
    opt.N_s = 0;
    CHECK_THROWS_AS(pf_run(particle_model(m), z, opt, rng), Error);
  }

  TEST_CASE("vanishing likelihood restarts with uniform weights") {
    ParticleModel pm;
    pm.sample_prior = [](Rng&) { return vscalar(0.0); };
    pm.propagate = [](const Vec& x, long, Rng&) { return x; };
    pm.log_likelihood = [](const Vec&, const Vec&, long) { return -std::numeric_limits<double>::infinity(); };
    Rng rng(7);
    PfOptions opt;
    opt.N_s = 10;
    const auto r = pf_run(pm, {vscalar(1.0), vscalar(1.0)}, opt, rng);
    CHECK(r.degenerate_restarts == 2);
    CHECK(r.final.weights.sum() == doctest::Approx(1.0));
  }

  TEST_CASE("particle filter tracks the Kalman filter") {
    // Standard errors from the spread of independent filter runs; the
    // bootstrap filter's variance is well above posterior variance / N_s.
    const auto m = tracking_model();
    Rng rng(8);
    const auto z = simulate(m, 50, rng);
    PfOptions opt;
    opt.N_s = 2000;
    const int runs = 10;
    std::vector<PfResult> r;
    for (int i = 0; i < runs; ++i) r.push_back(pf_run(particle_model(m), z, opt, rng));
    GaussianBelief b = m.prior;
    int within = 0, total = 0;
    for (std::size_t k = 0; k < z.size(); ++k) {
      b = kf_update(kf_predict(b, m), z[k], m);
      for (Eigen::Index c = 0; c < 4; ++c) {
        double mean = 0.0, sq = 0.0;
        for (const auto& ri : r) mean += ri.means[k](c) / runs;
        for (const auto& ri : r) sq += std::pow(ri.means[k](c) - mean, 2);
        const double sd = std::sqrt(sq / (runs - 1));
        within += std::abs(r[0].means[k](c) - b.mean(c)) <= 5 * sd;
        ++total;
      }
    }
    CHECK(within == total);
  }

  TEST_CASE("random-walk model: RMSE against the Kalman filter") {
    LinearGaussianModel m{Mat::Identity(2, 2), 0.5 * Mat::Identity(2, 2), Mat::Identity(2, 2),
                          Mat::Identity(2, 2), {Vec::Zero(2), Mat::Identity(2, 2)}};
    Rng rng(9);
    const auto z = simulate(m, 100, rng);
    PfOptions opt;
    opt.N_s = 10000;
    const auto r = pf_run(particle_model(m), z, opt, rng);
    GaussianBelief b = m.prior;
    double sq = 0.0, trace = 0.0;
    for (std::size_t k = 0; k < z.size(); ++k) {
      b = kf_update(kf_predict(b, m), z[k], m);
      sq += (r.means[k] - b.mean).squaredNorm();
      trace += b.cov.trace();
    }
    const double rmse = std::sqrt(sq / z.size());
    CHECK(rmse <= 5.0 / std::sqrt(double(opt.N_s)) * std::sqrt(trace / z.size()));
  }
}
