#include <cmath>

#include "baryloc/harness.hpp"

namespace baryloc::harness {

namespace {

constexpr double kMinNormalizedVolume = 1e-2;
constexpr double kVolumeRelTol = 1e-9;
constexpr double kBand = 1e-6;

}  // namespace

GeometrySuiteReport run_geometry_suite(long samples, std::uint64_t seed) {
  if (samples < 0) throw Error(ErrorCode::InvalidInput, "sample count must be nonnegative");
  GeometrySuiteReport rep;
  Rng rng(derive_seed(seed, 0, Stream::Scene));
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> log_scale(-1.0, 1.0);
  std::exponential_distribution<double> expo(1.0);

  for (long s = 0; s < samples; ++s) {
    ++rep.samples;
    const int m = s % 2 == 0 ? 2 : 3;
    // Near-flat draws are redrawn (and counted) so every sample is checked.
    double scale = 0.0, oracle = 0.0;
    std::vector<geometry::Point> pts(m + 1, geometry::Point(m));
    for (;;) {
      scale = std::pow(10.0, log_scale(rng));
      for (auto& p : pts) {
        for (int c = 0; c < m; ++c) p(c) = scale * u(rng);
      }
      double max_edge = 0.0;
      for (int a = 0; a <= m; ++a) {
        for (int b = a + 1; b <= m; ++b) max_edge = std::max(max_edge, (pts[a] - pts[b]).norm());
      }
      oracle = geometry::coordinate_oracle_volume(pts);
      if (oracle / std::pow(max_edge, m) >= kMinNormalizedVolume) break;
      ++rep.degenerate_skipped;
    }

    const auto d2 = geometry::SquaredDistanceMatrix::from_points(pts);
    const double cm = geometry::simplex_hypervolume(d2);
    const double rel = std::abs(cm - oracle) / oracle;
    ++rep.volume_checked;
    rep.max_volume_rel_error = std::max(rep.max_volume_rel_error, rel);
    if (rel <= kVolumeRelTol) ++rep.volume_passed;

    // Candidate: half drawn inside via Dirichlet weights, half from a box
    // around the simplex.
    geometry::Point x(m);
    if (s % 4 < 2) {
      Eigen::VectorXd w(m + 1);
      for (int j = 0; j <= m; ++j) w(j) = expo(rng);
      w /= w.sum();
      x.setZero();
      for (int j = 0; j <= m; ++j) x += w(j) * pts[j];
    } else {
      for (int c = 0; c < m; ++c) x(c) = 1.5 * scale * u(rng);
    }

    // Barycentric coordinates from coordinates: [p_1 - p_0 ... p_m - p_0] l = x - p_0.
    Eigen::MatrixXd e(m, m);
    for (int j = 0; j < m; ++j) e.col(j) = pts[j + 1] - pts[0];
    const Eigen::VectorXd tail = e.fullPivLu().solve(x - pts[0]);
    Eigen::VectorXd lambda(m + 1);
    lambda(0) = 1.0 - tail.sum();
    lambda.tail(m) = tail;
    if (lambda.cwiseAbs().minCoeff() < kBand) {
      ++rep.band_skipped;
      continue;
    }
    const bool oracle_inside = lambda.minCoeff() > 0.0;

    std::vector<double> i_dists;
    for (const auto& p : pts) i_dists.push_back((x - p).norm());
    std::vector<int> members(m + 1);
    for (int j = 0; j <= m; ++j) members[j] = j;
    const geometry::Simplex simplex(m, members, d2);
    const auto res = geometry::inclusion_test(i_dists, simplex, geometry::kDefaultTolRel);
    ++rep.inclusion_checked;
    if ((res.verdict == geometry::Inclusion::Inside) == oracle_inside) ++rep.inclusion_agreed;
  }
  return rep;
}

}  // namespace baryloc::harness
