#include "baryloc/geometry.hpp"

#include <cmath>
#include <string>

namespace baryloc::geometry {

namespace {

double factorial(int m) {
  double f = 1.0;
  for (int k = 2; k <= m; ++k) f *= k;
  return f;
}

void require(bool ok, ErrorCode code, const std::string& what) {
  if (!ok) throw Error(code, what);
}

// Squared volume with its zero tolerance, both in units of scale^m.
struct SignedVolume {
  double squared;
  double tol;
};

SignedVolume signed_volume(const SquaredDistanceMatrix& d, double scale) {
  const int m = static_cast<int>(d.size()) - 1;
  return {squared_hypervolume(d), kVolumeTol * std::pow(scale, m)};
}

}  // namespace

SquaredDistanceMatrix::SquaredDistanceMatrix(Eigen::MatrixXd d2) : d2_(std::move(d2)) {
  require(d2_.rows() == d2_.cols(), ErrorCode::InvalidInput,
          "squared distance matrix must be square");
  const Eigen::Index n = d2_.rows();
  for (Eigen::Index l = 0; l < n; ++l) {
    require(d2_(l, l) == 0.0, ErrorCode::InvalidInput,
            "squared distance matrix must have a zero diagonal");
    for (Eigen::Index j = l + 1; j < n; ++j) {
      require(std::isfinite(d2_(l, j)) && d2_(l, j) >= 0.0, ErrorCode::InvalidInput,
              "squared distances must be finite and nonnegative");
      require(d2_(l, j) == d2_(j, l), ErrorCode::InvalidInput,
              "squared distance matrix must be symmetric");
    }
  }
}

SquaredDistanceMatrix SquaredDistanceMatrix::from_points(std::span<const Point> points) {
  const auto n = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd d2 = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index l = 0; l < n; ++l) {
    for (Eigen::Index j = l + 1; j < n; ++j) {
      require(points[l].size() == points[j].size(), ErrorCode::InvalidInput,
              "points must share a dimension");
      d2(l, j) = d2(j, l) = (points[l] - points[j]).squaredNorm();
    }
  }
  return SquaredDistanceMatrix(std::move(d2));
}

SquaredDistanceMatrix SquaredDistanceMatrix::from_distances(const Eigen::MatrixXd& d) {
  Eigen::MatrixXd d2 = d.array().square().matrix();
  d2.diagonal().setZero();
  return SquaredDistanceMatrix(std::move(d2));
}

double SquaredDistanceMatrix::scale() const noexcept {
  return d2_.size() == 0 ? 0.0 : d2_.maxCoeff();
}

SquaredDistanceMatrix SquaredDistanceMatrix::subset(std::span<const int> idx) const {
  const auto k = static_cast<Eigen::Index>(idx.size());
  Eigen::MatrixXd out(k, k);
  for (Eigen::Index a = 0; a < k; ++a) {
    require(idx[a] >= 0 && idx[a] < size(), ErrorCode::InvalidInput, "subset index out of range");
    for (Eigen::Index b = 0; b < k; ++b) out(a, b) = d2_(idx[a], idx[b]);
  }
  SquaredDistanceMatrix s;
  s.d2_ = std::move(out);
  return s;
}

Simplex::Simplex(int dim_, std::vector<int> members_, SquaredDistanceMatrix dists_)
    : dim(dim_), members(std::move(members_)), dists(std::move(dists_)) {
  require(dim >= 1 && dim <= kMaxDim, ErrorCode::InvalidInput,
          "simplex dimension must be in [1, " + std::to_string(kMaxDim) + "]");
  require(members.size() == static_cast<std::size_t>(dim) + 1, ErrorCode::InvalidInput,
          "a simplex in R^m needs exactly m+1 members");
  require(dists.size() == dim + 1, ErrorCode::InvalidInput,
          "distance matrix size does not match the member count");
}

BarycentricWeights::BarycentricWeights(Eigen::VectorXd w) : w_(std::move(w)) {
  require(w_.size() >= 2, ErrorCode::InvalidInput, "barycentric weights need at least 2 entries");
  for (Eigen::Index j = 0; j < w_.size(); ++j) {
    require(w_(j) > 0.0 && w_(j) < 1.0, ErrorCode::InvalidInput,
            "barycentric weights must lie in (0,1)");
  }
  require(std::abs(w_.sum() - 1.0) <= 1e-9, ErrorCode::InvalidInput,
          "barycentric weights must sum to 1");
}

double cm_divisor(int m) {
  require(m >= 0 && m <= kMaxDim, ErrorCode::InvalidInput, "dimension out of range");
  const double sign = (m % 2 == 1) ? 1.0 : -1.0;  // (-1)^(m+1)
  return std::ldexp(1.0, m) * factorial(m) * factorial(m) / sign;
}

double cayley_menger_det(const SquaredDistanceMatrix& dists) {
  const Eigen::Index n = dists.size();
  require(n >= 2, ErrorCode::InvalidInput, "Cayley-Menger determinant needs at least 2 nodes");
  require(n - 1 <= kMaxDim, ErrorCode::InvalidInput, "dimension above supported maximum");
  // Extended precision: component volumes of points near a facet come from
  // heavy cancellation in this determinant.
  using MatrixXld = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  MatrixXld bordered(n + 1, n + 1);
  bordered(0, 0) = 0.0L;
  bordered.row(0).tail(n).setOnes();
  bordered.col(0).tail(n).setOnes();
  bordered.bottomRightCorner(n, n) = dists.matrix().cast<long double>();
  return static_cast<double>(bordered.fullPivLu().determinant());
}

double squared_hypervolume(const SquaredDistanceMatrix& dists) {
  const int m = static_cast<int>(dists.size()) - 1;
  return cayley_menger_det(dists) / cm_divisor(m);
}

double simplex_hypervolume(const SquaredDistanceMatrix& dists) {
  const auto v = signed_volume(dists, dists.scale());
  if (v.squared < -v.tol) {
    throw Error(ErrorCode::NegativeSquaredVolume,
                "distances are not realizable: squared volume " + std::to_string(v.squared));
  }
  if (v.squared <= v.tol) return 0.0;
  return std::sqrt(v.squared);
}

double simplex_hypervolume(const Simplex& s) { return simplex_hypervolume(s.dists); }

SquaredDistanceMatrix augment(const Simplex& set, std::span<const double> i_dists) {
  const Eigen::Index n = set.dim + 1;
  require(static_cast<Eigen::Index>(i_dists.size()) == n, ErrorCode::InvalidInput,
          "need one distance per simplex member");
  Eigen::MatrixXd d2(n + 1, n + 1);
  d2.topLeftCorner(n, n) = set.dists.matrix();
  for (Eigen::Index j = 0; j < n; ++j) {
    require(std::isfinite(i_dists[j]), ErrorCode::InvalidInput, "distances must be finite");
    d2(n, j) = d2(j, n) = i_dists[j] * i_dists[j];
  }
  d2(n, n) = 0.0;
  return SquaredDistanceMatrix(std::move(d2));
}

InclusionResult inclusion_test(std::span<const double> i_dists, const Simplex& set,
                               double tol_rel) {
  require(tol_rel >= 0.0, ErrorCode::InvalidInput, "tolerance must be nonnegative");
  const SquaredDistanceMatrix aug = augment(set, i_dists);
  const double scale = aug.scale();
  const int n = set.dim + 1;

  InclusionResult r;
  r.component_volumes = Eigen::VectorXd::Zero(n);

  std::vector<int> idx(n);
  for (int j = 0; j < n; ++j) idx[j] = j;
  const auto total = signed_volume(aug.subset(idx), scale);
  if (total.squared < -total.tol) r.negative_volume = true;
  if (total.squared <= total.tol) return r;  // Degenerate
  r.total_volume = std::sqrt(total.squared);

  for (int j = 0; j < n; ++j) {
    // Member j replaced by the candidate, which sits at index n.
    for (int l = 0; l < n; ++l) idx[l] = (l == j) ? n : l;
    const auto c = signed_volume(aug.subset(idx), scale);
    if (c.squared < -c.tol) {
      r.negative_volume = true;
      return r;
    }
    // Small positive components are real (points near a facet); only the
    // total volume is held to the degeneracy tolerance.
    r.component_volumes(j) = std::sqrt(std::max(0.0, c.squared));
  }

  r.relative_error = std::abs(r.component_volumes.sum() - r.total_volume) / r.total_volume;
  const bool interior = r.component_volumes.minCoeff() > kInteriorBand * r.total_volume;
  r.verdict = (interior && r.relative_error <= tol_rel) ? Inclusion::Inside : Inclusion::Outside;
  return r;
}

BarycentricWeights weights_from(const InclusionResult& r) {
  require(r.verdict == Inclusion::Inside, ErrorCode::PreconditionViolated,
          "barycentric weights need a point strictly inside the simplex");
  return BarycentricWeights(r.component_volumes / r.component_volumes.sum());
}

BarycentricWeights barycentric_weights(std::span<const double> i_dists, const Simplex& set,
                                       double tol_rel) {
  return weights_from(inclusion_test(i_dists, set, tol_rel));
}

Eigen::VectorXd raw_barycentric_ratios(std::span<const double> i_dists, const Simplex& set) {
  const SquaredDistanceMatrix aug = augment(set, i_dists);
  const double scale = aug.scale();
  const int n = set.dim + 1;
  std::vector<int> idx(n);
  for (int j = 0; j < n; ++j) idx[j] = j;
  const auto total = signed_volume(aug.subset(idx), scale);
  require(total.squared > total.tol, ErrorCode::PreconditionViolated,
          "triangulation set is degenerate under the given distances");
  const double a = std::sqrt(total.squared);
  Eigen::VectorXd w(n);
  for (int j = 0; j < n; ++j) {
    for (int l = 0; l < n; ++l) idx[l] = (l == j) ? n : l;
    w(j) = std::sqrt(std::max(0.0, squared_hypervolume(aug.subset(idx)))) / a;
  }
  return w;
}

Point trilaterate(std::span<const Point> anchors, std::span<const double> ranges) {
  require(!anchors.empty(), ErrorCode::InvalidInput, "no anchors given");
  const Eigen::Index m = anchors[0].size();
  require(m >= 1 && m <= kMaxDim, ErrorCode::InvalidInput, "dimension out of range");
  require(static_cast<Eigen::Index>(anchors.size()) == m + 1, ErrorCode::InvalidInput,
          "trilateration in R^m needs m+1 anchors");
  require(ranges.size() == anchors.size(), ErrorCode::InvalidInput,
          "need one range per anchor");
  for (std::size_t j = 0; j < anchors.size(); ++j) {
    require(anchors[j].size() == m, ErrorCode::InvalidInput, "anchors must share a dimension");
    require(std::isfinite(ranges[j]) && ranges[j] >= 0.0, ErrorCode::InvalidInput,
            "ranges must be finite and nonnegative");
  }

  // Work relative to the first anchor: |y|^2 = r0^2 and |y - a'_j|^2 = r_j^2
  // give the linear rows 2 a'_j . y = r0^2 - r_j^2 + |a'_j|^2.
  const Point& origin = anchors[0];
  Eigen::MatrixXd a(m, m);
  Eigen::VectorXd b(m);
  double scale = ranges[0] * ranges[0];
  for (Eigen::Index j = 1; j <= m; ++j) {
    const Point rel = anchors[j] - origin;
    a.row(j - 1) = 2.0 * rel.transpose();
    b(j - 1) = ranges[0] * ranges[0] - ranges[j] * ranges[j] + rel.squaredNorm();
    scale = std::max({scale, rel.squaredNorm(), ranges[j] * ranges[j]});
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  qr.setThreshold(1e-10);
  if (qr.rank() < m) {
    throw Error(ErrorCode::DegenerateAnchors, "anchors are affinely dependent");
  }
  const Point x = origin + qr.solve(b);

  for (std::size_t j = 0; j < anchors.size(); ++j) {
    const double residual = std::abs((x - anchors[j]).squaredNorm() - ranges[j] * ranges[j]);
    if (residual > 1e-9 * scale) {
      throw Error(ErrorCode::InconsistentRanges,
                  "sphere equation " + std::to_string(j) + " has residual " +
                      std::to_string(residual));
    }
  }
  return x;
}

Point multilaterate(std::span<const Point> anchors, std::span<const double> ranges) {
  require(!anchors.empty(), ErrorCode::InvalidInput, "no anchors given");
  const Eigen::Index m = anchors[0].size();
  require(static_cast<Eigen::Index>(anchors.size()) >= m + 1, ErrorCode::InvalidInput,
          "multilateration in R^m needs at least m+1 anchors");
  require(ranges.size() == anchors.size(), ErrorCode::InvalidInput, "need one range per anchor");
  const auto k = static_cast<Eigen::Index>(anchors.size()) - 1;
  Eigen::MatrixXd a(k, m);
  Eigen::VectorXd b(k);
  for (Eigen::Index j = 1; j <= k; ++j) {
    require(anchors[j].size() == m, ErrorCode::InvalidInput, "anchors must share a dimension");
    const Point rel = anchors[j] - anchors[0];
    a.row(j - 1) = 2.0 * rel.transpose();
    b(j - 1) = ranges[0] * ranges[0] - ranges[j] * ranges[j] + rel.squaredNorm();
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  qr.setThreshold(1e-10);
  if (qr.rank() < m) throw Error(ErrorCode::DegenerateAnchors, "anchors are affinely dependent");
  return anchors[0] + qr.solve(b);
}

double coordinate_oracle_volume(std::span<const Point> points) {
  require(!points.empty(), ErrorCode::InvalidInput, "no points given");
  const Eigen::Index m = points[0].size();
  require(m >= 1 && m <= kMaxDim, ErrorCode::InvalidInput, "dimension out of range");
  require(static_cast<Eigen::Index>(points.size()) == m + 1, ErrorCode::InvalidInput,
          "an m-simplex needs m+1 points");
  Eigen::MatrixXd edges(m, m);
  for (Eigen::Index j = 1; j <= m; ++j) {
    require(points[j].size() == m, ErrorCode::InvalidInput, "points must share a dimension");
    edges.row(j - 1) = (points[j] - points[0]).transpose();
  }
  return std::abs(edges.partialPivLu().determinant()) / factorial(static_cast<int>(m));
}

}  // namespace baryloc::geometry
