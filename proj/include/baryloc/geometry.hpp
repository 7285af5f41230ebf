#pragma once

// Simplex geometry from pairwise distances: Cayley-Menger hypervolumes,
// convex-hull inclusion, barycentric coordinates and trilateration.
// Everything here is a pure function of its arguments.

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "baryloc/error.hpp"

namespace baryloc::geometry {

using Point = Eigen::VectorXd;

inline constexpr int kMaxDim = 8;
inline constexpr double kDefaultTolRel = 1e-9;
// Squared hypervolumes within this fraction of scale^m count as zero.
inline constexpr double kVolumeTol = 1e-12;
// Component volumes at or below this fraction of the total put the point on
// the boundary, which the strict-interior policy classifies as Outside.
inline constexpr double kInteriorBand = 1e-9;

// Symmetric, zero-diagonal, nonnegative matrix of squared distances.
class SquaredDistanceMatrix {
 public:
  SquaredDistanceMatrix() = default;
  explicit SquaredDistanceMatrix(Eigen::MatrixXd d2);

  static SquaredDistanceMatrix from_points(std::span<const Point> points);
  // Squares each entry of a (symmetric) distance matrix.
  static SquaredDistanceMatrix from_distances(const Eigen::MatrixXd& d);

  Eigen::Index size() const noexcept { return d2_.rows(); }
  double operator()(Eigen::Index l, Eigen::Index j) const { return d2_(l, j); }
  const Eigen::MatrixXd& matrix() const noexcept { return d2_; }
  // Largest squared distance; sets the tolerance scale.
  double scale() const noexcept;

  SquaredDistanceMatrix subset(std::span<const int> idx) const;

 private:
  Eigen::MatrixXd d2_;
};

// m+1 members in R^m with their pairwise squared distances.
struct Simplex {
  int dim = 0;
  std::vector<int> members;
  SquaredDistanceMatrix dists;

  Simplex() = default;
  Simplex(int dim, std::vector<int> members, SquaredDistanceMatrix dists);
};

// Convex weights aligned with the members of a Simplex.
class BarycentricWeights {
 public:
  BarycentricWeights() = default;
  // Requires every weight in (0,1) and a unit sum within 1e-9.
  explicit BarycentricWeights(Eigen::VectorXd w);

  const Eigen::VectorXd& values() const noexcept { return w_; }
  double operator[](Eigen::Index j) const { return w_(j); }
  Eigen::Index size() const noexcept { return w_.size(); }
  double min() const { return w_.minCoeff(); }

 private:
  Eigen::VectorXd w_;
};

// s_m = 2^m (m!)^2 / (-1)^(m+1); squared m-volume = det / s_m.
double cm_divisor(int m);

// Determinant of the bordered matrix [[0, 1^T], [1, D]].
double cayley_menger_det(const SquaredDistanceMatrix& dists);

// Signed squared hypervolume det/s_m of the (n-1)-simplex. Negative values
// mean the distances are not realizable in R^(n-1).
double squared_hypervolume(const SquaredDistanceMatrix& dists);

// Hypervolume of the simplex. Zero for degenerate sets; throws
// NegativeSquaredVolume when the squared volume is clearly negative.
double simplex_hypervolume(const SquaredDistanceMatrix& dists);
double simplex_hypervolume(const Simplex& s);

enum class Inclusion { Inside, Outside, Degenerate };

struct InclusionResult {
  Inclusion verdict = Inclusion::Degenerate;
  double total_volume = 0.0;
  // Volume of the simplex with member j replaced by the candidate point.
  Eigen::VectorXd component_volumes;
  // |sum(component) - total| / total, the relative inclusion error.
  double relative_error = 0.0;
  // Set when some squared volume came out clearly negative.
  bool negative_volume = false;
};

// Squared-distance matrix of the set with the candidate appended last.
SquaredDistanceMatrix augment(const Simplex& set, std::span<const double> i_dists);

// Inside iff the component volumes add up to the total within tol_rel and
// every component is strictly positive.
InclusionResult inclusion_test(std::span<const double> i_dists, const Simplex& set,
                               double tol_rel = kDefaultTolRel);

// Weights j = A(set with j replaced by i) / A(set), renormalized to sum to 1.
// Throws PreconditionViolated unless the point tests Inside.
BarycentricWeights barycentric_weights(std::span<const double> i_dists, const Simplex& set,
                                       double tol_rel = kDefaultTolRel);

// Normalized weights from an Inside inclusion result.
BarycentricWeights weights_from(const InclusionResult& r);

// Raw ratios A_j / A with no inclusion precondition and no renormalization.
// Negative squared volumes are clamped to zero. Used by the noisy static
// iterations, whose weight bias comes exactly from this nonlinearity.
Eigen::VectorXd raw_barycentric_ratios(std::span<const double> i_dists, const Simplex& set);

// Solves the m+1 sphere equations by subtracting the first from the rest.
Point trilaterate(std::span<const Point> anchors, std::span<const double> ranges);

// Least-squares fix from M >= m+1 ranges with the same linearization and no
// consistency check; for noisy ranges.
Point multilaterate(std::span<const Point> anchors, std::span<const double> ranges);

// |det([p1-p0; ...; pm-p0])| / m!
double coordinate_oracle_volume(std::span<const Point> points);

}  // namespace baryloc::geometry
