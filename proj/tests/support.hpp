#pragma once

#include <cmath>
#include <vector>

#include "baryloc/scene.hpp"

namespace testing {

using baryloc::geometry::Point;

inline Point pt(double x, double y) { return Point{{x, y}}; }
inline Point pt(double x) { return Point{{x}}; }
inline Point pt(double x, double y, double z) { return Point{{x, y, z}}; }

// Node roster from coordinates: agents first (ids 0..), then anchors.
inline baryloc::scene::Deployment make_scene(const std::vector<Point>& agents,
                                             const std::vector<Point>& anchors, double r,
                                             double lo = -10.0, double hi = 10.0) {
  const int dim = static_cast<int>((anchors.empty() ? agents : anchors).front().size());
  std::vector<baryloc::scene::Node> nodes;
  int id = 0;
  for (const auto& p : agents) nodes.push_back({id++, baryloc::scene::Role::Agent, p, Point::Zero(dim)});
  for (const auto& p : anchors) nodes.push_back({id++, baryloc::scene::Role::Anchor, p, p});
  baryloc::scene::Region region{Eigen::VectorXd::Constant(dim, lo), Eigen::VectorXd::Constant(dim, hi)};
  return baryloc::scene::Deployment(dim, region, r, nodes);
}

// Shoelace area of a triangle.
inline double shoelace(const Point& a, const Point& b, const Point& c) {
  return 0.5 * std::abs((b(0) - a(0)) * (c(1) - a(1)) - (c(0) - a(0)) * (b(1) - a(1)));
}

}  // namespace testing
