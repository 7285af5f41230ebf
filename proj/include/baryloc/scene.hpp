#pragma once

#include <functional>
#include <optional>
#include <unordered_map>
#include <vector>

#include "baryloc/geometry.hpp"
#include "baryloc/rng.hpp"

namespace baryloc::scene {

using geometry::Point;

enum class Role { Agent, Anchor };

struct Node {
  int id = 0;
  Role role = Role::Agent;
  Point true_pos;
  // Anchors always report est_pos == true_pos.
  Point est_pos;
};

// Axis-aligned box [lo, hi].
struct Region {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  bool contains(const Point& p) const;
  Eigen::VectorXd side() const { return hi - lo; }
};

class Deployment {
 public:
  Deployment(int dim, Region region, double comm_radius, std::vector<Node> nodes);

  int dim() const noexcept { return dim_; }
  const Region& region() const noexcept { return region_; }
  double comm_radius() const noexcept { return comm_radius_; }
  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  const Node& at(std::size_t index) const { return nodes_.at(index); }

  // Roster index of a node id; throws InvalidInput for unknown ids.
  std::size_t index_of(int id) const;
  const Node& node(int id) const { return nodes_[index_of(id)]; }

  // Roster indices, in roster order.
  const std::vector<int>& agent_indices() const noexcept { return agents_; }
  const std::vector<int>& anchor_indices() const noexcept { return anchors_; }

  double true_distance(std::size_t a, std::size_t b) const;

  // Moves a node; the position must stay inside the region. Anchors keep
  // est_pos in sync.
  void set_true_pos(std::size_t index, Point p);
  void set_est_pos(std::size_t index, Point p);

 private:
  int dim_;
  Region region_;
  double comm_radius_;
  std::vector<Node> nodes_;
  std::unordered_map<int, std::size_t> by_id_;
  std::vector<int> agents_;
  std::vector<int> anchors_;
};

// Distance between two roster indices as seen by the measuring agent.
using DistanceProvider = std::function<double(std::size_t, std::size_t)>;

DistanceProvider true_distances(const Deployment& dep);

// Node ids j != id with true distance <= comm_radius (closed ball), sorted.
std::vector<int> neighbors(const Deployment& dep, int id);
// Same query on roster indices.
std::vector<int> neighbor_indices(const Deployment& dep, std::size_t index);

struct TriangulationSet {
  int owner = 0;                  // agent id
  std::vector<int> members;       // m+1 node ids
  std::vector<int> member_index;  // roster indices of members
  std::vector<bool> anchor_mask;
  geometry::BarycentricWeights weights;
  double relative_error = 0.0;

  int anchor_count() const;
};

struct SelectionPolicy {
  enum class Kind { FirstPassing, MaxMinWeight };
  Kind kind = Kind::MaxMinWeight;
  int max_subsets = 200;
  double tol_rel = geometry::kDefaultTolRel;
  // Sets holding an anchor whose weight is below this floor are rejected.
  double anchor_floor = 0.0;
};

// Searches (m+1)-subsets of the agent's neighbors, in lexicographic order of
// roster index, for one that strictly contains the agent.
std::optional<TriangulationSet> find_triangulation_set(const Deployment& dep, std::size_t agent,
                                                       const DistanceProvider& dist,
                                                       const SelectionPolicy& policy = {});

// Uniform placement of agents and anchors in the region. Agents take ids
// 0..n_agents-1, anchors follow.
Deployment random_uniform(int dim, const Region& region, double comm_radius, int n_agents,
                          int n_anchors, Rng& rng);

// Agents uniform inside the simplex spanned by the anchors (m+1 of them);
// region is the anchors' bounding box.
Deployment random_in_simplex(std::span<const Point> anchors, int n_agents, double comm_radius,
                             Rng& rng);

}  // namespace baryloc::scene
