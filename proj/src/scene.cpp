#include "baryloc/scene.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace baryloc::scene {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::InvalidInput, what);
}

// Advances idx to the next k-combination of {0..n-1}; false when exhausted.
bool next_combination(std::vector<int>& idx, int n) {
  const int k = static_cast<int>(idx.size());
  int i = k - 1;
  while (i >= 0 && idx[i] == n - k + i) --i;
  if (i < 0) return false;
  ++idx[i];
  for (int j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
  return true;
}

}  // namespace

bool Region::contains(const Point& p) const {
  return p.size() == lo.size() && (p.array() >= lo.array()).all() &&
         (p.array() <= hi.array()).all();
}

Deployment::Deployment(int dim, Region region, double comm_radius, std::vector<Node> nodes)
    : dim_(dim), region_(std::move(region)), comm_radius_(comm_radius), nodes_(std::move(nodes)) {
  require(dim >= 1 && dim <= geometry::kMaxDim, "dimension out of range");
  require(region_.lo.size() == dim && region_.hi.size() == dim,
          "region bounds must match the dimension");
  require((region_.lo.array() < region_.hi.array()).all(), "region must have positive extent");
  require(comm_radius_ > 0.0 && std::isfinite(comm_radius_),
          "communication radius must be positive");
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    Node& n = nodes_[i];
    require(n.true_pos.size() == dim, "node " + std::to_string(n.id) + " has wrong dimension");
    require(region_.contains(n.true_pos),
            "node " + std::to_string(n.id) + " lies outside the region");
    require(by_id_.emplace(n.id, i).second, "duplicate node id " + std::to_string(n.id));
    if (n.role == Role::Anchor) {
      n.est_pos = n.true_pos;
      anchors_.push_back(static_cast<int>(i));
    } else {
      if (n.est_pos.size() == 0) n.est_pos = Point::Zero(dim);
      require(n.est_pos.size() == dim, "estimate of node " + std::to_string(n.id) +
                                           " has wrong dimension");
      agents_.push_back(static_cast<int>(i));
    }
  }
}

std::size_t Deployment::index_of(int id) const {
  const auto it = by_id_.find(id);
  require(it != by_id_.end(), "unknown node id " + std::to_string(id));
  return it->second;
}

double Deployment::true_distance(std::size_t a, std::size_t b) const {
  return (nodes_.at(a).true_pos - nodes_.at(b).true_pos).norm();
}

void Deployment::set_true_pos(std::size_t index, Point p) {
  require(region_.contains(p), "position outside the region");
  Node& n = nodes_.at(index);
  n.true_pos = std::move(p);
  if (n.role == Role::Anchor) n.est_pos = n.true_pos;
}

void Deployment::set_est_pos(std::size_t index, Point p) {
  Node& n = nodes_.at(index);
  require(p.size() == dim_, "estimate has wrong dimension");
  if (n.role == Role::Anchor) return;
  n.est_pos = std::move(p);
}

DistanceProvider true_distances(const Deployment& dep) {
  return [&dep](std::size_t a, std::size_t b) { return dep.true_distance(a, b); };
}

std::vector<int> neighbor_indices(const Deployment& dep, std::size_t index) {
  require(index < dep.size(), "node index out of range");
  const double r2 = dep.comm_radius() * dep.comm_radius();
  const Point& p = dep.at(index).true_pos;
  std::vector<int> out;
  for (std::size_t j = 0; j < dep.size(); ++j) {
    if (j != index && (dep.at(j).true_pos - p).squaredNorm() <= r2) {
      out.push_back(static_cast<int>(j));
    }
  }
  return out;
}

std::vector<int> neighbors(const Deployment& dep, int id) {
  std::vector<int> out;
  for (int j : neighbor_indices(dep, dep.index_of(id))) out.push_back(dep.at(j).id);
  std::sort(out.begin(), out.end());
  return out;
}

int TriangulationSet::anchor_count() const {
  return static_cast<int>(std::count(anchor_mask.begin(), anchor_mask.end(), true));
}

std::optional<TriangulationSet> find_triangulation_set(const Deployment& dep, std::size_t agent,
                                                       const DistanceProvider& dist,
                                                       const SelectionPolicy& policy) {
  require(agent < dep.size() && dep.at(agent).role == Role::Agent,
          "triangulation sets are only searched for agents");
  const int m = dep.dim();
  const std::vector<int> nbrs = neighbor_indices(dep, agent);
  const int n = static_cast<int>(nbrs.size());
  if (n < m + 1) return std::nullopt;

  // Distances are measured once per query and reused across subsets.
  Eigen::MatrixXd d(n, n);
  std::vector<double> to_agent(n);
  for (int a = 0; a < n; ++a) {
    to_agent[a] = dist(agent, nbrs[a]);
    d(a, a) = 0.0;
    for (int b = a + 1; b < n; ++b) d(a, b) = d(b, a) = dist(nbrs[a], nbrs[b]);
  }

  std::optional<TriangulationSet> best;
  double best_score = -1.0;
  std::vector<int> combo(m + 1);
  std::iota(combo.begin(), combo.end(), 0);
  std::vector<double> i_dists(m + 1);
  std::vector<int> ids(m + 1);
  Eigen::MatrixXd sub(m + 1, m + 1);

  int evaluated = 0;
  do {
    if (evaluated++ >= policy.max_subsets) break;
    for (int a = 0; a <= m; ++a) {
      i_dists[a] = to_agent[combo[a]];
      for (int b = 0; b <= m; ++b) sub(a, b) = d(combo[a], combo[b]);
    }
    const geometry::Simplex simplex(m, std::vector<int>(combo.begin(), combo.end()),
                                    geometry::SquaredDistanceMatrix::from_distances(sub));
    const auto incl = geometry::inclusion_test(i_dists, simplex, policy.tol_rel);
    if (incl.verdict != geometry::Inclusion::Inside) continue;
    auto weights = geometry::weights_from(incl);

    TriangulationSet set;
    set.owner = dep.at(agent).id;
    set.relative_error = incl.relative_error;
    bool floor_ok = true;
    for (int a = 0; a <= m; ++a) {
      const int idx = nbrs[combo[a]];
      const bool is_anchor = dep.at(idx).role == Role::Anchor;
      if (is_anchor && weights[a] < policy.anchor_floor) floor_ok = false;
      set.member_index.push_back(idx);
      set.members.push_back(dep.at(idx).id);
      set.anchor_mask.push_back(is_anchor);
    }
    if (!floor_ok) continue;
    set.weights = std::move(weights);

    if (policy.kind == SelectionPolicy::Kind::FirstPassing) return set;

    const double score = set.weights.min();
    const bool better =
        !best || score > best_score + 1e-12 ||
        (std::abs(score - best_score) <= 1e-12 && set.anchor_count() > best->anchor_count());
    if (better) {
      best_score = score;
      best = std::move(set);
    }
  } while (next_combination(combo, n));
  return best;
}

Deployment random_uniform(int dim, const Region& region, double comm_radius, int n_agents,
                          int n_anchors, Rng& rng) {
  require(n_agents >= 0 && n_anchors >= 0, "node counts must be nonnegative");
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<Node> nodes;
  const auto draw = [&] {
    Point p(dim);
    for (int c = 0; c < dim; ++c) p(c) = region.lo(c) + u01(rng) * (region.hi(c) - region.lo(c));
    return p;
  };
  for (int i = 0; i < n_agents + n_anchors; ++i) {
    Node nd;
    nd.id = i;
    nd.role = i < n_agents ? Role::Agent : Role::Anchor;
    nd.true_pos = draw();
    nd.est_pos = nd.role == Role::Anchor ? nd.true_pos : Point::Zero(dim);
    nodes.push_back(std::move(nd));
  }
  return Deployment(dim, region, comm_radius, std::move(nodes));
}

Deployment random_in_simplex(std::span<const Point> anchors, int n_agents, double comm_radius,
                             Rng& rng) {
  require(!anchors.empty(), "no anchors given");
  const int dim = static_cast<int>(anchors[0].size());
  require(static_cast<int>(anchors.size()) == dim + 1, "need m+1 anchors");
  Region region{anchors[0], anchors[0]};
  for (const auto& a : anchors) {
    region.lo = region.lo.cwiseMin(a);
    region.hi = region.hi.cwiseMax(a);
  }
  std::exponential_distribution<double> expo(1.0);
  std::vector<Node> nodes;
  for (int i = 0; i < n_agents; ++i) {
    // Normalized exponentials are Dirichlet(1,...,1): uniform on the simplex.
    Eigen::VectorXd w(dim + 1);
    for (int j = 0; j <= dim; ++j) w(j) = expo(rng);
    w /= w.sum();
    Point p = Point::Zero(dim);
    for (int j = 0; j <= dim; ++j) p += w(j) * anchors[j];
    p = p.cwiseMax(region.lo).cwiseMin(region.hi);
    nodes.push_back(Node{i, Role::Agent, p, Point::Zero(dim)});
  }
  for (int j = 0; j <= dim; ++j) {
    nodes.push_back(Node{n_agents + j, Role::Anchor, anchors[j], anchors[j]});
  }
  return Deployment(dim, std::move(region), comm_radius, std::move(nodes));
}

}  // namespace baryloc::scene
