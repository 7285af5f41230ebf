#include "baryloc/mobile.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_map>

namespace baryloc::mobile {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::InvalidInput, what);
}

Point random_direction(int dim, Rng& rng) {
  if (dim == 2) {
    const double theta = std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi)(rng);
    return Point{{std::cos(theta), std::sin(theta)}};
  }
  std::normal_distribution<double> g(0.0, 1.0);
  Point v(dim);
  do {
    for (int c = 0; c < dim; ++c) v(c) = g(rng);
  } while (v.norm() == 0.0);
  return v / v.norm();
}

// Ranging with time-growing jitter, one sample per pair per step.
class RangeTable {
 public:
  RangeTable(const scene::Deployment& dep, double sigma, Rng& rng)
      : dep_(dep), sigma_(sigma), rng_(rng) {}

  double operator()(std::size_t a, std::size_t b) {
    const double d = dep_.true_distance(a, b);
    if (sigma_ <= 0.0) return d;
    const std::uint64_t k = a < b ? (std::uint64_t(a) << 32) | b : (std::uint64_t(b) << 32) | a;
    const auto it = cache_.find(k);
    if (it != cache_.end()) return it->second;
    const double v = d + std::normal_distribution<double>(0.0, sigma_)(rng_);
    cache_.emplace(k, v);
    return v;
  }

 private:
  const scene::Deployment& dep_;
  double sigma_;
  Rng& rng_;
  std::unordered_map<std::uint64_t, double> cache_;
};

}  // namespace

MotionStep motion_step(scene::Deployment& dep, const MotionModel& model, Rng& rng) {
  const int dim = dep.dim();
  MotionStep out;
  out.motion.assign(dep.size(), Point::Zero(dim));
  out.length.assign(dep.size(), 0.0);
  out.direction.assign(dep.size(), Point::Zero(dim));
  if (model.kind == MotionModel::Kind::Static) return out;

  std::uniform_real_distribution<double> length(0.0, model.d_max);
  for (std::size_t i = 0; i < dep.size(); ++i) {
    const auto& node = dep.at(i);
    if (node.role == scene::Role::Anchor && !model.anchors_move) continue;
    // Resample until the destination is inside; d = 0 always fits.
    for (int attempt = 0;; ++attempt) {
      const double d = attempt < 10000 ? length(rng) : 0.0;
      const Point dir = random_direction(dim, rng);
      const Point step = d * dir;
      const Point dest = node.true_pos + step;
      if (dep.region().contains(dest)) {
        out.motion[i] = step;
        out.length[i] = d;
        out.direction[i] = dir;
        dep.set_true_pos(i, dest);
        break;
      }
    }
  }
  return out;
}

Point measured_motion(double d, const Point& direction, double travelled, const MotionNoise& noise,
                      Rng& rng) {
  if (!noise.motion_noisy()) return d * direction;
  const double sd_d = noise.K_d * std::sqrt(travelled);
  const double sd_theta = noise.K_theta * std::sqrt(travelled);
  const double d_hat = d + (sd_d > 0.0 ? std::normal_distribution<double>(0.0, sd_d)(rng) : 0.0);
  if (direction.size() == 2) {
    const double theta = std::atan2(direction(1), direction(0));
    const double t_hat =
        theta + (sd_theta > 0.0 ? std::normal_distribution<double>(0.0, sd_theta)(rng) : 0.0);
    return d_hat * Point{{std::cos(t_hat), std::sin(t_hat)}};
  }
  // Outside the plane the heading error perturbs each component of the
  // unit direction.
  Point dir = direction;
  if (sd_theta > 0.0 && dir.size() > 1) {
    std::normal_distribution<double> g(0.0, sd_theta);
    for (Eigen::Index c = 0; c < dir.size(); ++c) dir(c) += g(rng);
    if (dir.norm() > 0.0) dir /= dir.norm();
  }
  return d_hat * dir;
}

void MobileParams::validate() const {
  require(beta > 0.0 && beta < 1.0, "beta must lie in (0,1)");
  require(alpha_k >= beta && alpha_k < 1.0, "alpha_k must lie in [beta, 1)");
  require(alpha_anchor > 0.0 && alpha_anchor < 1.0, "alpha_anchor must lie in (0,1)");
  require(epsilon > 0.0, "epsilon must be positive");
  require(max_subsets >= 1, "max_subsets must be at least 1");
}

Point opportunistic_update(const scene::Deployment& dep, std::size_t agent,
                           const std::optional<scene::TriangulationSet>& set, double alpha_k,
                           const Point& motion, double beta) {
  const Point& x = dep.at(agent).est_pos;
  require(motion.size() == x.size(), "motion has the wrong dimension");
  if (!set) {
    require(alpha_k == 1.0, "without a triangulation set alpha_k must be 1");
    return x + motion;
  }
  require(alpha_k >= beta && alpha_k <= 1.0, "with a triangulation set alpha_k must lie in [beta, 1]");
  Point combo = Point::Zero(x.size());
  for (std::size_t j = 0; j < set->member_index.size(); ++j) {
    combo += set->weights[static_cast<Eigen::Index>(j)] * dep.at(set->member_index[j]).est_pos;
  }
  return alpha_k * x + (1.0 - alpha_k) * combo + motion;
}

Eigen::MatrixXd StepMatrices::dense_P() const {
  Eigen::MatrixXd p = Eigen::MatrixXd::Identity(agents, agents);
  for (const auto& r : rows) {
    p.row(r.row).setZero();
    p(r.row, r.row) = r.self_weight;
    for (const auto& [c, w] : r.agent_terms) p(r.row, c) += w;
  }
  return p;
}

Eigen::MatrixXd StepMatrices::dense_B() const {
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(agents, anchors);
  for (const auto& r : rows) {
    for (const auto& [c, w] : r.anchor_terms) b(r.row, c) += w;
  }
  return b;
}

StepMatrices assemble_timevarying(const scene::Deployment& dep,
                                  const std::vector<PlannedUpdate>& updates) {
  const auto& agents = dep.agent_indices();
  const auto& anchors = dep.anchor_indices();
  std::vector<int> row_of(dep.size(), -1);
  std::vector<int> col_of(dep.size(), -1);
  for (std::size_t r = 0; r < agents.size(); ++r) row_of[agents[r]] = static_cast<int>(r);
  for (std::size_t c = 0; c < anchors.size(); ++c) col_of[anchors[c]] = static_cast<int>(c);

  StepMatrices s;
  s.agents = static_cast<Eigen::Index>(agents.size());
  s.anchors = static_cast<Eigen::Index>(anchors.size());
  s.classes.assign(agents.size(), RowClass::Identity);
  for (const auto& u : updates) {
    require(u.agent_row < agents.size(), "update row out of range");
    if (u.alpha_k >= 1.0) continue;  // degenerates to dead reckoning
    RowUpdate r;
    r.row = static_cast<int>(u.agent_row);
    r.self_weight = u.alpha_k;
    for (std::size_t j = 0; j < u.set.member_index.size(); ++j) {
      const int idx = u.set.member_index[j];
      const double w = (1.0 - u.alpha_k) * u.set.weights[static_cast<Eigen::Index>(j)];
      if (col_of[idx] >= 0) {
        r.anchor_terms.emplace_back(col_of[idx], w);
      } else {
        r.agent_terms.emplace_back(row_of[idx], w);
      }
    }
    s.classes[u.agent_row] =
        r.anchor_terms.empty() ? RowClass::StochasticRow : RowClass::SubStochasticRow;
    s.rows.push_back(std::move(r));
  }
  return s;
}

ErrorProductMonitor::ErrorProductMonitor(Eigen::Index agents)
    : product_(Eigen::MatrixXd::Identity(agents, agents)) {}

void ErrorProductMonitor::apply(const StepMatrices& step) {
  // New rows are built from the old product before any is written back.
  std::vector<Eigen::RowVectorXd> rows;
  rows.reserve(step.rows.size());
  for (const auto& r : step.rows) {
    Eigen::RowVectorXd row = r.self_weight * product_.row(r.row);
    for (const auto& [c, w] : r.agent_terms) row += w * product_.row(c);
    rows.push_back(std::move(row));
  }
  for (std::size_t i = 0; i < rows.size(); ++i) product_.row(step.rows[i].row) = rows[i];
  ++steps_;
}

double ErrorProductMonitor::norm() const {
  if (product_.size() == 0) return 0.0;
  return product_.cwiseAbs().rowwise().sum().maxCoeff();
}

ConnectivityLog::ConnectivityLog(std::size_t agents)
    : info_time_(agents, -1), arrivals_(agents) {}

void ConnectivityLog::record(const StepMatrices& step, long k) {
  std::vector<std::pair<int, long>> fresh;
  for (const auto& r : step.rows) {
    long t = -1;
    if (!r.anchor_terms.empty()) {
      t = k;
    } else {
      for (const auto& [c, w] : r.agent_terms) t = std::max(t, info_time_[c]);
    }
    if (t > info_time_[r.row]) fresh.emplace_back(r.row, t);
  }
  for (const auto& [row, t] : fresh) {
    info_time_[row] = t;
    arrivals_[row].push_back(k);
  }
}

ConnectivityLog::Stats ConnectivityLog::stats(long run_length) const {
  Stats s;
  double gap_sum = 0.0;
  long gap_count = 0;
  for (const auto& a : arrivals_) {
    s.arrivals.push_back(static_cast<long>(a.size()));
    long prev = 0;
    long worst = 0;
    for (long t : a) {
      worst = std::max(worst, t - prev);
      gap_sum += static_cast<double>(t - prev);
      ++gap_count;
      prev = t;
    }
    worst = std::max(worst, run_length - prev);
    s.max_gap.push_back(worst);
    s.worst_gap = std::max(s.worst_gap, worst);
  }
  s.mean_gap = gap_count > 0 ? gap_sum / static_cast<double>(gap_count) : 0.0;
  return s;
}

Feasibility feasibility_check(int num_anchors, int num_agents, int agent_motion_dim,
                              int anchor_motion_dim, int m) {
  require(num_anchors >= 0 && num_agents >= 0 && agent_motion_dim >= 0 && anchor_motion_dim >= 0,
          "counts and dimensions must be nonnegative");
  require(m >= 1, "ambient dimension must be at least 1");
  require(agent_motion_dim <= m && anchor_motion_dim <= m, "motion dimensions cannot exceed m");
  Feasibility f;
  if (num_anchors < 1) {
    f.failed |= 1u;
    f.reasons.push_back("at least one anchor is required");
  }
  if (num_anchors + num_agents < m + 2) {
    f.failed |= 2u;
    f.reasons.push_back("anchors + agents must be at least m + 2 = " + std::to_string(m + 2));
  }
  if (num_anchors + agent_motion_dim + anchor_motion_dim < m + 1) {
    f.failed |= 4u;
    f.reasons.push_back("anchors + agent motion dim + anchor motion dim must be at least m + 1 = " +
                        std::to_string(m + 1));
  }
  f.feasible = f.failed == 0;
  return f;
}

GateResult noisy_update_gates(const geometry::Simplex& candidate, std::span<const double> i_dists,
                              double epsilon) {
  const auto incl = geometry::inclusion_test(i_dists, candidate, 0.0);
  GateResult g;
  if (incl.negative_volume || incl.total_volume <= 0.0) return g;  // RejectM1
  g.relative_error = incl.relative_error;
  const bool interior =
      incl.component_volumes.minCoeff() > geometry::kInteriorBand * incl.total_volume;
  g.gate = (interior && incl.relative_error < epsilon) ? Gate::Accept : Gate::RejectM2;
  return g;
}

MobileRunResult run_mobile(scene::Deployment dep, const Eigen::MatrixXd& x0,
                           const MobileConfig& cfg, std::uint64_t master_seed,
                           std::uint64_t replicate) {
  cfg.params.validate();
  require(cfg.steps >= 0, "step count must be nonnegative");
  const auto& agents = dep.agent_indices();
  const auto& anchors = dep.anchor_indices();
  const auto n = static_cast<Eigen::Index>(agents.size());
  const int dim = dep.dim();
  require(x0.rows() == n && x0.cols() == dim, "initial estimates have the wrong shape");
  for (Eigen::Index r = 0; r < n; ++r) dep.set_est_pos(agents[r], x0.row(r).transpose());

  Rng motion_rng = make_stream(master_seed, replicate, Stream::Motion);
  Rng odometry_rng = make_stream(master_seed, replicate, Stream::MotionNoise);
  Rng ranging_rng = make_stream(master_seed, replicate, Stream::Ranging);
  Rng schedule_rng = make_stream(master_seed, replicate, Stream::Scheduling);

  scene::SelectionPolicy policy;
  policy.kind = cfg.params.selection;
  policy.max_subsets = cfg.params.max_subsets;
  policy.tol_rel = cfg.params.modifications ? cfg.params.epsilon : geometry::kDefaultTolRel;
  policy.anchor_floor = cfg.params.alpha_anchor;

  MobileRunResult out;
  out.updates_per_agent.assign(agents.size(), 0);
  out.neighbor_histogram.assign(std::max<std::size_t>(dep.size(), 1), 0);
  ErrorProductMonitor monitor(n);
  ConnectivityLog log(agents.size());
  std::vector<double> travelled(dep.size(), 0.0);

  const auto error_matrix = [&] {
    Eigen::MatrixXd e(n, dim);
    for (Eigen::Index r = 0; r < n; ++r) {
      e.row(r) = (dep.at(agents[r]).true_pos - dep.at(agents[r]).est_pos).transpose();
    }
    return e;
  };
  out.error_norms.push_back(error_matrix().norm());
  out.updates_cum.push_back(0);

  for (long k = 0; k < cfg.steps; ++k) {
    RangeTable ranges(dep, cfg.noise.K_r * std::sqrt(static_cast<double>(k)), ranging_rng);
    const scene::DistanceProvider dist = [&](std::size_t a, std::size_t b) { return ranges(a, b); };

    std::vector<PlannedUpdate> planned;
    for (std::size_t r = 0; r < agents.size(); ++r) {
      const auto nb = scene::neighbor_indices(dep, agents[r]).size();
      ++out.neighbor_histogram[nb];
      if (nb < static_cast<std::size_t>(dim) + 1) continue;
      auto set = scene::find_triangulation_set(dep, agents[r], dist, policy);
      if (set) planned.push_back({r, std::move(*set), cfg.params.alpha_k});
    }
    if (cfg.params.sequential && planned.size() > 1) {
      std::uniform_int_distribution<std::size_t> pick(0, planned.size() - 1);
      PlannedUpdate only = std::move(planned[pick(schedule_rng)]);
      planned.clear();
      planned.push_back(std::move(only));
    }

    const StepMatrices step = assemble_timevarying(dep, planned);
    const Eigen::MatrixXd e_before = cfg.params.check_invariants ? error_matrix() : Eigen::MatrixXd();

    // Jacobi update: every agent reads the estimates of step k.
    std::vector<Point> combined(agents.size());
    for (std::size_t r = 0; r < agents.size(); ++r) combined[r] = dep.at(agents[r]).est_pos;
    for (const auto& u : planned) {
      combined[u.agent_row] =
          opportunistic_update(dep, agents[u.agent_row], u.set, u.alpha_k, Point::Zero(dim),
                               cfg.params.beta);
      ++out.updates_per_agent[u.agent_row];
    }

    const MotionStep moved = motion_step(dep, cfg.motion, motion_rng);
    for (std::size_t r = 0; r < agents.size(); ++r) {
      const int idx = agents[r];
      travelled[idx] += moved.length[idx];
      const Point odo = measured_motion(moved.length[idx], moved.direction[idx], travelled[idx],
                                        cfg.noise, odometry_rng);
      dep.set_est_pos(idx, combined[r] + odo);
    }

    if (cfg.params.check_invariants) {
      const Eigen::MatrixXd predicted = step.dense_P() * e_before;
      out.max_identity_residual =
          std::max(out.max_identity_residual, (error_matrix() - predicted).cwiseAbs().maxCoeff());
      for (const auto& row : step.rows) {
        double agent_mass = row.self_weight;
        double anchor_mass = 0.0;
        for (const auto& t : row.agent_terms) agent_mass += t.second;
        for (const auto& t : row.anchor_terms) anchor_mass += t.second;
        const double floor = cfg.params.alpha_anchor * (1.0 - row.self_weight);
        const bool ok = row.self_weight >= cfg.params.beta &&
                        std::abs(agent_mass + anchor_mass - 1.0) <= 1e-9 &&
                        (row.anchor_terms.empty() ? std::abs(agent_mass - 1.0) <= 1e-9
                                                  : agent_mass <= 1.0 - floor + 1e-12);
        if (!ok) ++out.row_class_violations;
      }
    }

    monitor.apply(step);
    log.record(step, k + 1);
    out.product_norm.push_back(monitor.norm());
    out.updates_cum.push_back(out.updates_cum.back() + static_cast<long>(planned.size()));
    out.error_norms.push_back(error_matrix().norm());
  }
  (void)anchors;
  out.connectivity = log.stats(cfg.steps);
  return out;
}

}  // namespace baryloc::mobile
