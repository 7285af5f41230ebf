#include "baryloc/robust.hpp"

#include <cmath>
#include <string>

namespace baryloc::robust {

namespace {

constexpr int kSetSearchDraws = 100;

void reject(const std::string& why) { throw Error(ErrorCode::ScheduleRejected, why); }

int roster_of(const diloc::SystemMatrices& sys, const diloc::MemberRef& ref) {
  return ref.anchor ? sys.anchor_index[ref.col] : sys.agent_index[ref.col];
}

void check_state(const diloc::StateVector& s, const diloc::SystemMatrices& sys,
                 std::size_t weight_rows) {
  if (s.x.rows() != sys.agents() || s.u.rows() != sys.anchors() || s.x.cols() != s.u.cols() ||
      weight_rows != sys.layout.size()) {
    throw Error(ErrorCode::InvalidInput, "state, system and weight dimensions disagree");
  }
}

// One noisy measurement per unordered pair per step, drawn on first use.
class StepDistances {
 public:
  StepDistances(const scene::Deployment& dep, const RangingNoise& noise, Rng& rng,
                ConsistentRangeEstimator* history)
      : dep_(dep), noise_(noise), rng_(rng), history_(history) {}

  void next_step() { cache_.clear(); }

  double operator()(std::size_t a, std::size_t b) {
    const std::uint64_t k = a < b ? (std::uint64_t(a) << 32) | b : (std::uint64_t(b) << 32) | a;
    const auto it = cache_.find(k);
    if (it != cache_.end()) return it->second;
    const double d = noise_.measure(dep_.true_distance(a, b), rng_);
    if (history_) history_->add(a, b, d);
    cache_.emplace(k, d);
    return d;
  }

 private:
  const scene::Deployment& dep_;
  const RangingNoise& noise_;
  Rng& rng_;
  ConsistentRangeEstimator* history_;
  std::unordered_map<std::uint64_t, double> cache_;
};

// Raw barycentric ratios of agent row i under the given distances. A set
// that turns degenerate under this sample contributes nothing this step.
template <class Dist>
Eigen::VectorXd set_ratios(const diloc::SystemMatrices& sys, std::size_t i, int dim,
                           Dist&& dist) {
  const auto& members = sys.layout[i].members;
  const auto n = static_cast<Eigen::Index>(members.size());
  const std::size_t self = sys.agent_index[i];
  Eigen::MatrixXd d(n, n);
  std::vector<double> to_agent(n);
  for (Eigen::Index a = 0; a < n; ++a) {
    const std::size_t ra = roster_of(sys, members[a]);
    to_agent[a] = dist(self, ra);
    d(a, a) = 0.0;
    for (Eigen::Index b = a + 1; b < n; ++b) {
      d(a, b) = d(b, a) = dist(ra, roster_of(sys, members[b]));
    }
  }
  std::vector<int> ids(n);
  for (Eigen::Index a = 0; a < n; ++a) ids[a] = static_cast<int>(a);
  try {
    const geometry::Simplex s(dim, ids, geometry::SquaredDistanceMatrix::from_distances(d));
    return geometry::raw_barycentric_ratios(to_agent, s);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::PreconditionViolated) throw;
    return Eigen::VectorXd::Zero(n);
  }
}

}  // namespace

double StepSchedule::alpha(long k) const {
  switch (kind) {
    case Kind::Harmonic: return a / (static_cast<double>(k) + k0);
    case Kind::PowerLaw: return a / std::pow(static_cast<double>(k) + 1.0, tau);
    case Kind::Constant: return c;
  }
  return 0.0;
}

void validate_schedule(const StepSchedule& s, Algorithm algo) {
  const bool dlre = algo == Algorithm::DLRE;
  switch (s.kind) {
    case StepSchedule::Kind::Harmonic:
      if (!(s.a > 0.0) || !(s.k0 > 0.0)) reject("harmonic schedule needs a > 0 and k0 > 0");
      return;
    case StepSchedule::Kind::PowerLaw:
      if (!(s.a > 0.0)) reject("power-law schedule needs a > 0");
      if (s.tau > 1.0) reject("power-law exponent above 1 makes sum(alpha) finite");
      if (!(s.tau > 0.0)) reject("power-law exponent must be positive");
      if (dlre && s.tau <= 0.5) reject("power-law exponent <= 1/2 makes sum(alpha^2) infinite");
      return;
    case StepSchedule::Kind::Constant:
      if (!(s.c > 0.0)) reject("constant step must be positive");
      if (dlre) reject("constant steps make sum(alpha^2) infinite");
      return;
  }
}

double CommNoise::sample(Rng& rng) const {
  if (sigma <= 0.0) return 0.0;
  if (kind == NoiseKind::Uniform) {
    const double h = std::sqrt(3.0) * sigma;
    return std::uniform_real_distribution<double>(-h, h)(rng);
  }
  return std::normal_distribution<double>(0.0, sigma)(rng);
}

double RangingNoise::measure(double true_distance, Rng& rng) const {
  return true_distance + bias + jitter.sample(rng);
}

LinkModel LinkModel::uniform(std::size_t nodes, double q) {
  return LinkModel(Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(nodes),
                                             static_cast<Eigen::Index>(nodes), q));
}

LinkModel::LinkModel(Eigen::MatrixXd q) : q_(std::move(q)) {
  if (q_.rows() != q_.cols()) throw Error(ErrorCode::InvalidInput, "link matrix must be square");
  if ((q_.array() < 0.0).any() || (q_.array() > 1.0).any()) {
    throw Error(ErrorCode::InvalidInput, "link probabilities must lie in [0,1]");
  }
}

double LinkModel::q(std::size_t i, std::size_t j) const {
  if (q_.size() == 0) return 1.0;
  return q_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
}

LinkRealization sample_links(const diloc::SystemMatrices& sys, const LinkModel& links,
                             const CommNoise& comm, int dim, Rng& link_rng, Rng& comm_rng) {
  LinkRealization r;
  r.active.resize(sys.layout.size());
  r.noise.resize(sys.layout.size());
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (std::size_t i = 0; i < sys.layout.size(); ++i) {
    for (const auto& ref : sys.layout[i].members) {
      const double q = links.q(sys.agent_index[i], roster_of(sys, ref));
      r.active[i].push_back(q >= 1.0 || u01(link_rng) < q ? 1 : 0);
      Eigen::RowVectorXd v(dim);
      for (int c = 0; c < dim; ++c) v(c) = comm.sample(comm_rng);
      r.noise[i].push_back(std::move(v));
    }
  }
  return r;
}

std::uint64_t ConsistentRangeEstimator::key(std::size_t a, std::size_t b) {
  if (a > b) std::swap(a, b);
  return (std::uint64_t(a) << 32) | std::uint64_t(b);
}

void ConsistentRangeEstimator::add(std::size_t a, std::size_t b, double measurement) {
  Entry& e = entries_[key(a, b)];
  ++e.count;
  e.mean += (measurement - e.mean) / static_cast<double>(e.count);
}

double ConsistentRangeEstimator::mean(std::size_t a, std::size_t b) const {
  const auto it = entries_.find(key(a, b));
  if (it == entries_.end()) throw Error(ErrorCode::InvalidInput, "no measurements for this link");
  return it->second.mean;
}

long ConsistentRangeEstimator::count(std::size_t a, std::size_t b) const {
  const auto it = entries_.find(key(a, b));
  return it == entries_.end() ? 0 : it->second.count;
}

diloc::StateVector dlre_step(const diloc::StateVector& s, const diloc::SystemMatrices& sys,
                             const std::vector<Eigen::VectorXd>& weights_hat,
                             const LinkRealization& links, const LinkModel& q, double alpha) {
  check_state(s, sys, weights_hat.size());
  diloc::StateVector next{s.x, s.u};
  for (std::size_t i = 0; i < sys.layout.size(); ++i) {
    const auto& members = sys.layout[i].members;
    if (weights_hat[i].size() != static_cast<Eigen::Index>(members.size())) {
      throw Error(ErrorCode::InvalidInput, "weight vector does not match the set size");
    }
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(s.x.cols());
    for (std::size_t j = 0; j < members.size(); ++j) {
      const auto& ref = members[j];
      const double w = weights_hat[i](static_cast<Eigen::Index>(j));
      const double qij = q.q(sys.agent_index[i], roster_of(sys, ref));
      if (w != 0.0 && qij <= 0.0) {
        throw Error(ErrorCode::InvalidInput, "weighted link has zero activation probability");
      }
      if (!links.active.empty() && !links.active[i][j]) continue;
      Eigen::RowVectorXd y = ref.anchor ? s.u.row(ref.col) : s.x.row(ref.col);
      if (!links.noise.empty()) y += links.noise[i][j];
      acc += (w / qij) * y;
    }
    const auto row = static_cast<Eigen::Index>(i);
    next.x.row(row) = (1.0 - alpha) * s.x.row(row) + alpha * acc;
  }
  return next;
}

diloc::StateVector diland_step(const diloc::StateVector& s, const diloc::SystemMatrices& sys,
                               const std::vector<Eigen::VectorXd>& weights_bar, double alpha) {
  check_state(s, sys, weights_bar.size());
  diloc::StateVector next{s.x, s.u};
  for (std::size_t i = 0; i < sys.layout.size(); ++i) {
    const auto& members = sys.layout[i].members;
    if (weights_bar[i].size() != static_cast<Eigen::Index>(members.size())) {
      throw Error(ErrorCode::InvalidInput, "weight vector does not match the set size");
    }
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(s.x.cols());
    for (std::size_t j = 0; j < members.size(); ++j) {
      const auto& ref = members[j];
      acc += weights_bar[i](static_cast<Eigen::Index>(j)) *
             (ref.anchor ? s.u.row(ref.col) : s.x.row(ref.col));
    }
    const auto row = static_cast<Eigen::Index>(i);
    next.x.row(row) = (1.0 - alpha) * s.x.row(row) + alpha * acc;
  }
  return next;
}

Eigen::MatrixXd bias_of_limit(const Eigen::MatrixXd& P, const Eigen::MatrixXd& S_P,
                              const Eigen::MatrixXd& B, const Eigen::MatrixXd& S_B,
                              const Eigen::MatrixXd& u) {
  const Eigen::Index n = P.rows();
  if (P.cols() != n || S_P.rows() != n || S_P.cols() != n || B.rows() != n ||
      S_B.rows() != n || S_B.cols() != B.cols() || u.rows() != B.cols()) {
    throw Error(ErrorCode::InvalidInput, "bias formula dimensions disagree");
  }
  const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n) - P - S_P;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  if (!lu.isInvertible()) {
    throw Error(ErrorCode::NotAbsorbing, "I - P - S_P is singular");
  }
  return lu.solve((B + S_B) * u);
}

std::vector<Eigen::VectorXd> layout_weights(const diloc::SystemMatrices& sys) {
  std::vector<Eigen::VectorXd> w(sys.layout.size());
  for (std::size_t i = 0; i < sys.layout.size(); ++i) {
    const auto& members = sys.layout[i].members;
    w[i].resize(static_cast<Eigen::Index>(members.size()));
    for (std::size_t j = 0; j < members.size(); ++j) {
      const auto& ref = members[j];
      const auto row = static_cast<Eigen::Index>(i);
      w[i](static_cast<Eigen::Index>(j)) = ref.anchor ? sys.B(row, ref.col) : sys.P(row, ref.col);
    }
  }
  return w;
}

NoisyRunResult run_noisy(const scene::Deployment& dep, const Eigen::MatrixXd& x0,
                         const NoisyRunOptions& opt, std::uint64_t master_seed,
                         std::uint64_t replicate) {
  validate_schedule(opt.schedule, opt.algorithm);
  if (opt.steps < 0) throw Error(ErrorCode::InvalidInput, "step count must be nonnegative");
  const bool diland = opt.algorithm == Algorithm::DILAND;

  Rng ranging = make_stream(master_seed, replicate, Stream::Ranging);
  Rng link_rng = make_stream(master_seed, replicate, Stream::LinkSampling);
  Rng comm_rng = make_stream(master_seed, replicate, Stream::CommNoise);

  const RangingNoise range_noise{opt.noise.range_bias, {opt.noise.kind, opt.noise.range_sigma}};
  const CommNoise comm{opt.noise.kind, opt.noise.comm_sigma};
  ConsistentRangeEstimator history;
  StepDistances measured(dep, range_noise, ranging, diland ? &history : nullptr);

  // Sets come from noisy samples and then stay fixed. An agent close to a
  // facet of every candidate simplex can fail on a single sample, so it
  // retries on fresh samples; step 0 runs on the last one drawn.
  scene::SelectionPolicy policy = opt.policy;
  policy.tol_rel = std::max(policy.tol_rel, opt.set_tol);
  const auto& agents = dep.agent_indices();
  std::vector<std::optional<scene::TriangulationSet>> sets(agents.size());
  const scene::DistanceProvider provider = [&](std::size_t a, std::size_t b) {
    return measured(a, b);
  };
  for (int draw = 0; draw < kSetSearchDraws; ++draw) {
    if (draw > 0) measured.next_step();
    bool complete = true;
    for (std::size_t i = 0; i < agents.size(); ++i) {
      if (!sets[i]) sets[i] = scene::find_triangulation_set(dep, agents[i], provider, policy);
      complete = complete && sets[i].has_value();
    }
    if (complete) break;
  }

  NoisyRunResult r;
  r.frozen = diloc::assemble_system(dep, sets);
  // Report the frozen sets with their noise-free weights.
  const auto truth_dist = [&](std::size_t a, std::size_t b) { return dep.true_distance(a, b); };
  for (std::size_t i = 0; i < r.frozen.layout.size(); ++i) {
    const Eigen::VectorXd w = set_ratios(r.frozen, i, dep.dim(), truth_dist);
    for (std::size_t j = 0; j < r.frozen.layout[i].members.size(); ++j) {
      const auto& ref = r.frozen.layout[i].members[j];
      (ref.anchor ? r.frozen.B : r.frozen.P)(static_cast<Eigen::Index>(i), ref.col) =
          w(static_cast<Eigen::Index>(j));
    }
  }

  const Eigen::MatrixXd truth = diloc::true_agent_positions(dep);
  const LinkModel links = LinkModel::uniform(dep.size(), opt.noise.link_q);
  diloc::StateVector s{x0, diloc::anchor_positions(dep)};
  r.error_norms.push_back((s.x - truth).norm());

  std::vector<Eigen::VectorXd> weights(r.frozen.layout.size());
  const auto mean_dist = [&](std::size_t a, std::size_t b) { return history.mean(a, b); };
  for (long k = 0; k < opt.steps; ++k) {
    // Step 0 reuses the last sample of the set search.
    if (k > 0) measured.next_step();
    const double alpha = opt.schedule.alpha(k);
    for (std::size_t i = 0; i < weights.size(); ++i) {
      weights[i] = set_ratios(r.frozen, i, dep.dim(), measured);
      if (diland) weights[i] = set_ratios(r.frozen, i, dep.dim(), mean_dist);
    }
    if (diland) {
      s = diland_step(s, r.frozen, weights, alpha);
    } else {
      const LinkRealization lr = sample_links(r.frozen, links, comm, dep.dim(), link_rng, comm_rng);
      s = dlre_step(s, r.frozen, weights, lr, links, alpha);
    }
    r.error_norms.push_back((s.x - truth).norm());
  }
  r.final_x = s.x;
  return r;
}

}  // namespace baryloc::robust
