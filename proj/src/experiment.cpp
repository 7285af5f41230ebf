#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <numbers>
#include <thread>

#include "baryloc/harness.hpp"

namespace baryloc::harness {

namespace {

json read_scene_file(const ExperimentConfig& cfg) {
  std::filesystem::path p = cfg.scene_file;
  if (p.is_relative()) p = cfg.base_dir / p;
  std::ifstream in(p);
  if (!in) throw Error(ErrorCode::IoError, "cannot read scene file " + p.string());
  return json::parse(in);
}

std::vector<long> static_histogram(const scene::Deployment& dep, long steps) {
  std::vector<long> h(std::max<std::size_t>(dep.size(), 1), 0);
  for (int a : dep.agent_indices()) h[scene::neighbor_indices(dep, a).size()] += steps;
  return h;
}

std::vector<long> linear_updates(long steps, std::size_t agents) {
  std::vector<long> u(static_cast<std::size_t>(steps) + 1);
  for (long k = 0; k <= steps; ++k) u[k] = k * static_cast<long>(agents);
  return u;
}

double error_norm(const std::vector<Eigen::VectorXd>& est, const Eigen::MatrixXd& truth) {
  double s = 0.0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    s += (est[i] - truth.row(static_cast<Eigen::Index>(i)).transpose()).squaredNorm();
  }
  return std::sqrt(s);
}

// Per-agent filters on a static scene. Each step every agent ranges all
// anchors; the KF consumes the trilateration fix as z = x + n, the PF the
// ranges themselves.
std::vector<double> run_filters(const ExperimentConfig& cfg, const scene::Deployment& dep,
                                const Eigen::MatrixXd& x0, const Eigen::VectorXd& lo,
                                const Eigen::VectorXd& hi, int replicate) {
  const int dim = dep.dim();
  const auto& agents = dep.agent_indices();
  const Eigen::MatrixXd anchors = diloc::anchor_positions(dep);
  const Eigen::MatrixXd truth = diloc::true_agent_positions(dep);
  std::vector<geometry::Point> anchor_pts;
  for (Eigen::Index a = 0; a < anchors.rows(); ++a) anchor_pts.push_back(anchors.row(a).transpose());

  robust::RangingNoise ranging{cfg.noise.range_bias, {cfg.noise.kind, cfg.noise.range_sigma}};
  Rng range_rng = make_stream(cfg.master_seed, replicate, Stream::Ranging);
  Rng filter_rng = make_stream(cfg.master_seed, replicate, Stream::Filter);
  const double sigma = cfg.noise.range_sigma;

  // ranges[i][k] holds agent i's ranges to every anchor at step k.
  std::vector<std::vector<Eigen::VectorXd>> ranges(agents.size());
  for (long k = 0; k < cfg.steps; ++k) {
    for (std::size_t i = 0; i < agents.size(); ++i) {
      Eigen::VectorXd r(anchors.rows());
      for (Eigen::Index a = 0; a < anchors.rows(); ++a) {
        r(a) = ranging.measure(dep.true_distance(agents[i], dep.anchor_indices()[a]), range_rng);
      }
      ranges[i].push_back(std::move(r));
    }
  }

  std::vector<std::vector<Eigen::VectorXd>> means(agents.size());
  for (std::size_t i = 0; i < agents.size(); ++i) {
    if (cfg.algorithm == AlgorithmKind::Kf) {
      baselines::LinearGaussianModel model;
      model.F = Eigen::MatrixXd::Identity(dim, dim);
      model.Q = Eigen::MatrixXd::Zero(dim, dim);
      model.H = Eigen::MatrixXd::Identity(dim, dim);
      model.R = sigma * sigma * Eigen::MatrixXd::Identity(dim, dim);
      model.prior.mean = x0.row(static_cast<Eigen::Index>(i)).transpose();
      model.prior.cov = ((hi - lo).array().square() / 12.0).matrix().asDiagonal();
      baselines::GaussianBelief b = model.prior;
      for (long k = 0; k < cfg.steps; ++k) {
        const auto& r = ranges[i][k];
        const geometry::Point z =
            geometry::multilaterate(anchor_pts, std::span<const double>(r.data(), r.size()));
        b = baselines::kf_update(baselines::kf_predict(b, model), z, model);
        means[i].push_back(b.mean);
      }
    } else {
      baselines::ParticleModel pm;
      pm.sample_prior = [&](Rng& rng) {
        Eigen::VectorXd x(dim);
        for (int c = 0; c < dim; ++c) x(c) = std::uniform_real_distribution<double>(lo(c), hi(c))(rng);
        return x;
      };
      pm.propagate = [](const Eigen::VectorXd& x, long, Rng&) { return x; };
      pm.log_likelihood = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& r, long) {
        double ll = 0.0;
        for (Eigen::Index a = 0; a < anchors.rows(); ++a) {
          const double d = (x - anchors.row(a).transpose()).norm();
          ll -= (r(a) - d) * (r(a) - d) / (2.0 * sigma * sigma);
        }
        return ll;
      };
      baselines::PfOptions opt{cfg.baseline.N_s, cfg.baseline.resample_threshold};
      means[i] = baselines::pf_run(pm, ranges[i], opt, filter_rng).means;
    }
  }

  std::vector<double> errors;
  std::vector<Eigen::VectorXd> est(agents.size());
  for (std::size_t i = 0; i < agents.size(); ++i) est[i] = x0.row(static_cast<Eigen::Index>(i)).transpose();
  errors.push_back(error_norm(est, truth));
  for (long k = 0; k < cfg.steps; ++k) {
    for (std::size_t i = 0; i < agents.size(); ++i) est[i] = means[i][k];
    errors.push_back(error_norm(est, truth));
  }
  return errors;
}

}  // namespace

Aggregate aggregate(const std::vector<double>& values) {
  Aggregate a;
  if (values.empty()) return a;
  double s = 0.0;
  for (double v : values) s += v;
  a.mean = s / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - a.mean) * (v - a.mean);
    a.stdev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return a;
}

Aggregate MetricsLog::final_error() const {
  std::vector<double> v;
  for (const auto& r : replicates) v.push_back(r.error_norms.back());
  return aggregate(v);
}

Aggregate MetricsLog::final_updates() const {
  std::vector<double> v;
  for (const auto& r : replicates) v.push_back(static_cast<double>(r.updates_cum.back()));
  return aggregate(v);
}

double MetricsLog::zero_neighbor_fraction() const {
  long zero = 0;
  long total = 0;
  for (const auto& r : replicates) {
    if (!r.histogram.empty()) zero += r.histogram[0];
    for (long c : r.histogram) total += c;
  }
  return total > 0 ? static_cast<double>(zero) / static_cast<double>(total) : 0.0;
}

scene::Deployment replicate_scene(const ExperimentConfig& cfg, int replicate) {
  if (cfg.scene) return parse_scene(*cfg.scene);
  if (!cfg.scene_file.empty()) return parse_scene(read_scene_file(cfg));
  const auto& g = *cfg.scene_gen;
  Rng rng = make_stream(cfg.master_seed, static_cast<std::uint64_t>(replicate), Stream::Scene);
  if (g.kind == SceneGen::Kind::Uniform) {
    scene::Region region{Eigen::VectorXd::Zero(g.dim), Eigen::VectorXd::Constant(g.dim, g.side)};
    return scene::random_uniform(g.dim, region, g.comm_radius, g.agents, g.anchors, rng);
  }
  std::vector<geometry::Point> anchors;
  if (!g.anchor_positions.empty()) {
    for (const auto& p : g.anchor_positions) anchors.push_back(Eigen::Map<const Eigen::VectorXd>(p.data(), g.dim));
  } else {
    anchors.push_back(Eigen::VectorXd::Zero(g.dim));
    for (int c = 0; c < g.dim; ++c) anchors.push_back(g.side * Eigen::VectorXd::Unit(g.dim, c));
  }
  return scene::random_in_simplex(anchors, g.agents, g.comm_radius, rng);
}

ReplicateLog run_replicate(const ExperimentConfig& cfg, int replicate) {
  const auto rep = static_cast<std::uint64_t>(replicate);
  const scene::Deployment dep = replicate_scene(cfg, replicate);
  const auto& agents = dep.agent_indices();
  const Eigen::Index n = static_cast<Eigen::Index>(agents.size());

  Eigen::VectorXd lo = dep.region().lo;
  Eigen::VectorXd hi = dep.region().hi;
  if (cfg.diloc.init_lo) {
    lo.setConstant(*cfg.diloc.init_lo);
    hi.setConstant(*cfg.diloc.init_hi);
  }
  Rng init_rng = make_stream(cfg.master_seed, rep, Stream::Initialization);
  const Eigen::MatrixXd x0 = diloc::random_initial(n, lo, hi, init_rng);

  scene::SelectionPolicy policy;
  policy.kind = cfg.diloc.selection;
  policy.max_subsets = cfg.diloc.max_subsets;

  ReplicateLog log;
  log.seed = derive_seed(cfg.master_seed, rep, Stream::Scene);
  switch (cfg.algorithm) {
    case AlgorithmKind::Diloc: {
      const auto sys = diloc::build_system(dep, policy);
      const diloc::StateVector s0{x0, diloc::anchor_positions(dep)};
      const auto run = diloc::diloc_run(s0, sys, diloc::StopRule{cfg.steps, -1.0},
                                        diloc::true_agent_positions(dep));
      log.error_norms = run.error_norms;
      log.updates_cum = linear_updates(cfg.steps, agents.size());
      log.histogram = static_histogram(dep, cfg.steps);
      break;
    }
    case AlgorithmKind::Dlre:
    case AlgorithmKind::Diland: {
      robust::NoisyRunOptions opt;
      opt.algorithm = cfg.algorithm == AlgorithmKind::Dlre ? robust::Algorithm::DLRE : robust::Algorithm::DILAND;
      opt.schedule = cfg.schedule;
      opt.steps = cfg.steps;
      opt.noise = cfg.noise;
      opt.policy = policy;
      log.error_norms = robust::run_noisy(dep, x0, opt, cfg.master_seed, rep).error_norms;
      log.updates_cum = linear_updates(cfg.steps, agents.size());
      log.histogram = static_histogram(dep, cfg.steps);
      break;
    }
    case AlgorithmKind::Mobile: {
      mobile::MobileConfig mc{cfg.motion, cfg.motion_noise, cfg.mobile, cfg.steps};
      auto res = mobile::run_mobile(dep, x0, mc, cfg.master_seed, rep);
      log.error_norms = std::move(res.error_norms);
      log.updates_cum = std::move(res.updates_cum);
      log.histogram = std::move(res.neighbor_histogram);
      log.worst_gap = res.connectivity.worst_gap;
      break;
    }
    case AlgorithmKind::Kf:
    case AlgorithmKind::Pf:
      log.error_norms = run_filters(cfg, dep, x0, lo, hi, replicate);
      log.updates_cum = linear_updates(cfg.steps, agents.size());
      log.histogram = static_histogram(dep, cfg.steps);
      break;
  }
  return log;
}

MetricsLog run_experiment(const ExperimentConfig& cfg_in) {
  // Re-parse so programmatically built configs get the same validation.
  ExperimentConfig cfg = parse_config(to_json(cfg_in));
  cfg.base_dir = cfg_in.base_dir;

  MetricsLog log;
  log.config = cfg;
  if (cfg.algorithm == AlgorithmKind::Mobile) {
    const auto dep = replicate_scene(cfg, 0);
    const bool moves = cfg.motion.kind == mobile::MotionModel::Kind::RandomWaypoint;
    const int dim = dep.dim();
    const auto f = mobile::feasibility_check(static_cast<int>(dep.anchor_indices().size()),
                                             static_cast<int>(dep.agent_indices().size()), moves ? dim : 0,
                                             moves && cfg.motion.anchors_move ? dim : 0, dim);
    for (const auto& r : f.reasons) log.warnings.push_back("infeasible: " + r);
  }

  const auto reps = static_cast<std::size_t>(cfg.replicates);
  log.replicates.resize(reps);
  std::vector<std::exception_ptr> errors(reps);
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t r = next++; r < reps; r = next++) {
      try {
        log.replicates[r] = run_replicate(cfg, static_cast<int>(r));
      } catch (...) {
        errors[r] = std::current_exception();
      }
    }
  };
  const std::size_t threads =
      std::min<std::size_t>(reps, std::max(1u, std::thread::hardware_concurrency()));
  std::vector<std::jthread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  pool.clear();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return log;
}

}  // namespace baryloc::harness
