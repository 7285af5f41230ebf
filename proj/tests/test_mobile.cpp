#include <doctest.h>

#include "baryloc/mobile.hpp"
#include "support.hpp"

using namespace baryloc;
using namespace baryloc::mobile;
using testing::make_scene;
using testing::pt;

namespace {

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::InvalidInput;
}

scene::Deployment box_scene(std::uint64_t seed, int agents, int anchors, double r, double side = 20.0) {
  Rng rng(seed);
  scene::Region region{Eigen::VectorXd::Zero(2), Eigen::VectorXd::Constant(2, side)};
  return scene::random_uniform(2, region, r, agents, anchors, rng);
}

std::vector<double> dists_to(const Point& x, const std::vector<Point>& pts) {
  std::vector<double> d;
  for (const auto& p : pts) d.push_back((x - p).norm());
  return d;
}

geometry::Simplex simplex_of(const std::vector<Point>& pts) {
  return geometry::Simplex(static_cast<int>(pts.size()) - 1, {0, 1, 2},
                           geometry::SquaredDistanceMatrix::from_points(pts));
}

RowUpdate anchor_row(int row, double self, std::vector<std::pair<int, double>> anchors) {
  return RowUpdate{row, self, {}, std::move(anchors)};
}

}  // namespace

TEST_SUITE("mobile") {
  TEST_CASE("static motion leaves every node in place") {
    auto dep = box_scene(1, 5, 1, 2.0);
    const auto before = dep.nodes();
    Rng rng(1);
    const auto step = motion_step(dep, {MotionModel::Kind::Static}, rng);
    for (std::size_t i = 0; i < dep.size(); ++i) {
      CHECK(step.motion[i].isZero());
      CHECK(dep.at(i).true_pos == before[i].true_pos);
    }
  }

  TEST_CASE("random waypoint stays inside the box for 3000 steps") {
    auto dep = box_scene(2, 5, 1, 2.0);
    Rng rng(2);
    const MotionModel rwp{MotionModel::Kind::RandomWaypoint, 5.0, true};
    bool anchor_moved = false;
    for (int k = 0; k < 3000; ++k) {
      const auto old = dep.nodes();
      const auto step = motion_step(dep, rwp, rng);
      for (std::size_t i = 0; i < dep.size(); ++i) {
        CHECK(dep.region().contains(dep.at(i).true_pos));
        CHECK(step.length[i] <= 5.0);
        CHECK((dep.at(i).true_pos - old[i].true_pos - step.motion[i]).norm() < 1e-12);
        CHECK((step.motion[i] - step.length[i] * step.direction[i]).norm() < 1e-12);
      }
      anchor_moved |= !step.motion[5].isZero();
    }
    CHECK(anchor_moved);
  }

  TEST_CASE("fixed anchors when anchors_move is off") {
    auto dep = box_scene(3, 5, 2, 2.0);
    Rng rng(3);
    const MotionModel rwp{MotionModel::Kind::RandomWaypoint, 5.0, false};
    const auto a = dep.at(5).true_pos;
    for (int k = 0; k < 100; ++k) motion_step(dep, rwp, rng);
    CHECK(dep.at(5).true_pos == a);
    CHECK(dep.at(5).est_pos == a);
  }

  TEST_CASE("odometry noise variances grow with distance travelled") {
    Rng rng(4);
    CHECK(measured_motion(2.0, pt(0, 1), 100.0, {}, rng) == pt(0, 2));

    // sigma_d = 0.1 * sqrt(4) = 0.2 along a zero heading.
    const MotionNoise nd{0.1, 0.0, 0.0};
    const int draws = 100000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < draws; ++i) {
      const auto v = measured_motion(1.0, pt(1, 0), 4.0, nd, rng);
      CHECK(v(1) == 0.0);
      sum += v(0);
      sq += v(0) * v(0);
    }
    const double mean = sum / draws;
    CHECK(std::abs(mean - 1.0) <= 4 * 0.2 / std::sqrt(double(draws)));
    CHECK(std::sqrt(sq / draws - mean * mean) == doctest::Approx(0.2).epsilon(0.02));

    // Heading noise keeps the length and has sigma_theta = 0.05 * sqrt(9).
    const MotionNoise nt{0.0, 0.05, 0.0};
    double tsq = 0.0;
    for (int i = 0; i < draws; ++i) {
      const auto v = measured_motion(2.0, pt(1, 0), 9.0, nt, rng);
      CHECK(v.norm() == doctest::Approx(2.0).epsilon(1e-12));
      const double t = std::atan2(v(1), v(0));
      tsq += t * t;
    }
    CHECK(std::sqrt(tsq / draws) == doctest::Approx(0.15).epsilon(0.02));
  }

  TEST_CASE("parameter validation") {
    MobileParams p;
    CHECK_NOTHROW(p.validate());
    p.alpha_k = 0.005;
    CHECK(code_of([&] { p.validate(); }) == ErrorCode::InvalidInput);
    p = {};
    p.alpha_k = 1.0;
    CHECK_THROWS_AS(p.validate(), Error);
    p = {};
    p.beta = 0.0;
    p.alpha_k = 0.0;
    CHECK_THROWS_AS(p.validate(), Error);
    p = {};
    p.alpha_anchor = 0.0;
    CHECK_THROWS_AS(p.validate(), Error);
  }

  TEST_CASE("case (i): dead reckoning keeps the error") {
    auto dep = make_scene({pt(1, 1)}, {pt(-5, -5)}, 1.0);
    dep.set_est_pos(0, pt(3, 2));
    const Point motion = pt(0.5, -0.25);
    const Point next = opportunistic_update(dep, 0, std::nullopt, 1.0, motion, 0.01);
    const Point e_before = dep.at(0).true_pos - dep.at(0).est_pos;
    const Point e_after = (dep.at(0).true_pos + motion) - next;
    CHECK((e_after - e_before).norm() < 1e-15);
    CHECK(code_of([&] { opportunistic_update(dep, 0, std::nullopt, 0.5, motion, 0.01); }) ==
          ErrorCode::InvalidInput);
  }

  TEST_CASE("case (ii): three anchors scale the error by alpha_k") {
    auto dep = make_scene({pt(1, 1)}, {pt(0, 0), pt(4, 0), pt(0, 4)}, 10.0);
    const auto set = scene::find_triangulation_set(dep, 0, scene::true_distances(dep));
    REQUIRE(set);
    dep.set_est_pos(0, pt(-3, 7));
    const Point motion = pt(0.1, 0.2);
    const Point e_before = dep.at(0).true_pos - dep.at(0).est_pos;
    const Point next = opportunistic_update(dep, 0, set, 0.01, motion, 0.01);
    const Point e_after = dep.at(0).true_pos + motion - next;
    CHECK((e_after - 0.01 * e_before).norm() < 1e-12);

    // alpha_k = 1 ignores the set.
    CHECK((opportunistic_update(dep, 0, set, 1.0, motion, 0.01) - (dep.at(0).est_pos + motion)).norm() == 0.0);
    CHECK(code_of([&] { opportunistic_update(dep, 0, set, 0.001, motion, 0.01); }) == ErrorCode::InvalidInput);
  }

  TEST_CASE("time-varying matrices and row classes") {
    // Agent 0 inside agents 1-3; agent 4 inside the anchor triangle.
    const auto dep = make_scene({pt(0, 0), pt(-1, -1), pt(1, -1), pt(0, 1.5), pt(5, 5)},
                                {pt(4, 4), pt(7, 4.5), pt(4.5, 7)}, 2.2);
    const auto none = assemble_timevarying(dep, {});
    CHECK(none.dense_P().isIdentity());
    CHECK(none.dense_B().isZero());
    for (auto c : none.classes) CHECK(c == RowClass::Identity);

    const auto s0 = scene::find_triangulation_set(dep, 0, scene::true_distances(dep));
    const auto s4 = scene::find_triangulation_set(dep, 4, scene::true_distances(dep));
    REQUIRE(s0);
    REQUIRE(s4);
    REQUIRE(s0->anchor_count() == 0);
    REQUIRE(s4->anchor_count() == 3);

    const auto one = assemble_timevarying(dep, {{0, *s0, 0.01}});
    CHECK(one.classes[0] == RowClass::StochasticRow);
    CHECK(one.dense_P().row(0).sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(one.dense_B().row(0).isZero());
    CHECK(one.dense_P()(0, 0) == 0.01);

    const double alpha_anchor = 0.01, alpha_k = 0.2;
    const auto two = assemble_timevarying(dep, {{0, *s0, 0.01}, {4, *s4, alpha_k}});
    CHECK(two.classes[4] == RowClass::SubStochasticRow);
    const double row_sum = two.dense_P().row(4).sum();
    const double anchor_mass = two.dense_B().row(4).sum();
    CHECK(row_sum == doctest::Approx(1.0 - anchor_mass).epsilon(1e-12));
    CHECK(row_sum < 1.0);
    CHECK(row_sum <= 1.0 - alpha_anchor * (1.0 - alpha_k));
    for (std::size_t r : {1u, 2u, 3u}) CHECK(two.classes[r] == RowClass::Identity);

    // alpha_k = 1 is dead reckoning: identity row.
    CHECK(assemble_timevarying(dep, {{4, *s4, 1.0}}).dense_P().isIdentity());
  }

  TEST_CASE("error product monitor") {
    ErrorProductMonitor id(3);
    StepMatrices empty{3, 1, {}, {}};
    for (int k = 0; k < 50; ++k) id.apply(empty);
    CHECK(id.norm() == 1.0);
    CHECK(id.steps() == 50);

    // One agent per step against anchors only, cycling; compared with the
    // explicit dense product.
    const double beta = 0.01;
    ErrorProductMonitor mon(3);
    Eigen::MatrixXd oracle = Eigen::MatrixXd::Identity(3, 3);
    for (int cycle = 1; cycle <= 3; ++cycle) {
      for (int i = 0; i < 3; ++i) {
        StepMatrices s{3, 3, {anchor_row(i, beta, {{0, 0.3}, {1, 0.3}, {2, 0.39}})}, {}};
        mon.apply(s);
        oracle = s.dense_P() * oracle;
      }
      CHECK((mon.product() - oracle).cwiseAbs().maxCoeff() < 1e-15);
      CHECK(mon.norm() <= std::pow(beta, cycle) + 1e-15);
    }

    // Mixed agent terms against the dense oracle.
    ErrorProductMonitor mixed(2);
    Eigen::MatrixXd dense = Eigen::MatrixXd::Identity(2, 2);
    for (int k = 0; k < 20; ++k) {
      StepMatrices s{2, 1, {RowUpdate{k % 2, 0.1, {{1 - k % 2, 0.6}}, {{0, 0.3}}}}, {}};
      mixed.apply(s);
      dense = s.dense_P() * dense;
    }
    CHECK((mixed.product() - dense).cwiseAbs().maxCoeff() < 1e-15);
  }

  TEST_CASE("connectivity log follows anchor information across agents") {
    ConnectivityLog log(2);
    log.record(StepMatrices{2, 3, {anchor_row(0, 0.5, {{0, 0.5}})}, {}}, 1);
    log.record(StepMatrices{2, 3, {RowUpdate{1, 0.5, {{0, 0.5}}, {}}}, {}}, 2);
    // Stale information does not count as a new arrival.
    log.record(StepMatrices{2, 3, {RowUpdate{1, 0.5, {{0, 0.5}}, {}}}, {}}, 3);
    const auto s = log.stats(10);
    CHECK(s.arrivals == std::vector<long>{1, 1});
    CHECK(s.max_gap == std::vector<long>{9, 8});
    CHECK(s.worst_gap == 9);
    CHECK(s.mean_gap == doctest::Approx(1.5));

    ConnectivityLog never(1);
    CHECK(never.stats(100).worst_gap == 100);
  }

  TEST_CASE("feasibility examples") {
    const auto ok = feasibility_check(1, 5, 2, 0, 2);
    CHECK(ok.feasible);
    CHECK(ok.failed == 0);
    const auto none = feasibility_check(0, 5, 2, 0, 2);
    CHECK_FALSE(none.feasible);
    CHECK((none.failed & 1u));
    const auto still = feasibility_check(1, 5, 0, 0, 2);
    CHECK_FALSE(still.feasible);
    CHECK(still.failed == 4u);
    CHECK(still.reasons.size() == 1);
    CHECK_THROWS_AS(feasibility_check(1, 5, 3, 0, 2), Error);
    CHECK_THROWS_AS(feasibility_check(-1, 5, 0, 0, 2), Error);
  }

  TEST_CASE("feasibility grid") {
    for (int m = 1; m <= 3; ++m)
      for (int a = 0; a <= 4; ++a)
        for (int n = 0; n <= 6; ++n)
          for (int da = 0; da <= m; ++da)
            for (int db = 0; db <= m; ++db) {
              const bool c1 = a >= 1, c2 = a + n >= m + 2, c3 = a + da + db >= m + 1;
              const auto f = feasibility_check(a, n, da, db, m);
              CHECK(f.feasible == (c1 && c2 && c3));
              CHECK(f.failed == ((c1 ? 0u : 1u) | (c2 ? 0u : 2u) | (c3 ? 0u : 4u)));
            }
  }

  TEST_CASE("noisy update gates") {
    const std::vector<Point> tri = {pt(0, 0), pt(4, 0), pt(0, 4)};
    const auto s = simplex_of(tri);
    const auto exact = noisy_update_gates(s, dists_to(pt(1, 1), tri), 0.2);
    CHECK(exact.gate == Gate::Accept);
    CHECK(exact.relative_error < 1e-12);

    // One pairwise distance beyond the triangle inequality: sides 4, 4, 9.
    Eigen::MatrixXd d(3, 3);
    d << 0, 4, 4, 4, 0, 9, 4, 9, 0;
    const geometry::Simplex bad(2, {0, 1, 2}, geometry::SquaredDistanceMatrix::from_distances(d));
    CHECK(noisy_update_gates(bad, dists_to(pt(1, 1), tri), 0.2).gate == Gate::RejectM1);

    // Inflate the point's distances until the relative error is 0.3.
    const auto rel_at = [&](double f) {
      auto dd = dists_to(pt(1, 1), tri);
      for (auto& v : dd) v *= f;
      return std::pair{noisy_update_gates(s, dd, 0.2), dd};
    };
    double lo = 1.0, hi = 2.0;
    for (int it = 0; it < 100; ++it) {
      const double mid = 0.5 * (lo + hi);
      (rel_at(mid).first.relative_error < 0.3 ? lo : hi) = mid;
    }
    const auto [g, dd] = rel_at(hi);
    CHECK(g.relative_error == doctest::Approx(0.3).epsilon(1e-6));
    CHECK(g.gate == Gate::RejectM2);
    CHECK(noisy_update_gates(s, dd, 0.4).gate == Gate::Accept);
  }

  TEST_CASE("accepted noisy weights sum to one") {
    auto dep = box_scene(6, 30, 3, 6.0);
    Rng rng(6);
    std::normal_distribution<double> g(0.0, 0.05);
    const scene::DistanceProvider noisy = [&](std::size_t a, std::size_t b) {
      return dep.true_distance(a, b) + g(rng);
    };
    scene::SelectionPolicy p;
    p.tol_rel = 0.2;
    int accepted = 0;
    for (int a : dep.agent_indices()) {
      const auto set = scene::find_triangulation_set(dep, a, noisy, p);
      if (!set) continue;
      ++accepted;
      CHECK(std::abs(set->weights.values().sum() - 1.0) <= 1e-14);
    }
    CHECK(accepted > 0);
  }

  TEST_CASE("noiseless run keeps e_{k+1} = P_k e_k and the row classes") {
    const auto dep = box_scene(7, 10, 1, 6.0);
    Rng rng(700);
    const auto x0 = diloc::random_initial(10, Eigen::VectorXd::Zero(2), Eigen::VectorXd::Constant(2, 20), rng);
    MobileConfig cfg;
    cfg.steps = 400;
    cfg.params.check_invariants = true;
    const auto r = run_mobile(dep, x0, cfg, 11, 0);
    CHECK(r.max_identity_residual <= 1e-12 * std::max(1.0, r.error_norms.front()));
    CHECK(r.row_class_violations == 0);
    CHECK(r.updates_cum.back() > 0);
    CHECK(r.error_norms.back() < r.error_norms.front());
    CHECK(r.error_norms.size() == 401);
    CHECK(r.product_norm.size() == 400);
    long agent_steps = 0;
    for (long h : r.neighbor_histogram) agent_steps += h;
    CHECK(agent_steps == 10 * 400);
    long per_agent = 0;
    for (long u : r.updates_per_agent) per_agent += u;
    CHECK(per_agent == r.updates_cum.back());
    // Product norm never increases.
    for (std::size_t k = 1; k < r.product_norm.size(); ++k) CHECK(r.product_norm[k] <= r.product_norm[k - 1] + 1e-15);
  }

  TEST_CASE("sequential mode performs at most one update per step") {
    const auto dep = box_scene(8, 10, 1, 6.0);
    const Eigen::MatrixXd x0 = Eigen::MatrixXd::Constant(10, 2, 10.0);
    MobileConfig cfg;
    cfg.steps = 200;
    cfg.params.sequential = true;
    cfg.params.check_invariants = true;
    const auto r = run_mobile(dep, x0, cfg, 3, 0);
    for (std::size_t k = 1; k < r.updates_cum.size(); ++k) CHECK(r.updates_cum[k] - r.updates_cum[k - 1] <= 1);
    CHECK(r.row_class_violations == 0);
    CHECK(r.max_identity_residual <= 1e-12 * std::max(1.0, r.error_norms.front()));
  }

  TEST_CASE("runs are deterministic and streams are separated") {
    const auto dep = box_scene(9, 5, 1, 4.0);
    const Eigen::MatrixXd x0 = Eigen::MatrixXd::Constant(5, 2, 10.0);
    MobileConfig cfg;
    cfg.steps = 300;
    const auto a = run_mobile(dep, x0, cfg, 5, 1);
    CHECK(a.error_norms == run_mobile(dep, x0, cfg, 5, 1).error_norms);
    CHECK(a.error_norms != run_mobile(dep, x0, cfg, 5, 2).error_norms);

    // Odometry noise does not change the true trajectories, so the neighbor
    // statistics are identical.
    MobileConfig noisy = cfg;
    noisy.noise = {5e-3, 5e-3, 0.0};
    CHECK(run_mobile(dep, x0, noisy, 5, 1).neighbor_histogram == a.neighbor_histogram);
  }

  TEST_CASE("bad initial shape is rejected") {
    const auto dep = box_scene(10, 5, 1, 4.0);
    CHECK(code_of([&] { run_mobile(dep, Eigen::MatrixXd::Zero(4, 2), {}, 1, 0); }) == ErrorCode::InvalidInput);
  }
}
