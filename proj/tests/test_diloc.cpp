#include <doctest.h>

#include "baryloc/diloc.hpp"
#include "support.hpp"

using namespace baryloc;
using namespace baryloc::diloc;
using testing::make_scene;
using testing::pt;

namespace {

scene::Deployment triangle_scene(std::uint64_t seed, int agents = 10) {
  Rng rng(seed);
  const std::vector<geometry::Point> anchors = {pt(0, 0), pt(10, 0), pt(0, 10)};
  return scene::random_in_simplex(anchors, agents, 100.0, rng);
}

// Barycentric weights of p in triangle (a, b, c) by the affine solve.
Eigen::Vector3d affine_weights(const geometry::Point& p, const geometry::Point& a, const geometry::Point& b,
                               const geometry::Point& c) {
  Eigen::Matrix3d m;
  m << a(0), b(0), c(0), a(1), b(1), c(1), 1, 1, 1;
  return m.fullPivLu().solve(Eigen::Vector3d(p(0), p(1), 1.0));
}

}  // namespace

TEST_SUITE("diloc") {
  TEST_CASE("single agent with three anchors") {
    const auto dep = make_scene({pt(1, 1)}, {pt(0, 0), pt(4, 0), pt(0, 4)}, 10.0);
    const auto sys = build_system(dep);
    CHECK(sys.P(0, 0) == 0.0);
    const auto w = affine_weights(pt(1, 1), pt(0, 0), pt(4, 0), pt(0, 4));
    for (int a = 0; a < 3; ++a) CHECK(sys.B(0, a) == doctest::Approx(w(a)).epsilon(1e-12));
  }

  TEST_CASE("two agents that use each other") {
    // First-passing subsets: agent 0 takes {agent 1, (0,0), (4,0)}, agent 1
    // takes {agent 0, (0,4), (4,4)}.
    const auto dep = make_scene({pt(1.5, 1.5), pt(1.5, 2.5)}, {pt(0, 0), pt(4, 0), pt(0, 4), pt(4, 4)}, 3.3);
    scene::SelectionPolicy first;
    first.kind = scene::SelectionPolicy::Kind::FirstPassing;
    const auto sys = build_system(dep, first);
    for (Eigen::Index i = 0; i < 2; ++i) {
      CHECK(sys.P(i, i) == 0.0);
      CHECK(sys.P(i, 1 - i) > 0.0);
      CHECK(sys.P.row(i).sum() + sys.B.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
    }
    // Oracle for agent 0's weights from coordinates.
    const auto w = affine_weights(pt(1.5, 1.5), pt(1.5, 2.5), pt(0, 0), pt(4, 0));
    CHECK(sys.P(0, 1) == doctest::Approx(w(0)).epsilon(1e-12));
    CHECK(sys.B(0, 0) == doctest::Approx(w(1)).epsilon(1e-12));
    CHECK(sys.B(0, 1) == doctest::Approx(w(2)).epsilon(1e-12));
  }

  TEST_CASE("agent-only set leaves a zero B row") {
    // Agent 0 is inside agents 1-3, which each see the anchor triangle.
    const auto dep = make_scene({pt(0, 0), pt(-1, -1), pt(1, -1), pt(0, 1.5)}, {pt(-3, -3), pt(3, -3), pt(0, 4)},
                                4.3);
    const auto set0 = scene::find_triangulation_set(dep, 0, scene::true_distances(dep));
    REQUIRE(set0);
    CHECK(set0->anchor_count() == 0);
    std::vector<std::optional<scene::TriangulationSet>> sets = {set0};
    for (int a : {1, 2, 3}) {
      scene::SelectionPolicy anchors_only;
      sets.push_back(scene::find_triangulation_set(make_scene({dep.at(a).true_pos}, {pt(-3, -3), pt(3, -3), pt(0, 4)}, 10.0),
                                                   0, scene::true_distances(dep), anchors_only));
    }
    for (auto& s : sets) REQUIRE(s);
    // Re-target the anchor-only sets at this roster.
    for (int a : {1, 2, 3}) sets[a]->member_index = {4, 5, 6};
    const auto sys = assemble_system(dep, sets);
    CHECK(sys.B.row(0).isZero());
    CHECK(sys.P.row(0).sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(sys.P.row(1).isZero());
  }

  TEST_CASE("missing sets are reported by agent id") {
    const auto dep = make_scene({pt(1, 1), pt(8, 8)}, {pt(0, 0), pt(4, 0), pt(0, 4)}, 5.0);
    try {
      build_system(dep);
      FAIL("expected IncompleteTriangulation");
    } catch (const IncompleteTriangulation& e) {
      CHECK(e.agents() == std::vector<int>{1});
    }
  }

  TEST_CASE("one-dimensional example recovers the agent in one step") {
    const auto dep = make_scene({pt(0.3)}, {pt(0.0), pt(1.0)}, 2.0, -10, 10);
    const auto sys = build_system(dep);
    StateVector s{Eigen::MatrixXd::Constant(1, 1, 7.0), anchor_positions(dep)};
    const auto next = diloc_step(s, sys);
    CHECK(next.x(0, 0) == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(next.u == s.u);
  }

  TEST_CASE("true positions are a fixed point and P = 0 converges in one step") {
    const auto dep = triangle_scene(3);
    const auto sys = build_system(dep);
    const StateVector s{true_agent_positions(dep), anchor_positions(dep)};
    CHECK((diloc_step(s, sys).x - s.x).cwiseAbs().maxCoeff() < 1e-12);

    const auto lone = make_scene({pt(1, 1), pt(2, 1)}, {pt(0, 0), pt(4, 0), pt(0, 4)}, 10.0);
    const auto sys0 = build_system(lone);
    REQUIRE(sys0.P.isZero());
    const StateVector s0{Eigen::MatrixXd::Constant(2, 2, 50.0), anchor_positions(lone)};
    CHECK((diloc_step(s0, sys0).x - true_agent_positions(lone)).norm() < 1e-12);
  }

  TEST_CASE("run converges from far initial estimates") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      const auto dep = triangle_scene(seed);
      const auto sys = build_system(dep);
      Rng rng(seed + 100);
      const auto x0 = random_initial(10, Eigen::VectorXd::Constant(2, -100), Eigen::VectorXd::Constant(2, 100), rng);
      const auto truth = true_agent_positions(dep);
      const auto r = diloc_run({x0, anchor_positions(dep)}, sys, {}, truth);
      CHECK(r.converged);
      CHECK(r.error_norms.back() <= 1e-6);
      CHECK(r.spectral_radius < 1.0);
      CHECK((closed_form_limit(sys, anchor_positions(dep)) - truth).cwiseAbs().maxCoeff() < 1e-9);
      CHECK((closed_form_limit(sys, anchor_positions(dep)) - r.final_state.x).cwiseAbs().maxCoeff() < 1e-8);

      const auto again = diloc_run({x0, anchor_positions(dep)}, sys, {}, truth);
      CHECK(again.error_norms == r.error_norms);
    }
  }

  TEST_CASE("error contracts by P exactly and at rate rho(P)") {
    const auto dep = triangle_scene(9, 15);
    const auto sys = build_system(dep);
    const auto truth = true_agent_positions(dep);
    Rng rng(1);
    StateVector s{random_initial(15, Eigen::VectorXd::Constant(2, -100), Eigen::VectorXd::Constant(2, 100), rng),
                  anchor_positions(dep)};
    const double rho = spectral_radius(sys.P);
    std::vector<double> norms;
    for (int k = 0; k < 200; ++k) {
      const Eigen::MatrixXd e = truth - s.x;
      s = diloc_step(s, sys);
      CHECK(((truth - s.x) - sys.P * e).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, e.cwiseAbs().maxCoeff()));
      norms.push_back((truth - s.x).norm());
    }
    // Average log-slope over the second half of the range above round-off.
    std::size_t last = 0;
    while (last + 1 < norms.size() && norms[last + 1] > 1e-9 * norms[0]) ++last;
    REQUIRE(last >= 10);
    const std::size_t first = last / 2;
    const double slope = (std::log(norms[last]) - std::log(norms[first])) / double(last - first);
    CHECK(slope <= std::log(rho) + 0.05);
  }

  TEST_CASE("upsilon is row stochastic") {
    const auto sys = build_system(triangle_scene(4));
    const auto up = upsilon(sys);
    for (Eigen::Index r = 0; r < up.rows(); ++r) CHECK(std::abs(up.row(r).sum() - 1.0) <= 1e-12);
  }

  TEST_CASE("empty agent set") {
    const auto dep = make_scene({}, {pt(0, 0), pt(1, 0), pt(0, 1)}, 1.0);
    const auto sys = build_system(dep);
    const auto r = diloc_run({Eigen::MatrixXd(0, 2), anchor_positions(dep)}, sys, {});
    CHECK(r.converged);
    CHECK(r.iterations == 0);
  }

  TEST_CASE("closed form: P = 0 gives B u; closed loop is rejected") {
    const auto lone = make_scene({pt(1, 1)}, {pt(0, 0), pt(4, 0), pt(0, 4)}, 10.0);
    const auto sys = build_system(lone);
    const auto u = anchor_positions(lone);
    CHECK((closed_form_limit(sys, u) - sys.B * u).norm() < 1e-15);

    SystemMatrices loop;
    loop.P = Eigen::MatrixXd{{0.0, 1.0}, {1.0, 0.0}};
    loop.B = Eigen::MatrixXd::Zero(2, 1);
    CHECK_FALSE(is_absorbing(loop));
    try {
      closed_form_limit(loop, Eigen::MatrixXd::Zero(1, 2));
      FAIL("expected NotAbsorbing");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::NotAbsorbing);
    }
  }

  TEST_CASE("spectral radius") {
    CHECK(spectral_radius(Eigen::MatrixXd::Zero(3, 3)) == 0.0);
    const Eigen::MatrixXd stoch{{0.0, 0.5, 0.5}, {0.3, 0.0, 0.7}, {1.0, 0.0, 0.0}};
    CHECK(std::abs(spectral_radius(stoch) - 1.0) <= 1e-9);
    const Eigen::MatrixXd sub{{0.0, 0.5}, {0.5, 0.0}};
    CHECK(spectral_radius(sub) == doctest::Approx(0.5).epsilon(1e-9));
    // Collatz-Wielandt bounds from a power iterate of a positive matrix.
    Rng rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Eigen::MatrixXd a(6, 6);
    for (Eigen::Index i = 0; i < 36; ++i) a(i) = u(rng);
    Eigen::VectorXd x = Eigen::VectorXd::Ones(6);
    for (int k = 0; k < 200; ++k) x = (a * x).normalized();
    const Eigen::ArrayXd ratio = (a * x).array() / x.array();
    CHECK(spectral_radius(a) >= ratio.minCoeff() * (1 - 1e-12));
    CHECK(spectral_radius(a) <= ratio.maxCoeff() * (1 + 1e-12));
    // Reducible with a repeated leading eigenvalue.
    const Eigen::MatrixXd jordan{{0.5, 1.0, 0.0}, {0.0, 0.5, 0.0}, {0.0, 0.0, 0.5}};
    CHECK(spectral_radius(jordan) == doctest::Approx(0.5).epsilon(1e-9));
  }
}
