#include "baryloc/diloc.hpp"

#include <cmath>
#include <deque>

namespace baryloc::diloc {

Eigen::MatrixXd anchor_positions(const scene::Deployment& dep) {
  const auto& idx = dep.anchor_indices();
  Eigen::MatrixXd u(static_cast<Eigen::Index>(idx.size()), dep.dim());
  for (std::size_t a = 0; a < idx.size(); ++a) u.row(a) = dep.at(idx[a]).true_pos.transpose();
  return u;
}

Eigen::MatrixXd true_agent_positions(const scene::Deployment& dep) {
  const auto& idx = dep.agent_indices();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(idx.size()), dep.dim());
  for (std::size_t a = 0; a < idx.size(); ++a) x.row(a) = dep.at(idx[a]).true_pos.transpose();
  return x;
}

SystemMatrices assemble_system(const scene::Deployment& dep,
                               const std::vector<std::optional<scene::TriangulationSet>>& sets) {
  const auto& agents = dep.agent_indices();
  const auto& anchors = dep.anchor_indices();
  if (sets.size() != agents.size()) {
    throw Error(ErrorCode::InvalidInput, "need one triangulation set entry per agent");
  }
  // Column lookup from roster index.
  std::vector<MemberRef> col_of(dep.size());
  for (std::size_t c = 0; c < agents.size(); ++c) col_of[agents[c]] = {false, static_cast<int>(c)};
  for (std::size_t c = 0; c < anchors.size(); ++c) col_of[anchors[c]] = {true, static_cast<int>(c)};

  SystemMatrices sys;
  const auto n = static_cast<Eigen::Index>(agents.size());
  const auto m = static_cast<Eigen::Index>(anchors.size());
  sys.P = Eigen::MatrixXd::Zero(n, n);
  sys.B = Eigen::MatrixXd::Zero(n, m);
  sys.agent_index = agents;
  sys.anchor_index = anchors;
  sys.layout.resize(agents.size());

  std::vector<int> missing;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    if (!sets[i]) {
      missing.push_back(dep.at(agents[i]).id);
      continue;
    }
    const auto& set = *sets[i];
    for (std::size_t j = 0; j < set.member_index.size(); ++j) {
      const MemberRef ref = col_of[set.member_index[j]];
      if (!ref.anchor && ref.col == static_cast<int>(i)) {
        throw Error(ErrorCode::InvalidInput, "an agent cannot be in its own triangulation set");
      }
      (ref.anchor ? sys.B : sys.P)(static_cast<Eigen::Index>(i), ref.col) += set.weights[j];
      sys.layout[i].members.push_back(ref);
    }
  }
  if (!missing.empty()) throw IncompleteTriangulation(std::move(missing));
  return sys;
}

SystemMatrices build_system(const scene::Deployment& dep, const scene::SelectionPolicy& policy) {
  std::vector<std::optional<scene::TriangulationSet>> sets;
  const auto dist = scene::true_distances(dep);
  for (int a : dep.agent_indices()) sets.push_back(scene::find_triangulation_set(dep, a, dist, policy));
  return assemble_system(dep, sets);
}

Eigen::MatrixXd upsilon(const SystemMatrices& sys) {
  const Eigen::Index n = sys.agents();
  const Eigen::Index m = sys.anchors();
  Eigen::MatrixXd up = Eigen::MatrixXd::Zero(m + n, m + n);
  up.topLeftCorner(m, m).setIdentity();
  up.bottomLeftCorner(n, m) = sys.B;
  up.bottomRightCorner(n, n) = sys.P;
  return up;
}

StateVector diloc_step(const StateVector& s, const SystemMatrices& sys) {
  if (s.x.rows() != sys.agents() || s.u.rows() != sys.anchors() || s.x.cols() != s.u.cols()) {
    throw Error(ErrorCode::InvalidInput, "state and system dimensions disagree");
  }
  return StateVector{sys.P * s.x + sys.B * s.u, s.u};
}

RunResult diloc_run(const StateVector& s0, const SystemMatrices& sys, const StopRule& stop,
                    const std::optional<Eigen::MatrixXd>& truth) {
  RunResult r;
  r.final_state = s0;
  r.spectral_radius = sys.agents() == 0 ? 0.0 : spectral_radius(sys.P);
  r.spectral_warning = r.spectral_radius >= 1.0;
  const auto record = [&] {
    if (truth) r.error_norms.push_back((r.final_state.x - *truth).norm());
  };
  record();
  if (sys.agents() == 0) {
    r.converged = true;
    return r;
  }
  while (r.iterations < stop.max_iters) {
    StateVector next = diloc_step(r.final_state, sys);
    const double change = (next.x - r.final_state.x).norm();
    r.final_state = std::move(next);
    ++r.iterations;
    record();
    if (stop.tol >= 0.0 && change <= stop.tol) {
      r.converged = true;
      break;
    }
  }
  return r;
}

bool is_absorbing(const SystemMatrices& sys) {
  const Eigen::Index n = sys.agents();
  // Reverse search from agents that weight an anchor directly.
  std::vector<bool> reaches(n, false);
  std::deque<Eigen::Index> frontier;
  for (Eigen::Index i = 0; i < n; ++i) {
    if ((sys.B.row(i).array() != 0.0).any()) {
      reaches[i] = true;
      frontier.push_back(i);
    }
  }
  while (!frontier.empty()) {
    const Eigen::Index j = frontier.front();
    frontier.pop_front();
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!reaches[i] && sys.P(i, j) != 0.0) {
        reaches[i] = true;
        frontier.push_back(i);
      }
    }
  }
  for (bool b : reaches) {
    if (!b) return false;
  }
  return true;
}

Eigen::MatrixXd closed_form_limit(const SystemMatrices& sys, const Eigen::MatrixXd& u) {
  if (u.rows() != sys.anchors()) {
    throw Error(ErrorCode::InvalidInput, "anchor matrix has the wrong number of rows");
  }
  const Eigen::Index n = sys.agents();
  if (n == 0) return Eigen::MatrixXd(0, u.cols());
  if (!is_absorbing(sys)) {
    throw Error(ErrorCode::NotAbsorbing, "some agent has no path to an anchor; I - P is singular");
  }
  const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n) - sys.P;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  if (!lu.isInvertible()) {
    throw Error(ErrorCode::NotAbsorbing, "I - P is numerically singular");
  }
  return lu.solve(sys.B * u);
}

double spectral_radius(const Eigen::MatrixXd& P) {
  if (P.rows() != P.cols()) throw Error(ErrorCode::InvalidInput, "matrix must be square");
  if (P.rows() == 0) return 0.0;
  // Direct eigenvalues: power iteration stalls on reducible P, where
  // leading eigenvalues can tie.
  const Eigen::EigenSolver<Eigen::MatrixXd> es(P.cwiseAbs(), false);
  if (es.info() != Eigen::Success) throw Error(ErrorCode::NumericalFailure, "eigenvalue solve failed");
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

Eigen::MatrixXd random_initial(Eigen::Index agents, const Eigen::VectorXd& lo,
                               const Eigen::VectorXd& hi, Rng& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  Eigen::MatrixXd x(agents, lo.size());
  for (Eigen::Index i = 0; i < agents; ++i) {
    for (Eigen::Index c = 0; c < lo.size(); ++c) x(i, c) = lo(c) + u01(rng) * (hi(c) - lo(c));
  }
  return x;
}

}  // namespace baryloc::diloc
