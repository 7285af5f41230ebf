#include <fstream>
#include <set>
#include <sstream>

#include "baryloc/harness.hpp"

namespace baryloc::harness {

namespace {

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

// Typed field access that reports the dotted path on failure.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_, "expected an object");
  }

  void allow(std::initializer_list<const char*> keys) const {
    const std::set<std::string> ok(keys.begin(), keys.end());
    for (const auto& [k, v] : j_.items()) {
      if (!ok.count(k)) throw ConfigError(join(path_, k), "unknown field");
    }
  }

  bool has(const char* key) const { return j_.contains(key); }
  const json& raw(const char* key) const { return j_.at(key); }
  std::string path(const char* key) const { return join(path_, key); }

  double number(const char* key, double def) const {
    if (!has(key)) return def;
    const auto& v = j_.at(key);
    if (!v.is_number()) throw ConfigError(path(key), "expected a number");
    return v.get<double>();
  }

  long integer(const char* key, long def) const {
    if (!has(key)) return def;
    const auto& v = j_.at(key);
    if (!v.is_number_integer()) throw ConfigError(path(key), "expected an integer");
    return v.get<long>();
  }

  bool boolean(const char* key, bool def) const {
    if (!has(key)) return def;
    const auto& v = j_.at(key);
    if (!v.is_boolean()) throw ConfigError(path(key), "expected true or false");
    return v.get<bool>();
  }

  std::string string(const char* key, const std::string& def) const {
    if (!has(key)) return def;
    const auto& v = j_.at(key);
    if (!v.is_string()) throw ConfigError(path(key), "expected a string");
    return v.get<std::string>();
  }

  Section sub(const char* key) const { return Section(j_.at(key), path(key)); }

 private:
  const json& j_;
  std::string path_;
};

void check(bool ok, const std::string& path, const std::string& what) {
  if (!ok) throw ConfigError(path, what);
}

AlgorithmKind parse_algorithm(const std::string& s, const std::string& path) {
  for (auto a : {AlgorithmKind::Diloc, AlgorithmKind::Dlre, AlgorithmKind::Diland, AlgorithmKind::Mobile,
                 AlgorithmKind::Kf, AlgorithmKind::Pf}) {
    if (s == to_string(a)) return a;
  }
  throw ConfigError(path, "unknown algorithm '" + s + "'");
}

const char* selection_name(scene::SelectionPolicy::Kind k) {
  return k == scene::SelectionPolicy::Kind::FirstPassing ? "first_passing" : "max_min_weight";
}

scene::SelectionPolicy::Kind parse_selection(const std::string& s, const std::string& path) {
  if (s == "first_passing") return scene::SelectionPolicy::Kind::FirstPassing;
  if (s == "max_min_weight") return scene::SelectionPolicy::Kind::MaxMinWeight;
  throw ConfigError(path, "expected first_passing or max_min_weight");
}

robust::StepSchedule parse_schedule(const Section& s) {
  s.allow({"kind", "a", "k0", "tau", "c"});
  const std::string kind = s.string("kind", "harmonic");
  if (kind == "harmonic") return robust::StepSchedule::harmonic(s.number("a", 1.0), s.number("k0", 1.0));
  if (kind == "power_law") return robust::StepSchedule::power_law(s.number("a", 1.0), s.number("tau", 1.0));
  if (kind == "constant") return robust::StepSchedule::constant(s.number("c", 0.5));
  throw ConfigError(s.path("kind"), "expected harmonic, power_law or constant");
}

json schedule_json(const robust::StepSchedule& s) {
  switch (s.kind) {
    case robust::StepSchedule::Kind::Harmonic: return {{"kind", "harmonic"}, {"a", s.a}, {"k0", s.k0}};
    case robust::StepSchedule::Kind::PowerLaw: return {{"kind", "power_law"}, {"a", s.a}, {"tau", s.tau}};
    case robust::StepSchedule::Kind::Constant: return {{"kind", "constant"}, {"c", s.c}};
  }
  return {};
}

json read_json_file(const std::filesystem::path& file, const std::string& path) {
  std::ifstream in(file);
  if (!in) throw ConfigError(path, "cannot read " + file.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path, std::string("invalid JSON: ") + e.what());
  }
}

std::vector<double> vec_of(const json& j, const std::string& path) {
  check(j.is_array(), path, "expected an array of numbers");
  std::vector<double> v;
  for (const auto& x : j) {
    check(x.is_number(), path, "expected an array of numbers");
    v.push_back(x.get<double>());
  }
  return v;
}

}  // namespace

const char* to_string(AlgorithmKind a) noexcept {
  switch (a) {
    case AlgorithmKind::Diloc: return "diloc";
    case AlgorithmKind::Dlre: return "dlre";
    case AlgorithmKind::Diland: return "diland";
    case AlgorithmKind::Mobile: return "mobile";
    case AlgorithmKind::Kf: return "kf";
    case AlgorithmKind::Pf: return "pf";
  }
  return "?";
}

scene::Deployment parse_scene(const json& j) {
  const Section s(j, "scene");
  s.allow({"dim", "comm_radius", "region", "nodes"});
  check(s.has("dim") && s.has("comm_radius") && s.has("region") && s.has("nodes"), "scene",
        "needs dim, comm_radius, region and nodes");
  const int dim = static_cast<int>(s.integer("dim", 2));
  const Section r = s.sub("region");
  r.allow({"lo", "hi"});
  check(r.has("lo") && r.has("hi"), "scene.region", "needs lo and hi");
  const auto lo = vec_of(r.raw("lo"), "scene.region.lo");
  const auto hi = vec_of(r.raw("hi"), "scene.region.hi");
  check(static_cast<int>(lo.size()) == dim && static_cast<int>(hi.size()) == dim, "scene.region",
        "lo and hi need dim entries");
  scene::Region region{Eigen::Map<const Eigen::VectorXd>(lo.data(), dim),
                       Eigen::Map<const Eigen::VectorXd>(hi.data(), dim)};

  const auto& nodes_j = s.raw("nodes");
  check(nodes_j.is_array(), "scene.nodes", "expected an array");
  std::vector<scene::Node> nodes;
  for (std::size_t i = 0; i < nodes_j.size(); ++i) {
    const std::string p = "scene.nodes[" + std::to_string(i) + "]";
    const Section n(nodes_j[i], p);
    n.allow({"id", "role", "pos"});
    check(n.has("id") && n.has("role") && n.has("pos"), p, "needs id, role and pos");
    const std::string role = n.string("role", "");
    check(role == "agent" || role == "anchor", n.path("role"), "expected agent or anchor");
    const auto pos = vec_of(n.raw("pos"), n.path("pos"));
    check(static_cast<int>(pos.size()) == dim, n.path("pos"), "needs dim entries");
    scene::Node node;
    node.id = static_cast<int>(n.integer("id", 0));
    node.role = role == "anchor" ? scene::Role::Anchor : scene::Role::Agent;
    node.true_pos = Eigen::Map<const Eigen::VectorXd>(pos.data(), dim);
    nodes.push_back(std::move(node));
  }
  try {
    return scene::Deployment(dim, std::move(region), s.number("comm_radius", 0.0), std::move(nodes));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigError) throw;
    throw ConfigError("scene", e.what());
  }
}

json scene_to_json(const scene::Deployment& dep) {
  const auto v = [](const Eigen::VectorXd& x) { return std::vector<double>(x.data(), x.data() + x.size()); };
  json nodes = json::array();
  for (const auto& n : dep.nodes()) {
    nodes.push_back({{"id", n.id},
                     {"role", n.role == scene::Role::Anchor ? "anchor" : "agent"},
                     {"pos", v(n.true_pos)}});
  }
  return {{"dim", dep.dim()},
          {"comm_radius", dep.comm_radius()},
          {"region", {{"lo", v(dep.region().lo)}, {"hi", v(dep.region().hi)}}},
          {"nodes", nodes}};
}

ExperimentConfig parse_config(const json& j) {
  ExperimentConfig cfg;
  const Section top(j, "");
  top.allow({"scene", "scene_file", "scene_gen", "algorithm", "steps", "replicates", "master_seed", "diloc",
             "noise", "mobile", "baseline"});

  const int sources = int(top.has("scene")) + int(top.has("scene_file")) + int(top.has("scene_gen"));
  check(sources == 1, "scene", "give exactly one of scene, scene_file or scene_gen");
  if (top.has("scene")) {
    cfg.scene = top.raw("scene");
    parse_scene(*cfg.scene);
  }
  if (top.has("scene_file")) {
    cfg.scene_file = top.string("scene_file", "");
  }
  if (top.has("scene_gen")) {
    const Section g = top.sub("scene_gen");
    g.allow({"kind", "agents", "anchors", "side", "comm_radius", "dim", "anchor_positions"});
    SceneGen gen;
    const std::string kind = g.string("kind", "uniform");
    if (kind == "uniform") {
      gen.kind = SceneGen::Kind::Uniform;
    } else if (kind == "triangle") {
      gen.kind = SceneGen::Kind::Triangle;
    } else {
      throw ConfigError(g.path("kind"), "expected uniform or triangle");
    }
    gen.agents = static_cast<int>(g.integer("agents", gen.agents));
    gen.dim = static_cast<int>(g.integer("dim", gen.dim));
    gen.anchors = static_cast<int>(g.integer("anchors", gen.kind == SceneGen::Kind::Triangle ? gen.dim + 1 : 1));
    gen.side = g.number("side", gen.side);
    gen.comm_radius = g.number("comm_radius", gen.comm_radius);
    check(gen.agents >= 0, g.path("agents"), "must be nonnegative");
    check(gen.anchors >= 0, g.path("anchors"), "must be nonnegative");
    check(gen.dim >= 1 && gen.dim <= geometry::kMaxDim, g.path("dim"), "must lie in [1, 8]");
    check(gen.side > 0.0, g.path("side"), "must be positive");
    check(gen.comm_radius > 0.0, g.path("comm_radius"), "must be positive");
    if (gen.kind == SceneGen::Kind::Triangle) {
      check(gen.anchors == gen.dim + 1, g.path("anchors"), "a triangle scene has dim + 1 anchors");
      if (g.has("anchor_positions")) {
        const auto& ap = g.raw("anchor_positions");
        check(ap.is_array() && static_cast<int>(ap.size()) == gen.dim + 1, g.path("anchor_positions"),
              "needs dim + 1 points");
        for (const auto& p : ap) {
          auto v = vec_of(p, g.path("anchor_positions"));
          check(static_cast<int>(v.size()) == gen.dim, g.path("anchor_positions"), "points need dim entries");
          gen.anchor_positions.push_back(std::move(v));
        }
      }
    } else {
      check(!g.has("anchor_positions"), g.path("anchor_positions"), "only for triangle scenes");
    }
    cfg.scene_gen = gen;
  }

  cfg.algorithm = parse_algorithm(top.string("algorithm", "diloc"), "algorithm");
  cfg.steps = top.integer("steps", cfg.steps);
  check(cfg.steps >= 1, "steps", "must be at least 1");
  const long reps = top.integer("replicates", cfg.replicates);
  check(reps >= 1 && reps <= 100000, "replicates", "must lie in [1, 100000]");
  cfg.replicates = static_cast<int>(reps);
  if (top.has("master_seed")) {
    const auto& s = top.raw("master_seed");
    check(s.is_number_unsigned() || (s.is_number_integer() && s.get<long long>() >= 0), "master_seed",
          "expected a nonnegative integer");
    cfg.master_seed = s.get<std::uint64_t>();
  }

  if (top.has("diloc")) {
    const Section d = top.sub("diloc");
    d.allow({"init_lo", "init_hi", "selection", "max_subsets"});
    check(d.has("init_lo") == d.has("init_hi"), d.path("init_lo"), "give both init_lo and init_hi");
    if (d.has("init_lo")) {
      cfg.diloc.init_lo = d.number("init_lo", 0.0);
      cfg.diloc.init_hi = d.number("init_hi", 0.0);
      check(*cfg.diloc.init_lo < *cfg.diloc.init_hi, d.path("init_hi"), "must exceed init_lo");
    }
    cfg.diloc.selection = parse_selection(d.string("selection", "max_min_weight"), d.path("selection"));
    cfg.diloc.max_subsets = static_cast<int>(d.integer("max_subsets", cfg.diloc.max_subsets));
    check(cfg.diloc.max_subsets >= 1, d.path("max_subsets"), "must be at least 1");
  }

  if (top.has("noise")) {
    const Section n = top.sub("noise");
    n.allow({"link_q", "comm_sigma", "range_bias", "range_sigma", "kind", "schedule"});
    cfg.noise.link_q = n.number("link_q", 1.0);
    cfg.noise.comm_sigma = n.number("comm_sigma", 0.0);
    cfg.noise.range_bias = n.number("range_bias", 0.0);
    cfg.noise.range_sigma = n.number("range_sigma", 0.0);
    const std::string kind = n.string("kind", "gaussian");
    check(kind == "gaussian" || kind == "uniform", n.path("kind"), "expected gaussian or uniform");
    cfg.noise.kind = kind == "uniform" ? robust::NoiseKind::Uniform : robust::NoiseKind::Gaussian;
    check(cfg.noise.link_q > 0.0 && cfg.noise.link_q <= 1.0, n.path("link_q"), "must lie in (0, 1]");
    check(cfg.noise.comm_sigma >= 0.0, n.path("comm_sigma"), "must be nonnegative");
    check(cfg.noise.range_sigma >= 0.0, n.path("range_sigma"), "must be nonnegative");
    if (n.has("schedule")) cfg.schedule = parse_schedule(n.sub("schedule"));
  }
  if (cfg.algorithm == AlgorithmKind::Dlre || cfg.algorithm == AlgorithmKind::Diland) {
    try {
      robust::validate_schedule(cfg.schedule,
                                cfg.algorithm == AlgorithmKind::Dlre ? robust::Algorithm::DLRE
                                                                     : robust::Algorithm::DILAND);
    } catch (const Error& e) {
      throw ConfigError("noise.schedule", e.what());
    }
  }

  if (top.has("mobile")) {
    const Section m = top.sub("mobile");
    m.allow({"beta", "alpha_k", "alpha_anchor", "epsilon", "d_max", "K_d", "K_theta", "K_r", "modifications",
             "anchors_move", "sequential", "motion", "check_invariants", "selection", "max_subsets"});
    auto& p = cfg.mobile;
    p.beta = m.number("beta", p.beta);
    p.alpha_k = m.number("alpha_k", p.alpha_k);
    p.alpha_anchor = m.number("alpha_anchor", p.alpha_anchor);
    p.epsilon = m.number("epsilon", p.epsilon);
    p.modifications = m.boolean("modifications", p.modifications);
    p.sequential = m.boolean("sequential", p.sequential);
    p.check_invariants = m.boolean("check_invariants", p.check_invariants);
    p.selection = parse_selection(m.string("selection", "max_min_weight"), m.path("selection"));
    p.max_subsets = static_cast<int>(m.integer("max_subsets", p.max_subsets));
    cfg.motion.d_max = m.number("d_max", cfg.motion.d_max);
    cfg.motion.anchors_move = m.boolean("anchors_move", cfg.motion.anchors_move);
    const std::string motion = m.string("motion", "random_waypoint");
    check(motion == "random_waypoint" || motion == "static", m.path("motion"),
          "expected random_waypoint or static");
    cfg.motion.kind = motion == "static" ? mobile::MotionModel::Kind::Static
                                         : mobile::MotionModel::Kind::RandomWaypoint;
    cfg.motion_noise.K_d = m.number("K_d", 0.0);
    cfg.motion_noise.K_theta = m.number("K_theta", 0.0);
    cfg.motion_noise.K_r = m.number("K_r", 0.0);
    check(cfg.motion.d_max >= 0.0, m.path("d_max"), "must be nonnegative");
    check(cfg.motion_noise.K_d >= 0.0, m.path("K_d"), "must be nonnegative");
    check(cfg.motion_noise.K_theta >= 0.0, m.path("K_theta"), "must be nonnegative");
    check(cfg.motion_noise.K_r >= 0.0, m.path("K_r"), "must be nonnegative");
    try {
      p.validate();
    } catch (const Error& e) {
      throw ConfigError("mobile", e.what());
    }
  }

  if (top.has("baseline")) {
    const Section b = top.sub("baseline");
    b.allow({"N_s", "resample_threshold"});
    cfg.baseline.N_s = static_cast<int>(b.integer("N_s", cfg.baseline.N_s));
    cfg.baseline.resample_threshold = b.number("resample_threshold", cfg.baseline.resample_threshold);
    check(cfg.baseline.N_s >= 1, b.path("N_s"), "must be at least 1");
    check(cfg.baseline.resample_threshold >= 0.0 && cfg.baseline.resample_threshold <= 1.0,
          b.path("resample_threshold"), "must lie in [0, 1]");
  }
  if (cfg.algorithm == AlgorithmKind::Kf || cfg.algorithm == AlgorithmKind::Pf) {
    check(cfg.noise.range_sigma > 0.0, "noise.range_sigma", "filters need a positive range_sigma");
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& file) {
  const json j = read_json_file(file, "");
  ExperimentConfig cfg = parse_config(j);
  cfg.base_dir = file.parent_path();
  if (!cfg.scene_file.empty()) {
    // Resolve and validate the scene now so a bad path is a config error.
    std::filesystem::path p = cfg.scene_file;
    if (p.is_relative()) p = cfg.base_dir / p;
    parse_scene(read_json_file(p, "scene_file"));
  }
  return cfg;
}

json to_json(const ExperimentConfig& cfg) {
  json j;
  if (cfg.scene) j["scene"] = *cfg.scene;
  if (!cfg.scene_file.empty()) j["scene_file"] = cfg.scene_file;
  if (cfg.scene_gen) {
    const auto& g = *cfg.scene_gen;
    json gj = {{"kind", g.kind == SceneGen::Kind::Triangle ? "triangle" : "uniform"},
               {"agents", g.agents},
               {"anchors", g.anchors},
               {"side", g.side},
               {"comm_radius", g.comm_radius},
               {"dim", g.dim}};
    if (!g.anchor_positions.empty()) gj["anchor_positions"] = g.anchor_positions;
    j["scene_gen"] = gj;
  }
  j["algorithm"] = to_string(cfg.algorithm);
  j["steps"] = cfg.steps;
  j["replicates"] = cfg.replicates;
  j["master_seed"] = cfg.master_seed;

  json d = {{"selection", selection_name(cfg.diloc.selection)}, {"max_subsets", cfg.diloc.max_subsets}};
  if (cfg.diloc.init_lo) {
    d["init_lo"] = *cfg.diloc.init_lo;
    d["init_hi"] = *cfg.diloc.init_hi;
  }
  j["diloc"] = d;

  j["noise"] = {{"link_q", cfg.noise.link_q},
                {"comm_sigma", cfg.noise.comm_sigma},
                {"range_bias", cfg.noise.range_bias},
                {"range_sigma", cfg.noise.range_sigma},
                {"kind", cfg.noise.kind == robust::NoiseKind::Uniform ? "uniform" : "gaussian"},
                {"schedule", schedule_json(cfg.schedule)}};

  const auto& p = cfg.mobile;
  j["mobile"] = {{"beta", p.beta},
                 {"alpha_k", p.alpha_k},
                 {"alpha_anchor", p.alpha_anchor},
                 {"epsilon", p.epsilon},
                 {"modifications", p.modifications},
                 {"sequential", p.sequential},
                 {"check_invariants", p.check_invariants},
                 {"selection", selection_name(p.selection)},
                 {"max_subsets", p.max_subsets},
                 {"d_max", cfg.motion.d_max},
                 {"anchors_move", cfg.motion.anchors_move},
                 {"motion", cfg.motion.kind == mobile::MotionModel::Kind::Static ? "static" : "random_waypoint"},
                 {"K_d", cfg.motion_noise.K_d},
                 {"K_theta", cfg.motion_noise.K_theta},
                 {"K_r", cfg.motion_noise.K_r}};

  j["baseline"] = {{"N_s", cfg.baseline.N_s}, {"resample_threshold", cfg.baseline.resample_threshold}};
  return j;
}

ExperimentConfig with_param(const ExperimentConfig& cfg, const std::string& path, const json& value) {
  json j = to_json(cfg);
  json* node = &j;
  std::stringstream ss(path);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  if (parts.empty()) throw ConfigError(path, "empty parameter path");
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->is_object() || !node->contains(parts[i])) throw ConfigError(path, "no such section");
    node = &(*node)[parts[i]];
  }
  if (!node->is_object()) throw ConfigError(path, "no such section");
  (*node)[parts.back()] = value;
  ExperimentConfig out = parse_config(j);
  out.base_dir = cfg.base_dir;
  return out;
}

}  // namespace baryloc::harness
