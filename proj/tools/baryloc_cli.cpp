// Command-line front end. Talks to the library only through baryloc.h.
//
// Exit codes: 0 success, 1 config or validation failure, 2 runtime error.
// Failures print {"error": ..., "detail": ...} on stderr.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "baryloc/baryloc.h"

namespace {

int exit_code(baryloc_status s) {
  switch (s) {
    case BARYLOC_OK: return 0;
    case BARYLOC_CONFIG_ERROR:
    case BARYLOC_INVALID_INPUT:
    case BARYLOC_SCHEDULE_REJECTED: return 1;
    default: return 2;
  }
}

int report(const std::string& error, const std::string& detail, int code) {
  std::cerr << nlohmann::json{{"error", error}, {"detail", detail}}.dump() << "\n";
  return code;
}

int report(baryloc_status s) { return report(baryloc_status_string(s), baryloc_last_error(), exit_code(s)); }

std::string fetch(baryloc_status (*get)(const baryloc_experiment*, char*, size_t, size_t*),
                  const baryloc_experiment* exp) {
  size_t needed = 0;
  get(exp, nullptr, 0, &needed);
  std::string s(needed, '\0');
  if (get(exp, s.data(), s.size(), &needed) != BARYLOC_OK) return {};
  s.resize(needed - 1);
  return s;
}

struct RunOptions {
  std::string config;
  std::string out = "out";
  std::optional<uint64_t> seed;
  std::optional<int> replicates;
};

// Loads, applies overrides and the optional parameter, runs and writes.
int run_one(const RunOptions& o, const std::string& dir, const std::string& param = {},
            const std::string& value = {}) {
  baryloc_experiment* exp = nullptr;
  baryloc_status s = baryloc_experiment_load(o.config.c_str(), &exp);
  if (s != BARYLOC_OK) return report(s);
  std::unique_ptr<baryloc_experiment, void (*)(baryloc_experiment*)> guard(exp, baryloc_experiment_destroy);

  if (o.seed && (s = baryloc_experiment_set_seed(exp, *o.seed)) != BARYLOC_OK) return report(s);
  if (o.replicates && (s = baryloc_experiment_set_replicates(exp, *o.replicates)) != BARYLOC_OK) return report(s);
  if (!param.empty() && (s = baryloc_experiment_set_param(exp, param.c_str(), value.c_str())) != BARYLOC_OK) {
    return report(s);
  }
  if ((s = baryloc_experiment_run(exp)) != BARYLOC_OK) return report(s);
  if ((s = baryloc_experiment_write_outputs(exp, dir.c_str())) != BARYLOC_OK) return report(s);

  const auto summary = nlohmann::json::parse(fetch(baryloc_experiment_summary_json, exp));
  const auto& agg = summary["aggregates"];
  char line[256];
  std::snprintf(line, sizeof line, "%s: final error %.6g +- %.3g m, updates %.6g, zero-neighbor fraction %.3f",
                dir.c_str(), agg["final_error_norm"]["mean"].get<double>(),
                agg["final_error_norm"]["stdev"].get<double>(), agg["updates_cum"]["mean"].get<double>(),
                agg["zero_neighbor_fraction"].get<double>());
  std::cout << line << "\n";
  for (const auto& w : summary["warnings"]) std::cerr << "warning: " << w.get<std::string>() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Barycentric distributed localization experiments"};
  app.require_subcommand(1);

  RunOptions run_opt;
  auto* run = app.add_subcommand("run", "run an experiment config and write trace.csv, summary.json, histogram.csv");
  run->add_option("config", run_opt.config, "experiment JSON")->required();
  run->add_option("--out", run_opt.out, "output directory");
  run->add_option("--seed", run_opt.seed, "override master_seed");
  run->add_option("--replicates", run_opt.replicates, "override replicates");

  RunOptions sweep_opt;
  std::string sweep_param;
  auto* sweep = app.add_subcommand("sweep", "run a config once per value of one parameter");
  sweep->add_option("config", sweep_opt.config, "experiment JSON")->required();
  sweep->add_option("--param", sweep_param, "dotted.path=v1,v2,...")->required();
  sweep->add_option("--out", sweep_opt.out, "output root; one subdirectory per value");
  sweep->add_option("--seed", sweep_opt.seed, "override master_seed");
  sweep->add_option("--replicates", sweep_opt.replicates, "override replicates");

  long samples = 10000;
  uint64_t geo_seed = 1;
  auto* geo = app.add_subcommand("validate-geometry", "random-simplex checks of the geometry kernels");
  geo->add_option("--samples", samples, "number of random simplices");
  geo->add_option("--seed", geo_seed, "sampler seed");

  int anchors = 0, agents = 0, dim = 2, agent_dim = 0, anchor_dim = 0;
  auto* feas = app.add_subcommand("feasibility", "necessary anchor-count conditions for mobile tracking");
  feas->add_option("--anchors", anchors)->required();
  feas->add_option("--agents", agents)->required();
  feas->add_option("--dim", dim)->required();
  feas->add_option("--agent-motion-dim", agent_dim)->required();
  feas->add_option("--anchor-motion-dim", anchor_dim)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report("UsageError", e.what(), 1);
  }

  if (*run) return run_one(run_opt, run_opt.out);

  if (*sweep) {
    const auto eq = sweep_param.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == sweep_param.size()) {
      return report("UsageError", "--param expects path=v1,v2,...", 1);
    }
    const std::string path = sweep_param.substr(0, eq);
    std::stringstream values(sweep_param.substr(eq + 1));
    std::string v;
    while (std::getline(values, v, ',')) {
      const auto dir = (std::filesystem::path(sweep_opt.out) / (path + "=" + v)).string();
      if (const int rc = run_one(sweep_opt, dir, path, v); rc != 0) return rc;
    }
    return 0;
  }

  if (*geo) {
    baryloc_geometry_report r{};
    int passed = 0;
    const auto s = baryloc_validate_geometry(samples, geo_seed, &r, &passed);
    if (s != BARYLOC_OK) return report(s);
    std::printf("samples %ld (near-flat redraws %ld)\n", r.samples, r.degenerate_skipped);
    std::printf("volume: %ld/%ld passed, max relative error %.3g\n", r.volume_passed, r.volume_checked,
                r.max_volume_rel_error);
    std::printf("inclusion: %ld/%ld agreed (boundary band skipped %ld)\n", r.inclusion_agreed, r.inclusion_checked,
                r.band_skipped);
    std::printf("%s\n", passed ? "PASS" : "FAIL");
    return passed ? 0 : 1;
  }

  if (*feas) {
    int feasible = 0;
    unsigned mask = 0;
    const auto s = baryloc_feasibility_check(anchors, agents, dim, agent_dim, anchor_dim, &feasible, &mask);
    if (s != BARYLOC_OK) return report(s);
    if (feasible) {
      std::printf("Feasible\n");
      return 0;
    }
    std::printf("Infeasible: %s\n", baryloc_last_error());
    return report("Infeasible", baryloc_last_error(), 1);
  }
  return 1;
}
