#include <cstdio>
#include <fstream>

#include "baryloc/harness.hpp"

namespace baryloc::harness {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_file(const std::filesystem::path& p, const std::string& body) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + p.string() + " for writing");
  out << body;
  out.flush();
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + p.string());
}

json agg_json(const Aggregate& a) { return {{"mean", a.mean}, {"stdev", a.stdev}}; }

}  // namespace

std::string trace_csv(const MetricsLog& log) {
  std::string s = "replicate,k,error_norm,updates_cum\n";
  for (std::size_t r = 0; r < log.replicates.size(); ++r) {
    const auto& rep = log.replicates[r];
    for (std::size_t k = 1; k < rep.error_norms.size(); ++k) {
      s += std::to_string(r) + "," + std::to_string(k) + "," + fmt(rep.error_norms[k]) + "," +
           std::to_string(rep.updates_cum[k]) + "\n";
    }
  }
  return s;
}

std::string histogram_csv(const MetricsLog& log) {
  std::vector<long> total;
  for (const auto& rep : log.replicates) {
    if (rep.histogram.size() > total.size()) total.resize(rep.histogram.size(), 0);
    for (std::size_t b = 0; b < rep.histogram.size(); ++b) total[b] += rep.histogram[b];
  }
  std::string s = "neighbors,count\n";
  for (std::size_t b = 0; b < total.size(); ++b) s += std::to_string(b) + "," + std::to_string(total[b]) + "\n";
  return s;
}

json summary_json(const MetricsLog& log) {
  json seeds = json::array();
  json reps = json::array();
  std::vector<double> initial;
  for (std::size_t r = 0; r < log.replicates.size(); ++r) {
    const auto& rep = log.replicates[r];
    seeds.push_back(rep.seed);
    initial.push_back(rep.error_norms.front());
    json rj = {{"replicate", r},
               {"initial_error_norm", rep.error_norms.front()},
               {"final_error_norm", rep.error_norms.back()},
               {"updates_cum", rep.updates_cum.back()}};
    if (rep.worst_gap >= 0) rj["worst_anchor_info_gap"] = rep.worst_gap;
    reps.push_back(rj);
  }
  const auto updates = log.final_updates();
  return {{"config", to_json(log.config)},
          {"seeds", {{"master_seed", log.config.master_seed}, {"replicate_scene_seeds", seeds}}},
          {"aggregates",
           {{"initial_error_norm", agg_json(aggregate(initial))},
            {"final_error_norm", agg_json(log.final_error())},
            {"updates_cum", agg_json(updates)},
            {"updates_per_step", updates.mean / static_cast<double>(log.config.steps)},
            {"zero_neighbor_fraction", log.zero_neighbor_fraction()}}},
          {"replicates", reps},
          {"warnings", log.warnings}};
}

void emit_outputs(const MetricsLog& log, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
  write_file(dir / "trace.csv", trace_csv(log));
  write_file(dir / "summary.json", summary_json(log).dump(2) + "\n");
  write_file(dir / "histogram.csv", histogram_csv(log));
}

}  // namespace baryloc::harness
