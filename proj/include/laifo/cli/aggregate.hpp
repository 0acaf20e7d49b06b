#pragma once

// Cross-run summaries: one row per run directory, then per-algorithm
// statistics of the final normalized return.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "laifo/imitate/report.hpp"

namespace laifo::cli {

class ReportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr const char* kAggregateHeader = "algo,env,seed,final_return,normalized_return,frames_to_75pct";

struct RunSummary {
  std::string algo;
  std::string env;
  std::uint64_t seed = 0;
  double final_return = 0.0;
  double normalized_return = 0.0;
  std::int64_t frames_to_threshold = -1;  ///< -1 when never reached
};

/// Returns normalized by the expert score; frames-to-threshold counts the
/// first eval row at or above fraction × score.
inline RunSummary summarize(const std::string& algo, const std::string& env, std::uint64_t seed,
                            const imitate::TrainReport& rep, double expert_score, double fraction = 0.75) {
  if (rep.rows.empty()) throw ReportError("run " + algo + "/" + env + " has no metrics rows");
  RunSummary s;
  s.algo = algo;
  s.env = env;
  s.seed = seed;
  s.final_return = rep.final_return();
  s.normalized_return = s.final_return / expert_score;
  s.frames_to_threshold = rep.frames_to(fraction * expert_score);
  return s;
}

inline nlohmann::json read_json(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw ReportError("cannot open '" + p.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ReportError("malformed '" + p.string() + "': " + e.what());
  }
}

/// Reads run.json, expert_score.json and metrics.csv from a run directory.
inline RunSummary summarize_run_dir(const std::filesystem::path& dir, double fraction = 0.75) {
  if (!std::filesystem::exists(dir / "expert_score.json")) {
    throw ReportError("missing expert score: " + (dir / "expert_score.json").string());
  }
  if (!std::filesystem::exists(dir / "metrics.csv")) throw ReportError("missing metrics: " + (dir / "metrics.csv").string());
  const auto run = read_json(dir / "run.json");
  const auto score = read_json(dir / "expert_score.json");
  if (!score.contains("score") || !score["score"].is_number()) {
    throw ReportError("missing expert score: " + (dir / "expert_score.json").string() + " has no numeric 'score'");
  }
  const auto rep = imitate::read_metrics((dir / "metrics.csv").string());
  return summarize(run.at("algo").get<std::string>(), run.at("env").get<std::string>(),
                   run.at("seed").get<std::uint64_t>(), rep, score["score"].get<double>(), fraction);
}

inline std::string aggregate_line(const RunSummary& s) {
  std::ostringstream o;
  o.precision(10);
  o << s.algo << ',' << s.env << ',' << s.seed << ',' << s.final_return << ',' << s.normalized_return << ',';
  if (s.frames_to_threshold < 0) {
    o << "NA";
  } else {
    o << s.frames_to_threshold;
  }
  return o.str();
}

inline void write_aggregate(std::ostream& out, const std::vector<RunSummary>& runs) {
  out << kAggregateHeader << "\n";
  for (const auto& r : runs) out << aggregate_line(r) << "\n";
}

struct GroupStats {
  std::string algo;
  std::string env;
  int runs = 0;
  double mean = 0.0;
  double stddev = 0.0;  ///< sample standard deviation, 0 for a single run
  double median = 0.0;
  int reached = 0;      ///< runs that crossed the threshold
};

inline double median_of(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of an empty set");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Groups by (algo, env) and summarizes the normalized final returns.
inline std::vector<GroupStats> group_stats(const std::vector<RunSummary>& runs) {
  std::map<std::pair<std::string, std::string>, std::vector<const RunSummary*>> groups;
  for (const auto& r : runs) groups[{r.algo, r.env}].push_back(&r);
  std::vector<GroupStats> out;
  for (const auto& [key, members] : groups) {
    GroupStats g;
    g.algo = key.first;
    g.env = key.second;
    g.runs = static_cast<int>(members.size());
    std::vector<double> v;
    for (const auto* m : members) {
      v.push_back(m->normalized_return);
      if (m->frames_to_threshold >= 0) ++g.reached;
    }
    for (double x : v) g.mean += x;
    g.mean /= g.runs;
    if (g.runs > 1) {
      double ss = 0.0;
      for (double x : v) ss += (x - g.mean) * (x - g.mean);
      g.stddev = std::sqrt(ss / (g.runs - 1));
    }
    g.median = median_of(v);
    out.push_back(g);
  }
  return out;
}

inline void write_group_stats(std::ostream& out, const std::vector<GroupStats>& groups) {
  out << "algo,env,runs,mean_normalized_return,stddev_normalized_return,median_normalized_return,runs_reaching_75pct\n";
  out.precision(10);
  for (const auto& g : groups) {
    out << g.algo << ',' << g.env << ',' << g.runs << ',' << g.mean << ',' << g.stddev << ',' << g.median << ','
        << g.reached << "\n";
  }
}

}  // namespace laifo::cli
