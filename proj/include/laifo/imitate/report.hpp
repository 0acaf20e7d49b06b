#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace laifo::imitate {

struct TrainRow {
  std::int64_t frame = 0;
  std::int64_t episode = 0;
  double eval_return = 0.0;
  double disc_loss = std::numeric_limits<double>::quiet_NaN();
  double critic_loss = std::numeric_limits<double>::quiet_NaN();
  double actor_loss = std::numeric_limits<double>::quiet_NaN();
  double imit_reward_mean = std::numeric_limits<double>::quiet_NaN();
  double wall_clock_s = 0.0;
  std::uint64_t seed = 0;
};

struct TrainReport {
  std::vector<TrainRow> rows;

  double final_return() const {
    if (rows.empty()) throw std::logic_error("TrainReport: no evaluation rows");
    return rows.back().eval_return;
  }
  /// First evaluated frame with return >= threshold, or -1 when never reached.
  std::int64_t frames_to(double threshold) const {
    for (const auto& r : rows) {
      if (r.eval_return >= threshold) return r.frame;
    }
    return -1;
  }
};

inline constexpr const char* kMetricsHeader =
    "frame,episode,eval_return,disc_loss,critic_loss,actor_loss,imit_reward_mean,wall_clock_s,seed";

namespace detail {

inline std::string fmt(double v) {
  if (std::isnan(v)) return "NA";
  std::ostringstream o;
  o << std::setprecision(10) << v;
  return o.str();
}

inline double parse_cell(const std::string& s) {
  if (s == "NA" || s.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::stod(s);
}

}  // namespace detail

inline std::string metrics_line(const TrainRow& r) {
  std::ostringstream o;
  o << r.frame << ',' << r.episode << ',' << detail::fmt(r.eval_return) << ',' << detail::fmt(r.disc_loss) << ','
    << detail::fmt(r.critic_loss) << ',' << detail::fmt(r.actor_loss) << ',' << detail::fmt(r.imit_reward_mean)
    << ',' << std::fixed << std::setprecision(3) << r.wall_clock_s << ',' << r.seed;
  return o.str();
}

/// Streams rows into a metrics CSV as they are produced.
class MetricsWriter {
 public:
  explicit MetricsWriter(const std::string& path) : out_(path, std::ios::trunc) {
    if (!out_) throw std::runtime_error("cannot open metrics file '" + path + "'");
    out_ << kMetricsHeader << '\n';
    out_.flush();
  }
  void append(const TrainRow& r) {
    out_ << metrics_line(r) << '\n';
    out_.flush();
  }

 private:
  std::ofstream out_;
};

inline void write_metrics(const TrainReport& report, const std::string& path) {
  MetricsWriter w(path);
  for (const auto& r : report.rows) w.append(r);
}

inline TrainReport read_metrics(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open metrics file '" + path + "'");
  std::string line;
  std::getline(in, line);
  if (line != kMetricsHeader) throw std::runtime_error("'" + path + "' does not have the metrics header");
  TrainReport rep;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cells.push_back(c);
    if (cells.size() != 9) throw std::runtime_error("malformed metrics row in '" + path + "'");
    TrainRow r;
    r.frame = std::stoll(cells[0]);
    r.episode = std::stoll(cells[1]);
    r.eval_return = detail::parse_cell(cells[2]);
    r.disc_loss = detail::parse_cell(cells[3]);
    r.critic_loss = detail::parse_cell(cells[4]);
    r.actor_loss = detail::parse_cell(cells[5]);
    r.imit_reward_mean = detail::parse_cell(cells[6]);
    r.wall_clock_s = detail::parse_cell(cells[7]);
    r.seed = std::stoull(cells[8]);
    rep.rows.push_back(r);
  }
  return rep;
}

}  // namespace laifo::imitate
