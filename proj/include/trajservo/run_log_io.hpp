#pragma once

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "trajservo/error.hpp"
#include "trajservo/sim_engine.hpp"

namespace trajservo {

/// Shortest round-trip is not required anywhere; every float leaves the
/// program with nine significant digits.
inline std::string fmt9(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return buf;
}

inline double round9(double x) { return std::stod(fmt9(x)); }

inline constexpr const char* kRunLogHeader =
    "t,x_true,y_true,theta_true,x_ref,y_ref,theta_ref,x_est,y_est,theta_est,nu_cmd,omega_cmd,n_features,"
    "segment_idx,residual_norm,event";

/// Step rows followed by `# key=value` trailer lines.
inline void write_run_log(std::ostream& os, const RunLog& log) {
  os << kRunLogHeader << '\n';
  for (const auto& r : log.steps) {
    os << fmt9(r.t) << ',' << fmt9(r.true_pose.x()) << ',' << fmt9(r.true_pose.y()) << ','
       << fmt9(r.true_pose.theta()) << ',' << fmt9(r.ref_pose.x()) << ',' << fmt9(r.ref_pose.y()) << ','
       << fmt9(r.ref_pose.theta()) << ',' << fmt9(r.est_pose.x()) << ',' << fmt9(r.est_pose.y()) << ','
       << fmt9(r.est_pose.theta()) << ',' << fmt9(r.command.nu) << ',' << fmt9(r.command.omega) << ','
       << r.n_features << ',' << r.segment_idx << ',' << fmt9(r.residual_norm) << ',' << to_string(r.event) << '\n';
  }
  os << "# completed_fraction=" << fmt9(log.completed_fraction) << '\n';
  os << "# termination=" << to_string(log.termination) << '\n';
  os << "# pose_queries=" << log.pose_queries << '\n';
  os << "# ref_terminal=" << fmt9(log.ref_terminal.x()) << ',' << fmt9(log.ref_terminal.y()) << ','
     << fmt9(log.ref_terminal.theta()) << '\n';
  os << "# ref_length=" << fmt9(log.ref_length) << '\n';
  os << "# t_end=" << fmt9(log.t_end) << '\n';
}

inline void write_run_log(const std::string& path, const RunLog& log) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::ConfigError, "cannot write " + path);
  write_run_log(os, log);
}

namespace detail {

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, sep)) out.push_back(cell);
  return out;
}

inline StepEvent parse_event(const std::string& s) {
  for (StepEvent e : {StepEvent::none, StepEvent::replenish, StepEvent::starvation, StepEvent::degenerate}) {
    if (s == to_string(e)) return e;
  }
  throw Error(ErrorCode::ConfigError, "unknown event '" + s + "'");
}

}  // namespace detail

inline RunLog read_run_log(std::istream& is) {
  RunLog log;
  std::string line;
  if (!std::getline(is, line) || line != kRunLogHeader) throw Error(ErrorCode::ConfigError, "bad run-log header");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line.rfind("# ", 0) == 0) {
      const auto eq = line.find('=');
      const std::string key = line.substr(2, eq - 2);
      const std::string value = line.substr(eq + 1);
      if (key == "completed_fraction") log.completed_fraction = std::stod(value);
      else if (key == "termination") log.termination = value == "completed" ? Termination::completed : Termination::feature_starvation;
      else if (key == "pose_queries") log.pose_queries = std::stoi(value);
      else if (key == "ref_length") log.ref_length = std::stod(value);
      else if (key == "t_end") log.t_end = std::stod(value);
      else if (key == "ref_terminal") {
        const auto v = detail::split(value, ',');
        log.ref_terminal = Pose2(std::stod(v.at(0)), std::stod(v.at(1)), std::stod(v.at(2)));
      }
      continue;
    }
    const auto c = detail::split(line, ',');
    if (c.size() != 16) throw Error(ErrorCode::ConfigError, "run-log row has wrong column count");
    StepRecord r;
    r.t = std::stod(c[0]);
    r.true_pose = Pose2(std::stod(c[1]), std::stod(c[2]), std::stod(c[3]));
    r.ref_pose = Pose2(std::stod(c[4]), std::stod(c[5]), std::stod(c[6]));
    r.est_pose = Pose2(std::stod(c[7]), std::stod(c[8]), std::stod(c[9]));
    r.command = {std::stod(c[10]), std::stod(c[11])};
    r.n_features = std::stoi(c[12]);
    r.segment_idx = std::stoi(c[13]);
    r.residual_norm = std::stod(c[14]);
    r.event = detail::parse_event(c[15]);
    log.steps.push_back(r);
  }
  return log;
}

inline RunLog read_run_log(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::ConfigError, "cannot read " + path);
  return read_run_log(is);
}

}  // namespace trajservo
