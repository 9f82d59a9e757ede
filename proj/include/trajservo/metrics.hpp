#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include "trajservo/error.hpp"
#include "trajservo/reference_trajectory.hpp"
#include "trajservo/se2.hpp"
#include "trajservo/sim_engine.hpp"

namespace trajservo {

/// Mean |y~| in cm, with y~ the body-frame lateral error against the reference
/// pose at the same instant.
inline double compute_ale(const RunLog& log) {
  if (log.steps.empty()) throw Error(ErrorCode::EmptyLog, "ALE of an empty log");
  double sum = 0.0;
  for (const auto& r : log.steps) sum += std::abs(pose_error(r.true_pose, r.ref_pose).y_tilde);
  return 100.0 * sum / static_cast<double>(log.steps.size());
}

/// Mean distance in cm from each true position to the nearest point of the
/// sampled reference path.
inline double compute_ale_nearest(const RunLog& log, const ReferenceTrajectory& traj) {
  if (log.steps.empty()) throw Error(ErrorCode::EmptyLog, "ALE of an empty log");
  const auto& s = traj.samples();
  double sum = 0.0;
  for (const auto& r : log.steps) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < s.size(); ++i) {
      const double ax = s[i].pose.x(), ay = s[i].pose.y();
      const double dx = s[i + 1].pose.x() - ax, dy = s[i + 1].pose.y() - ay;
      const double len2 = dx * dx + dy * dy;
      double a = len2 > 0.0 ? ((r.true_pose.x() - ax) * dx + (r.true_pose.y() - ay) * dy) / len2 : 0.0;
      a = std::clamp(a, 0.0, 1.0);
      best = std::min(best, std::hypot(r.true_pose.x() - ax - a * dx, r.true_pose.y() - ay - a * dy));
    }
    sum += best;
  }
  return 100.0 * sum / static_cast<double>(log.steps.size());
}

struct TerminalError {
  double te_cm = 0.0;
  bool incomplete = false;
};

inline TerminalError compute_te(const RunLog& log) {
  if (log.steps.empty()) throw Error(ErrorCode::EmptyLog, "TE of an empty log");
  const Pose2& p = log.steps.back().true_pose;
  return {100.0 * std::hypot(p.x() - log.ref_terminal.x(), p.y() - log.ref_terminal.y()),
          log.termination != Termination::completed};
}

/// Mean of |(u_k - u_{k-1}) / dt| over the N-1 consecutive command pairs.
inline double compute_smoothness(const RunLog& log) {
  if (log.steps.size() < 2) throw Error(ErrorCode::EmptyLog, "smoothness needs two steps");
  double sum = 0.0;
  for (std::size_t k = 1; k < log.steps.size(); ++k) {
    const auto& a = log.steps[k - 1];
    const auto& b = log.steps[k];
    const double dt = b.t - a.t;
    sum += std::hypot(b.command.nu - a.command.nu, b.command.omega - a.command.omega) / dt;
  }
  return sum / static_cast<double>(log.steps.size() - 1);
}

inline double traveled_distance(const RunLog& log) {
  double d = 0.0;
  for (std::size_t k = 1; k < log.steps.size(); ++k) {
    const Pose2& a = log.steps[k - 1].true_pose;
    const Pose2& b = log.steps[k].true_pose;
    d += std::hypot(b.x() - a.x(), b.y() - a.y());
  }
  return d;
}

inline int replenish_count(const RunLog& log) {
  int n = 0;
  for (const auto& r : log.steps) n += r.event == StepEvent::replenish;
  return n;
}

/// Replenishment events per meter of true travel.
inline double compute_replenish_rate(const RunLog& log) {
  if (log.steps.empty()) throw Error(ErrorCode::EmptyLog, "replenish rate of an empty log");
  const double d = traveled_distance(log);
  if (!(d > 0.0)) throw Error(ErrorCode::InvalidParams, "no distance traveled");
  return replenish_count(log) / d;
}

inline double compute_pose_query_rate(const RunLog& log) {
  if (log.steps.empty()) throw Error(ErrorCode::EmptyLog, "pose query rate of an empty log");
  const double d = traveled_distance(log);
  if (!(d > 0.0)) throw Error(ErrorCode::InvalidParams, "no distance traveled");
  return log.pose_queries / d;
}

}  // namespace trajservo
