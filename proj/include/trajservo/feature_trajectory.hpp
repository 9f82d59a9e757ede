#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "trajservo/camera.hpp"
#include "trajservo/error.hpp"
#include "trajservo/reference_trajectory.hpp"
#include "trajservo/slam_emulator.hpp"

namespace trajservo {

/// Desired state of one feature at one instant.
struct DesiredFeature {
  int id = 0;
  PixelPoint s;
  CameraPoint q;
  Eigen::Vector2d s_dot = Eigen::Vector2d::Zero();
};

/// Everything a segment build needs besides the observations and the pose.
struct SegmentContext {
  const ReferenceTrajectory* trajectory = nullptr;
  CameraIntrinsics camera;
  MountPose mount;
  double sample_dt = 1.0 / 30.0;
  double horizon_end = 0.0;  // last sample time of every built segment
};

/// Pixel rate a static point would show for the given robot twist.
inline Eigen::Vector2d feedforward_rate(const CameraPoint& q, const PixelPoint& s, double nu, double omega,
                                        const CameraIntrinsics& k, const MountPose& mount) {
  const ImageJacobian L = image_jacobian(q, s, k);
  const PlanarCameraTwist z = robot_twist_to_camera({nu, omega}, mount);
  return L * Eigen::Vector3d(z.v_forward, z.v_left, z.omega);
}

/// Desired feature tracks over the window [t_start, t_end_planned], sampled on
/// a uniform grid. A feature's track stops at the first sample where it is
/// predicted to leave the field of view.
class FeatureTrajSegment {
 public:
  FeatureTrajSegment(int index, double t_start, double t_end_planned, double dt)
      : index_(index), t_start_(t_start), t_end_planned_(t_end_planned), dt_(dt) {}

  int index() const { return index_; }
  double t_start() const { return t_start_; }
  double t_end_planned() const { return t_end_planned_; }
  double sample_dt() const { return dt_; }

  std::size_t sample_count() const {
    return static_cast<std::size_t>(std::ceil((t_end_planned_ - t_start_) / dt_ - 1e-9)) + 1;
  }
  double sample_time(std::size_t k) const {
    return std::min(t_start_ + static_cast<double>(k) * dt_, t_end_planned_);
  }

  const std::map<int, std::vector<DesiredFeature>>& tracks() const { return tracks_; }
  std::vector<DesiredFeature>& track(int id) { return tracks_[id]; }

  /// Interpolated desired states of the features alive at t, ascending id.
  std::vector<DesiredFeature> desired_state(double t) const {
    constexpr double eps = 1e-9;
    if (t < t_start_ - eps || t > t_end_planned_ + eps) {
      throw Error(ErrorCode::OutOfSegmentWindow, "time outside segment window");
    }
    const std::size_t n = sample_count();
    const double x = std::max(0.0, (t - t_start_) / dt_);
    auto k = static_cast<std::size_t>(std::floor(x + eps));
    k = std::min(k, n - 1);
    const double t0 = sample_time(k);
    const double span = k + 1 < n ? sample_time(k + 1) - t0 : 1.0;
    double a = (t - t0) / span;
    if (std::abs(a) < eps) a = 0.0;

    std::vector<DesiredFeature> out;
    out.reserve(tracks_.size());
    for (const auto& [id, samples] : tracks_) {
      if (a == 0.0) {
        if (samples.size() > k) out.push_back(samples[k]);
        continue;
      }
      if (samples.size() <= k + 1) continue;
      const DesiredFeature& p = samples[k];
      const DesiredFeature& q = samples[k + 1];
      DesiredFeature d;
      d.id = id;
      d.s = {p.s.u + a * (q.s.u - p.s.u), p.s.v + a * (q.s.v - p.s.v)};
      d.q = {p.q.p + a * (q.q.p - p.q.p)};
      d.s_dot = p.s_dot + a * (q.s_dot - p.s_dot);
      out.push_back(d);
    }
    return out;
  }

 private:
  int index_;
  double t_start_;
  double t_end_planned_;
  double dt_;
  std::map<int, std::vector<DesiredFeature>> tracks_;
};

/// Lifts each observation to the world through `pose_estimate`, then
/// reprojects it from the reference camera pose at every sample time.
inline FeatureTrajSegment init_segment(std::span<const TrackedFeature> observations, const Pose2& pose_estimate,
                                       const SegmentContext& ctx, double t_start, int index = 0) {
  if (observations.empty()) throw Error(ErrorCode::EmptyFeatureSet, "cannot build a segment without features");
  if (!(t_start < ctx.horizon_end)) throw Error(ErrorCode::InvalidParams, "segment window is empty");
  const CameraIntrinsics& k = ctx.camera;

  struct Lifted {
    int id;
    Eigen::Vector3d world;
    bool alive;
  };
  std::vector<Lifted> lifted;
  lifted.reserve(observations.size());
  for (const auto& obs : observations) {
    lifted.push_back({obs.id, to_world_frame(obs.point(k), pose_estimate, ctx.mount), true});
  }

  FeatureTrajSegment seg(index, t_start, ctx.horizon_end, ctx.sample_dt);
  const std::size_t n = seg.sample_count();
  std::vector<std::vector<DesiredFeature>*> slots;
  slots.reserve(lifted.size());
  for (const auto& l : lifted) {
    auto* track = &seg.track(l.id);
    track->reserve(n);
    slots.push_back(track);
  }

  std::size_t alive = lifted.size();
  for (std::size_t i = 0; i < n && alive > 0; ++i) {
    const double t = seg.sample_time(i);
    const ReferenceState ref = ctx.trajectory->sample(t);
    const CameraView view(ref.pose, ctx.mount);
    for (std::size_t j = 0; j < lifted.size(); ++j) {
      Lifted& l = lifted[j];
      if (!l.alive) continue;
      const CameraPoint q = view(l.world);
      if (!is_visible(q, k)) {
        l.alive = false;
        --alive;
        continue;
      }
      const PixelPoint s = project(q, k);
      slots[j]->push_back({l.id, s, q, feedforward_rate(q, s, ref.nu_star, ref.omega_star, k, ctx.mount)});
    }
  }
  return seg;
}

/// Pixel and depth of one feature, the state of the feature ODE.
struct FeatureOdeState {
  PixelPoint s;
  double depth = 0.0;
};

/// Time derivative of a static point's pixel and depth under the reference
/// twist: the pixel follows the image Jacobian, the depth closes at the
/// forward speed plus the rotation of the lateral offset.
inline FeatureOdeState feature_ode_rate(const FeatureOdeState& x, double nu, double omega, const CameraIntrinsics& k,
                                        const MountPose& mount) {
  const PixelPoint& s = x.s;
  const CameraPoint q = back_project(s, x.depth, k);
  const Eigen::Vector2d sd = feedforward_rate(q, s, nu, omega, k, mount);
  const PlanarCameraTwist z = robot_twist_to_camera({nu, omega}, mount);
  return {{sd.x(), sd.y()}, -z.v_forward - z.omega * q.p.x()};
}

/// Classical RK4 integration of the feature ODE along the reference from t0 to
/// t1 with step at most h. Steps end on reference sample times, where the
/// piecewise-constant twist jumps.
inline FeatureOdeState integrate_feature_ode(FeatureOdeState x, const ReferenceTrajectory& traj, double t0, double t1,
                                             double h, const CameraIntrinsics& k, const MountPose& mount) {
  if (!(h > 0.0)) throw Error(ErrorCode::InvalidParams, "step must be positive");
  auto add = [](const FeatureOdeState& a, const FeatureOdeState& d, double c) {
    return FeatureOdeState{{a.s.u + c * d.s.u, a.s.v + c * d.s.v}, a.depth + c * d.depth};
  };
  const auto& samples = traj.samples();
  const double grid = samples.size() > 1 ? samples[1].t - samples[0].t : t1 - t0;
  double t = t0;
  while (t < t1 - 1e-12) {
    const double next_knot = (std::floor(t / grid + 1e-9) + 1.0) * grid;
    const double dt = std::min({h, t1 - t, next_knot - t});
    // the twist of the interval being crossed, held for all four stages
    const ReferenceState r = traj.sample(t);
    auto rate = [&](const FeatureOdeState& s) { return feature_ode_rate(s, r.nu_star, r.omega_star, k, mount); };
    const FeatureOdeState k1 = rate(x);
    const FeatureOdeState k2 = rate(add(x, k1, 0.5 * dt));
    const FeatureOdeState k3 = rate(add(x, k2, 0.5 * dt));
    const FeatureOdeState k4 = rate(add(x, k3, dt));
    x = {{x.s.u + dt / 6.0 * (k1.s.u + 2.0 * k2.s.u + 2.0 * k3.s.u + k4.s.u),
          x.s.v + dt / 6.0 * (k1.s.v + 2.0 * k2.s.v + 2.0 * k3.s.v + k4.s.v)},
         x.depth + dt / 6.0 * (k1.depth + 2.0 * k2.depth + 2.0 * k3.depth + k4.depth)};
    t += dt;
  }
  return x;
}

struct Correspondence {
  int id = 0;
  TrackedFeature current;
  DesiredFeature desired;
};

using CorrespondenceSet = std::vector<Correspondence>;

/// Id-matched pairs of current and desired features, ascending id.
inline CorrespondenceSet correspondences(std::span<const TrackedFeature> current,
                                         std::span<const DesiredFeature> desired) {
  CorrespondenceSet out;
  auto it = desired.begin();
  for (const auto& c : current) {
    it = std::lower_bound(it, desired.end(), c.id, [](const DesiredFeature& d, int id) { return d.id < id; });
    if (it == desired.end()) break;
    if (it->id == c.id) out.push_back({c.id, c, *it});
  }
  return out;
}

inline CorrespondenceSet correspondences(std::span<const TrackedFeature> current, const FeatureTrajSegment& seg,
                                         double t) {
  const std::vector<DesiredFeature> desired = seg.desired_state(t);
  return correspondences(current, desired);
}

inline bool needs_replenish(std::size_t n_features, int tau_fr) {
  if (tau_fr < 2) throw Error(ErrorCode::InvalidParams, "replenishment threshold must be at least 2");
  return n_features < static_cast<std::size_t>(tau_fr);
}

/// Builds segment i+1 from the full current feature pool and the pose
/// estimate; its first sample is at t_now.
inline FeatureTrajSegment replenish(const FeatureTrajSegment& active, std::span<const TrackedFeature> current,
                                    const Pose2& pose_estimate, const SegmentContext& ctx, double t_now) {
  if (current.size() < 2) throw Error(ErrorCode::FeatureStarvation, "fewer than two features to replenish from");
  return init_segment(current, pose_estimate, ctx, t_now, active.index() + 1);
}

/// Closed window of a finished segment, or the open window of the active one.
struct SegmentWindow {
  int index = 0;
  double t_start = 0.0;
  double t_end = 0.0;
};

/// Active segment plus the windows of all segments so far. Windows tile the
/// timeline: each replenishment closes the active window at the time the next
/// one opens.
class SegmentChain {
 public:
  void start(FeatureTrajSegment seg) {
    windows_.clear();
    windows_.push_back({seg.index(), seg.t_start(), seg.t_end_planned()});
    active_ = std::move(seg);
  }

  bool started() const { return !windows_.empty(); }
  const FeatureTrajSegment& active() const { return *active_; }
  const std::vector<SegmentWindow>& windows() const { return windows_; }

  /// Rebuilds the whole desired set from a feature pool and the pose
  /// estimate of the same frame, closing the active segment at t_now. A
  /// stale frame (t_frame < t_now) is lifted as it was observed.
  const FeatureTrajSegment& replenish(std::span<const TrackedFeature> pool, const Pose2& pose_estimate,
                                      const SegmentContext& ctx, double t_now, double t_frame) {
    FeatureTrajSegment seg = trajservo::replenish(*active_, pool, pose_estimate, ctx, t_frame);
    windows_.back().t_end = t_now;
    windows_.push_back({seg.index(), t_now, seg.t_end_planned()});
    active_ = std::move(seg);
    return *active_;
  }

  const FeatureTrajSegment& replenish(std::span<const TrackedFeature> current, const Pose2& pose_estimate,
                                      const SegmentContext& ctx, double t_now) {
    return replenish(current, pose_estimate, ctx, t_now, t_now);
  }

 private:
  std::optional<FeatureTrajSegment> active_;
  std::vector<SegmentWindow> windows_;
};

}  // namespace trajservo
