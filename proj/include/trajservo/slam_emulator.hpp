#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <unordered_map>
#include <vector>

#include "trajservo/camera.hpp"
#include "trajservo/error.hpp"
#include "trajservo/scene.hpp"
#include "trajservo/se2.hpp"

namespace trajservo {

/// Measurement and estimation error model of the emulated SLAM front end.
/// All-zero reproduces ground truth exactly.
struct NoiseModel {
  double pixel_sigma = 0.0;      // px
  double depth_rel_sigma = 0.0;  // fraction of the triangulated depth
  double drift_pos_rate = 0.0;   // m / sqrt(m) per axis, body frame
  double drift_yaw_rate = 0.0;   // rad / sqrt(m)
  double per_step_jitter = 0.0;  // m, white, not accumulated
  double dropout_prob = 0.0;     // per landmark per frame missed detection
  double estimate_latency = 0.0; // s, age of a pose estimate when the controller receives it

  bool is_zero() const {
    return pixel_sigma == 0.0 && depth_rel_sigma == 0.0 && drift_pos_rate == 0.0 && drift_yaw_rate == 0.0 &&
           per_step_jitter == 0.0 && dropout_prob == 0.0;
  }

  void validate() const {
    if (pixel_sigma < 0.0 || depth_rel_sigma < 0.0 || drift_pos_rate < 0.0 || drift_yaw_rate < 0.0 ||
        per_step_jitter < 0.0 || dropout_prob < 0.0 || dropout_prob >= 1.0 || estimate_latency < 0.0) {
      throw Error(ErrorCode::ConfigError, "noise model parameters must be non-negative");
    }
  }
};

enum class TrackingMode { map, frame_by_frame };

struct TrackedFeature {
  int id = 0;
  PixelPoint pixel;
  double depth = 0.0;

  CameraPoint point(const CameraIntrinsics& k) const { return back_project(pixel, depth, k); }
};

/// Persistent-id feature tracker. In map mode a feature keeps its landmark id
/// forever; in frame-by-frame mode an id lives only while the landmark is
/// detected in consecutive frames, and a re-detection gets a fresh id.
class FeatureTracker {
 public:
  explicit FeatureTracker(TrackingMode mode) : mode_(mode) {}

  TrackingMode mode() const { return mode_; }

  std::vector<TrackedFeature> track(const Pose2& true_pose, const Scene& scene, const CameraIntrinsics& k,
                                    const MountPose& mount, const NoiseModel& noise, std::mt19937_64& rng) {
    std::vector<TrackedFeature> out;
    std::unordered_map<int, int> live;
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    const Pose2 cam = camera_pose(true_pose, mount);
    const CameraView view(true_pose, mount);
    scene.for_each_near(cam.x(), cam.y(), k.max_depth, [&](const Landmark& lm) {
      const CameraPoint q = view(lm.position);
      if (!is_visible(q, k)) return;
      const double drop = unit(rng);
      const double nu = gauss(rng), nv = gauss(rng), nd = gauss(rng);
      if (drop < noise.dropout_prob) return;

      const PixelPoint exact = project(q, k);
      PixelPoint px{std::clamp(exact.u + noise.pixel_sigma * nu, 0.0, k.width),
                    std::clamp(exact.v + noise.pixel_sigma * nv, 0.0, k.height)};
      if (noise.pixel_sigma == 0.0) px = exact;
      const double disparity = exact.u - project_right(q, k).u;
      double depth = triangulate_depth(disparity, k) * (1.0 + noise.depth_rel_sigma * nd);
      depth = std::clamp(depth, k.min_depth, k.max_depth);

      int id = lm.id;
      if (mode_ == TrackingMode::frame_by_frame) {
        auto it = previous_.find(lm.id);
        id = it != previous_.end() ? it->second : next_track_id_++;
        live.emplace(lm.id, id);
      }
      out.push_back({id, px, depth});
    });

    if (mode_ == TrackingMode::frame_by_frame) previous_ = std::move(live);
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    return out;
  }

 private:
  TrackingMode mode_;
  std::unordered_map<int, int> previous_;  // landmark id -> track id
  int next_track_id_ = 0;
};

/// Dead-reckoning style pose estimate: each relative motion is corrupted by
/// a body-frame error whose variance grows with the distance travelled, so a
/// heading error bends all later position increments.
class PoseEstimator {
 public:
  explicit PoseEstimator(const Pose2& initial_true_pose) : last_true_(initial_true_pose) {}

  Pose2 estimate(const Pose2& true_pose, double distance_delta, const NoiseModel& noise, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double n_fwd = gauss(rng), n_lat = gauss(rng), n_yaw = gauss(rng);
    const double j_x = gauss(rng), j_y = gauss(rng);

    const Pose2 rel = compose(inverse(last_true_), true_pose);
    last_true_ = true_pose;
    if (noise.is_zero()) return true_pose;

    const double root = std::sqrt(std::max(distance_delta, 0.0));
    const Pose2 step_error{noise.drift_pos_rate * root * n_fwd, noise.drift_pos_rate * root * n_lat,
                           noise.drift_yaw_rate * root * n_yaw};
    error_ = compose(compose(compose(inverse(rel), error_), rel), step_error);
    const Pose2 drifted = compose(true_pose, error_);
    return {drifted.x() + noise.per_step_jitter * j_x, drifted.y() + noise.per_step_jitter * j_y, drifted.theta()};
  }

  /// Accumulated drift as a body-frame transform: estimate = truth * drift.
  const Pose2& drift() const { return error_; }

 private:
  Pose2 last_true_;
  Pose2 error_;
};

}  // namespace trajservo
