#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Core>

#include "trajservo/camera.hpp"
#include "trajservo/error.hpp"
#include "trajservo/feature_trajectory.hpp"
#include "trajservo/reference_trajectory.hpp"
#include "trajservo/se2.hpp"

namespace trajservo {

struct GainConfig {
  double lambda = 3.0;    // image error gain, 1/s
  double k_theta = 2.0;   // 1/s
  double k_y = 4.0;       // 1/(m s)
  double pinv_eps = 1e-6; // floor on |L2|^2
  int min_features = 2;
  double omega_max = 1.5; // rad/s

  void validate() const {
    if (!(lambda > 0.0) || !(k_theta > 0.0) || !(k_y > 0.0) || !(pinv_eps > 0.0) || min_features < 2 ||
        !(omega_max > 0.0)) {
      throw Error(ErrorCode::ConfigError, "gains must be positive and min_features >= 2");
    }
  }
};

struct Command {
  double nu = 0.0;
  double omega = 0.0;
};

/// Angular rate from an image-space servo solve plus the least-squares
/// residual |L2*omega - rhs| before saturation.
struct ServoOutput {
  Command command;
  double residual_norm = 0.0;
};

inline double saturate(double omega, double limit) { return std::clamp(omega, -limit, limit); }

/// Steering law: nu follows the reference and omega is the least-squares
/// solution of L2*omega = L1*(q*,s*)*nu* - L1*(q,s)*nu + L2*(q*,s*)*omega* - lambda*e.
inline ServoOutput ts_control(const CorrespondenceSet& corr, double nu_star, double omega_star, const GainConfig& gains,
                              const CameraIntrinsics& k, const MountPose& mount) {
  if (corr.size() < static_cast<std::size_t>(gains.min_features)) {
    throw Error(ErrorCode::FeatureStarvation, "too few correspondences for servoing");
  }
  const PlanarCameraTwist dnu = camera_twist_per_nu(mount);
  const PlanarCameraTwist dom = camera_twist_per_omega(mount);
  const Eigen::Vector3d znu(dnu.v_forward, dnu.v_left, dnu.omega);
  const Eigen::Vector3d zom(dom.v_forward, dom.v_left, dom.omega);
  const double nu = nu_star;

  const auto n = static_cast<Eigen::Index>(corr.size());
  Eigen::VectorXd L2(2 * n), rhs(2 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Correspondence& c = corr[static_cast<std::size_t>(i)];
    const CameraPoint q = c.current.point(k);
    const ImageJacobian L = image_jacobian(q, c.current.pixel, k);
    const ImageJacobian Ld = image_jacobian(c.desired.q, c.desired.s, k);
    const Eigen::Vector2d e(c.current.pixel.u - c.desired.s.u, c.current.pixel.v - c.desired.s.v);
    L2.segment<2>(2 * i) = L * zom;
    rhs.segment<2>(2 * i) = Ld * znu * nu_star - L * znu * nu + Ld * zom * omega_star - gains.lambda * e;
  }
  const double norm2 = L2.squaredNorm();
  if (norm2 < gains.pinv_eps) throw Error(ErrorCode::DegenerateJacobian, "angular column is degenerate");
  const double omega = L2.dot(rhs) / norm2;
  return {{nu, saturate(omega, gains.omega_max)}, (L2 * omega - rhs).norm()};
}

/// Pose-feedback law with feedforward; only the lateral and heading errors
/// are fed back.
inline Command pose_control(const Pose2& pose_feedback, const Pose2& g_star, double nu_star, double omega_star,
                            const GainConfig& gains) {
  const PoseError err = pose_error(pose_feedback, g_star);
  const double omega = gains.k_theta * err.theta_tilde + gains.k_y * err.y_tilde + omega_star;
  return {nu_star, saturate(omega, gains.omega_max)};
}

/// Desired features regenerated every step: the features of the frame the
/// pose estimate belongs to are lifted through it and reprojected from the
/// reference pose at t + lookahead, then the steering law runs against the
/// current features matched by id.
inline ServoOutput its_control(std::span<const TrackedFeature> current, std::span<const TrackedFeature> lift_frame,
                               const Pose2& pose_estimate, const ReferenceTrajectory& traj, double t, double lookahead,
                               const GainConfig& gains, const CameraIntrinsics& k, const MountPose& mount) {
  if (current.size() < static_cast<std::size_t>(gains.min_features)) {
    throw Error(ErrorCode::FeatureStarvation, "too few tracked features");
  }
  const ReferenceState now = traj.sample(t);
  const ReferenceState next = traj.sample(t + lookahead);
  const CameraView view(next.pose, mount);
  std::vector<DesiredFeature> desired;
  desired.reserve(lift_frame.size());
  for (const auto& f : lift_frame) {
    const CameraPoint q = view(to_world_frame(f.point(k), pose_estimate, mount));
    if (!is_visible(q, k)) continue;
    const PixelPoint s = project(q, k);
    desired.push_back({f.id, s, q, feedforward_rate(q, s, next.nu_star, next.omega_star, k, mount)});
  }
  std::sort(desired.begin(), desired.end(), [](const DesiredFeature& a, const DesiredFeature& b) { return a.id < b.id; });
  return ts_control(correspondences(current, desired), now.nu_star, now.omega_star, gains, k, mount);
}

inline ServoOutput its_control(std::span<const TrackedFeature> current, const Pose2& pose_estimate,
                               const ReferenceTrajectory& traj, double t, double lookahead, const GainConfig& gains,
                               const CameraIntrinsics& k, const MountPose& mount) {
  return its_control(current, current, pose_estimate, traj, t, lookahead, gains, k, mount);
}

}  // namespace trajservo
