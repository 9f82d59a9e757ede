#pragma once

#include <cmath>
#include <numbers>

namespace trajservo {

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
  double r = std::remainder(a, 2.0 * std::numbers::pi);
  if (r <= -std::numbers::pi) r += 2.0 * std::numbers::pi;
  return r;
}

/// Planar rigid transform (x, y, theta). The heading is kept in (-pi, pi].
class Pose2 {
 public:
  constexpr Pose2() = default;
  Pose2(double x, double y, double theta) : x_(x), y_(y), theta_(wrap_angle(theta)) {}

  static Pose2 identity() { return {}; }

  double x() const { return x_; }
  double y() const { return y_; }
  double theta() const { return theta_; }

  /// Applies the transform to a planar point.
  void transform_point(double px, double py, double& ox, double& oy) const {
    const double c = std::cos(theta_), s = std::sin(theta_);
    ox = x_ + c * px - s * py;
    oy = y_ + s * px + c * py;
  }

 private:
  double x_ = 0.0;
  double y_ = 0.0;
  double theta_ = 0.0;
};

/// Unicycle body velocity: forward speed and yaw rate. The lateral component
/// is identically zero.
struct Twist2 {
  double nu = 0.0;
  double omega = 0.0;
};

/// Planar placement of an upright camera on the robot. The optical axis is
/// parallel to the ground and points along `yaw` in the robot frame; `height`
/// is the optical centre's height above the ground plane.
struct MountPose {
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;
  double height = 0.0;

  Pose2 planar() const { return {x, y, yaw}; }
};

/// Planar twist of the camera expressed in its own frame: translation along
/// the optical axis, translation to the camera's left, and yaw rate.
struct PlanarCameraTwist {
  double v_forward = 0.0;
  double v_left = 0.0;
  double omega = 0.0;
};

/// Coordinates of inverse(g) * g_star.
struct PoseError {
  double x_tilde = 0.0;
  double y_tilde = 0.0;
  double theta_tilde = 0.0;
};

inline Pose2 compose(const Pose2& a, const Pose2& b) {
  const double c = std::cos(a.theta()), s = std::sin(a.theta());
  return {a.x() + c * b.x() - s * b.y(), a.y() + s * b.x() + c * b.y(), a.theta() + b.theta()};
}

inline Pose2 inverse(const Pose2& g) {
  const double c = std::cos(g.theta()), s = std::sin(g.theta());
  return {-c * g.x() - s * g.y(), s * g.x() - c * g.y(), -g.theta()};
}

/// Exact exponential-map solution of the unicycle over `dt` with constant
/// controls.
inline Pose2 integrate_unicycle(const Pose2& g, const Twist2& u, double dt) {
  const double dth = u.omega * dt;
  double fwd = 0.0;
  double lat = 0.0;
  if (std::abs(dth) < 1e-8) {
    // second-order expansion of sin(dth)/dth and (1-cos(dth))/dth
    fwd = u.nu * dt * (1.0 - dth * dth / 6.0);
    lat = u.nu * dt * (0.5 * dth);
  } else {
    const double r = u.nu / u.omega;
    const double half = std::sin(0.5 * dth);
    fwd = r * std::sin(dth);
    lat = 2.0 * r * half * half;  // 1 - cos(dth) without cancellation
  }
  return compose(g, Pose2{fwd, lat, dth});
}

inline PoseError pose_error(const Pose2& g, const Pose2& g_star) {
  const Pose2 e = compose(inverse(g), g_star);
  return {e.x(), e.y(), e.theta()};
}

/// Inverse adjoint of the mount applied to the embedded robot twist
/// (nu, 0, omega).
inline PlanarCameraTwist robot_twist_to_camera(const Twist2& u, const MountPose& mount) {
  // velocity of the camera origin in the robot frame (lever arm)
  const double vx = u.nu - u.omega * mount.y;
  const double vy = u.omega * mount.x;
  const double c = std::cos(mount.yaw), s = std::sin(mount.yaw);
  return {c * vx + s * vy, -s * vx + c * vy, u.omega};
}

inline PlanarCameraTwist camera_twist_per_nu(const MountPose& mount) {
  return robot_twist_to_camera({1.0, 0.0}, mount);
}

inline PlanarCameraTwist camera_twist_per_omega(const MountPose& mount) {
  return robot_twist_to_camera({0.0, 1.0}, mount);
}

}  // namespace trajservo
