#pragma once

#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "trajservo/error.hpp"
#include "trajservo/se2.hpp"

namespace trajservo {

/// Rectified pinhole stereo pair; the left camera is the reference.
struct CameraIntrinsics {
  double f = 400.0;
  double cu = 320.0;
  double cv = 240.0;
  double width = 640.0;
  double height = 480.0;
  double baseline = 0.12;
  double min_depth = 0.3;
  double max_depth = 3.75;
  double half_fov = 0.6747409422235527;  // atan(320 / 400)

  void validate() const {
    if (!(f > 0.0) || !(baseline > 0.0) || !(min_depth > 0.0) || !(max_depth > min_depth) ||
        !(width > 0.0) || !(height > 0.0) || !(half_fov > 0.0) || !(half_fov < 1.5707963267948966)) {
      throw Error(ErrorCode::InvalidParams, "camera intrinsics out of range");
    }
  }
};

struct Landmark {
  int id = 0;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
};

/// Point in the left camera frame: x right, y down, z along the optical axis.
struct CameraPoint {
  Eigen::Vector3d p = Eigen::Vector3d::Zero();

  double depth() const { return p.z(); }
};

struct PixelPoint {
  double u = 0.0;
  double v = 0.0;
};

using ImageJacobian = Eigen::Matrix<double, 2, 3>;

/// Camera pose in the world plane for a robot at `g`.
inline Pose2 camera_pose(const Pose2& g, const MountPose& mount) {
  return compose(g, mount.planar());
}

/// World-to-camera map for one robot pose, for transforming many points.
class CameraView {
 public:
  CameraView(const Pose2& g, const MountPose& mount) : height_(mount.height) {
    const Pose2 inv = inverse(camera_pose(g, mount));
    x_ = inv.x();
    y_ = inv.y();
    c_ = std::cos(inv.theta());
    s_ = std::sin(inv.theta());
  }

  CameraPoint operator()(const Eigen::Vector3d& q_w) const {
    const double fwd = x_ + c_ * q_w.x() - s_ * q_w.y();
    const double left = y_ + s_ * q_w.x() + c_ * q_w.y();
    return {Eigen::Vector3d(-left, height_ - q_w.z(), fwd)};
  }

 private:
  double height_;
  double x_ = 0.0, y_ = 0.0, c_ = 1.0, s_ = 0.0;
};

inline CameraPoint to_camera_frame(const Eigen::Vector3d& q_w, const Pose2& g, const MountPose& mount) {
  return CameraView(g, mount)(q_w);
}

inline CameraPoint to_camera_frame(const Landmark& q_w, const Pose2& g, const MountPose& mount) {
  return to_camera_frame(q_w.position, g, mount);
}

/// Inverse of to_camera_frame.
inline Eigen::Vector3d to_world_frame(const CameraPoint& q_c, const Pose2& g, const MountPose& mount) {
  double wx = 0.0, wy = 0.0;
  camera_pose(g, mount).transform_point(q_c.p.z(), -q_c.p.x(), wx, wy);
  return {wx, wy, mount.height - q_c.p.y()};
}

inline PixelPoint project(const CameraPoint& q_c, const CameraIntrinsics& k) {
  if (!(q_c.depth() > 0.0)) throw Error(ErrorCode::NonPositiveDepth, "cannot project point");
  return {k.cu + k.f * q_c.p.x() / q_c.depth(), k.cv + k.f * q_c.p.y() / q_c.depth()};
}

/// Right-camera pixel of a left-camera point; the right camera sits
/// `baseline` along the left camera's x axis.
inline PixelPoint project_right(const CameraPoint& q_c, const CameraIntrinsics& k) {
  if (!(q_c.depth() > 0.0)) throw Error(ErrorCode::NonPositiveDepth, "cannot project point");
  return {k.cu + k.f * (q_c.p.x() - k.baseline) / q_c.depth(), k.cv + k.f * q_c.p.y() / q_c.depth()};
}

inline CameraPoint back_project(const PixelPoint& r, double depth, const CameraIntrinsics& k) {
  if (!(depth > 0.0)) throw Error(ErrorCode::NonPositiveDepth, "cannot back-project");
  return {Eigen::Vector3d((r.u - k.cu) / k.f * depth, (r.v - k.cv) / k.f * depth, depth)};
}

inline double triangulate_depth(double disparity, const CameraIntrinsics& k) {
  if (!(disparity > 0.0)) throw Error(ErrorCode::NonPositiveDisparity, "disparity must be positive");
  return k.f * k.baseline / disparity;
}

inline bool in_image(const PixelPoint& r, const CameraIntrinsics& k) {
  return r.u >= 0.0 && r.u <= k.width && r.v >= 0.0 && r.v <= k.height;
}

inline bool is_visible(const CameraPoint& q_c, const CameraIntrinsics& k) {
  const double z = q_c.depth();
  if (!(z >= k.min_depth && z <= k.max_depth)) return false;
  if (!in_image(project(q_c, k), k)) return false;
  return std::abs(q_c.p.x()) <= z * std::tan(k.half_fov);
}

/// Differential of the projected pixel with respect to the planar camera
/// twist (v_forward, v_left, omega) for a static world point. Only the depth
/// of `q_c` is used; the normalized coordinates come from the pixel.
inline ImageJacobian image_jacobian(const CameraPoint& q_c, const PixelPoint& r, const CameraIntrinsics& k) {
  const double z = q_c.depth();
  if (!(z > 0.0)) throw Error(ErrorCode::NonPositiveDepth, "image jacobian needs positive depth");
  const double xn = (r.u - k.cu) / k.f;
  const double yn = (r.v - k.cv) / k.f;
  ImageJacobian L;
  L << k.f * xn / z, k.f / z, k.f * (1.0 + xn * xn),
       k.f * yn / z, 0.0,     k.f * xn * yn;
  return L;
}

/// Interaction matrix for a camera whose optical axis is normal to the motion
/// plane, over (in-plane translation x, in-plane translation y, rotation about
/// the optical axis). `r_centered` is the pixel relative to the principal
/// point.
inline ImageJacobian overhead_image_jacobian(double depth, const PixelPoint& r_centered, double f) {
  if (!(depth > 0.0)) throw Error(ErrorCode::NonPositiveDepth, "image jacobian needs positive depth");
  ImageJacobian L;
  L << -f / depth, 0.0, r_centered.v,
       0.0, -f / depth, -r_centered.u;
  return L;
}

/// Stacked coefficient vectors of nu and omega: pixel rates = L1*nu + L2*omega.
struct JacobianBlocks {
  Eigen::VectorXd L1;
  Eigen::VectorXd L2;

  Eigen::Index rows() const { return L1.size(); }
};

inline JacobianBlocks stack_jacobian(std::span<const std::pair<CameraPoint, PixelPoint>> features,
                                     const CameraIntrinsics& k, const MountPose& mount) {
  if (features.empty()) throw Error(ErrorCode::EmptyFeatureSet, "no features to stack");
  const PlanarCameraTwist dnu = camera_twist_per_nu(mount);
  const PlanarCameraTwist dom = camera_twist_per_omega(mount);
  const Eigen::Vector3d znu(dnu.v_forward, dnu.v_left, dnu.omega);
  const Eigen::Vector3d zom(dom.v_forward, dom.v_left, dom.omega);

  JacobianBlocks out;
  const auto n = static_cast<Eigen::Index>(features.size());
  out.L1.resize(2 * n);
  out.L2.resize(2 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& [q, r] = features[static_cast<std::size_t>(i)];
    const ImageJacobian L = image_jacobian(q, r, k);
    out.L1.segment<2>(2 * i) = L * znu;
    out.L2.segment<2>(2 * i) = L * zom;
  }
  return out;
}

}  // namespace trajservo
