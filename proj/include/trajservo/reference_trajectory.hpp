#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "trajservo/error.hpp"
#include "trajservo/se2.hpp"

namespace trajservo {

/// One piece of a template path. `curvature` is signed (left positive) and
/// zero for straights.
struct PathSegment {
  double length = 0.0;
  double curvature = 0.0;

  static PathSegment straight(double length) { return {length, 0.0}; }
  static PathSegment arc(double radius, double angle) { return {radius * std::abs(angle), angle > 0 ? 1.0 / radius : -1.0 / radius}; }
};

struct TemplateParams {
  double scale = 1.0;         // multiplies straight lengths
  double turn_radius = 1.0;   // base turn radius, m
  double cruise_speed = 0.3;  // m/s
  double ramp_length = 0.09;  // curvature ramp width, m (0.3 s at 0.3 m/s)
  double sample_spacing = 0.01;  // m between stored samples

  void validate() const {
    if (!(scale > 0.0) || !(turn_radius > 0.0) || !(cruise_speed > 0.0) || !(ramp_length >= 0.0) ||
        !(sample_spacing > 0.0)) {
      throw Error(ErrorCode::InvalidParams, "template parameters must be positive");
    }
  }
};

struct ReferenceSample {
  double t = 0.0;
  Pose2 pose;
  double nu_star = 0.0;     // applied on [t, t_next)
  double omega_star = 0.0;  // applied on [t, t_next)
};

struct ReferenceState {
  Pose2 pose;
  double nu_star = 0.0;
  double omega_star = 0.0;
};

/// Time-parametrized unicycle reference. Controls are piecewise constant
/// between samples and every sample is the exact integral of its predecessor.
class ReferenceTrajectory {
 public:
  ReferenceTrajectory() = default;
  ReferenceTrajectory(std::vector<ReferenceSample> samples, double length)
      : samples_(std::move(samples)), length_(length) {}

  const std::vector<ReferenceSample>& samples() const { return samples_; }
  double length() const { return length_; }
  double t_end() const { return samples_.back().t; }
  const Pose2& start_pose() const { return samples_.front().pose; }
  const Pose2& terminal_pose() const { return samples_.back().pose; }

  ReferenceState sample(double t) const {
    if (t >= t_end() - 1e-9) return {terminal_pose(), 0.0, 0.0};
    if (t <= 0.0) return {samples_.front().pose, samples_.front().nu_star, samples_.front().omega_star};
    // samples are uniform in time except for the last interval
    const double dt = samples_[1].t - samples_[0].t;
    const double x = t / dt;
    auto k = static_cast<std::size_t>(std::floor(x));
    if (x - static_cast<double>(k) > 1.0 - 1e-9) ++k;
    k = std::min(k, samples_.size() - 2);
    while (k + 1 < samples_.size() - 1 && samples_[k + 1].t <= t + 1e-9) ++k;
    while (k > 0 && samples_[k].t > t + 1e-9) --k;
    const ReferenceSample& s = samples_[k];
    const double rem = t - s.t;
    if (rem <= 1e-9) return {s.pose, s.nu_star, s.omega_star};
    return {integrate_unicycle(s.pose, {s.nu_star, s.omega_star}, rem), s.nu_star, s.omega_star};
  }

 private:
  std::vector<ReferenceSample> samples_;
  double length_ = 0.0;
};

namespace detail {

/// Cumulative heading of the box-smoothed curvature profile. The nominal
/// profile is shifted by half a ramp so the smoothed one starts at zero.
class SmoothedHeading {
 public:
  SmoothedHeading(const std::vector<PathSegment>& segments, double ramp) : w_(ramp) {
    double b = 0.5 * w_;
    double a = 0.0;
    double j = 0.0;
    for (const auto& seg : segments) {
      pieces_.push_back({b, seg.length, seg.curvature, a, j});
      j += a * seg.length + 0.5 * seg.curvature * seg.length * seg.length;
      a += seg.curvature * seg.length;
      b += seg.length;
    }
    end_ = b;
    a_end_ = a;
    j_end_ = j;
  }

  double total_length() const { return end_ + 0.5 * w_; }

  /// Heading change accumulated over [0, s].
  double heading(double s) const {
    if (w_ == 0.0) return nominal(s);
    return (integral(s + 0.5 * w_) - integral(std::max(s - 0.5 * w_, 0.0))) / w_;
  }

 private:
  struct Piece {
    double start, length, curvature, heading0, integral0;
  };

  double nominal(double s) const {
    if (s <= 0.5 * w_) return 0.0;
    for (const auto& p : pieces_) {
      if (s <= p.start + p.length) return p.heading0 + p.curvature * (s - p.start);
    }
    return a_end_;
  }

  // integral of the nominal heading from 0 to s
  double integral(double s) const {
    if (s <= 0.5 * w_) return 0.0;
    for (const auto& p : pieces_) {
      if (s <= p.start + p.length) {
        const double d = s - p.start;
        return p.integral0 + p.heading0 * d + 0.5 * p.curvature * d * d;
      }
    }
    return j_end_ + a_end_ * (s - end_);
  }

  double w_;
  std::vector<Piece> pieces_;
  double end_ = 0.0;
  double a_end_ = 0.0;
  double j_end_ = 0.0;
};

}  // namespace detail

inline ReferenceTrajectory build_trajectory(const std::vector<PathSegment>& segments, const TemplateParams& params,
                                            const Pose2& start = Pose2::identity()) {
  params.validate();
  if (segments.empty()) throw Error(ErrorCode::InvalidParams, "empty segment list");
  for (const auto& s : segments) {
    if (!(s.length > 0.0) || !std::isfinite(s.curvature)) throw Error(ErrorCode::InvalidParams, "bad segment");
  }

  const detail::SmoothedHeading heading(segments, params.ramp_length);
  const double ds = params.sample_spacing;
  // the final straight is stretched by under one spacing so every interval is full
  const auto intervals = static_cast<std::size_t>(std::ceil(heading.total_length() / ds - 1e-9));
  const double length = static_cast<double>(intervals) * ds;
  const double nu = params.cruise_speed;

  std::vector<ReferenceSample> samples;
  samples.reserve(intervals + 1);
  Pose2 pose = start;
  double prev_heading = 0.0;
  for (std::size_t k = 0; k < intervals; ++k) {
    const double s0 = static_cast<double>(k) * ds;
    const double s1 = static_cast<double>(k + 1) * ds;
    const double h1 = heading.heading(s1);
    const double dt = (s1 - s0) / nu;
    const double omega = (h1 - prev_heading) / dt;
    samples.push_back({s0 / nu, pose, nu, omega});
    pose = integrate_unicycle(pose, {nu, omega}, dt);
    prev_heading = h1;
  }
  samples.push_back({length / nu, pose, 0.0, 0.0});
  return {std::move(samples), length};
}

inline const std::vector<std::string_view>& short_template_names() {
  static const std::vector<std::string_view> names{"SS", "SWT", "SST", "STS", "STT"};
  return names;
}

inline const std::vector<std::string_view>& long_template_names() {
  static const std::vector<std::string_view> names{"LRU", "LLU", "LST", "LZZ"};
  return names;
}

inline double deg(double d) { return d * std::numbers::pi / 180.0; }

/// Segment list of a named template. Shapes are approximations of the
/// published silhouettes: short ones about 4 m, long ones at least 20 m.
inline std::vector<PathSegment> template_segments(std::string_view name, const TemplateParams& p) {
  p.validate();
  const double s = p.scale;
  const double r = p.turn_radius;
  using PS = PathSegment;
  if (name == "SS") return {PS::straight(4.0 * s)};
  if (name == "SWT") return {PS::straight(1.0 * s), PS::arc(4.0 * r, deg(35)), PS::straight(0.5 * s)};
  if (name == "SST") return {PS::straight(2.4 * s), PS::arc(1.5 * r, deg(60))};
  if (name == "STS") return {PS::arc(1.5 * r, deg(60)), PS::straight(2.4 * s)};
  if (name == "STT") return {PS::straight(1.35 * s), PS::arc(1.5 * r, deg(50)), PS::arc(1.5 * r, deg(-50))};
  if (name == "LRU") return {PS::straight(8.5 * s), PS::arc(1.5 * r, deg(-180)), PS::straight(8.5 * s)};
  if (name == "LLU") return {PS::straight(8.5 * s), PS::arc(1.5 * r, deg(180)), PS::straight(8.5 * s)};
  if (name == "LST") return {PS::straight(12.0 * s), PS::arc(1.5 * r, deg(90)), PS::straight(7.0 * s)};
  if (name == "LZZ") {
    return {PS::straight(3.0 * s), PS::arc(1.5 * r, deg(45)),  PS::straight(3.0 * s), PS::arc(1.5 * r, deg(-90)),
            PS::straight(3.0 * s), PS::arc(1.5 * r, deg(90)),  PS::straight(3.0 * s), PS::arc(1.5 * r, deg(-45)),
            PS::straight(3.0 * s)};
  }
  throw Error(ErrorCode::UnknownTemplate, std::string(name));
}

inline ReferenceTrajectory build_template(std::string_view name, const TemplateParams& params = {}) {
  return build_trajectory(template_segments(name, params), params);
}

}  // namespace trajservo
