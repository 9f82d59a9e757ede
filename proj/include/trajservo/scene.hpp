#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "trajservo/camera.hpp"
#include "trajservo/error.hpp"

namespace trajservo {

struct SceneBox {
  double x_min = 0.0, x_max = 0.0;
  double y_min = 0.0, y_max = 0.0;
  double z_min = 0.0, z_max = 0.0;

  double footprint() const { return (x_max - x_min) * (y_max - y_min); }
  bool contains(const Eigen::Vector3d& p) const {
    return p.x() >= x_min && p.x() <= x_max && p.y() >= y_min && p.y() <= y_max && p.z() >= z_min &&
           p.z() <= z_max;
  }
};

/// Landmarks are spread over the boxes in proportion to their footprint.
struct SceneConfig {
  int landmark_count = 16000;
  std::vector<SceneBox> regions{SceneBox{-6.0, 26.0, -12.0, 14.0, 0.0, 2.4}};
  std::uint64_t seed = 7;

  void validate() const {
    if (landmark_count <= 0) throw Error(ErrorCode::InvalidSceneConfig, "landmark_count must be positive");
    if (regions.empty()) throw Error(ErrorCode::InvalidSceneConfig, "no scene regions");
    for (const auto& b : regions) {
      if (!(b.x_max > b.x_min) || !(b.y_max > b.y_min) || !(b.z_max >= b.z_min)) {
        throw Error(ErrorCode::InvalidSceneConfig, "malformed scene region");
      }
    }
  }
};

inline std::vector<Landmark> generate_scene(const SceneConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  double total = 0.0;
  for (const auto& b : config.regions) total += b.footprint();

  std::vector<Landmark> out;
  out.reserve(static_cast<std::size_t>(config.landmark_count));
  int assigned = 0;
  for (std::size_t r = 0; r < config.regions.size(); ++r) {
    const auto& b = config.regions[r];
    const int n = (r + 1 == config.regions.size())
                      ? config.landmark_count - assigned
                      : static_cast<int>(std::lround(config.landmark_count * b.footprint() / total));
    for (int i = 0; i < n; ++i) {
      const double x = b.x_min + (b.x_max - b.x_min) * unit(rng);
      const double y = b.y_min + (b.y_max - b.y_min) * unit(rng);
      const double z = b.z_min + (b.z_max - b.z_min) * unit(rng);
      out.push_back({assigned + i, Eigen::Vector3d(x, y, z)});
    }
    assigned += n;
  }
  return out;
}

/// Landmark set with a uniform planar grid for range queries.
class Scene {
 public:
  Scene() = default;
  explicit Scene(std::vector<Landmark> landmarks, double cell = 1.0) : landmarks_(std::move(landmarks)), cell_(cell) {
    if (landmarks_.empty()) return;
    x0_ = y0_ = 1e300;
    double x1 = -1e300, y1 = -1e300;
    for (const auto& l : landmarks_) {
      x0_ = std::min(x0_, l.position.x());
      y0_ = std::min(y0_, l.position.y());
      x1 = std::max(x1, l.position.x());
      y1 = std::max(y1, l.position.y());
    }
    nx_ = static_cast<int>((x1 - x0_) / cell_) + 1;
    ny_ = static_cast<int>((y1 - y0_) / cell_) + 1;

    // counting sort into cell-major order; stable, so ids ascend within a cell
    std::vector<std::size_t> cell_of(landmarks_.size());
    offsets_.assign(static_cast<std::size_t>(nx_ * ny_) + 1, 0);
    for (std::size_t i = 0; i < landmarks_.size(); ++i) {
      cell_of[i] = index(cell_x(landmarks_[i].position.x()), cell_y(landmarks_[i].position.y()));
      ++offsets_[cell_of[i] + 1];
    }
    for (std::size_t c = 1; c < offsets_.size(); ++c) offsets_[c] += offsets_[c - 1];
    binned_.resize(landmarks_.size());
    std::vector<std::size_t> fill(offsets_.begin(), offsets_.end() - 1);
    for (std::size_t i = 0; i < landmarks_.size(); ++i) binned_[fill[cell_of[i]]++] = landmarks_[i];
  }

  const std::vector<Landmark>& landmarks() const { return landmarks_; }

  /// Calls fn(landmark) for every landmark whose grid cell intersects the
  /// square of half-size `radius` around (x, y). The visiting order is fixed
  /// by the scene alone.
  template <typename Fn>
  void for_each_near(double x, double y, double radius, Fn&& fn) const {
    if (landmarks_.empty()) return;
    const int ix0 = std::max(0, cell_x(x - radius)), ix1 = std::min(nx_ - 1, cell_x(x + radius));
    const int iy0 = std::max(0, cell_y(y - radius)), iy1 = std::min(ny_ - 1, cell_y(y + radius));
    for (int ix = ix0; ix <= ix1; ++ix) {
      const std::size_t first = offsets_[index(ix, iy0)];
      const std::size_t last = offsets_[index(ix, iy1) + 1];
      for (std::size_t i = first; i < last; ++i) fn(binned_[i]);
    }
  }

 private:
  int cell_x(double x) const { return static_cast<int>(std::floor((x - x0_) / cell_)); }
  int cell_y(double y) const { return static_cast<int>(std::floor((y - y0_) / cell_)); }
  std::size_t index(int ix, int iy) const {
    ix = std::clamp(ix, 0, nx_ - 1);
    iy = std::clamp(iy, 0, ny_ - 1);
    return static_cast<std::size_t>(ix * ny_ + iy);
  }

  std::vector<Landmark> landmarks_;
  std::vector<Landmark> binned_;
  std::vector<std::size_t> offsets_;
  double cell_ = 1.0;
  double x0_ = 0.0, y0_ = 0.0;
  int nx_ = 0, ny_ = 0;
};

}  // namespace trajservo
