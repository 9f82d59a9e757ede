#include <gtest/gtest.h>

#include <map>
#include <set>

#include "trajservo/reference_trajectory.hpp"
#include "trajservo/scene.hpp"
#include "trajservo/slam_emulator.hpp"

using namespace trajservo;

namespace {

const MountPose kMount{0.0, 0.0, 0.0, 0.3};

}  // namespace

TEST(Scene, Deterministic) {
  SceneConfig cfg;
  cfg.landmark_count = 300;
  const auto a = generate_scene(cfg, 5), b = generate_scene(cfg, 5);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].id, b[i].id);
    EXPECT_EQ(a[i].position, b[i].position);
  }
  EXPECT_NE(generate_scene(cfg, 6)[0].position, a[0].position);
}

TEST(Scene, WithinBounds) {
  SceneConfig cfg;
  cfg.landmark_count = 500;
  cfg.regions = {{0, 1, 0, 2, 0, 3}, {5, 6, -1, 0, 1, 1}};
  const auto lms = generate_scene(cfg, 1);
  ASSERT_EQ(lms.size(), 500u);
  for (const auto& l : lms) {
    EXPECT_TRUE(cfg.regions[0].contains(l.position) || cfg.regions[1].contains(l.position));
  }
}

TEST(Scene, RejectsBadConfig) {
  SceneConfig cfg;
  cfg.landmark_count = 0;
  EXPECT_THROW(generate_scene(cfg, 1), Error);
  cfg.landmark_count = 10;
  cfg.regions = {{1, 0, 0, 1, 0, 1}};
  EXPECT_THROW(generate_scene(cfg, 1), Error);
}

TEST(Scene, DefaultSceneShowsEnoughFromStart) {
  const SceneConfig cfg;
  const CameraIntrinsics k;
  int visible = 0;
  for (const auto& l : generate_scene(cfg, cfg.seed)) visible += is_visible(to_camera_frame(l, Pose2{}, kMount), k);
  EXPECT_GE(visible, 40);
}

TEST(Scene, RangeQueryCoversBruteForce) {
  SceneConfig cfg;
  cfg.landmark_count = 3000;
  const Scene scene(generate_scene(cfg, 3));
  const Pose2 g(4.0, 1.0, 0.4);
  std::set<int> grid;
  scene.for_each_near(g.x(), g.y(), 3.0, [&](const Landmark& l) { grid.insert(l.id); });
  for (const auto& l : scene.landmarks()) {
    if (std::abs(l.position.x() - g.x()) <= 3.0 && std::abs(l.position.y() - g.y()) <= 3.0) {
      EXPECT_TRUE(grid.contains(l.id));
    }
  }
}

TEST(Tracker, ZeroNoiseGivesExactProjections) {
  const Scene scene(generate_scene(SceneConfig{}, 7));
  const CameraIntrinsics k;
  FeatureTracker tracker(TrackingMode::map);
  std::mt19937_64 rng(1);
  const Pose2 g(1.0, 0.2, 0.1);
  const auto feats = tracker.track(g, scene, k, kMount, NoiseModel{}, rng);
  ASSERT_FALSE(feats.empty());
  std::map<int, Landmark> by_id;
  for (const auto& l : scene.landmarks()) by_id[l.id] = l;
  for (const auto& f : feats) {
    const CameraPoint q = to_camera_frame(by_id.at(f.id), g, kMount);
    const PixelPoint s = project(q, k);
    EXPECT_NEAR(f.pixel.u, s.u, 1e-12);
    EXPECT_NEAR(f.pixel.v, s.v, 1e-12);
    EXPECT_NEAR(f.depth, q.depth(), 1e-9 * q.depth());
  }
  for (std::size_t i = 1; i < feats.size(); ++i) EXPECT_LT(feats[i - 1].id, feats[i].id);
}

namespace {

/// One landmark 2 m ahead; the robot turns away for ten frames and back.
std::vector<std::vector<TrackedFeature>> leave_and_return(TrackingMode mode) {
  const Scene scene({Landmark{42, Eigen::Vector3d(2.0, 0.0, 0.3)}});
  const CameraIntrinsics k;
  FeatureTracker tracker(mode);
  std::mt19937_64 rng(1);
  std::vector<std::vector<TrackedFeature>> frames;
  frames.push_back(tracker.track(Pose2{}, scene, k, kMount, NoiseModel{}, rng));
  for (int i = 0; i < 10; ++i) frames.push_back(tracker.track(Pose2{0, 0, 2.0}, scene, k, kMount, NoiseModel{}, rng));
  frames.push_back(tracker.track(Pose2{}, scene, k, kMount, NoiseModel{}, rng));
  return frames;
}

}  // namespace

TEST(Tracker, MapModeKeepsIdAcrossGap) {
  const auto frames = leave_and_return(TrackingMode::map);
  ASSERT_EQ(frames.front().size(), 1u);
  for (int i = 1; i <= 10; ++i) EXPECT_TRUE(frames[i].empty());
  ASSERT_EQ(frames.back().size(), 1u);
  EXPECT_EQ(frames.front()[0].id, frames.back()[0].id);
  EXPECT_EQ(frames.front()[0].id, 42);
}

TEST(Tracker, FrameModeIssuesFreshIdAfterGap) {
  const auto frames = leave_and_return(TrackingMode::frame_by_frame);
  ASSERT_EQ(frames.front().size(), 1u);
  ASSERT_EQ(frames.back().size(), 1u);
  EXPECT_NE(frames.front()[0].id, frames.back()[0].id);
}

namespace {

std::vector<std::vector<TrackedFeature>> noisy_drive(TrackingMode mode, const Scene& scene) {
  NoiseModel noise;
  noise.dropout_prob = 0.4;
  noise.pixel_sigma = 1.0;
  FeatureTracker tracker(mode);
  std::mt19937_64 rng(9);
  const auto traj = build_template("SST");
  std::vector<std::vector<TrackedFeature>> frames;
  for (double t = 0.0; t < traj.t_end(); t += 0.1) frames.push_back(tracker.track(traj.sample(t).pose, scene, CameraIntrinsics{}, kMount, noise, rng));
  return frames;
}

}  // namespace

TEST(Tracker, MapModeIdsAreLandmarkIds) {
  const Scene scene(generate_scene(SceneConfig{}, 7));
  std::set<int> landmark_ids;
  for (const auto& l : scene.landmarks()) landmark_ids.insert(l.id);
  for (const auto& frame : noisy_drive(TrackingMode::map, scene)) {
    std::set<int> seen;
    for (const auto& f : frame) {
      EXPECT_TRUE(landmark_ids.contains(f.id));
      EXPECT_TRUE(seen.insert(f.id).second);
    }
  }
}

TEST(Tracker, FrameModeIdsNeverRecur) {
  const Scene scene(generate_scene(SceneConfig{}, 7));
  const auto frames = noisy_drive(TrackingMode::frame_by_frame, scene);
  std::set<int> retired;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    std::set<int> now;
    for (const auto& f : frames[i]) {
      now.insert(f.id);
      EXPECT_FALSE(retired.contains(f.id)) << "id " << f.id << " came back in frame " << i;
    }
    if (i > 0) {
      for (const auto& f : frames[i - 1]) {
        if (!now.contains(f.id)) retired.insert(f.id);
      }
    }
  }
}

TEST(Estimator, ZeroNoiseIsIdentity) {
  PoseEstimator est(Pose2{});
  std::mt19937_64 rng(3);
  const auto traj = build_template("STT");
  Pose2 prev;
  for (double t = 0.0; t < traj.t_end(); t += 0.05) {
    const Pose2 g = traj.sample(t).pose;
    const Pose2 e = est.estimate(g, std::hypot(g.x() - prev.x(), g.y() - prev.y()), NoiseModel{}, rng);
    EXPECT_EQ(e.x(), g.x());
    EXPECT_EQ(e.y(), g.y());
    EXPECT_EQ(e.theta(), g.theta());
    prev = g;
  }
}

TEST(Estimator, SameSeedSameSequence) {
  NoiseModel noise;
  noise.drift_pos_rate = 0.01;
  noise.drift_yaw_rate = 0.02;
  noise.per_step_jitter = 0.001;
  PoseEstimator a(Pose2{}), b(Pose2{});
  std::mt19937_64 ra(5), rb(5);
  for (int i = 1; i <= 100; ++i) {
    const Pose2 g(0.01 * i, 0.0, 0.0);
    const Pose2 ea = a.estimate(g, 0.01, noise, ra), eb = b.estimate(g, 0.01, noise, rb);
    EXPECT_EQ(ea.x(), eb.x());
    EXPECT_EQ(ea.y(), eb.y());
    EXPECT_EQ(ea.theta(), eb.theta());
  }
}

TEST(Estimator, RandomWalkVarianceMatchesRate) {
  // straight 10 m with only positional drift: each axis accumulates variance rate^2 * distance
  NoiseModel noise;
  noise.drift_pos_rate = 0.01;
  const int trials = 1000, steps = 1000;
  const double step = 0.01;
  double sx = 0.0, sxx = 0.0, sy = 0.0, syy = 0.0;
  for (int trial = 0; trial < trials; ++trial) {
    PoseEstimator est(Pose2{});
    std::mt19937_64 rng(1000 + trial);
    Pose2 e;
    for (int i = 1; i <= steps; ++i) e = est.estimate(Pose2(step * i, 0.0, 0.0), step, noise, rng);
    const double ex = e.x() - step * steps, ey = e.y();
    sx += ex;
    sxx += ex * ex;
    sy += ey;
    syy += ey * ey;
  }
  const double expected = noise.drift_pos_rate * noise.drift_pos_rate * 10.0;
  const double var_x = (sxx - sx * sx / trials) / (trials - 1);
  const double var_y = (syy - sy * sy / trials) / (trials - 1);
  EXPECT_NEAR(var_x / expected, 1.0, 0.2);
  EXPECT_NEAR(var_y / expected, 1.0, 0.2);
}

TEST(Estimator, YawDriftBendsLaterMotion) {
  NoiseModel noise;
  noise.drift_yaw_rate = 0.05;
  double spread_short = 0.0, spread_long = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    PoseEstimator est(Pose2{});
    std::mt19937_64 rng(trial);
    for (int i = 1; i <= 1000; ++i) {
      const Pose2 e = est.estimate(Pose2(0.01 * i, 0.0, 0.0), 0.01, noise, rng);
      if (i == 250) spread_short += e.y() * e.y();
      if (i == 1000) spread_long += e.y() * e.y();
    }
  }
  // integrated random walk: lateral variance grows like distance cubed
  EXPECT_GT(spread_long, 20.0 * spread_short);
}

TEST(Noise, Validation) {
  NoiseModel n;
  n.dropout_prob = 1.0;
  EXPECT_THROW(n.validate(), Error);
  n.dropout_prob = 0.0;
  n.pixel_sigma = -1.0;
  EXPECT_THROW(n.validate(), Error);
}
