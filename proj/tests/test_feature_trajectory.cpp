#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "trajservo/feature_trajectory.hpp"
#include "trajservo/scene.hpp"
#include "trajservo/sim_engine.hpp"

using namespace trajservo;

namespace {

const MountPose kMount{0.0, 0.0, 0.0, 0.3};

struct Fixture {
  Scene scene{generate_scene(SceneConfig{}, 7)};
  CameraIntrinsics cam;
  ReferenceTrajectory traj = build_template("SST");
  SegmentContext ctx{&traj, cam, kMount, 1.0 / 30.0, traj.t_end() + 1.0};

  std::vector<TrackedFeature> observe(const Pose2& g) const {
    FeatureTracker tracker(TrackingMode::map);
    std::mt19937_64 rng(1);
    return tracker.track(g, scene, cam, kMount, NoiseModel{}, rng);
  }
};

const Fixture& fx() {
  static const Fixture f;
  return f;
}

std::vector<TrackedFeature> with_ids(std::initializer_list<int> ids) {
  std::vector<TrackedFeature> out;
  for (int id : ids) out.push_back({id, {100.0 + id, 200.0}, 2.0});
  return out;
}

std::vector<DesiredFeature> desired_ids(std::initializer_list<int> ids) {
  std::vector<DesiredFeature> out;
  for (int id : ids) out.push_back({id, {0.0, 0.0}, {Eigen::Vector3d(0, 0, 1)}, Eigen::Vector2d::Zero()});
  return out;
}

}  // namespace

TEST(FeatureSegment, StartsAtObservedPixels) {
  const auto& f = fx();
  const auto obs = f.observe(f.traj.start_pose());
  const auto seg = init_segment(obs, f.traj.start_pose(), f.ctx, 0.0);
  const auto d = seg.desired_state(0.0);
  ASSERT_EQ(d.size(), obs.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    EXPECT_EQ(d[i].id, obs[i].id);
    EXPECT_NEAR(d[i].s.u, obs[i].pixel.u, 1e-9);
    EXPECT_NEAR(d[i].s.v, obs[i].pixel.v, 1e-9);
  }
}

TEST(FeatureSegment, StationaryTailIsConstant) {
  const auto& f = fx();
  const double t0 = f.traj.t_end() - 1.0;
  const auto obs = f.observe(f.traj.sample(t0).pose);
  const auto seg = init_segment(obs, f.traj.sample(t0).pose, f.ctx, t0);
  const auto a = seg.desired_state(f.traj.t_end() + 0.1);
  const auto b = seg.desired_state(f.traj.t_end() + 0.9);
  ASSERT_FALSE(a.empty());
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].s.u, b[i].s.u);
    EXPECT_EQ(a[i].s.v, b[i].s.v);
    EXPECT_EQ(a[i].s_dot.norm(), 0.0);
  }
}

TEST(FeatureSegment, OdeAgreesWithReprojection) {
  const auto& f = fx();
  const auto seg = init_segment(f.observe(f.traj.start_pose()), f.traj.start_pose(), f.ctx, 0.0);
  double worst = 0.0;
  for (const auto& [id, samples] : seg.tracks()) {
    FeatureOdeState x{samples[0].s, samples[0].q.depth()};
    for (std::size_t i = 1; i < samples.size(); ++i) {
      x = integrate_feature_ode(x, f.traj, seg.sample_time(i - 1), seg.sample_time(i), 0.01, f.cam, kMount);
      worst = std::max(worst, std::hypot(x.s.u - samples[i].s.u, x.s.v - samples[i].s.v));
    }
  }
  EXPECT_LT(worst, 0.1);
}

TEST(FeatureSegment, StoredRatesMatchFeedforward) {
  const auto& f = fx();
  const auto seg = init_segment(f.observe(f.traj.start_pose()), f.traj.start_pose(), f.ctx, 0.0);
  for (const auto& [id, samples] : seg.tracks()) {
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const ReferenceState r = f.traj.sample(seg.sample_time(i));
      const Eigen::Vector2d sd = feedforward_rate(samples[i].q, samples[i].s, r.nu_star, r.omega_star, f.cam, kMount);
      ASSERT_LT((sd - samples[i].s_dot).norm(), 1e-9);
    }
  }
}

TEST(FeatureSegment, InterpolationAgreesWithFinerGrid) {
  const auto& f = fx();
  const auto obs = f.observe(f.traj.start_pose());
  const auto coarse = init_segment(obs, f.traj.start_pose(), f.ctx, 0.0);
  SegmentContext fine_ctx = f.ctx;
  fine_ctx.sample_dt = f.ctx.sample_dt / 10.0;
  const auto fine = init_segment(obs, f.traj.start_pose(), fine_ctx, 0.0);
  for (double t : {1.05 / 30.0, 100.5 / 30.0, 250.5 / 30.0}) {
    const auto a = coarse.desired_state(t);
    const auto b = fine.desired_state(t);
    for (const auto& d : a) {
      const auto it = std::find_if(b.begin(), b.end(), [&](const auto& x) { return x.id == d.id; });
      ASSERT_NE(it, b.end());
      const DesiredFeature& e = *it;
      EXPECT_LT(std::hypot(d.s.u - e.s.u, d.s.v - e.s.v), 0.05) << "id " << d.id << " t " << t;
    }
  }
}

TEST(FeatureSegment, TruncatedIdsDisappear) {
  const auto& f = fx();
  const auto seg = init_segment(f.observe(f.traj.start_pose()), f.traj.start_pose(), f.ctx, 0.0);
  const double t = 5.0;
  const auto alive = seg.desired_state(t);
  std::set<int> alive_ids;
  for (const auto& d : alive) alive_ids.insert(d.id);
  int truncated = 0;
  for (const auto& [id, samples] : seg.tracks()) {
    if (seg.sample_time(samples.size() - 1) < t) {
      ++truncated;
      EXPECT_FALSE(alive_ids.contains(id));
    }
  }
  EXPECT_GT(truncated, 0);
  EXPECT_THROW(seg.desired_state(-0.1), Error);
  EXPECT_THROW(seg.desired_state(f.ctx.horizon_end + 0.1), Error);
}

TEST(FeatureSegment, EmptyObservationsRejected) {
  const auto& f = fx();
  EXPECT_THROW(init_segment({}, f.traj.start_pose(), f.ctx, 0.0), Error);
}

TEST(Correspondence, Counts) {
  EXPECT_EQ(correspondences(with_ids({1, 2, 3}), desired_ids({1, 2, 3})).size(), 3u);
  EXPECT_EQ(correspondences(with_ids({1, 2, 3}), desired_ids({4, 5})).size(), 0u);
  std::mt19937_64 rng(4);
  std::bernoulli_distribution keep(0.5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<TrackedFeature> cur;
    std::vector<DesiredFeature> des;
    std::set<int> a, b;
    for (int id = 0; id < 200; ++id) {
      if (keep(rng)) {
        cur.push_back({id, {}, 1.0});
        a.insert(id);
      }
      if (keep(rng)) {
        des.push_back({id, {}, {}, Eigen::Vector2d::Zero()});
        b.insert(id);
      }
    }
    std::size_t brute = 0;
    for (int id : a) brute += b.contains(id);
    const auto corr = correspondences(cur, des);
    EXPECT_EQ(corr.size(), brute);
    for (const auto& c : corr) EXPECT_EQ(c.current.id, c.desired.id);
  }
}

TEST(Replenish, Threshold) {
  EXPECT_FALSE(needs_replenish(10, 10));
  EXPECT_TRUE(needs_replenish(9, 10));
  EXPECT_EQ(SimConfig{}.tau_fr, 10);
  EXPECT_THROW(needs_replenish(5, 1), Error);
}

TEST(Replenish, PerfectPoseReproducesMeasuredPixels) {
  const auto& f = fx();
  const auto first = init_segment(f.observe(f.traj.start_pose()), f.traj.start_pose(), f.ctx, 0.0);
  const double t_now = 6.0;
  const Pose2 g = f.traj.sample(t_now).pose;
  const auto obs = f.observe(g);
  const auto seg = replenish(first, obs, g, f.ctx, t_now);
  EXPECT_EQ(seg.index(), 1);
  EXPECT_GE(seg.t_start(), t_now);
  const auto d = seg.desired_state(t_now);
  ASSERT_EQ(d.size(), obs.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    EXPECT_NEAR(d[i].s.u, obs[i].pixel.u, 1e-9);
    EXPECT_NEAR(d[i].s.v, obs[i].pixel.v, 1e-9);
  }
  EXPECT_THROW(seg.desired_state(t_now - 0.01), Error);
}

TEST(Replenish, BiasedPoseMatchesIndependentReprojection) {
  const auto& f = fx();
  const auto first = init_segment(f.observe(f.traj.start_pose()), f.traj.start_pose(), f.ctx, 0.0);
  const double t_now = 4.0;
  const Pose2 g = f.traj.sample(t_now).pose;
  const Pose2 biased = compose(g, Pose2{0.05, 0.0, 0.0});
  const auto obs = f.observe(g);
  const auto seg = replenish(first, obs, biased, f.ctx, t_now);

  const double t_check = t_now + 20.0 / 30.0;
  const Pose2 ref = f.traj.sample(t_check).pose;
  const auto d = seg.desired_state(t_check);
  for (const auto& des : d) {
    const auto& o = *std::find_if(obs.begin(), obs.end(), [&](const auto& x) { return x.id == des.id; });
    // lift: camera ray scaled by depth, rotated into the biased camera pose
    const double xn = (o.pixel.u - f.cam.cu) / f.cam.f, yn = (o.pixel.v - f.cam.cv) / f.cam.f;
    const double fwd = o.depth, left = -xn * o.depth, up = -yn * o.depth;
    const double c = std::cos(biased.theta()), s = std::sin(biased.theta());
    const double wx = biased.x() + c * fwd - s * left, wy = biased.y() + s * fwd + c * left, wz = kMount.height + up;
    // reproject from the reference pose
    const double dx = wx - ref.x(), dy = wy - ref.y();
    const double cr = std::cos(ref.theta()), sr = std::sin(ref.theta());
    const double rf = cr * dx + sr * dy, rl = -sr * dx + cr * dy;
    const double u = f.cam.cu + f.cam.f * (-rl) / rf, v = f.cam.cv + f.cam.f * (kMount.height - wz) / rf;
    EXPECT_NEAR(des.s.u, u, 1e-9);
    EXPECT_NEAR(des.s.v, v, 1e-9);
  }
  EXPECT_FALSE(d.empty());
}

TEST(SegmentChain, WindowsTileTheTimeline) {
  const auto& f = fx();
  SegmentChain chain;
  chain.start(init_segment(f.observe(f.traj.start_pose()), f.traj.start_pose(), f.ctx, 0.0));
  for (double t : {2.0, 5.0, 9.0}) {
    const Pose2 g = f.traj.sample(t).pose;
    chain.replenish(f.observe(g), g, f.ctx, t);
  }
  const auto& w = chain.windows();
  ASSERT_EQ(w.size(), 4u);
  EXPECT_EQ(w.front().t_start, 0.0);
  for (std::size_t i = 0; i + 1 < w.size(); ++i) {
    EXPECT_EQ(w[i].t_end, w[i + 1].t_start);
    EXPECT_LT(w[i].t_start, w[i].t_end);
    EXPECT_EQ(w[i + 1].index, w[i].index + 1);
  }
}
