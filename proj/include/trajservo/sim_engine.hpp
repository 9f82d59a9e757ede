#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "trajservo/camera.hpp"
#include "trajservo/controllers.hpp"
#include "trajservo/error.hpp"
#include "trajservo/feature_trajectory.hpp"
#include "trajservo/reference_trajectory.hpp"
#include "trajservo/scene.hpp"
#include "trajservo/se2.hpp"
#include "trajservo/slam_emulator.hpp"

namespace trajservo {

enum class Method { PO, SLAM, TS, TS_PO, VS_PLUS, I_TS };

constexpr std::string_view to_string(Method m) {
  switch (m) {
    case Method::PO: return "PO";
    case Method::SLAM: return "SLAM";
    case Method::TS: return "TS";
    case Method::TS_PO: return "TS_PO";
    case Method::VS_PLUS: return "VS_PLUS";
    case Method::I_TS: return "I_TS";
  }
  return "?";
}

inline Method parse_method(std::string_view s) {
  for (Method m : {Method::PO, Method::SLAM, Method::TS, Method::TS_PO, Method::VS_PLUS, Method::I_TS}) {
    if (s == to_string(m)) return m;
  }
  if (s == "TS+PO") return Method::TS_PO;
  if (s == "VS+") return Method::VS_PLUS;
  if (s == "I-TS") return Method::I_TS;
  throw Error(ErrorCode::ConfigError, "unknown method '" + std::string(s) + "'");
}

/// Disturbance and actuator model of the kinematic plant. The yaw-rate
/// disturbance is an Ornstein-Uhlenbeck process held over each control period.
struct PlantConfig {
  double omega_disturbance_sigma = 0.0;  // rad/s, stationary std
  double disturbance_tau = 1.0;          // s
  double actuator_lag = 0.0;             // s, first-order; 0 disables

  void validate() const {
    if (omega_disturbance_sigma < 0.0 || !(disturbance_tau > 0.0) || actuator_lag < 0.0) {
      throw Error(ErrorCode::ConfigError, "plant parameters out of range");
    }
  }
};

struct SimConfig {
  double control_rate = 30.0;   // Hz
  double plant_dt = 0.001;      // s
  double settle_time = 1.0;     // s of zero reference velocity after t_end
  int tau_fr = 10;
  double its_lookahead = 1.0 / 30.0;  // s, reference time offset of the regenerated desired set
  Pose2 initial_offset;         // body-frame offset of the start pose from the reference start

  double control_period() const { return 1.0 / control_rate; }

  void validate() const {
    if (!(control_rate > 0.0) || !(plant_dt > 0.0) || settle_time < 0.0 || tau_fr < 2 || its_lookahead < 0.0) {
      throw Error(ErrorCode::ConfigError, "simulation parameters out of range");
    }
  }
};

enum class AleMode { time_synchronized, nearest_point };

/// Emulator noise used by the benchmarks. The drift rates put the SLAM
/// baseline at a little over twice the PO lateral error on short paths.
inline NoiseModel default_noise() {
  NoiseModel n;
  n.pixel_sigma = 1.0;
  n.depth_rel_sigma = 0.03;
  n.drift_pos_rate = 0.0009;
  n.drift_yaw_rate = 0.0027;
  n.dropout_prob = 0.3;
  return n;
}

inline PlantConfig default_plant() { return {0.03, 0.5, 0.0}; }

/// Everything that defines a trial apart from the method and the seed.
struct TrialConfig {
  SceneConfig scene;
  CameraIntrinsics camera;
  MountPose mount{0.0, 0.0, 0.0, 0.3};
  NoiseModel noise = default_noise();
  GainConfig gains;
  std::string template_name = "SS";
  TemplateParams template_params;
  std::vector<PathSegment> custom_segments;  // used when template_name == "custom"
  SimConfig sim;
  PlantConfig plant = default_plant();
  AleMode ale_mode = AleMode::time_synchronized;

  void validate() const {
    scene.validate();
    camera.validate();
    noise.validate();
    gains.validate();
    template_params.validate();
    sim.validate();
    plant.validate();
  }

  ReferenceTrajectory trajectory() const {
    if (template_name == "custom") return build_trajectory(custom_segments, template_params);
    return build_template(template_name, template_params);
  }
};

enum class StepEvent { none, replenish, starvation, degenerate };

constexpr std::string_view to_string(StepEvent e) {
  switch (e) {
    case StepEvent::none: return "none";
    case StepEvent::replenish: return "replenish";
    case StepEvent::starvation: return "starvation";
    case StepEvent::degenerate: return "degenerate";
  }
  return "?";
}

enum class Termination { completed, feature_starvation };

constexpr std::string_view to_string(Termination t) {
  return t == Termination::completed ? "completed" : "feature_starvation";
}

struct StepRecord {
  double t = 0.0;
  Pose2 true_pose;
  Pose2 ref_pose;
  Pose2 est_pose;
  Command command;
  int n_features = 0;
  int segment_idx = -1;
  double residual_norm = 0.0;
  StepEvent event = StepEvent::none;
};

struct RunLog {
  std::vector<StepRecord> steps;
  double completed_fraction = 0.0;
  Termination termination = Termination::completed;
  int pose_queries = 0;
  Pose2 ref_terminal;
  double ref_length = 0.0;
  double t_end = 0.0;
  std::vector<SegmentWindow> segments;
};

namespace detail {

inline std::mt19937_64 make_stream(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32), stream};
  return std::mt19937_64(seq);
}

}  // namespace detail

/// Runs one closed-loop trial on a prebuilt scene and reference. Feature
/// starvation ends the trial early and is recorded in the log.
inline RunLog run_trial(const TrialConfig& config, Method method, std::uint64_t seed, const Scene& scene,
                        const ReferenceTrajectory& traj) {
  config.validate();
  const CameraIntrinsics& cam = config.camera;
  const MountPose& mount = config.mount;
  const double period = config.sim.control_period();
  const double t_end = traj.t_end();
  const double t_stop = t_end + config.sim.settle_time;
  const auto last_step = static_cast<long>(std::floor(t_stop / period + 1e-9));

  auto rng_track = detail::make_stream(seed, 1);
  auto rng_est = detail::make_stream(seed, 2);
  auto rng_plant = detail::make_stream(seed, 3);
  std::normal_distribution<double> gauss(0.0, 1.0);

  FeatureTracker tracker(method == Method::VS_PLUS ? TrackingMode::frame_by_frame : TrackingMode::map);
  Pose2 pose = compose(traj.start_pose(), config.sim.initial_offset);
  PoseEstimator estimator(pose);

  SegmentContext ctx{&traj, cam, mount, period, t_stop + period};
  SegmentChain chain;

  RunLog log;
  log.ref_terminal = traj.terminal_pose();
  log.ref_length = traj.length();
  log.t_end = t_end;
  log.steps.reserve(static_cast<std::size_t>(last_step + 1));

  // frames whose pose estimate has not reached the controller yet
  struct Frame {
    double t;
    std::vector<TrackedFeature> features;
    Pose2 estimate;
  };
  const auto lag = static_cast<std::size_t>(std::lround(config.noise.estimate_latency / period));
  std::deque<Frame> pending;

  Command held{};
  Command applied{};
  double disturbance = 0.0;
  const double ou_decay = std::exp(-period / config.plant.disturbance_tau);
  Pose2 prev_pose = pose;

  for (long k = 0; k <= last_step; ++k) {
    const double t = static_cast<double>(k) * period;
    const bool uses_features = method != Method::PO && method != Method::SLAM;
    const std::vector<TrackedFeature> features =
        uses_features ? tracker.track(pose, scene, cam, mount, config.noise, rng_track) : std::vector<TrackedFeature>{};
    const double ds = std::hypot(pose.x() - prev_pose.x(), pose.y() - prev_pose.y());
    prev_pose = pose;
    pending.push_back({t, features, estimator.estimate(pose, ds, config.noise, rng_est)});
    if (pending.size() > lag + 1) pending.pop_front();
    // before the first estimate arrives the oldest frame stands in
    const Frame& latest = pending.front();
    const Pose2& estimate = latest.estimate;
    const ReferenceState ref = traj.sample(t);

    StepRecord rec;
    rec.t = t;
    rec.true_pose = pose;
    rec.ref_pose = ref.pose;
    rec.est_pose = estimate;
    bool starved = false;

    switch (method) {
      case Method::PO:
        rec.command = pose_control(pose, ref.pose, ref.nu_star, ref.omega_star, config.gains);
        break;
      case Method::SLAM:
        rec.command = pose_control(estimate, ref.pose, ref.nu_star, ref.omega_star, config.gains);
        ++log.pose_queries;
        break;
      case Method::I_TS:
        ++log.pose_queries;
        rec.n_features = static_cast<int>(features.size());
        try {
          const ServoOutput out =
              its_control(features, latest.features, estimate, traj, t, config.sim.its_lookahead, config.gains, cam, mount);
          rec.command = out.command;
          rec.residual_norm = out.residual_norm;
        } catch (const Error& e) {
          if (e.code() == ErrorCode::DegenerateJacobian) {
            rec.command = {ref.nu_star, held.omega};
            rec.event = StepEvent::degenerate;
          } else {
            starved = true;
          }
        }
        break;
      case Method::TS:
      case Method::TS_PO:
      case Method::VS_PLUS: {
        // the lifted frame is the one the pose belongs to; the true pose is current
        const bool perfect = method == Method::TS_PO;
        const Pose2& lift_pose = perfect ? pose : estimate;
        const std::vector<TrackedFeature>& lift_frame = perfect ? features : latest.features;
        const double t_frame = perfect ? t : latest.t;
        try {
          if (!chain.started()) {
            chain.start(init_segment(lift_frame, lift_pose, ctx, t_frame));
            ++log.pose_queries;
          }
          CorrespondenceSet corr = correspondences(features, chain.active(), t);
          if (method != Method::VS_PLUS && needs_replenish(corr.size(), config.sim.tau_fr)) {
            chain.replenish(lift_frame, lift_pose, ctx, t, t_frame);
            ++log.pose_queries;
            rec.event = StepEvent::replenish;
            corr = correspondences(features, chain.active(), t);
          }
          rec.n_features = static_cast<int>(corr.size());
          rec.segment_idx = chain.active().index();
          const ServoOutput out = ts_control(corr, ref.nu_star, ref.omega_star, config.gains, cam, mount);
          rec.command = out.command;
          rec.residual_norm = out.residual_norm;
        } catch (const Error& e) {
          if (e.code() == ErrorCode::DegenerateJacobian) {
            rec.command = {ref.nu_star, held.omega};
            rec.event = StepEvent::degenerate;
          } else if (e.code() == ErrorCode::FeatureStarvation || e.code() == ErrorCode::EmptyFeatureSet) {
            starved = true;
          } else {
            throw;
          }
        }
        if (chain.started()) rec.segment_idx = chain.active().index();
        break;
      }
    }

    if (starved) {
      rec.command = {0.0, 0.0};
      rec.event = StepEvent::starvation;
      log.steps.push_back(rec);
      log.termination = Termination::feature_starvation;
      log.completed_fraction = std::clamp(t / t_end, 0.0, 1.0);
      break;
    }
    log.steps.push_back(rec);
    held = rec.command;
    if (k == last_step) break;

    // plant: command held over the control period, exact arcs per sub-step
    const double executed_omega = held.omega + disturbance;
    const auto substeps = static_cast<int>(std::ceil(period / config.sim.plant_dt - 1e-9));
    const double h = period / substeps;
    for (int i = 0; i < substeps; ++i) {
      if (config.plant.actuator_lag > 0.0) {
        const double a = 1.0 - std::exp(-h / config.plant.actuator_lag);
        applied.nu += a * (held.nu - applied.nu);
        applied.omega += a * (executed_omega - applied.omega);
      } else {
        applied = {held.nu, executed_omega};
      }
      pose = integrate_unicycle(pose, {applied.nu, applied.omega}, h);
    }
    disturbance = ou_decay * disturbance +
                  config.plant.omega_disturbance_sigma * std::sqrt(1.0 - ou_decay * ou_decay) * gauss(rng_plant);
  }

  if (log.termination == Termination::completed) log.completed_fraction = 1.0;
  if (chain.started()) {
    log.segments = chain.windows();
    log.segments.back().t_end = log.steps.back().t;
  }
  return log;
}

inline RunLog run_trial(const TrialConfig& config, Method method, std::uint64_t seed) {
  const Scene scene(generate_scene(config.scene, config.scene.seed));
  return run_trial(config, method, seed, scene, config.trajectory());
}

}  // namespace trajservo
