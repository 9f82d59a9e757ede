#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "trajservo/error.hpp"
#include "trajservo/sim_engine.hpp"

namespace trajservo {

/// Benchmark-level settings that live in the same file as the trial config.
struct BenchSettings {
  int trials = 20;
  std::uint64_t seed = 1;
  int workers = 1;
};

struct RunConfig {
  TrialConfig trial;
  BenchSettings bench;
};

namespace detail {

template <class T>
T parse_value(const std::string& key, const std::string& text) {
  std::istringstream is(text);
  T v{};
  is >> v;
  std::string rest;
  if (is.fail() || (is >> rest)) throw Error(ErrorCode::ConfigError, "bad value for " + key + ": '" + text + "'");
  return v;
}

/// "x_min,x_max,y_min,y_max,z_min,z_max; ..." -> boxes
inline std::vector<SceneBox> parse_regions(const std::string& text) {
  std::vector<SceneBox> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ';')) {
    if (item.find_first_not_of(" \t") == std::string::npos) continue;
    std::stringstream is(item);
    std::string cell;
    std::vector<double> v;
    while (std::getline(is, cell, ',')) v.push_back(parse_value<double>("scene.regions", cell));
    if (v.size() != 6) throw Error(ErrorCode::ConfigError, "scene.regions entries need six numbers");
    out.push_back({v[0], v[1], v[2], v[3], v[4], v[5]});
  }
  return out;
}

/// "S 4; A 1.5 60" -> straight of 4 m, then a 1.5 m radius arc turning 60 deg left
inline std::vector<PathSegment> parse_segments(const std::string& text) {
  std::vector<PathSegment> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ';')) {
    std::istringstream is(item);
    std::string kind;
    if (!(is >> kind)) continue;
    double a = 0.0, b = 0.0;
    if (kind == "S" && (is >> a)) {
      out.push_back(PathSegment::straight(a));
    } else if (kind == "A" && (is >> a >> b)) {
      out.push_back(PathSegment::arc(a, deg(b)));
    } else {
      throw Error(ErrorCode::ConfigError, "bad path segment '" + item + "'");
    }
  }
  return out;
}

}  // namespace detail

/// Applies a parsed key-value tree on top of the defaults. Unknown sections
/// and keys are rejected so typos never pass silently.
inline RunConfig config_from_tree(const boost::property_tree::ptree& tree, RunConfig cfg = {}) {
  using Setter = std::function<void(const std::string&, const std::string&)>;
  auto num = [](double& target) -> Setter {
    return [&target](const std::string& k, const std::string& v) { target = detail::parse_value<double>(k, v); };
  };
  auto integer = [](int& target) -> Setter {
    return [&target](const std::string& k, const std::string& v) { target = detail::parse_value<int>(k, v); };
  };
  TrialConfig& t = cfg.trial;
  double off_x = t.sim.initial_offset.x(), off_y = t.sim.initial_offset.y(), off_th = t.sim.initial_offset.theta();

  const std::map<std::string, Setter> setters{
      {"scene.landmark_count", integer(t.scene.landmark_count)},
      {"scene.seed", [&](const std::string& k, const std::string& v) { t.scene.seed = detail::parse_value<std::uint64_t>(k, v); }},
      {"scene.regions", [&](const std::string&, const std::string& v) { t.scene.regions = detail::parse_regions(v); }},
      {"camera.f", num(t.camera.f)},
      {"camera.cu", num(t.camera.cu)},
      {"camera.cv", num(t.camera.cv)},
      {"camera.width", num(t.camera.width)},
      {"camera.height", num(t.camera.height)},
      {"camera.baseline", num(t.camera.baseline)},
      {"camera.min_depth", num(t.camera.min_depth)},
      {"camera.max_depth", num(t.camera.max_depth)},
      {"camera.half_fov", num(t.camera.half_fov)},
      {"mount.x", num(t.mount.x)},
      {"mount.y", num(t.mount.y)},
      {"mount.yaw", num(t.mount.yaw)},
      {"mount.height", num(t.mount.height)},
      {"noise.pixel_sigma", num(t.noise.pixel_sigma)},
      {"noise.depth_rel_sigma", num(t.noise.depth_rel_sigma)},
      {"noise.drift_pos_rate", num(t.noise.drift_pos_rate)},
      {"noise.drift_yaw_rate", num(t.noise.drift_yaw_rate)},
      {"noise.per_step_jitter", num(t.noise.per_step_jitter)},
      {"noise.dropout_prob", num(t.noise.dropout_prob)},
      {"noise.estimate_latency", num(t.noise.estimate_latency)},
      {"gains.lambda", num(t.gains.lambda)},
      {"gains.k_theta", num(t.gains.k_theta)},
      {"gains.k_y", num(t.gains.k_y)},
      {"gains.pinv_eps", num(t.gains.pinv_eps)},
      {"gains.min_features", integer(t.gains.min_features)},
      {"gains.omega_max", num(t.gains.omega_max)},
      {"sim.control_rate", num(t.sim.control_rate)},
      {"sim.plant_dt", num(t.sim.plant_dt)},
      {"sim.settle_time", num(t.sim.settle_time)},
      {"sim.tau_fr", integer(t.sim.tau_fr)},
      {"sim.its_lookahead", num(t.sim.its_lookahead)},
      {"sim.offset_x", num(off_x)},
      {"sim.offset_y", num(off_y)},
      {"sim.offset_theta", num(off_th)},
      {"sim.ale_mode", [&](const std::string& k, const std::string& v) {
         if (v == "time_synchronized") t.ale_mode = AleMode::time_synchronized;
         else if (v == "nearest_point") t.ale_mode = AleMode::nearest_point;
         else throw Error(ErrorCode::ConfigError, "bad value for " + k + ": '" + v + "'");
       }},
      {"plant.omega_disturbance_sigma", num(t.plant.omega_disturbance_sigma)},
      {"plant.disturbance_tau", num(t.plant.disturbance_tau)},
      {"plant.actuator_lag", num(t.plant.actuator_lag)},
      {"template.name", [&](const std::string&, const std::string& v) { t.template_name = v; }},
      {"template.segments", [&](const std::string&, const std::string& v) { t.custom_segments = detail::parse_segments(v); }},
      {"template.scale", num(t.template_params.scale)},
      {"template.turn_radius", num(t.template_params.turn_radius)},
      {"template.cruise_speed", num(t.template_params.cruise_speed)},
      {"template.ramp_length", num(t.template_params.ramp_length)},
      {"template.sample_spacing", num(t.template_params.sample_spacing)},
      {"bench.trials", integer(cfg.bench.trials)},
      {"bench.seed", [&](const std::string& k, const std::string& v) { cfg.bench.seed = detail::parse_value<std::uint64_t>(k, v); }},
      {"bench.workers", integer(cfg.bench.workers)},
  };

  for (const auto& [section, body] : tree) {
    if (body.empty()) throw Error(ErrorCode::ConfigError, "key '" + section + "' outside a section");
    for (const auto& [key, value] : body) {
      const std::string full = section + "." + key;
      const auto it = setters.find(full);
      if (it == setters.end()) throw Error(ErrorCode::ConfigError, "unknown config key '" + full + "'");
      it->second(full, value.data());
    }
  }
  t.sim.initial_offset = Pose2(off_x, off_y, off_th);

  try {
    t.validate();
    if (t.template_name == "custom") {
      if (t.custom_segments.empty()) throw Error(ErrorCode::ConfigError, "custom template needs template.segments");
    } else {
      (void)template_segments(t.template_name, t.template_params);
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigError) throw;
    throw Error(ErrorCode::ConfigError, e.what());
  }
  if (cfg.bench.trials < 2 || cfg.bench.workers < 1) throw Error(ErrorCode::ConfigError, "bench needs trials >= 2 and workers >= 1");
  return cfg;
}

inline RunConfig parse_config(std::istream& is, RunConfig base = {}) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(is, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw Error(ErrorCode::ConfigError, e.what());
  }
  return config_from_tree(tree, std::move(base));
}

inline RunConfig parse_config_string(const std::string& text, RunConfig base = {}) {
  std::istringstream is(text);
  return parse_config(is, std::move(base));
}

inline RunConfig load_config(const std::string& path, RunConfig base = {}) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::ConfigError, "cannot open config '" + path + "'");
  return parse_config(is, std::move(base));
}

/// Applies "section.key=value" overrides, e.g. from the command line.
inline RunConfig apply_overrides(const std::vector<std::string>& overrides, RunConfig base) {
  boost::property_tree::ptree tree;
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    const auto dot = o.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
      throw Error(ErrorCode::ConfigError, "override must look like section.key=value: '" + o + "'");
    }
    tree.put(o.substr(0, eq), o.substr(eq + 1));
  }
  return config_from_tree(tree, std::move(base));
}

}  // namespace trajservo
