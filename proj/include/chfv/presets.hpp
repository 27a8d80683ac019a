#pragma once

// Reference experiment presets: spinodal decomposition and the cross, each
// with and without gravity, at desk scale on a Cartesian grid.

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "chfv/config.hpp"
#include "chfv/errors.hpp"
#include "chfv/model.hpp"

namespace chfv {

enum class PresetCase { spinodal, spinodal_gravity, cross, cross_gravity };

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"spinodal", "spinodal-gravity", "cross", "cross-gravity"};
  return names;
}

inline PresetCase parse_preset(const std::string& name) {
  if (name == "spinodal") return PresetCase::spinodal;
  if (name == "spinodal-gravity") return PresetCase::spinodal_gravity;
  if (name == "cross") return PresetCase::cross;
  if (name == "cross-gravity") return PresetCase::cross_gravity;
  throw ConfigError("unknown case '" + name + "' (spinodal|spinodal-gravity|cross|cross-gravity)");
}

inline bool is_spinodal(PresetCase c) { return c == PresetCase::spinodal || c == PresetCase::spinodal_gravity; }
inline bool has_gravity(PresetCase c) { return c == PresetCase::spinodal_gravity || c == PresetCase::cross_gravity; }

inline PhysicsParams reference_physics() {
  PhysicsParams ph;
  ph.alpha = 2e-4;
  ph.kappa = 1.45;
  ph.theta = {0.35, 0.35};
  ph.eta = {1.0, 1.0};
  return ph;
}

inline PotentialSpec reference_gravity() {
  PotentialSpec g;
  g.type = PotentialSpec::Type::gravity;
  g.g = Point(0.0, -0.98);
  g.density = {5.0, 1.0};
  return g;
}

inline std::vector<double> snapshot_times(PresetCase c) {
  if (is_spinodal(c)) return {0.005, 0.01, 0.02, 0.2};
  return {0.02, 0.07, 0.15, 0.2, 0.5};
}

inline double default_t_end(PresetCase c) { return c == PresetCase::cross_gravity ? 0.5 : 0.2; }

inline std::set<std::size_t> snapshot_steps(const std::vector<double>& times, double dt, double t_end) {
  std::set<std::size_t> steps;
  for (double t : times) {
    if (t <= t_end * (1.0 + 1e-12)) steps.insert(static_cast<std::size_t>(std::llround(t / dt)));
  }
  return steps;
}

/// Full configuration of a preset; `mesh_n` and `t_end` override the defaults.
inline RunConfig preset_config(PresetCase c, std::optional<std::size_t> mesh_n = std::nullopt,
                               std::optional<double> t_end = std::nullopt) {
  RunConfig cfg;
  auto& p = cfg.params;
  p.physics = reference_physics();
  p.rho_num = 1.0;
  p.dt = 1e-4;
  p.t_end = t_end.value_or(default_t_end(c));
  p.newton = NewtonSettings{};
  p.newton.warm_start_mu = true;
  p.potential = has_gravity(c) ? reference_gravity() : PotentialSpec{};
  if (is_spinodal(c)) {
    p.initial = UniformNoise{0.5, 1e-2};
  } else {
    p.initial = CrossShape{};
  }
  cfg.mesh.type = MeshSpec::Type::cartesian;
  cfg.mesh.n = mesh_n.value_or(64);
  p.validate();
  return cfg;
}

}  // namespace chfv
