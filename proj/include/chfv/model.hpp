#pragma once

// Physical and numerical parameters, external potentials and initial data.

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "chfv/errors.hpp"
#include "chfv/mesh.hpp"

namespace chfv {

struct PhysicsParams {
  double alpha = 2e-4;                  // interface energy coefficient
  double kappa = 1.45;                  // repulsion coefficient
  std::array<double, 2> theta{0.35, 0.35};  // thermal agitation
  std::array<double, 2> eta{1.0, 1.0};      // viscosities
};

struct NewtonSettings {
  double tol = 1e-6;       // l2 norm of the Newton increment
  int max_iter = 50;
  double eps_proj = 1e-10;  // c1 is kept in [eps, 1 - eps]
  double damping = 0.5;     // backtracking factor
  int max_backtracks = 8;
  bool warm_start_mu = false;  // start from the previous potentials when available
};

/// Psi_i(x) = -rho_i g . x (gravity) or zero.
struct PotentialSpec {
  enum class Type { none, gravity };
  Type type = Type::none;
  Point g = Point(0.0, -0.98);
  std::array<double, 2> density{5.0, 1.0};
};

struct UniformNoise {
  double mean = 0.5;
  double amplitude = 1e-2;
};

/// Two axis-aligned bars crossing at `center`.
struct CrossShape {
  Point center = Point(0.5, 0.5);
  double width = 0.2;
  double arm_length = 0.6;
  bool quadrature = true;
};

/// mean + amplitude * cos(pi x) cos(pi y), cell-averaged by quadrature.
struct SmoothBump {
  double mean = 0.5;
  double amplitude = 0.2;
};

struct FromFile {
  std::string path;
};

using InitialSpec = std::variant<UniformNoise, CrossShape, SmoothBump, FromFile>;

struct ModelParams {
  PhysicsParams physics;
  double rho_num = 1.0;  // numerical diffusion scale
  double dt = 1e-4;
  double t_end = 0.02;
  NewtonSettings newton;
  PotentialSpec potential;
  InitialSpec initial = UniformNoise{};
  std::uint64_t seed = 1;

  /// Throws ConfigError naming the offending key.
  void validate() const;
};

inline void ModelParams::validate() const {
  auto require = [](bool ok, const char* msg) {
    if (!ok) throw ConfigError(msg);
  };
  require(physics.alpha > 0.0, "physics.alpha must be > 0");
  require(physics.kappa > 0.0, "physics.kappa must be > 0");
  require(physics.theta[0] >= 0.0, "physics.theta1 must be >= 0");
  require(physics.theta[1] >= 0.0, "physics.theta2 must be >= 0");
  require(physics.eta[0] > 0.0, "physics.eta1 must be > 0");
  require(physics.eta[1] > 0.0, "physics.eta2 must be > 0");
  require(rho_num > 0.0, "numerics.rho_num must be > 0");
  require(dt > 0.0 && std::isfinite(dt), "numerics.dt must be > 0");
  require(t_end > 0.0 && std::isfinite(t_end), "numerics.t_end must be > 0");
  require(newton.tol > 0.0, "numerics.newton_tol must be > 0");
  require(newton.max_iter >= 1, "numerics.newton_max_iter must be >= 1");
  require(newton.eps_proj > 0.0 && newton.eps_proj < 0.5, "numerics.eps_proj must be in (0, 0.5)");
  require(newton.damping > 0.0 && newton.damping < 1.0, "numerics.damping must be in (0, 1)");
  require(newton.max_backtracks >= 0, "numerics.max_backtracks must be >= 0");
}

/// Number of uniform steps covering [0, t_end].
inline std::size_t step_count(const ModelParams& p) {
  return static_cast<std::size_t>(std::llround(p.t_end / p.dt));
}

/// theta_i,T = max(theta_i, rho h_T).
inline std::array<double, 2> effective_theta(const PhysicsParams& physics, double rho_num, double h) {
  return {std::max(physics.theta[0], rho_num * h), std::max(physics.theta[1], rho_num * h)};
}

inline std::array<double, 2> effective_theta(const ModelParams& p, const Mesh& mesh) {
  return effective_theta(p.physics, p.rho_num, mesh.h());
}

/// Per-cell averages of the two external potentials.
struct PotentialField {
  std::vector<double> psi1;
  std::vector<double> psi2;

  static PotentialField zero(std::size_t n) { return {std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)}; }
  const std::vector<double>& operator[](int i) const { return i == 0 ? psi1 : psi2; }
};

/// 16 equal-weight sample points of a triangle or parallelogram cell
/// (tensor 4x4 midpoint rule; centroids of the 16 congruent sub-triangles).
inline std::vector<Point> cell_quadrature_points(const Mesh& mesh, std::size_t k) {
  const Cell& c = mesh.cell(k);
  const auto pts = mesh.points();
  std::vector<Point> q;
  q.reserve(16);
  if (c.vertices.size() == 4) {
    const Point& a = pts[c.vertices[0]];
    const Point& b = pts[c.vertices[1]];
    const Point& d = pts[c.vertices[3]];
    for (int j = 0; j < 4; ++j) {
      for (int i = 0; i < 4; ++i) {
        q.push_back(a + (b - a) * ((i + 0.5) / 4.0) + (d - a) * ((j + 0.5) / 4.0));
      }
    }
  } else if (c.vertices.size() == 3) {
    const Point& a = pts[c.vertices[0]];
    const Point u = (pts[c.vertices[1]] - a) / 4.0;
    const Point v = (pts[c.vertices[2]] - a) / 4.0;
    for (int j = 0; j < 4; ++j) {
      for (int i = 0; i + j < 4; ++i) {
        const Point o = a + static_cast<double>(i) * u + static_cast<double>(j) * v;
        q.push_back(o + (u + v) / 3.0);                    // upright sub-triangle
        if (i + j < 3) q.push_back(o + (2.0 * u + 2.0 * v) / 3.0);  // inverted one
      }
    }
  } else {
    throw ConfigError("sub-cell quadrature supports triangles and quadrilaterals only");
  }
  return q;
}

/// Cell average of an arbitrary function by the 16-point rule.
inline double cell_average(const Mesh& mesh, std::size_t k, const std::function<double(const Point&)>& f) {
  double s = 0.0;
  for (const Point& x : cell_quadrature_points(mesh, k)) s += f(x);
  return s / 16.0;
}

/// Affine potentials are averaged exactly by evaluation at the barycentre.
inline PotentialField cell_average_potential(const PotentialSpec& spec, const Mesh& mesh) {
  const std::size_t n = mesh.num_cells();
  PotentialField field = PotentialField::zero(n);
  switch (spec.type) {
    case PotentialSpec::Type::none:
      break;
    case PotentialSpec::Type::gravity:
      for (std::size_t k = 0; k < n; ++k) {
        const double gx = spec.g.dot(mesh.cell(k).barycenter);
        field.psi1[k] = -spec.density[0] * gx;
        field.psi2[k] = -spec.density[1] * gx;
      }
      break;
  }
  return field;
}

/// Counter-based uniform variate in [0, 1): splitmix64 of (seed, index).
inline double counter_uniform(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed * 0x9E3779B97F4A7C15ULL + index + 0x632BE59BD9B4E019ULL;
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ULL;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return static_cast<double>(z >> 11) * 0x1.0p-53;
}

inline bool inside_cross(const CrossShape& s, const Point& x) {
  const Point d = (x - s.center).cwiseAbs();
  const double half_w = 0.5 * s.width;
  const double half_l = 0.5 * s.arm_length;
  return (d.x() <= half_w && d.y() <= half_l) || (d.y() <= half_w && d.x() <= half_l);
}

/// Cell values c1^0; c2^0 = 1 - c1^0 is implied.
inline std::vector<double> initial_state(const InitialSpec& spec, const Mesh& mesh, std::uint64_t seed) {
  const std::size_t n = mesh.num_cells();
  std::vector<double> c(n);

  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, UniformNoise>) {
          if (s.amplitude < 0.0 || s.mean - s.amplitude < 0.0 || s.mean + s.amplitude > 1.0) {
            throw ConfigError("initial.mean +/- initial.amplitude must stay within [0, 1]");
          }
          for (std::size_t k = 0; k < n; ++k) {
            c[k] = s.mean + s.amplitude * (2.0 * counter_uniform(seed, k) - 1.0);
          }
        } else if constexpr (std::is_same_v<T, CrossShape>) {
          for (std::size_t k = 0; k < n; ++k) {
            if (s.quadrature) {
              c[k] = cell_average(mesh, k, [&](const Point& x) { return inside_cross(s, x) ? 1.0 : 0.0; });
            } else {
              c[k] = inside_cross(s, mesh.cell(k).barycenter) ? 1.0 : 0.0;
            }
          }
        } else if constexpr (std::is_same_v<T, SmoothBump>) {
          if (s.mean - std::abs(s.amplitude) < 0.0 || s.mean + std::abs(s.amplitude) > 1.0) {
            throw ConfigError("initial.mean +/- initial.amplitude must stay within [0, 1]");
          }
          const double pi = 3.14159265358979323846;
          for (std::size_t k = 0; k < n; ++k) {
            c[k] = cell_average(mesh, k, [&](const Point& x) {
              return s.mean + s.amplitude * std::cos(pi * x.x()) * std::cos(pi * x.y());
            });
          }
        } else {
          std::ifstream in(s.path);
          if (!in) throw ConfigError("initial.path: cannot open '" + s.path + "'");
          for (std::size_t k = 0; k < n; ++k) {
            if (!(in >> c[k])) throw ConfigError("initial.path: expected " + std::to_string(n) + " values");
          }
          double extra;
          if (in >> extra) throw ConfigError("initial.path: more values than cells");
        }
      },
      spec);

  double m1 = 0.0;
  double m2 = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (!(c[k] >= 0.0 && c[k] <= 1.0)) {
      throw ConfigError("initial state leaves [0, 1] in cell " + std::to_string(k));
    }
    m1 += mesh.cell(k).area * c[k];
    m2 += mesh.cell(k).area * (1.0 - c[k]);
  }
  if (!(m1 > 0.0)) throw ConfigError("initial state has zero phase-1 mass");
  if (!(m2 > 0.0)) throw ConfigError("initial state has zero phase-2 mass");
  return c;
}

}  // namespace chfv
