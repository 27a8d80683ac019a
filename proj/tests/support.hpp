#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "chfv/mesh.hpp"
#include "chfv/model.hpp"
#include "chfv/scheme.hpp"

namespace chfv::test {

inline std::shared_ptr<const Mesh> cartesian(std::size_t n, Rect domain = {}) {
  return std::make_shared<const Mesh>(build_cartesian(n, domain));
}

/// Two unit squares side by side: [0,1]x[0,1] and [1,2]x[0,1].
inline std::shared_ptr<const Mesh> two_cells() {
  std::vector<Point> pts{{0, 0}, {1, 0}, {2, 0}, {0, 1}, {1, 1}, {2, 1}};
  std::vector<std::vector<std::size_t>> polys{{0, 1, 4, 3}, {1, 2, 5, 4}};
  std::vector<Point> centers{{0.5, 0.5}, {1.5, 0.5}};
  return std::make_shared<const Mesh>(Mesh::from_polygons(pts, polys, centers));
}

/// Equilateral triangle lattice with `rows` strips of `cols` points, as text.
inline std::string equilateral_triangulation(std::size_t cols, std::size_t rows, double h = 0.1) {
  std::ostringstream out;
  out.precision(17);
  const double dy = h * std::sqrt(3.0) / 2.0;
  out << "vertices " << cols * (rows + 1) << '\n';
  for (std::size_t j = 0; j <= rows; ++j) {
    for (std::size_t i = 0; i < cols; ++i) {
      out << static_cast<double>(i) * h + (j % 2 ? 0.5 * h : 0.0) << ' ' << static_cast<double>(j) * dy << '\n';
    }
  }
  std::vector<std::array<std::size_t, 3>> tris;
  auto v = [cols](std::size_t i, std::size_t j) { return j * cols + i; };
  for (std::size_t j = 0; j < rows; ++j) {
    for (std::size_t i = 0; i + 1 < cols; ++i) {
      if (j % 2 == 0) {
        tris.push_back({v(i, j), v(i + 1, j), v(i, j + 1)});
        tris.push_back({v(i + 1, j), v(i + 1, j + 1), v(i, j + 1)});
      } else {
        tris.push_back({v(i, j), v(i + 1, j + 1), v(i, j + 1)});
        tris.push_back({v(i, j), v(i + 1, j), v(i + 1, j + 1)});
      }
    }
  }
  out << "triangles " << tris.size() << '\n';
  for (const auto& t : tris) out << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  return out.str();
}

/// Reference physics: alpha = 2e-4, kappa = 1.45, theta = 0.35, eta = 1.
inline ModelParams reference_params(double t_end = 0.02) {
  ModelParams p;
  p.physics.alpha = 2e-4;
  p.physics.kappa = 1.45;
  p.physics.theta = {0.35, 0.35};
  p.physics.eta = {1.0, 1.0};
  p.rho_num = 1.0;
  p.dt = 1e-4;
  p.t_end = t_end;
  return p;
}

inline PotentialSpec reference_gravity() {
  PotentialSpec g;
  g.type = PotentialSpec::Type::gravity;
  g.g = Point(0.0, -0.98);
  g.density = {5.0, 1.0};
  return g;
}

inline State random_state(std::size_t n, std::mt19937_64& rng, double lo = 0.05, double hi = 0.95,
                          double mu_scale = 1.0) {
  std::uniform_real_distribution<double> uc(lo, hi);
  std::uniform_real_distribution<double> um(-mu_scale, mu_scale);
  State s = State::uniform(n, 0.5);
  for (std::size_t k = 0; k < n; ++k) {
    s.c1[k] = uc(rng);
    s.mu1[k] = um(rng);
    s.mu2[k] = um(rng);
  }
  return s;
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& tag) {
  static std::mt19937_64 rng(static_cast<std::uint64_t>(std::chrono::steady_clock::now().time_since_epoch().count()));
  const auto dir = std::filesystem::temp_directory_path() / ("chfv_" + tag + "_" + std::to_string(rng() % 1000000007));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace chfv::test
