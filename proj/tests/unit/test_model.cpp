#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <random>

#include "chfv/model.hpp"
#include "support.hpp"

using namespace chfv;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("effective theta takes the larger of theta and rho h", "[model]") {
  PhysicsParams ph;
  ph.theta = {0.35, 0.35};
  CHECK(effective_theta(ph, 1.0, 0.017)[0] == 0.35);
  ph.theta = {0.0, 0.0};
  CHECK(effective_theta(ph, 1.0, 0.017)[1] == 0.017);
  ph.theta = {0.01, 0.01};
  CHECK_THAT(effective_theta(ph, 2.0, 0.05)[0], WithinRel(0.1, 1e-15));
}

TEST_CASE("effective theta is monotone and bounded below by rho h", "[model][property]") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    PhysicsParams ph;
    ph.theta = {u(rng), u(rng)};
    const double rho = 0.01 + u(rng);
    const double h = 1e-3 + u(rng);
    const auto t = effective_theta(ph, rho, h);
    CHECK(t[0] >= rho * h);
    CHECK(t[0] > 0.0);
    PhysicsParams bigger = ph;
    bigger.theta[0] += 0.1;
    CHECK(effective_theta(bigger, rho, h)[0] >= t[0]);
    CHECK(effective_theta(ph, rho * 1.5, h)[0] >= t[0]);
    CHECK(effective_theta(ph, rho, h * 1.5)[0] >= t[0]);
  }
}

TEST_CASE("gravity potentials at the barycentre", "[model]") {
  const Mesh m = build_cartesian(2);
  const PotentialSpec g = test::reference_gravity();
  const Mesh big = build_cartesian(2, Rect{0.25, 0.25, 0.75, 0.75});
  const PotentialField f = cell_average_potential(g, big);
  // Cell 0 of the shifted grid has barycentre (0.375, 0.375).
  CHECK_THAT(f.psi1[0], WithinRel(5.0 * 0.98 * 0.375, 1e-14));

  // Barycentre (0.5, 0.5): Psi_1 = -5 (-0.98) 0.5 = 2.45.
  const Mesh mid = Mesh::from_polygons({{0.25, 0.25}, {0.75, 0.25}, {0.75, 0.75}, {0.25, 0.75}, {1.0, 0.25}, {1.0, 0.75}},
                                       {{0, 1, 2, 3}, {1, 4, 5, 2}}, {{0.5, 0.5}, {0.875, 0.5}});
  const PotentialField fm = cell_average_potential(g, mid);
  CHECK_THAT(fm.psi1[0], WithinRel(2.45, 1e-14));
  // Barycentre (0.5, 0.25) with rho_2 = 1: 0.245.
  const Mesh low = Mesh::from_polygons({{0.25, 0.0}, {0.75, 0.0}, {0.75, 0.5}, {0.25, 0.5}, {1.0, 0.0}, {1.0, 0.5}},
                                       {{0, 1, 2, 3}, {1, 4, 5, 2}}, {{0.5, 0.25}, {0.875, 0.25}});
  CHECK_THAT(cell_average_potential(g, low).psi2[0], WithinRel(0.245, 1e-14));

  const PotentialField zero = cell_average_potential(PotentialSpec{}, m);
  for (double v : zero.psi1) CHECK(v == 0.0);
  for (double v : zero.psi2) CHECK(v == 0.0);
}

TEST_CASE("affine potentials: barycentre value equals the 16-point cell average", "[model][property]") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::istringstream in(test::equilateral_triangulation(6, 5, 0.17));
  const std::vector<Mesh> meshes{build_cartesian(5, Rect{-1, 0, 1, 3}), parse_triangulation(in)};
  for (const Mesh& m : meshes) {
    for (int trial = 0; trial < 20; ++trial) {
      PotentialSpec g;
      g.type = PotentialSpec::Type::gravity;
      g.g = Point(u(rng), u(rng));
      g.density = {1.0 + std::abs(u(rng)), 1.0};
      const PotentialField f = cell_average_potential(g, m);
      for (std::size_t k = 0; k < m.num_cells(); ++k) {
        // The 16-point rule integrates affine functions exactly.
        const double avg = cell_average(m, k, [&](const Point& x) { return -g.density[0] * g.g.dot(x); });
        CHECK_THAT(f.psi1[k], WithinAbs(avg, 1e-12 * (1.0 + std::abs(avg))));
      }
    }
  }
}

TEST_CASE("uniform noise is bounded and seed reproducible", "[model][property]") {
  const Mesh m = build_cartesian(16);
  const UniformNoise spec{0.5, 1e-2};
  const auto a = initial_state(spec, m, 42);
  const auto b = initial_state(spec, m, 42);
  const auto c = initial_state(spec, m, 43);
  CHECK(a == b);
  CHECK(a != c);
  for (double v : a) {
    CHECK(v > 0.5 - 1e-2);
    CHECK(v < 0.5 + 1e-2);
  }
}

TEST_CASE("a cross covering half of a cell gives 0.5 there", "[model]") {
  const Mesh m = build_cartesian(4);
  CrossShape s;
  s.center = Point(0.5, 0.5);
  s.width = 0.25;      // strips x, y in [0.375, 0.625]
  s.arm_length = 1.0;  // arms reach the boundary
  s.quadrature = true;
  const auto c = initial_state(s, m, 1);
  // Cells in columns 1 and 2 of rows 0 and 3 are cut in half by the vertical strip.
  for (std::size_t j : {0u, 3u}) {
    for (std::size_t i : {1u, 2u}) CHECK(c[j * 4 + i] == 0.5);
  }
  // Corner cells are untouched.
  CHECK(c[0] == 0.0);
  CHECK(c[15] == 0.0);
}

TEST_CASE("file initial data: zero phase-1 mass is rejected", "[model]") {
  const Mesh m = build_cartesian(2);
  const auto dir = test::scratch_dir("model");
  const auto path = (dir / "c.txt").string();
  {
    std::ofstream(path) << "0 0 0 0\n";
  }
  CHECK_THROWS_AS(initial_state(FromFile{path}, m, 1), ConfigError);
  {
    std::ofstream(path) << "0.1 0.2 0.3 0.4\n";
  }
  const auto c = initial_state(FromFile{path}, m, 1);
  CHECK(c == std::vector<double>{0.1, 0.2, 0.3, 0.4});
  {
    std::ofstream(path) << "0.1 0.2 0.3\n";
  }
  CHECK_THROWS_AS(initial_state(FromFile{path}, m, 1), ConfigError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("parameter validation names the key", "[model]") {
  ModelParams p = test::reference_params();
  CHECK_NOTHROW(p.validate());
  p.dt = 0.0;
  try {
    p.validate();
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()) == "numerics.dt must be > 0");
  }
  p = test::reference_params();
  p.physics.alpha = -1.0;
  CHECK_THROWS_WITH(p.validate(), Catch::Matchers::ContainsSubstring("physics.alpha"));
  p = test::reference_params();
  p.newton.eps_proj = 0.7;
  CHECK_THROWS_WITH(p.validate(), Catch::Matchers::ContainsSubstring("numerics.eps_proj"));
}

TEST_CASE("step count rounds t_end / dt", "[model]") {
  ModelParams p = test::reference_params(0.02);
  CHECK(step_count(p) == 200);
  p.t_end = 0.5;
  CHECK(step_count(p) == 5000);
}
