#include <catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "chfv/mesh.hpp"
#include "support.hpp"

using namespace chfv;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("2x2 grid: four quarter cells with unit transmissivities", "[mesh]") {
  const Mesh m = build_cartesian(2);
  REQUIRE(m.num_cells() == 4);
  REQUIRE(m.interior_edges().size() == 4);
  REQUIRE(m.boundary_edges().size() == 8);
  for (const Cell& c : m.cells()) CHECK(c.area == 0.25);
  for (std::size_t e : m.interior_edges()) {
    // tau = m_sigma / d_sigma = 0.5 / 0.5
    CHECK(m.edge(e).transmissivity == 1.0);
  }
  CHECK(m.domain_area() == 1.0);
  CHECK(m.all_quads());
}

TEST_CASE("a single cell per side is rejected", "[mesh]") {
  REQUIRE_THROWS_AS(build_cartesian(1), MeshError);
  REQUIRE_THROWS_AS(build_cartesian(4, Rect{0, 0, 0, 1}), MeshError);
}

TEST_CASE("64x64 grid counts", "[mesh]") {
  const Mesh m = build_cartesian(64);
  CHECK(m.num_cells() == 4096);
  const std::size_t n = 64;
  CHECK(m.interior_edges().size() == 2 * n * (n - 1));
}

TEST_CASE("cartesian normals are axis aligned and cells are closed", "[mesh][property]") {
  for (std::size_t n : {2u, 3u, 7u, 16u}) {
    const Mesh m = build_cartesian(n, Rect{-1.0, 0.5, 2.0, 1.75});
    for (const Edge& e : m.edges()) {
      CHECK_THAT(e.normal.norm(), WithinAbs(1.0, 1e-15));
      CHECK((std::abs(e.normal.x()) < 1e-15 || std::abs(e.normal.y()) < 1e-15));
    }
    // sum_sigma m_sigma n_K,sigma = 0, with n oriented away from K
    for (const Cell& c : m.cells()) {
      Point sum = Point::Zero();
      for (std::size_t id : c.edges) {
        const Edge& e = m.edge(id);
        const double sign = (e.interior() && e.cell_l == c.id) ? -1.0 : 1.0;
        sum += sign * e.length * e.normal;
      }
      CHECK(sum.norm() < 1e-13);
    }
  }
}

TEST_CASE("h halves when n doubles", "[mesh][property]") {
  for (std::size_t n : {2u, 4u, 8u, 32u}) {
    const double h1 = build_cartesian(n).h();
    const double h2 = build_cartesian(2 * n).h();
    CHECK_THAT(h2, WithinRel(0.5 * h1, 1e-15));
  }
}

TEST_CASE("cartesian grid is super-admissible with equal transmissivities", "[mesh]") {
  const Mesh m = build_cartesian(2);
  const RegularityReport r = check_admissibility(m);
  CHECK(r.ell_star == 4);
  CHECK(r.super_admissible);
  CHECK(r.violations.empty());
  const RegularityReport r8 = check_admissibility(build_cartesian(8));
  CHECK(r8.tau_star_min == r8.tau_star_max);
}

TEST_CASE("diamond areas around a cell are bounded by zeta m_K", "[mesh][property]") {
  const std::vector<Mesh> meshes = [] {
    std::vector<Mesh> v;
    v.push_back(build_cartesian(5));
    v.push_back(build_cartesian(9, Rect{0, 0, 2, 1}));
    std::istringstream in(test::equilateral_triangulation(8, 6));
    v.push_back(parse_triangulation(in));
    return v;
  }();
  for (const Mesh& m : meshes) {
    const double zeta = check_admissibility(m).zeta;
    for (const Cell& c : m.cells()) {
      double sum = 0.0;
      for (std::size_t id : c.edges) {
        if (m.edge(id).interior()) sum += m.edge(id).diamond_area();
      }
      CHECK(sum <= zeta * c.area * (1.0 + 1e-12));
    }
  }
}

TEST_CASE("two acute triangles: the centre segment bisects the shared edge", "[mesh]") {
  std::istringstream in("vertices 4\n0 0\n1 0\n0.5 0.8\n0.5 -0.8\ntriangles 2\n0 1 2\n1 0 3\n");
  const Mesh m = parse_triangulation(in);
  REQUIRE(m.interior_edges().size() == 1);
  const Edge& e = m.edge(m.interior_edges()[0]);
  const Point xk = m.cell(e.cell_k).center;
  const Point xl = m.cell(e.cell_l).center;
  // Midpoint of [x_K, x_L] lies on the edge midpoint, and the segment is perpendicular.
  CHECK((0.5 * (xk + xl) - e.midpoint).norm() < 1e-15);
  CHECK(std::abs((xl - xk).dot(Point(1.0, 0.0))) < 1e-15);
  CHECK(check_admissibility(m).super_admissible);
  CHECK(m.all_triangles());
}

TEST_CASE("a right angle opposite an interior edge is rejected", "[mesh]") {
  // Both triangles have their right angle facing the shared diagonal.
  std::istringstream in("vertices 4\n0 0\n1 0\n1 1\n0 1\ntriangles 2\n0 1 2\n0 2 3\n");
  try {
    parse_triangulation(in);
    FAIL("expected a MeshError");
  } catch (const MeshError& e) {
    CHECK(std::string(e.what()).find("circumcenter on boundary edge, d_Ksigma = 0") != std::string::npos);
  }
}

TEST_CASE("obtuse and malformed triangulations are rejected", "[mesh]") {
  std::istringstream obtuse("vertices 3\n0 0\n1 0\n0.5 0.1\ntriangles 1\n0 1 2\n");
  CHECK_THROWS_AS(parse_triangulation(obtuse), MeshError);
  std::istringstream missing("vertices 3\n0 0\n1 0\n0.5 0.8\ntriangles 1\n0 1 5\n");
  CHECK_THROWS_AS(parse_triangulation(missing), MeshError);
  std::istringstream truncated("vertices 3\n0 0\n1 0\n");
  CHECK_THROWS_AS(parse_triangulation(truncated), MeshError);
  CHECK_THROWS_AS(load_triangulation("/nonexistent/mesh.txt"), MeshError);
}

TEST_CASE("an off-bisector centre is reported for its edges", "[mesh]") {
  std::vector<Point> pts{{0, 0}, {1, 0}, {2, 0}, {0, 1}, {1, 1}, {2, 1}};
  std::vector<std::vector<std::size_t>> polys{{0, 1, 4, 3}, {1, 2, 5, 4}};
  std::vector<Point> centers{{0.5, 0.5 + 1e-3}, {1.5, 0.5}};
  const Mesh m = Mesh::from_polygons(pts, polys, centers);
  const RegularityReport r = check_admissibility(m);
  CHECK_FALSE(r.super_admissible);
  REQUIRE_FALSE(r.violations.empty());
  CHECK(r.violations.front().edge == m.interior_edges()[0]);
}

TEST_CASE("triangulation round trip through the text format", "[mesh]") {
  std::istringstream in(test::equilateral_triangulation(6, 4));
  const Mesh a = parse_triangulation(in);
  std::ostringstream out;
  write_triangulation(a, out);
  std::istringstream back(out.str());
  const Mesh b = parse_triangulation(back);
  REQUIRE(a.num_cells() == b.num_cells());
  for (std::size_t k = 0; k < a.num_cells(); ++k) CHECK((a.cell(k).center - b.cell(k).center).norm() < 1e-15);
  CHECK(check_admissibility(b).super_admissible);
}

TEST_CASE("neighbour lists are sorted and symmetric", "[mesh][property]") {
  std::istringstream in(test::equilateral_triangulation(7, 5));
  const Mesh m = parse_triangulation(in);
  for (std::size_t k = 0; k < m.num_cells(); ++k) {
    const auto nb = m.neighbors(k);
    for (std::size_t j = 1; j < nb.size(); ++j) CHECK(nb[j - 1].cell < nb[j].cell);
    for (const Neighbor& x : nb) {
      const auto back = m.neighbors(x.cell);
      CHECK(std::count_if(back.begin(), back.end(), [&](const Neighbor& y) { return y.cell == k; }) == 1);
    }
  }
}
