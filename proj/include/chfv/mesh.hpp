#pragma once

// Two-dimensional cell-centred finite volume meshes with precomputed
// two-point-flux geometry. A Mesh is immutable once built; every quantity
// the scheme needs (transmissivities, distances, diamond areas, neighbour
// lists) is computed by the constructor.

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "chfv/errors.hpp"

namespace chfv {

using Point = Eigen::Vector2d;

/// Axis-aligned rectangle [x0, x1] x [y0, y1].
struct Rect {
  double x0 = 0.0;
  double y0 = 0.0;
  double x1 = 1.0;
  double y1 = 1.0;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  double area() const { return width() * height(); }
};

struct Cell {
  std::size_t id = 0;
  std::vector<std::size_t> vertices;  // counter-clockwise
  Point center = Point::Zero();       // x_K, the two-point flux node
  Point barycenter = Point::Zero();
  double area = 0.0;
  double diameter = 0.0;
  std::vector<std::size_t> edges;
};

struct Edge {
  static constexpr std::size_t no_cell = std::numeric_limits<std::size_t>::max();

  std::size_t id = 0;
  std::array<std::size_t, 2> vertices{};
  std::size_t cell_k = no_cell;
  std::size_t cell_l = no_cell;  // no_cell on the domain boundary
  double length = 0.0;           // m_sigma
  double d = 0.0;                // |x_K - x_L|, interior only
  double d_k = 0.0;              // |x_K - x_sigma|
  double d_l = 0.0;              // |x_L - x_sigma|, interior only
  Point midpoint = Point::Zero();
  Point normal = Point::Zero();  // n_KL (interior) or outward unit normal of K
  double transmissivity = 0.0;   // m_sigma / d_sigma; zero on the boundary
  double half_diamond_k = 0.0;   // area of conv{x_K, sigma}
  double half_diamond_l = 0.0;   // area of conv{x_L, sigma}

  bool interior() const { return cell_l != no_cell; }
  double diamond_area() const { return half_diamond_k + half_diamond_l; }
};

/// One interior edge seen from one of its cells.
struct Neighbor {
  std::size_t cell;  // the cell on the other side
  std::size_t edge;
  double transmissivity;
};

class Mesh {
 public:
  /// Builds the mesh from vertex coordinates, cell polygons (any
  /// orientation) and the cell centres used as flux nodes.
  static Mesh from_polygons(std::vector<Point> points, std::vector<std::vector<std::size_t>> polygons,
                            std::vector<Point> centers);

  std::size_t num_cells() const { return cells_.size(); }
  std::span<const Point> points() const { return points_; }
  std::span<const Cell> cells() const { return cells_; }
  std::span<const Edge> edges() const { return edges_; }
  const Cell& cell(std::size_t k) const { return cells_[k]; }
  const Edge& edge(std::size_t e) const { return edges_[e]; }
  std::span<const std::size_t> interior_edges() const { return interior_; }
  std::span<const std::size_t> boundary_edges() const { return boundary_; }

  /// Interior edges of cell k ordered by neighbour index.
  std::span<const Neighbor> neighbors(std::size_t k) const {
    return {neighbors_.data() + neighbor_offsets_[k], neighbors_.data() + neighbor_offsets_[k + 1]};
  }

  double h() const { return h_; }
  double domain_area() const { return domain_area_; }
  bool all_triangles() const;
  bool all_quads() const;

 private:
  Mesh() = default;

  std::vector<Point> points_;
  std::vector<Cell> cells_;
  std::vector<Edge> edges_;
  std::vector<std::size_t> interior_;
  std::vector<std::size_t> boundary_;
  std::vector<std::size_t> neighbor_offsets_;
  std::vector<Neighbor> neighbors_;
  double h_ = 0.0;
  double domain_area_ = 0.0;
};

struct AdmissibilityViolation {
  enum class Kind { orthogonality, midpoint, degenerate_distance };
  std::size_t edge;
  Kind kind;
  double defect;  // radians for orthogonality, relative to d_sigma otherwise
};

struct RegularityReport {
  double zeta = 1.0;
  std::size_t ell_star = 0;
  double tau_star_min = 0.0;
  double tau_star_max = 0.0;
  bool super_admissible = true;
  std::vector<AdmissibilityViolation> violations;
};

/// Tolerances used by check_admissibility.
inline constexpr double orthogonality_tolerance = 1e-10;
inline constexpr double midpoint_tolerance = 1e-10;

namespace detail {

inline double cross(const Point& a, const Point& b) { return a.x() * b.y() - a.y() * b.x(); }

inline double triangle_area(const Point& a, const Point& b, const Point& c) {
  return 0.5 * std::abs(cross(b - a, c - a));
}

inline double signed_polygon_area(std::span<const Point> pts, const std::vector<std::size_t>& poly) {
  double s = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Point& p = pts[poly[i]];
    const Point& q = pts[poly[(i + 1) % poly.size()]];
    s += cross(p, q);
  }
  return 0.5 * s;
}

inline Point polygon_centroid(std::span<const Point> pts, const std::vector<std::size_t>& poly, double area) {
  // Shift to the first vertex to limit cancellation.
  const Point& o = pts[poly[0]];
  Point c = Point::Zero();
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Point p = pts[poly[i]] - o;
    const Point q = pts[poly[(i + 1) % poly.size()]] - o;
    const double w = cross(p, q);
    c += (p + q) * w;
  }
  return o + c / (6.0 * area);
}

}  // namespace detail

inline bool Mesh::all_triangles() const {
  return std::all_of(cells_.begin(), cells_.end(), [](const Cell& c) { return c.vertices.size() == 3; });
}

inline bool Mesh::all_quads() const {
  return std::all_of(cells_.begin(), cells_.end(), [](const Cell& c) { return c.vertices.size() == 4; });
}

inline Mesh Mesh::from_polygons(std::vector<Point> points, std::vector<std::vector<std::size_t>> polygons,
                                std::vector<Point> centers) {
  if (polygons.empty()) throw MeshError("mesh has no cells");
  if (centers.size() != polygons.size()) throw MeshError("one cell centre per polygon is required");

  Mesh m;
  m.points_ = std::move(points);
  const std::span<const Point> pts = m.points_;
  m.cells_.resize(polygons.size());

  for (std::size_t k = 0; k < polygons.size(); ++k) {
    auto& poly = polygons[k];
    if (poly.size() < 3) throw MeshError("cell " + std::to_string(k) + " has fewer than 3 vertices");
    for (auto v : poly) {
      if (v >= pts.size()) throw MeshError("cell " + std::to_string(k) + " references a missing vertex");
    }
    double a = detail::signed_polygon_area(pts, poly);
    if (a < 0.0) {
      std::reverse(poly.begin(), poly.end());
      a = -a;
    }
    if (!(a > 0.0)) throw MeshError("cell " + std::to_string(k) + " has zero area");

    Cell& c = m.cells_[k];
    c.id = k;
    c.vertices = poly;
    c.area = a;
    c.center = centers[k];
    c.barycenter = detail::polygon_centroid(pts, poly, a);
    for (std::size_t i = 0; i < poly.size(); ++i) {
      for (std::size_t j = i + 1; j < poly.size(); ++j) {
        c.diameter = std::max(c.diameter, (pts[poly[i]] - pts[poly[j]]).norm());
      }
    }
    m.h_ = std::max(m.h_, c.diameter);
    m.domain_area_ += a;
  }

  // Edges, identified by their sorted vertex pair, numbered in order of
  // first appearance.
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> lookup;
  for (auto& c : m.cells_) {
    const auto& poly = c.vertices;
    for (std::size_t i = 0; i < poly.size(); ++i) {
      const std::size_t a = poly[i];
      const std::size_t b = poly[(i + 1) % poly.size()];
      const auto key = std::minmax(a, b);
      auto [it, inserted] = lookup.try_emplace({key.first, key.second}, m.edges_.size());
      if (inserted) {
        Edge e;
        e.id = m.edges_.size();
        e.vertices = {a, b};
        e.cell_k = c.id;
        m.edges_.push_back(e);
      } else {
        Edge& e = m.edges_[it->second];
        if (e.interior()) {
          throw MeshError("edge (" + std::to_string(a) + ", " + std::to_string(b) +
                          ") is shared by more than two cells");
        }
        if (e.cell_k == c.id) throw MeshError("cell " + std::to_string(c.id) + " repeats an edge");
        e.cell_l = c.id;
      }
      c.edges.push_back(it->second);
    }
  }

  for (Edge& e : m.edges_) {
    const Point& a = pts[e.vertices[0]];
    const Point& b = pts[e.vertices[1]];
    e.length = (b - a).norm();
    e.midpoint = 0.5 * (a + b);
    const Cell& ck = m.cells_[e.cell_k];
    e.d_k = (ck.center - e.midpoint).norm();
    e.half_diamond_k = detail::triangle_area(ck.center, a, b);
    if (e.interior()) {
      const Cell& cl = m.cells_[e.cell_l];
      const Point dx = cl.center - ck.center;
      e.d = dx.norm();
      if (!(e.d > 0.0)) {
        throw MeshError("cells " + std::to_string(ck.id) + " and " + std::to_string(cl.id) +
                        " share a centre");
      }
      e.d_l = (cl.center - e.midpoint).norm();
      e.normal = dx / e.d;
      e.transmissivity = e.length / e.d;
      e.half_diamond_l = detail::triangle_area(cl.center, a, b);
      m.interior_.push_back(e.id);
    } else {
      const Point t = (b - a) / e.length;
      Point n(t.y(), -t.x());
      if (n.dot(e.midpoint - ck.barycenter) < 0.0) n = -n;
      e.normal = n;
      m.boundary_.push_back(e.id);
    }
  }

  // Neighbour lists in CSR layout, sorted by neighbour index so that
  // every per-cell reduction runs in a fixed order.
  m.neighbor_offsets_.assign(m.cells_.size() + 1, 0);
  for (std::size_t e : m.interior_) {
    ++m.neighbor_offsets_[m.edges_[e].cell_k + 1];
    ++m.neighbor_offsets_[m.edges_[e].cell_l + 1];
  }
  for (std::size_t k = 0; k < m.cells_.size(); ++k) m.neighbor_offsets_[k + 1] += m.neighbor_offsets_[k];
  m.neighbors_.resize(m.neighbor_offsets_.back());
  std::vector<std::size_t> fill(m.neighbor_offsets_.begin(), m.neighbor_offsets_.end() - 1);
  for (std::size_t e : m.interior_) {
    const Edge& ed = m.edges_[e];
    m.neighbors_[fill[ed.cell_k]++] = {ed.cell_l, e, ed.transmissivity};
    m.neighbors_[fill[ed.cell_l]++] = {ed.cell_k, e, ed.transmissivity};
  }
  for (std::size_t k = 0; k < m.cells_.size(); ++k) {
    std::sort(m.neighbors_.begin() + static_cast<std::ptrdiff_t>(m.neighbor_offsets_[k]),
              m.neighbors_.begin() + static_cast<std::ptrdiff_t>(m.neighbor_offsets_[k + 1]),
              [](const Neighbor& x, const Neighbor& y) { return x.cell < y.cell; });
  }
  return m;
}

/// Uniform n x n grid of rectangles with centres at the cell centroids.
inline Mesh build_cartesian(std::size_t n, const Rect& domain = {}) {
  if (n < 2) throw MeshError("cartesian mesh needs n >= 2 cells per side, got " + std::to_string(n));
  if (!(domain.width() > 0.0) || !(domain.height() > 0.0)) {
    throw MeshError("cartesian mesh needs a domain with positive side lengths");
  }
  const double hx = domain.width() / static_cast<double>(n);
  const double hy = domain.height() / static_cast<double>(n);
  auto coord = [&](std::size_t i, double lo, double hi, double step) {
    return i == n ? hi : lo + static_cast<double>(i) * step;
  };

  std::vector<Point> pts;
  pts.reserve((n + 1) * (n + 1));
  for (std::size_t j = 0; j <= n; ++j) {
    for (std::size_t i = 0; i <= n; ++i) {
      pts.emplace_back(coord(i, domain.x0, domain.x1, hx), coord(j, domain.y0, domain.y1, hy));
    }
  }
  auto vid = [n](std::size_t i, std::size_t j) { return j * (n + 1) + i; };

  std::vector<std::vector<std::size_t>> polys;
  std::vector<Point> centers;
  polys.reserve(n * n);
  centers.reserve(n * n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      polys.push_back({vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)});
      centers.push_back(0.5 * (pts[vid(i, j)] + pts[vid(i + 1, j + 1)]));
    }
  }
  return Mesh::from_polygons(std::move(pts), std::move(polys), std::move(centers));
}

/// Circumcentre of a non-degenerate triangle.
inline Point circumcenter(const Point& a, const Point& b, const Point& c) {
  const Point ab = b - a;
  const Point ac = c - a;
  const double den = 2.0 * detail::cross(ab, ac);
  const double ab2 = ab.squaredNorm();
  const double ac2 = ac.squaredNorm();
  return a + Point(ac.y() * ab2 - ab.y() * ac2, ab.x() * ac2 - ac.x() * ab2) / den;
}

/// Reads "vertices <n>" / n lines "x y" / "triangles <m>" / m lines "i j k".
/// Cell centres are circumcentres; triangles must be acute. A right angle
/// is tolerated only when its hypotenuse lies on the domain boundary, where
/// the scheme never uses d_Ksigma.
inline Mesh parse_triangulation(std::istream& in) {
  auto fail = [](const std::string& what) { throw MeshError("triangulation parse error: " + what); };
  std::string word;
  std::size_t nv = 0;
  if (!(in >> word) || word != "vertices" || !(in >> nv)) fail("expected 'vertices <n>'");
  std::vector<Point> pts(nv);
  for (std::size_t i = 0; i < nv; ++i) {
    double x, y;
    if (!(in >> x >> y)) fail("vertex " + std::to_string(i) + " is incomplete");
    if (!std::isfinite(x) || !std::isfinite(y)) fail("vertex " + std::to_string(i) + " is not finite");
    pts[i] = Point(x, y);
  }
  std::size_t nt = 0;
  if (!(in >> word) || word != "triangles" || !(in >> nt)) fail("expected 'triangles <m>'");
  std::vector<std::vector<std::size_t>> tris(nt);
  for (std::size_t t = 0; t < nt; ++t) {
    long long i, j, k;
    if (!(in >> i >> j >> k)) fail("triangle " + std::to_string(t) + " is incomplete");
    for (long long v : {i, j, k}) {
      if (v < 0 || static_cast<std::size_t>(v) >= nv) {
        fail("triangle " + std::to_string(t) + " references vertex " + std::to_string(v));
      }
    }
    tris[t] = {static_cast<std::size_t>(i), static_cast<std::size_t>(j), static_cast<std::size_t>(k)};
  }
  if (in >> word) fail("unexpected trailing token '" + word + "'");
  if (nt == 0) fail("no triangles");

  // Edge multiplicities decide whether a hypotenuse is interior.
  std::map<std::pair<std::size_t, std::size_t>, int> edge_count;
  for (const auto& t : tris) {
    for (int s = 0; s < 3; ++s) {
      auto key = std::minmax(t[s], t[(s + 1) % 3]);
      ++edge_count[{key.first, key.second}];
    }
  }

  std::vector<Point> centers(nt);
  for (std::size_t t = 0; t < nt; ++t) {
    const auto& tri = tris[t];
    const Point& a = pts[tri[0]];
    const Point& b = pts[tri[1]];
    const Point& c = pts[tri[2]];
    if (!(detail::triangle_area(a, b, c) > 0.0)) {
      throw MeshError("triangle " + std::to_string(t) + " is degenerate");
    }
    for (int s = 0; s < 3; ++s) {
      const Point& p = pts[tri[s]];
      const Point& q = pts[tri[(s + 1) % 3]];
      const Point& r = pts[tri[(s + 2) % 3]];
      const Point u = q - p;
      const Point v = r - p;
      const double cosine = u.dot(v) / (u.norm() * v.norm());
      if (cosine < -1e-12) {
        throw MeshError("triangle " + std::to_string(t) + " is not acute (obtuse angle at vertex " +
                        std::to_string(tri[s]) + ")");
      }
      if (cosine <= 1e-12) {
        const auto key = std::minmax(tri[(s + 1) % 3], tri[(s + 2) % 3]);
        if (edge_count[{key.first, key.second}] > 1) {
          throw MeshError("triangle " + std::to_string(t) +
                          ": circumcenter on boundary edge, d_Ksigma = 0 (right angle at vertex " +
                          std::to_string(tri[s]) + ")");
        }
      }
    }
    centers[t] = circumcenter(a, b, c);
  }
  return Mesh::from_polygons(std::move(pts), std::move(tris), std::move(centers));
}

inline Mesh load_triangulation(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MeshError("cannot open triangulation file '" + path + "'");
  return parse_triangulation(in);
}

inline void write_triangulation(const Mesh& mesh, std::ostream& out) {
  if (!mesh.all_triangles()) throw MeshError("only triangular meshes can be exported in triangulation format");
  out.precision(17);
  out << "vertices " << mesh.points().size() << '\n';
  for (const Point& p : mesh.points()) out << p.x() << ' ' << p.y() << '\n';
  out << "triangles " << mesh.num_cells() << '\n';
  for (const Cell& c : mesh.cells()) {
    out << c.vertices[0] << ' ' << c.vertices[1] << ' ' << c.vertices[2] << '\n';
  }
}

inline void write_triangulation(const Mesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw MeshError("cannot write triangulation file '" + path + "'");
  write_triangulation(mesh, out);
}

/// Measures the regularity constants of the mesh and lists every interior
/// edge that breaks orthogonality or the midpoint-crossing property.
inline RegularityReport check_admissibility(const Mesh& mesh) {
  RegularityReport r;
  r.tau_star_min = std::numeric_limits<double>::infinity();
  r.tau_star_max = 0.0;
  const auto pts = mesh.points();

  for (const Cell& c : mesh.cells()) {
    r.ell_star = std::max(r.ell_star, c.edges.size());
    r.zeta = std::max(r.zeta, c.diameter * c.diameter / c.area);
  }
  for (std::size_t id : mesh.interior_edges()) {
    const Edge& e = mesh.edge(id);
    r.tau_star_min = std::min(r.tau_star_min, e.transmissivity);
    r.tau_star_max = std::max(r.tau_star_max, e.transmissivity);

    if (!(e.d_k > 0.0) || !(e.d_l > 0.0)) {
      r.violations.push_back({id, AdmissibilityViolation::Kind::degenerate_distance, 0.0});
      continue;
    }
    r.zeta = std::max({r.zeta, e.d / e.d_k, e.d / e.d_l});

    const Point& a = pts[e.vertices[0]];
    const Point& b = pts[e.vertices[1]];
    const Point t = (b - a) / e.length;
    const double ortho = std::asin(std::min(1.0, std::abs(e.normal.dot(t))));
    if (ortho > orthogonality_tolerance) {
      r.violations.push_back({id, AdmissibilityViolation::Kind::orthogonality, ortho});
    }

    // Where does the line x_K + s (x_L - x_K) meet the edge line?
    const Point xk = mesh.cell(e.cell_k).center;
    const Point dx = mesh.cell(e.cell_l).center - xk;
    const double den = detail::cross(dx, b - a);
    double defect = std::numeric_limits<double>::infinity();
    if (den != 0.0) {
      const double u = detail::cross(dx, xk - a) / den;  // position along the edge
      defect = std::abs(u - 0.5) * e.length / e.d;
    }
    if (defect > midpoint_tolerance) {
      r.violations.push_back({id, AdmissibilityViolation::Kind::midpoint, defect});
    }
  }
  if (mesh.interior_edges().empty()) r.tau_star_min = 0.0;
  r.super_admissible = r.violations.empty();
  return r;
}

}  // namespace chfv
