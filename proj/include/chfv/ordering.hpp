#pragma once

// Fill-reducing column ordering for the Newton matrices: geometric nested
// dissection of the cell graph (recursive median split along the longer
// extent of the cell centres), then the three unknowns of a cell placed
// next to each other.

#include <Eigen/Core>

#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

#include "chfv/mesh.hpp"

namespace chfv {

namespace detail {
inline void dissect(const Mesh& mesh, std::vector<std::size_t> cells, std::vector<std::size_t>& out,
                    std::vector<std::size_t>& mark, std::size_t& stamp, std::size_t leaf) {
  if (cells.size() <= leaf) {
    out.insert(out.end(), cells.begin(), cells.end());
    return;
  }
  Point lo = Point::Constant(std::numeric_limits<double>::infinity());
  Point hi = -lo;
  for (std::size_t c : cells) {
    lo = lo.cwiseMin(mesh.cell(c).center);
    hi = hi.cwiseMax(mesh.cell(c).center);
  }
  const int axis = (hi.x() - lo.x()) >= (hi.y() - lo.y()) ? 0 : 1;
  std::sort(cells.begin(), cells.end(), [&](std::size_t a, std::size_t b) {
    const double pa = mesh.cell(a).center[axis];
    const double pb = mesh.cell(b).center[axis];
    return pa < pb || (pa == pb && a < b);
  });
  const std::size_t half = cells.size() / 2;
  ++stamp;
  for (std::size_t i = half; i < cells.size(); ++i) mark[cells[i]] = stamp;

  // Cells of the lower half touching the upper half form the separator.
  std::vector<std::size_t> left, sep;
  std::vector<std::size_t> right(cells.begin() + static_cast<std::ptrdiff_t>(half), cells.end());
  for (std::size_t i = 0; i < half; ++i) {
    const std::size_t c = cells[i];
    const auto nbrs = mesh.neighbors(c);
    const bool touches = std::any_of(nbrs.begin(), nbrs.end(), [&](const Neighbor& nb) { return mark[nb.cell] == stamp; });
    (touches ? sep : left).push_back(c);
  }
  dissect(mesh, std::move(left), out, mark, stamp, leaf);
  dissect(mesh, std::move(right), out, mark, stamp, leaf);
  out.insert(out.end(), sep.begin(), sep.end());
}
}  // namespace detail

/// Elimination order of the cells (position -> cell index).
inline std::vector<std::size_t> nested_dissection_cells(const Mesh& mesh, std::size_t leaf = 8) {
  std::vector<std::size_t> cells(mesh.num_cells());
  std::iota(cells.begin(), cells.end(), std::size_t{0});
  std::vector<std::size_t> out;
  out.reserve(cells.size());
  std::vector<std::size_t> mark(cells.size(), 0);
  std::size_t stamp = 0;
  detail::dissect(mesh, std::move(cells), out, mark, stamp, std::max<std::size_t>(leaf, 1));
  return out;
}

/// Column permutation for the block layout [c1 | mu1 | mu2]:
/// indices()[old column] = new column.
inline Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> unknown_ordering(const Mesh& mesh) {
  const auto order = nested_dissection_cells(mesh);
  const std::size_t n = order.size();
  Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> perm(static_cast<Eigen::Index>(3 * n));
  for (std::size_t pos = 0; pos < n; ++pos) {
    const std::size_t c = order[pos];
    for (std::size_t b = 0; b < 3; ++b) perm.indices()[static_cast<Eigen::Index>(b * n + c)] = static_cast<int>(3 * pos + b);
  }
  return perm;
}

}  // namespace chfv
