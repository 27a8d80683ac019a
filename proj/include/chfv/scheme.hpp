#pragma once

// Residual and analytic Jacobian of one implicit time step of the two-phase
// TPFA scheme. Unknowns are ordered [c1 (N) | mu1 (N) | mu2 (N)]; c2 is
// eliminated through c2 = 1 - c1. Residual rows are ordered
// [phase-1 balance | phase-2 balance | chemical potential difference].
//
// The same assembly also evaluates the regularised continuation system:
// the volume fractions entering mobilities, diffusion and the interface
// term pass through f_lambda, and (1 - lambda)(c1 - 1/2) is added to the
// potential-difference row.

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <array>
#include <cmath>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "chfv/errors.hpp"
#include "chfv/homotopy.hpp"
#include "chfv/log_mean.hpp"
#include "chfv/mesh.hpp"
#include "chfv/model.hpp"
#include "chfv/parallel.hpp"

namespace chfv {

struct State {
  std::vector<double> c1;
  std::vector<double> mu1;
  std::vector<double> mu2;
  std::size_t step = 0;

  std::size_t size() const { return c1.size(); }

  static State uniform(std::size_t n, double c, double mu1 = 0.0, double mu2 = 0.0) {
    return {std::vector<double>(n, c), std::vector<double>(n, mu1), std::vector<double>(n, mu2), 0};
  }
  static State from_c1(std::vector<double> c1) {
    const std::size_t n = c1.size();
    return {std::move(c1), std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), 0};
  }

  bool operator==(const State&) const = default;
};

inline Eigen::VectorXd pack(const State& s) {
  const auto n = static_cast<Eigen::Index>(s.size());
  Eigen::VectorXd x(3 * n);
  x.segment(0, n) = Eigen::Map<const Eigen::VectorXd>(s.c1.data(), n);
  x.segment(n, n) = Eigen::Map<const Eigen::VectorXd>(s.mu1.data(), n);
  x.segment(2 * n, n) = Eigen::Map<const Eigen::VectorXd>(s.mu2.data(), n);
  return x;
}

inline void unpack(const Eigen::VectorXd& x, State& s) {
  const auto n = static_cast<Eigen::Index>(s.size());
  Eigen::Map<Eigen::VectorXd>(s.c1.data(), n) = x.segment(0, n);
  Eigen::Map<Eigen::VectorXd>(s.mu1.data(), n) = x.segment(n, n);
  Eigen::Map<Eigen::VectorXd>(s.mu2.data(), n) = x.segment(2 * n, n);
}

/// Adds the constant s to both chemical potentials.
inline State shift_mu(State s, double shift) {
  for (auto& v : s.mu1) v += shift;
  for (auto& v : s.mu2) v += shift;
  return s;
}

/// mu_bar_K = c1 mu1 + c2 mu2 (with f_lambda weights on a continuation level).
inline double mean_potential(const State& s, std::size_t k, std::optional<double> lambda = {}) {
  const double c = s.c1[k];
  const double w1 = lambda ? f_lambda(*lambda, c) : c;
  const double w2 = lambda ? f_lambda(*lambda, 1.0 - c) : 1.0 - c;
  return w1 * s.mu1[k] + w2 * s.mu2[k];
}

inline double weighted_mean_potential_sum(const Mesh& mesh, const State& s, std::optional<double> lambda = {}) {
  double sum = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) sum += mesh.cell(k).area * mean_potential(s, k, lambda);
  return sum;
}

/// Shifts mu1 and mu2 by a common constant so that sum_K m_K mu_bar_K = 0.
/// The residual is invariant under such shifts.
inline State apply_gauge(const Mesh& mesh, State s, std::optional<double> lambda = {}) {
  // The second pass removes the rounding left by the first.
  for (int pass = 0; pass < 2; ++pass) {
    const double shift = -weighted_mean_potential_sum(mesh, s, lambda) / mesh.domain_area();
    if (shift == 0.0) break;
    s = shift_mu(std::move(s), shift);
  }
  return s;
}

/// Cell gradient (1/m_K) sum_sigma d_Ksigma tau_sigma (u_L - u_K) n_KL.
/// Only interior edges contribute, so boundary cells see a truncated stencil.
inline std::vector<Point> cell_gradient(const Mesh& mesh, std::span<const double> u) {
  std::vector<Point> g(mesh.num_cells(), Point::Zero());
  for (std::size_t k = 0; k < mesh.num_cells(); ++k) {
    Point acc = Point::Zero();
    for (const Neighbor& nb : mesh.neighbors(k)) {
      const Edge& e = mesh.edge(nb.edge);
      const bool own = e.cell_k == k;
      const double d_k = own ? e.d_k : e.d_l;
      const Point n = own ? e.normal : Point(-e.normal);
      acc += d_k * nb.transmissivity * (u[nb.cell] - u[k]) * n;
    }
    g[k] = acc / mesh.cell(k).area;
  }
  return g;
}

class Scheme {
 public:
  Scheme(std::shared_ptr<const Mesh> mesh, PhysicsParams physics, double dt, std::array<double, 2> theta,
         PotentialField psi, unsigned threads = 1);

  /// Convenience: effective theta and cell potentials from the parameters.
  static Scheme from_params(std::shared_ptr<const Mesh> mesh, const ModelParams& p, unsigned threads = 1) {
    const auto theta = effective_theta(p, *mesh);
    auto psi = cell_average_potential(p.potential, *mesh);
    return Scheme(std::move(mesh), p.physics, p.dt, theta, std::move(psi), threads);
  }

  const Mesh& mesh() const { return *mesh_; }
  const std::shared_ptr<const Mesh>& mesh_ptr() const { return mesh_; }
  const PhysicsParams& physics() const { return physics_; }
  double dt() const { return dt_; }
  const std::array<double, 2>& theta() const { return theta_; }
  const PotentialField& psi() const { return psi_; }
  std::size_t num_cells() const { return mesh_->num_cells(); }
  std::size_t num_unknowns() const { return 3 * mesh_->num_cells(); }

  /// Residual of the scheme at `guess`, given the previous time level.
  Eigen::VectorXd assemble_residual(const State& prev, const State& guess) const {
    return residual_impl(prev, guess, std::nullopt);
  }

  /// Residual of the continuation system at level lambda.
  Eigen::VectorXd assemble_homotopy_residual(const State& prev, const State& guess, double lambda) const {
    return residual_impl(prev, guess, lambda);
  }

  /// Exact derivative of the residual (continuation residual when lambda is
  /// set). With gauge_cell set, the phase-1 row of that cell is replaced by
  /// the unit row of its mu1 unknown and the mu1 column is cleared
  /// elsewhere, which removes the constant-shift null space.
  Eigen::SparseMatrix<double> assemble_jacobian(const State& prev, const State& guess,
                                                std::optional<double> lambda = std::nullopt,
                                                std::optional<std::size_t> gauge_cell = std::nullopt) const;

  /// Number of stored entries of the Jacobian (pattern is state independent).
  std::size_t jacobian_nonzeros() const { return cols_.size(); }

 private:
  struct Closure;

  void check_inputs(const State& prev, const State& guess) const;
  Eigen::VectorXd residual_impl(const State& prev, const State& guess, std::optional<double> lambda) const;
  template <bool WithJacobian>
  void assemble_cells(const State& prev, const State& guess, std::optional<double> lambda, double* r,
                      double* values) const;

  std::shared_ptr<const Mesh> mesh_;
  PhysicsParams physics_;
  double dt_;
  std::array<double, 2> theta_;
  PotentialField psi_;
  unsigned threads_;

  // Row-major Jacobian pattern.
  std::vector<int> row_ptr_;
  std::vector<int> cols_;
  std::vector<std::size_t> self_slot_;  // position of K among {K} U neighbours(K)
};

inline Scheme::Scheme(std::shared_ptr<const Mesh> mesh, PhysicsParams physics, double dt,
                      std::array<double, 2> theta, PotentialField psi, unsigned threads)
    : mesh_(std::move(mesh)),
      physics_(physics),
      dt_(dt),
      theta_(theta),
      psi_(std::move(psi)),
      threads_(threads) {
  if (!mesh_) throw AssemblyError("scheme needs a mesh");
  if (!(dt_ > 0.0)) throw ConfigError("numerics.dt must be > 0");
  const std::size_t n = mesh_->num_cells();
  if (psi_.psi1.size() != n || psi_.psi2.size() != n) throw AssemblyError("potential field size mismatch");

  // Row layouts (S_K = sorted {K} U neighbours(K)):
  //   phase-1 row:  c1[S_K], mu1[S_K]
  //   phase-2 row:  c1[S_K], mu2[S_K]
  //   mu row:       c1[S_K], mu1[K], mu2[K]
  row_ptr_.assign(3 * n + 1, 0);
  self_slot_.resize(n);
  std::vector<std::vector<int>> stencil(n);
  for (std::size_t k = 0; k < n; ++k) {
    auto& s = stencil[k];
    std::size_t slot = 0;
    for (const Neighbor& nb : mesh_->neighbors(k)) {
      if (nb.cell < k) ++slot;
      s.push_back(static_cast<int>(nb.cell));
    }
    s.insert(s.begin() + static_cast<std::ptrdiff_t>(slot), static_cast<int>(k));
    self_slot_[k] = slot;
  }
  const int ni = static_cast<int>(n);
  std::vector<std::vector<int>> rows(3 * n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto& s = stencil[k];
    auto& r1 = rows[k];
    auto& r2 = rows[n + k];
    auto& rm = rows[2 * n + k];
    r1 = s;
    r2 = s;
    rm = s;
    for (int c : s) r1.push_back(ni + c);
    for (int c : s) r2.push_back(2 * ni + c);
    rm.push_back(ni + static_cast<int>(k));
    rm.push_back(2 * ni + static_cast<int>(k));
  }
  for (std::size_t row = 0; row < 3 * n; ++row) {
    row_ptr_[row + 1] = row_ptr_[row] + static_cast<int>(rows[row].size());
  }
  cols_.reserve(static_cast<std::size_t>(row_ptr_.back()));
  for (const auto& r : rows) cols_.insert(cols_.end(), r.begin(), r.end());
}

inline void Scheme::check_inputs(const State& prev, const State& guess) const {
  const std::size_t n = num_cells();
  if (prev.size() != n || guess.size() != n || guess.mu1.size() != n || guess.mu2.size() != n ||
      prev.mu1.size() != n || prev.mu2.size() != n) {
    throw AssemblyError("state size does not match the mesh");
  }
  for (std::size_t k = 0; k < n; ++k) {
    if (!std::isfinite(prev.c1[k]) || !std::isfinite(guess.c1[k]) || !std::isfinite(guess.mu1[k]) ||
        !std::isfinite(guess.mu2[k])) {
      throw AssemblyError("non-finite value in cell " + std::to_string(k));
    }
  }
}

// Transformation applied to volume fractions before they enter mobilities,
// diffusion and the interface term.
struct Scheme::Closure {
  std::optional<double> lambda;
  double value(double c) const { return lambda ? f_lambda(*lambda, c) : c; }
  double slope(double c) const { return lambda ? f_lambda_slope(*lambda, c) : 1.0; }
  double relaxation() const { return lambda ? 1.0 - *lambda : 0.0; }
};

template <bool WithJacobian>
void Scheme::assemble_cells(const State& prev, const State& guess, std::optional<double> lambda, double* r,
                            double* values) const {
  const Mesh& mesh = *mesh_;
  const std::size_t n = mesh.num_cells();
  const Closure cl{lambda};
  const double alpha = physics_.alpha;
  const double kappa = physics_.kappa;
  const double inv_eta1 = 1.0 / physics_.eta[0];
  const double inv_eta2 = 1.0 / physics_.eta[1];
  const double th1 = theta_[0];
  const double th2 = theta_[1];
  const double relax = cl.relaxation();
  const auto& c = guess.c1;
  const auto& psi1 = psi_.psi1;
  const auto& psi2 = psi_.psi2;

  parallel_for(n, threads_, [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      const double mk = mesh.cell(k).area;
      const double ck = c[k];
      const double g1k = cl.value(ck);
      const double g2k = cl.value(1.0 - ck);
      const double w1k = guess.mu1[k] + psi1[k];
      const double w2k = guess.mu2[k] + psi2[k];
      const double dc = ck - prev.c1[k];

      double r1 = mk * dc / dt_;
      double r2 = -mk * dc / dt_;
      double lap = 0.0;

      // Jacobian rows of this cell.
      const auto nbrs = mesh.neighbors(k);
      const std::size_t s = nbrs.size() + 1;
      const std::size_t self = self_slot_[k];
      double* j1 = nullptr;
      double* j2 = nullptr;
      double* jm = nullptr;
      double dg1k = 0.0, dg2k = 0.0;
      if constexpr (WithJacobian) {
        j1 = values + row_ptr_[k];
        j2 = values + row_ptr_[n + k];
        jm = values + row_ptr_[2 * n + k];
        std::fill(j1, j1 + 2 * s, 0.0);
        std::fill(j2, j2 + 2 * s, 0.0);
        std::fill(jm, jm + s + 2, 0.0);
        dg1k = cl.slope(ck);
        dg2k = cl.slope(1.0 - ck);
        j1[self] = mk / dt_;
        j2[self] = -mk / dt_;
        jm[s] = 1.0;
        jm[s + 1] = -1.0;
        jm[self] = -relax;
      }

      for (std::size_t j = 0; j < nbrs.size(); ++j) {
        const Neighbor& nb = nbrs[j];
        const std::size_t l = nb.cell;
        const double tau = nb.transmissivity;
        const double cln = c[l];
        const double g1l = cl.value(cln);
        const double g2l = cl.value(1.0 - cln);
        const double dw1 = w1k - (guess.mu1[l] + psi1[l]);
        const double dw2 = w2k - (guess.mu2[l] + psi2[l]);
        const double m1 = log_mean(g1k, g1l);
        const double m2 = log_mean(g2k, g2l);

        r1 += tau * (m1 * inv_eta1 * dw1 + th1 * (g1k - g1l));
        r2 += tau * (m2 * inv_eta2 * dw2 + th2 * (g2k - g2l));
        lap += tau * (g1k - g1l);

        if constexpr (WithJacobian) {
          const std::size_t slot = j < self ? j : j + 1;
          const double dg1l = cl.slope(cln);
          const double dg2l = cl.slope(1.0 - cln);
          const auto [p1a, p1b] = log_mean_partials(g1k, g1l);
          const auto [p2a, p2b] = log_mean_partials(g2k, g2l);

          j1[self] += tau * (p1a * dg1k * inv_eta1 * dw1 + th1 * dg1k);
          j1[slot] += tau * (p1b * dg1l * inv_eta1 * dw1 - th1 * dg1l);
          j1[s + self] += tau * m1 * inv_eta1;
          j1[s + slot] -= tau * m1 * inv_eta1;

          // d/dc1 of a function of c2 = 1 - c1 flips the sign.
          j2[self] -= tau * (p2a * dg2k * inv_eta2 * dw2 + th2 * dg2k);
          j2[slot] -= tau * (p2b * dg2l * inv_eta2 * dw2 - th2 * dg2l);
          j2[s + self] += tau * m2 * inv_eta2;
          j2[s + slot] -= tau * m2 * inv_eta2;

          jm[self] -= alpha / mk * tau * dg1k;
          jm[slot] += alpha / mk * tau * dg1l;
        }
      }

      r[k] = r1;
      r[n + k] = r2;
      r[2 * n + k] = guess.mu1[k] - guess.mu2[k] - alpha / mk * lap - relax * (ck - 0.5) -
                     kappa * (1.0 - 2.0 * prev.c1[k]);
    }
  });
}

inline Eigen::VectorXd Scheme::residual_impl(const State& prev, const State& guess,
                                             std::optional<double> lambda) const {
  check_inputs(prev, guess);
  Eigen::VectorXd r(static_cast<Eigen::Index>(num_unknowns()));
  assemble_cells<false>(prev, guess, lambda, r.data(), nullptr);
  return r;
}

inline Eigen::SparseMatrix<double> Scheme::assemble_jacobian(const State& prev, const State& guess,
                                                             std::optional<double> lambda,
                                                             std::optional<std::size_t> gauge_cell) const {
  check_inputs(prev, guess);
  const std::size_t n = num_cells();
  std::vector<double> values(cols_.size());
  Eigen::VectorXd scratch(static_cast<Eigen::Index>(num_unknowns()));
  assemble_cells<true>(prev, guess, lambda, scratch.data(), values.data());

  if (gauge_cell) {
    const std::size_t g = *gauge_cell;
    if (g >= n) throw AssemblyError("gauge cell out of range");
    const int pinned_col = static_cast<int>(n + g);
    for (std::size_t row = 0; row < 3 * n; ++row) {
      for (int p = row_ptr_[row]; p < row_ptr_[row + 1]; ++p) {
        if (row == g) {
          values[static_cast<std::size_t>(p)] = cols_[static_cast<std::size_t>(p)] == pinned_col ? 1.0 : 0.0;
        } else if (cols_[static_cast<std::size_t>(p)] == pinned_col) {
          values[static_cast<std::size_t>(p)] = 0.0;
        }
      }
    }
  }

  const auto dim = static_cast<Eigen::Index>(num_unknowns());
  Eigen::Map<const Eigen::SparseMatrix<double, Eigen::RowMajor, int>> rm(
      dim, dim, static_cast<Eigen::Index>(values.size()), row_ptr_.data(), cols_.data(), values.data());
  return Eigen::SparseMatrix<double>(rm);
}

/// Free-function forms of the assembly calls.
inline Eigen::VectorXd assemble_residual(const Scheme& scheme, const State& prev, const State& guess) {
  return scheme.assemble_residual(prev, guess);
}

inline Eigen::SparseMatrix<double> assemble_jacobian(const Scheme& scheme, const State& prev, const State& guess) {
  return scheme.assemble_jacobian(prev, guess);
}

}  // namespace chfv
