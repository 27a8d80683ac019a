#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "chfv/errors.hpp"
#include "chfv/homotopy.hpp"
#include "chfv/log_mean.hpp"
#include "chfv/mesh.hpp"
#include "chfv/model.hpp"
#include "chfv/scheme.hpp"

namespace chfv {

/// Parameters shared by the energy-type functionals.
struct FunctionalData {
  PhysicsParams physics;
  std::array<double, 2> theta;  // effective theta_i,T
  PotentialField psi;

  static FunctionalData from(const Scheme& s) { return {s.physics(), s.theta(), s.psi()}; }
};

namespace detail {
inline void require_open_unit(const std::vector<double>& c1) {
  for (std::size_t k = 0; k < c1.size(); ++k) {
    if (!(c1[k] > 0.0 && c1[k] < 1.0)) {
      std::ostringstream msg;
      msg << "volume fraction c1 = " << c1[k] << " outside (0, 1) in cell " << k;
      throw DiagnosticError(msg.str());
    }
  }
}
}  // namespace detail

inline std::pair<double, double> phase_masses(const State& s, const Mesh& mesh) {
  double m1 = 0.0;
  double m2 = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    const double a = mesh.cell(k).area;
    m1 += a * s.c1[k];
    m2 += a * (1.0 - s.c1[k]);
  }
  return {m1, m2};
}

/// Share of the phase-1 mass held by cells whose centre lies below `y`.
inline double mass_fraction_below(const State& s, const Mesh& mesh, double y) {
  double below = 0.0;
  double total = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    const double m = mesh.cell(k).area * s.c1[k];
    total += m;
    if (mesh.cell(k).center.y() < y) below += m;
  }
  return total > 0.0 ? below / total : 0.0;
}

/// sum_sigma tau_sigma (c1_K - c1_L)^2 over interior edges.
inline double gradient_seminorm(const std::vector<double>& c1, const Mesh& mesh) {
  double s = 0.0;
  for (std::size_t e : mesh.interior_edges()) {
    const Edge& ed = mesh.edge(e);
    const double d = c1[ed.cell_k] - c1[ed.cell_l];
    s += ed.transmissivity * d * d;
  }
  return s;
}

inline double discrete_energy(const State& s, const Mesh& mesh, const FunctionalData& f) {
  detail::require_open_unit(s.c1);
  const auto& ph = f.physics;
  double bulk = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    const double c1 = s.c1[k];
    const double c2 = 1.0 - c1;
    const double local = ph.kappa * c1 * c2 + c1 * f.psi.psi1[k] + c2 * f.psi.psi2[k] +
                         f.theta[0] * ph.eta[0] * entropy_density(c1) + f.theta[1] * ph.eta[1] * entropy_density(c2);
    bulk += mesh.cell(k).area * local;
  }
  return 0.5 * ph.alpha * gradient_seminorm(s.c1, mesh) + bulk;
}

inline double discrete_dissipation(const State& s, const Mesh& mesh, const FunctionalData& f) {
  detail::require_open_unit(s.c1);
  const auto& ph = f.physics;
  double d = 0.0;
  for (std::size_t e : mesh.interior_edges()) {
    const Edge& ed = mesh.edge(e);
    const std::size_t k = ed.cell_k;
    const std::size_t l = ed.cell_l;
    for (int i = 0; i < 2; ++i) {
      const double ck = i == 0 ? s.c1[k] : 1.0 - s.c1[k];
      const double cl = i == 0 ? s.c1[l] : 1.0 - s.c1[l];
      const auto& mu = i == 0 ? s.mu1 : s.mu2;
      const auto& psi = f.psi[i];
      const double drive = mu[k] + psi[k] - mu[l] - psi[l] + f.theta[i] * ph.eta[i] * (std::log(ck) - std::log(cl));
      d += ed.transmissivity * log_mean(ck, cl) / ph.eta[i] * drive * drive;
    }
  }
  return d;
}

inline double entropy_production(const State& s, const Mesh& mesh, const std::array<double, 2>& theta,
                                 const std::array<double, 2>& eta) {
  detail::require_open_unit(s.c1);
  double total = 0.0;
  for (int i = 0; i < 2; ++i) {
    double sum = 0.0;
    for (std::size_t e : mesh.interior_edges()) {
      const Edge& ed = mesh.edge(e);
      const double ck = i == 0 ? s.c1[ed.cell_k] : 1.0 - s.c1[ed.cell_k];
      const double cl = i == 0 ? s.c1[ed.cell_l] : 1.0 - s.c1[ed.cell_l];
      sum += ed.transmissivity * (ck - cl) * (std::log(ck) - std::log(cl));
    }
    total += eta[i] * theta[i] * sum;
  }
  return total;
}

struct DegeneracyProfile {
  double min = 1.0;
  std::vector<std::size_t> histogram;  // uniform bins on [0, 1]
  std::size_t flagged = 0;             // edges with phi below the threshold
  double threshold = 1e-3;

  bool any_flagged() const { return flagged > 0; }
};

/// phi(c1_K, c1_L) = c_{1,sigma} + c_{2,sigma} over interior edges.
inline DegeneracyProfile edge_degeneracy_profile(const State& s, const Mesh& mesh, std::size_t bins = 10,
                                                 double threshold = 1e-3) {
  DegeneracyProfile p;
  p.threshold = threshold;
  p.histogram.assign(std::max<std::size_t>(bins, 1), 0);
  for (std::size_t e : mesh.interior_edges()) {
    const Edge& ed = mesh.edge(e);
    const double phi = edge_degeneracy(s.c1[ed.cell_k], s.c1[ed.cell_l]);
    p.min = std::min(p.min, phi);
    const auto b = static_cast<std::size_t>(std::clamp(phi, 0.0, 1.0) * static_cast<double>(p.histogram.size()));
    ++p.histogram[std::min(b, p.histogram.size() - 1)];
    if (phi < threshold) ++p.flagged;
  }
  return p;
}

/// sum_K m_K mu_bar_K.
inline double mean_potential_integral(const State& s, const Mesh& mesh) { return weighted_mean_potential_sum(mesh, s); }

struct StepDiagnostics {
  double time = 0.0;
  std::pair<double, double> mass{0.0, 0.0};
  double energy = 0.0;
  double dissipation = 0.0;
  double entropy_production = 0.0;
  double c1_min = 0.0;
  double c1_max = 0.0;
  double edge_mobility_min = 1.0;
  int newton_iters = 0;
  bool fallback_used = false;
  double gradient_seminorm = 0.0;
  double mu_bar_integral = 0.0;
  double mu_bar_max = 0.0;
};

inline StepDiagnostics compute_diagnostics(const State& s, const Mesh& mesh, const FunctionalData& f, double time) {
  StepDiagnostics d;
  d.time = time;
  d.mass = phase_masses(s, mesh);
  d.energy = discrete_energy(s, mesh, f);
  d.dissipation = discrete_dissipation(s, mesh, f);
  d.entropy_production = entropy_production(s, mesh, f.theta, f.physics.eta);
  const auto [lo, hi] = std::minmax_element(s.c1.begin(), s.c1.end());
  d.c1_min = *lo;
  d.c1_max = *hi;
  d.edge_mobility_min = edge_degeneracy_profile(s, mesh).min;
  d.gradient_seminorm = gradient_seminorm(s.c1, mesh);
  d.mu_bar_integral = mean_potential_integral(s, mesh);
  for (std::size_t k = 0; k < s.size(); ++k) d.mu_bar_max = std::max(d.mu_bar_max, std::abs(mean_potential(s, k)));
  return d;
}

struct DecayCheck {
  bool ok = true;
  double lhs = 0.0;    // (E^n - E^{n-1}) / dt + D^n
  double slack = 0.0;
  std::string message;
};

inline double default_decay_slack(double newton_tol, double energy, double dt) {
  return 1e3 * newton_tol * (1.0 + std::abs(energy)) / dt;
}

inline DecayCheck check_energy_decay(const StepDiagnostics& prev, const StepDiagnostics& cur, double dt,
                                     double slack) {
  DecayCheck c;
  c.lhs = (cur.energy - prev.energy) / dt + cur.dissipation;
  c.slack = slack;
  c.ok = c.lhs <= slack;
  if (!c.ok) {
    std::ostringstream msg;
    msg.precision(12);
    msg << "energy decay violated at t = " << cur.time << ": (E^n - E^{n-1})/dt + D^n = " << c.lhs
        << " > slack " << slack << " (E^{n-1} = " << prev.energy << ", E^n = " << cur.energy
        << ", D^n = " << cur.dissipation << ")";
    c.message = msg.str();
  }
  return c;
}

/// (2/alpha)(E^0 - sum_K m_K min(Psi_1,K, Psi_2,K)): bound on the gradient
/// seminorm implied by energy decay, since the remaining terms of the
/// energy are bounded below by the potential contribution.
inline double gradient_seminorm_bound(double initial_energy, const Mesh& mesh, const FunctionalData& f) {
  double offset = 0.0;
  for (std::size_t k = 0; k < mesh.num_cells(); ++k) {
    offset += mesh.cell(k).area * std::min(f.psi.psi1[k], f.psi.psi2[k]);
  }
  return 2.0 / f.physics.alpha * (initial_energy - offset);
}

}  // namespace chfv
