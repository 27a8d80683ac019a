#pragma once

// Damped Newton iteration for one time step, and the lambda-continuation
// fallback used when plain Newton fails.

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>
#include <unsupported/Eigen/IterativeSolvers>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "chfv/errors.hpp"
#include "chfv/model.hpp"
#include "chfv/ordering.hpp"
#include "chfv/scheme.hpp"

namespace chfv {

struct NewtonStats {
  int iterations = 0;
  int backtracks = 0;
  int linear_solves = 0;
  int factorizations = 0;
  int krylov_iterations = 0;
  double increment_norm = std::numeric_limits<double>::infinity();
  double residual_norm = std::numeric_limits<double>::infinity();
  double max_linear_residual = 0.0;  // relative residual of the worst linear solve

  NewtonStats& operator+=(const NewtonStats& o) {
    iterations += o.iterations;
    backtracks += o.backtracks;
    linear_solves += o.linear_solves;
    factorizations += o.factorizations;
    krylov_iterations += o.krylov_iterations;
    increment_norm = o.increment_norm;
    residual_norm = o.residual_norm;
    max_linear_residual = std::max(max_linear_residual, o.max_linear_residual);
    return *this;
  }
};

/// Newton did not reach the increment tolerance; carries the iterate with
/// the smallest residual norm.
class NonConvergence : public SolverError {
 public:
  NonConvergence(const std::string& what, State best, NewtonStats stats)
      : SolverError(what), best_(std::move(best)), stats_(stats) {}
  const State& best_iterate() const { return best_; }
  const NewtonStats& stats() const { return stats_; }

 private:
  State best_;
  NewtonStats stats_;
};

/// Continuation stalled; last_lambda is the largest level that was solved
/// (negative if not even the first level converged).
class HomotopyFailure : public SolverError {
 public:
  HomotopyFailure(const std::string& what, double last_lambda)
      : SolverError(what), last_lambda_(last_lambda) {}
  double last_lambda() const { return last_lambda_; }

 private:
  double last_lambda_;
};

inline const std::vector<double>& default_homotopy_schedule() {
  static const std::vector<double> schedule{0.0, 0.25, 0.5, 0.75, 0.9, 1.0};
  return schedule;
}

inline constexpr int max_bisection_depth = 6;
inline constexpr double linear_solve_tolerance = 1e-10;

struct HomotopyResult {
  State state;
  NewtonStats stats;
  std::vector<double> levels;  // lambda values actually solved, in order
};

inline void project_c1(State& s, double eps) {
  for (auto& c : s.c1) c = std::clamp(c, eps, 1.0 - eps);
}

using SparseLUFactor = Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::NaturalOrdering<int>>;
using ColumnPermutation = Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int>;

/// Applies an existing LU factorization of a nearby matrix as a GMRES
/// preconditioner. The factorization belongs to the caller.
class FactorizationPreconditioner {
 public:
  FactorizationPreconditioner() = default;
  template <class M>
  FactorizationPreconditioner& analyzePattern(const M&) { return *this; }
  template <class M>
  FactorizationPreconditioner& factorize(const M&) { return *this; }
  template <class M>
  FactorizationPreconditioner& compute(const M&) { return *this; }

  void bind(const SparseLUFactor* lu, const ColumnPermutation* perm) {
    lu_ = lu;
    perm_ = perm;
  }
  template <class Rhs>
  Eigen::VectorXd solve(const Rhs& b) const {
    const Eigen::VectorXd y = lu_->solve(Eigen::VectorXd(b));
    return perm_->inverse() * y;
  }
  Eigen::ComputationInfo info() const { return lu_ ? Eigen::Success : Eigen::InvalidInput; }

 private:
  const SparseLUFactor* lu_ = nullptr;
  const ColumnPermutation* perm_ = nullptr;
};

class NewtonSolver {
 public:
  NewtonSolver(const Scheme& scheme, NewtonSettings settings)
      : scheme_(&scheme), settings_(settings), perm_(unknown_ordering(scheme.mesh())) {}

  const NewtonSettings& settings() const { return settings_; }
  const Scheme& scheme() const { return *scheme_; }

  /// c1 from the previous level (projected); mu1 - mu2 from the potential
  /// relation at the previous level, split symmetrically, then gauged.
  /// With warm_start_mu, nonzero previous potentials are kept instead.
  State initial_guess(const State& prev) const {
    const Mesh& mesh = scheme_->mesh();
    const auto& ph = scheme_->physics();
    State g = prev;
    project_c1(g, settings_.eps_proj);
    if (settings_.warm_start_mu && has_potentials(prev)) return g;
    for (std::size_t k = 0; k < mesh.num_cells(); ++k) {
      double lap = 0.0;
      for (const Neighbor& nb : mesh.neighbors(k)) lap += nb.transmissivity * (prev.c1[k] - prev.c1[nb.cell]);
      const double delta = ph.alpha / mesh.cell(k).area * lap + ph.kappa * (1.0 - 2.0 * prev.c1[k]);
      g.mu1[k] = 0.5 * delta;
      g.mu2[k] = -0.5 * delta;
    }
    return apply_gauge(mesh, std::move(g));
  }

  /// Plain Newton from the default initial guess.
  std::pair<State, NewtonStats> newton_step(const State& prev) { return solve(prev, initial_guess(prev)); }

  /// Newton iterations on the original system (lambda unset) or on the
  /// continuation system at the given level, starting from `guess`.
  std::pair<State, NewtonStats> solve(const State& prev, State guess, std::optional<double> lambda = std::nullopt);

  /// Runs the continuation along `schedule` (must end at 1), bisecting a
  /// failed interval up to max_bisection_depth times.
  HomotopyResult homotopy_solve(const State& prev, const std::vector<double>& schedule = default_homotopy_schedule());

 private:
  static bool has_potentials(const State& s) {
    return std::any_of(s.mu1.begin(), s.mu1.end(), [](double v) { return v != 0.0; }) ||
           std::any_of(s.mu2.begin(), s.mu2.end(), [](double v) { return v != 0.0; });
  }
  bool projects(std::optional<double> lambda) const { return !lambda || *lambda >= 1.0; }

  Eigen::VectorXd residual(const State& prev, const State& x, std::optional<double> lambda) const {
    return lambda ? scheme_->assemble_homotopy_residual(prev, x, *lambda) : scheme_->assemble_residual(prev, x);
  }

  /// Solves jac x = rhs to relative residual linear_solve_tolerance. With
  /// `refresh` unset, GMRES preconditioned by the last factorization is tried
  /// first; the matrix is factorized when that fails.
  Eigen::VectorXd linear_solve(const Eigen::SparseMatrix<double>& jac, const Eigen::VectorXd& rhs, bool refresh,
                               NewtonStats& stats);
  Eigen::VectorXd direct_solve(const Eigen::SparseMatrix<double>& jac, const Eigen::VectorXd& rhs,
                               NewtonStats& stats);

  const Scheme* scheme_;
  NewtonSettings settings_;
  ColumnPermutation perm_;
  SparseLUFactor lu_;
  bool analyzed_ = false;
  bool factorized_ = false;
};

inline Eigen::VectorXd NewtonSolver::direct_solve(const Eigen::SparseMatrix<double>& jac,
                                                  const Eigen::VectorXd& rhs, NewtonStats& stats) {
  const Eigen::SparseMatrix<double> permuted = jac * perm_.inverse();
  // The sparsity pattern never changes, so the symbolic analysis is reused.
  if (!analyzed_) {
    lu_.analyzePattern(permuted);
    analyzed_ = true;
  }
  factorized_ = false;
  lu_.factorize(permuted);
  if (lu_.info() != Eigen::Success) throw SolverError("sparse LU factorization failed: " + lu_.lastErrorMessage());
  factorized_ = true;
  ++stats.factorizations;

  auto apply = [&](const Eigen::VectorXd& b) -> Eigen::VectorXd { return perm_.inverse() * lu_.solve(b); };
  Eigen::VectorXd x = apply(rhs);
  if (!x.allFinite()) throw SolverError("sparse LU solve produced non-finite values");
  const double rhs_norm = rhs.norm();
  double rel = 0.0;
  for (int refine = 0; refine < 3; ++refine) {
    const Eigen::VectorXd res = rhs - jac * x;
    rel = res.norm() / rhs_norm;
    if (rel <= linear_solve_tolerance) break;
    x += apply(res);
  }
  stats.max_linear_residual = std::max(stats.max_linear_residual, rel);
  return x;
}

inline Eigen::VectorXd NewtonSolver::linear_solve(const Eigen::SparseMatrix<double>& jac, const Eigen::VectorXd& rhs,
                                                  bool refresh, NewtonStats& stats) {
  ++stats.linear_solves;
  const double rhs_norm = rhs.norm();
  if (rhs_norm == 0.0) return Eigen::VectorXd::Zero(rhs.size());
  if (!refresh && factorized_) {
    Eigen::GMRES<Eigen::SparseMatrix<double>, FactorizationPreconditioner> gmres;
    gmres.setTolerance(0.1 * linear_solve_tolerance);
    gmres.setMaxIterations(40);
    gmres.set_restart(40);
    gmres.compute(jac);
    gmres.preconditioner().bind(&lu_, &perm_);
    const Eigen::VectorXd x = gmres.solve(rhs);
    stats.krylov_iterations += static_cast<int>(gmres.iterations());
    if (x.allFinite()) {
      const double rel = (rhs - jac * x).norm() / rhs_norm;
      if (rel <= linear_solve_tolerance) {
        stats.max_linear_residual = std::max(stats.max_linear_residual, rel);
        return x;
      }
    }
  }
  return direct_solve(jac, rhs, stats);
}

inline std::pair<State, NewtonStats> NewtonSolver::solve(const State& prev, State x, std::optional<double> lambda) {
  const Mesh& mesh = scheme_->mesh();
  constexpr std::size_t gauge = 0;
  const bool project = projects(lambda);
  if (project) project_c1(x, settings_.eps_proj);

  NewtonStats stats;
  Eigen::VectorXd r = residual(prev, x, lambda);
  double rnorm = r.norm();
  State best = x;
  double best_norm = rnorm;

  for (int it = 1; it <= settings_.max_iter; ++it) {
    stats.iterations = it;
    const auto jac = scheme_->assemble_jacobian(prev, x, lambda, gauge);
    Eigen::VectorXd rhs = -r;
    rhs[static_cast<Eigen::Index>(gauge)] = 0.0;  // pinned mu1 correction
    const Eigen::VectorXd dx = linear_solve(jac, rhs, it == 1, stats);
    stats.increment_norm = dx.norm();

    const Eigen::VectorXd x0 = pack(x);
    State trial = x;
    double t = 1.0;
    double trial_norm = 0.0;
    for (int bt = 0;; ++bt) {
      unpack(x0 + t * dx, trial);
      if (project) project_c1(trial, settings_.eps_proj);
      Eigen::VectorXd rt = residual(prev, trial, lambda);
      trial_norm = rt.norm();
      if (trial_norm < rnorm || bt >= settings_.max_backtracks || stats.increment_norm < settings_.tol) {
        r = std::move(rt);
        break;
      }
      t *= settings_.damping;
      ++stats.backtracks;
    }
    x = std::move(trial);
    rnorm = trial_norm;
    stats.residual_norm = rnorm;
    if (rnorm < best_norm) {
      best_norm = rnorm;
      best = x;
    }
    if (stats.increment_norm < settings_.tol) {
      x.step = prev.step + 1;
      return {apply_gauge(mesh, std::move(x), lambda && *lambda < 1.0 ? lambda : std::nullopt), stats};
    }
    if (!std::isfinite(rnorm)) break;
  }
  best.step = prev.step + 1;
  throw NonConvergence("Newton did not converge in " + std::to_string(settings_.max_iter) +
                           " iterations (increment norm " + std::to_string(stats.increment_norm) + ")",
                       apply_gauge(mesh, std::move(best)), stats);
}

inline HomotopyResult NewtonSolver::homotopy_solve(const State& prev, const std::vector<double>& schedule) {
  if (schedule.empty() || schedule.back() != 1.0) throw ConfigError("homotopy schedule must end at 1");
  if (schedule.front() < 0.0 || schedule.front() >= 1.0) throw ConfigError("homotopy schedule must start in [0, 1)");
  for (std::size_t i = 1; i < schedule.size(); ++i) {
    if (!(schedule[i] > schedule[i - 1])) throw ConfigError("homotopy schedule must be increasing");
  }

  HomotopyResult out;
  double solved = -1.0;
  State current = initial_guess(prev);

  auto attempt = [&](double lambda) -> bool {
    try {
      auto [s, st] = solve(prev, current, lambda);
      out.stats += st;
      current = std::move(s);
      out.levels.push_back(lambda);
      solved = lambda;
      return true;
    } catch (const NonConvergence& e) {
      out.stats += e.stats();
      return false;
    } catch (const SolverError&) {
      return false;
    }
  };

  // Reach `target` from the last solved level, halving the gap on failure.
  auto advance = [&](auto&& self, double target, int depth) -> bool {
    if (attempt(target)) return true;
    if (depth >= max_bisection_depth || solved < 0.0) return false;
    const double mid = 0.5 * (solved + target);
    return self(self, mid, depth + 1) && self(self, target, depth + 1);
  };

  for (double lambda : schedule) {
    if (!advance(advance, lambda, 0)) {
      throw HomotopyFailure("continuation failed beyond lambda = " + std::to_string(std::max(solved, 0.0)), solved);
    }
  }
  out.state = std::move(current);
  out.state.step = prev.step + 1;
  return out;
}

}  // namespace chfv
