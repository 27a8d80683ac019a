#pragma once

// Time loop: Newton per step with continuation fallback, per-step
// invariant checks, and output callbacks.

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "chfv/diagnostics.hpp"
#include "chfv/errors.hpp"
#include "chfv/io.hpp"
#include "chfv/mesh.hpp"
#include "chfv/model.hpp"
#include "chfv/newton.hpp"
#include "chfv/scheme.hpp"

namespace chfv {

enum class CheckMode { checked, monitor };

/// A structural invariant failed on an accepted step in checked mode.
class InvariantViolation : public std::runtime_error {
 public:
  InvariantViolation(const std::string& what, std::size_t step) : std::runtime_error(what), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

/// Both Newton and the continuation failed; carries the last accepted state.
class SimulationAborted : public SolverError {
 public:
  SimulationAborted(const std::string& what, State last_good)
      : SolverError(what), last_good_(std::move(last_good)) {}
  const State& last_good() const { return last_good_; }
  std::size_t step() const { return last_good_.step; }

 private:
  State last_good_;
};

struct SimulationOptions {
  CheckMode mode = CheckMode::checked;
  unsigned threads = 1;
  std::vector<double> homotopy_schedule = default_homotopy_schedule();
  double mass_tolerance = 1e-12;      // relative to |Omega|
  double gauge_tolerance = 1e-12;     // relative to |Omega| max |mu_bar|
  double degeneracy_threshold = 1e-3;
  double cfl_threshold = 0.0;         // warn when dt / min m_K is below; 0 disables
  bool force_homotopy = false;        // skip plain Newton (testing)
  /// Test hook: mutates the accepted state of the given step before checks.
  std::optional<std::size_t> corrupt_mu_at_step;
};

struct Callbacks {
  std::function<void(const State&, const StepDiagnostics&)> on_step;
  std::function<void(const std::string&)> on_warning;
};

struct RunSummary {
  std::size_t first_step = 0;
  std::size_t last_step = 0;
  std::size_t steps = 0;
  long newton_iterations = 0;
  std::size_t fallbacks = 0;
  std::size_t violations = 0;  // monitor mode only
  std::size_t warnings = 0;
  double wall_seconds = 0.0;
  StepDiagnostics initial;
  StepDiagnostics final;
  double gradient_seminorm_max = 0.0;
  double gradient_seminorm_bound = 0.0;
  State final_state;
};

class Simulation {
 public:
  Simulation(std::shared_ptr<const Mesh> mesh, ModelParams params, SimulationOptions options = {})
      : mesh_(std::move(mesh)), params_(std::move(params)), options_(std::move(options)) {
    params_.validate();
    scheme_ = std::make_unique<Scheme>(Scheme::from_params(mesh_, params_, options_.threads));
    solver_ = std::make_unique<NewtonSolver>(*scheme_, params_.newton);
  }

  const Mesh& mesh() const { return *mesh_; }
  const Scheme& scheme() const { return *scheme_; }
  const ModelParams& params() const { return params_; }
  const SimulationOptions& options() const { return options_; }
  std::size_t total_steps() const { return step_count(params_); }
  FunctionalData functional_data() const { return FunctionalData::from(*scheme_); }

  /// Initial volume fractions projected onto [eps, 1 - eps], zero potentials.
  State initial() const {
    State s = State::from_c1(initial_state(params_.initial, *mesh_, params_.seed));
    project_c1(s, params_.newton.eps_proj);
    return s;
  }

  /// Advances from `start` (step index start.step) to `last_step`.
  RunSummary run(State start, const Callbacks& cb = {}, std::optional<std::size_t> last_step = std::nullopt);

 private:
  void warn(const Callbacks& cb, RunSummary& sum, const std::string& msg) const {
    ++sum.warnings;
    if (cb.on_warning) cb.on_warning(msg);
  }
  void violation(RunSummary& sum, const Callbacks& cb, const std::string& msg, std::size_t step) const {
    if (options_.mode == CheckMode::checked) throw InvariantViolation(msg, step);
    ++sum.violations;
    warn(cb, sum, "invariant violation: " + msg);
  }

  std::shared_ptr<const Mesh> mesh_;
  ModelParams params_;
  SimulationOptions options_;
  std::unique_ptr<Scheme> scheme_;
  std::unique_ptr<NewtonSolver> solver_;
};

inline RunSummary Simulation::run(State start, const Callbacks& cb, std::optional<std::size_t> last_step) {
  const auto t0 = std::chrono::steady_clock::now();
  const Mesh& mesh = *mesh_;
  const double dt = params_.dt;
  const double eps = params_.newton.eps_proj;
  const double area = mesh.domain_area();
  const FunctionalData fdata = functional_data();
  const std::size_t until = last_step.value_or(total_steps());

  if (start.size() != mesh.num_cells()) throw ConfigError("start state does not match the mesh");

  RunSummary sum;
  sum.first_step = start.step;
  if (options_.cfl_threshold > 0.0) {
    double min_area = std::numeric_limits<double>::infinity();
    for (const Cell& c : mesh.cells()) min_area = std::min(min_area, c.area);
    const double ratio = dt / min_area;
    if (ratio < options_.cfl_threshold) {
      warn(cb, sum, fmt::format("dt / min m_K = {:.6g} below the configured threshold {:.6g}; edge mobilities may "
                                "degenerate", ratio, options_.cfl_threshold));
    }
  }

  State prev = std::move(start);
  StepDiagnostics prev_diag = compute_diagnostics(prev, mesh, fdata, static_cast<double>(prev.step) * dt);
  sum.initial = prev_diag;
  const double mass_ref = prev_diag.mass.first;
  // The bound uses the energy of the starting state; on a resumed run this is
  // at most the energy at t = 0.
  sum.gradient_seminorm_bound = gradient_seminorm_bound(prev_diag.energy, mesh, fdata);
  sum.gradient_seminorm_max = prev_diag.gradient_seminorm;

  while (prev.step < until) {
    const std::size_t step = prev.step + 1;
    State next;
    int iters = 0;
    bool fallback = false;
    try {
      if (options_.force_homotopy) throw NonConvergence("plain Newton skipped", prev, {});
      auto [s, st] = solver_->newton_step(prev);
      next = std::move(s);
      iters = st.iterations;
    } catch (const SolverError& e) {
      if (const auto* nc = dynamic_cast<const NonConvergence*>(&e)) iters = nc->stats().iterations;
      fallback = true;
      try {
        auto res = solver_->homotopy_solve(prev, options_.homotopy_schedule);
        next = std::move(res.state);
        iters += res.stats.iterations;
      } catch (const SolverError& h) {
        throw SimulationAborted(fmt::format("step {}: Newton failed ({}); continuation failed ({})", step, e.what(),
                                            h.what()),
                                prev);
      }
    }
    next.step = step;

    if (options_.corrupt_mu_at_step && *options_.corrupt_mu_at_step == step) {
      for (std::size_t k = 0; k < next.size(); ++k) {
        next.mu1[k] += (k % 2 == 0 ? 1.0 : -1.0);
      }
    }

    StepDiagnostics d = compute_diagnostics(next, mesh, fdata, static_cast<double>(step) * dt);
    d.newton_iters = iters;
    d.fallback_used = fallback;
    sum.newton_iterations += iters;
    if (fallback) ++sum.fallbacks;

    // Checks on the accepted step.
    if (std::abs(d.mass.first - mass_ref) > options_.mass_tolerance * area) {
      violation(sum, cb, fmt::format("step {}: phase-1 mass drift {:.3e}", step, d.mass.first - mass_ref), step);
    }
    if (d.c1_min < eps || d.c1_max > 1.0 - eps) {
      violation(sum, cb, fmt::format("step {}: c1 range [{:.3e}, {:.3e}] leaves [eps, 1 - eps]", step, d.c1_min,
                                     d.c1_max),
                step);
    }
    const auto decay =
        check_energy_decay(prev_diag, d, dt, default_decay_slack(params_.newton.tol, d.energy, dt));
    if (!decay.ok) violation(sum, cb, fmt::format("step {}: {}", step, decay.message), step);
    if (std::abs(d.mu_bar_integral) > options_.gauge_tolerance * area * d.mu_bar_max + 1e-300) {
      violation(sum, cb, fmt::format("step {}: sum m_K mu_bar_K = {:.3e}", step, d.mu_bar_integral), step);
    }
    if (!(d.dissipation >= 0.0) || !(d.entropy_production >= 0.0)) {
      violation(sum, cb, fmt::format("step {}: negative dissipation or entropy production", step), step);
    }
    if (d.gradient_seminorm > sum.gradient_seminorm_bound) {
      warn(cb, sum, fmt::format("step {}: gradient seminorm {:.6e} above energy bound {:.6e}", step,
                                d.gradient_seminorm, sum.gradient_seminorm_bound));
    }
    if (d.edge_mobility_min < options_.degeneracy_threshold) {
      warn(cb, sum, fmt::format("step {}: edge mobility minimum {:.3e} below {:.1e}", step, d.edge_mobility_min,
                                options_.degeneracy_threshold));
    }
    sum.gradient_seminorm_max = std::max(sum.gradient_seminorm_max, d.gradient_seminorm);

    if (cb.on_step) cb.on_step(next, d);
    prev = std::move(next);
    prev_diag = d;
    ++sum.steps;
  }

  sum.last_step = prev.step;
  sum.final = prev_diag;
  sum.final_state = std::move(prev);
  sum.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return sum;
}

inline RunSummary run_simulation(std::shared_ptr<const Mesh> mesh, const ModelParams& params,
                                 const Callbacks& cb = {}, SimulationOptions options = {}) {
  Simulation sim(std::move(mesh), params, std::move(options));
  return sim.run(sim.initial(), cb);
}

/// Writes CSV rows every step, VTK files every plan.vtk_every steps or at the
/// listed steps, and a checkpoint every plan.checkpoint_every steps.
inline std::function<void(const State&, const StepDiagnostics&)> make_output_writer(
    const Mesh& mesh, OutputPlan plan, std::set<std::size_t> snapshot_steps = {}) {
  std::filesystem::create_directories(plan.directory);
  return [&mesh, plan = std::move(plan), snaps = std::move(snapshot_steps)](const State& s, const StepDiagnostics& d) {
    append_csv_row(d, plan.csv_path());
    if ((plan.vtk_every > 0 && s.step % plan.vtk_every == 0) || snaps.contains(s.step)) {
      write_vtk(mesh, s, plan.vtk_path(s.step));
    }
    if (plan.checkpoint_every > 0 && s.step % plan.checkpoint_every == 0) checkpoint(s, s.step, plan.checkpoint_path());
  };
}

}  // namespace chfv
