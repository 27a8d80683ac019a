#pragma once

// Command-line driver. Exit codes: 0 success, 1 configuration or usage
// error, 2 solver abort, 3 invariant violation in checked mode.

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "chfv/config.hpp"
#include "chfv/diagnostics.hpp"
#include "chfv/errors.hpp"
#include "chfv/io.hpp"
#include "chfv/mesh.hpp"
#include "chfv/presets.hpp"
#include "chfv/simulation.hpp"

namespace chfv {

enum ExitCode : int { exit_ok = 0, exit_config = 1, exit_solver = 2, exit_invariant = 3 };

/// Flags shared by the simulation subcommands.
struct RunFlags {
  bool checked = false;
  bool monitor = false;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir;
  std::optional<unsigned> threads;
  std::optional<std::size_t> corrupt_mu_at_step;
  std::optional<std::string> resume;
  std::size_t progress = 0;
};

namespace detail {

inline void add_run_flags(CLI::App& cmd, RunFlags& f) {
  auto* checked = cmd.add_flag("--checked", f.checked, "Abort on the first invariant violation (default)");
  cmd.add_flag("--monitor", f.monitor, "Log invariant violations and keep running")->excludes(checked);
  cmd.add_option("--seed", f.seed, "Seed of the random initial data");
  cmd.add_option("--output-dir", f.output_dir, "Directory for CSV, VTK and checkpoint files");
  cmd.add_option("--threads", f.threads, "Worker threads for assembly (env CHFV_THREADS)")->check(CLI::PositiveNumber);
  cmd.add_option("--corrupt-mu-at-step", f.corrupt_mu_at_step, "Test hook: perturb the potentials after this step")
      ->group("Testing");
  cmd.add_option("--resume", f.resume, "Continue from a checkpoint file");
  cmd.add_option("--progress", f.progress, "Print a progress line every N steps (0: off)");
}

inline unsigned threads_from_env() {
  if (const char* v = std::getenv("CHFV_THREADS")) {
    try {
      const long n = std::stol(v);
      if (n >= 1) return static_cast<unsigned>(n);
    } catch (const std::exception&) {
    }
    throw ConfigError(std::string("CHFV_THREADS: expected a positive integer, got '") + v + "'");
  }
  return 1;
}

inline void apply_flags(RunConfig& cfg, const RunFlags& f) {
  if (f.monitor) cfg.options.mode = CheckMode::monitor;
  if (f.checked) cfg.options.mode = CheckMode::checked;
  if (f.seed) cfg.params.seed = *f.seed;
  if (f.output_dir) cfg.output.directory = *f.output_dir;
  if (f.threads) {
    cfg.options.threads = *f.threads;
  } else if (std::getenv("CHFV_THREADS")) {
    cfg.options.threads = threads_from_env();
  }
  cfg.options.corrupt_mu_at_step = f.corrupt_mu_at_step;
}

inline void print_summary(std::ostream& out, const RunSummary& s) {
  fmt::print(out, "{:<24}{:>22}\n", "quantity", "value");
  fmt::print(out, "{:<24}{:>22}\n", "steps", s.steps);
  fmt::print(out, "{:<24}{:>22}\n", "last step", s.last_step);
  fmt::print(out, "{:<24}{:>22}\n", "newton iterations", s.newton_iterations);
  fmt::print(out, "{:<24}{:>22}\n", "continuation fallbacks", s.fallbacks);
  fmt::print(out, "{:<24}{:>22}\n", "warnings", s.warnings);
  fmt::print(out, "{:<24}{:>22}\n", "violations (monitor)", s.violations);
  fmt::print(out, "{:<24}{:>22.12e}\n", "min c1", s.final.c1_min);
  fmt::print(out, "{:<24}{:>22.12e}\n", "max c1", s.final.c1_max);
  fmt::print(out, "{:<24}{:>22.12e}\n", "initial energy", s.initial.energy);
  fmt::print(out, "{:<24}{:>22.12e}\n", "final energy", s.final.energy);
  fmt::print(out, "{:<24}{:>22.3f}\n", "wall seconds", s.wall_seconds);
}

/// Runs a configured simulation with file output; returns the summary.
inline RunSummary execute(const RunConfig& cfg, const std::shared_ptr<const Mesh>& mesh, const RunFlags& flags,
                          const std::set<std::size_t>& snapshots, std::ostream& out, std::ostream& err,
                          const std::function<void(const State&, const StepDiagnostics&)>& extra = {}) {
  Simulation sim(mesh, cfg.params, cfg.options);
  State start = sim.initial();
  if (flags.resume) {
    auto [s, step] = restore(*flags.resume);
    if (s.size() != mesh->num_cells()) throw ConfigError("checkpoint does not match the mesh");
    s.step = step;
    start = std::move(s);
    fmt::print(out, "resuming at step {}\n", step);
  }
  auto writer = make_output_writer(*mesh, cfg.output, snapshots);
  if (!flags.resume) {
    // A fresh run starts a fresh time series.
    std::filesystem::remove(cfg.output.csv_path());
    if (snapshots.contains(0) || cfg.output.vtk_every > 0) write_vtk(*mesh, start, cfg.output.vtk_path(0));
  }
  Callbacks cb;
  const std::size_t total = sim.total_steps();
  cb.on_step = [&](const State& s, const StepDiagnostics& d) {
    writer(s, d);
    if (extra) extra(s, d);
    if (flags.progress > 0 && s.step % flags.progress == 0) {
      fmt::print(out, "step {:>7}/{} t = {:.4f} E = {:.10e} newton = {}{}\n", s.step, total, d.time, d.energy,
                 d.newton_iters, d.fallback_used ? " (continuation)" : "");
      out.flush();
    }
  };
  cb.on_warning = [&](const std::string& w) { fmt::print(err, "warning: {}\n", w); };
  RunSummary sum = sim.run(std::move(start), cb);
  // Final checkpoint so that a run can always be extended.
  checkpoint(sum.final_state, sum.final_state.step, cfg.output.checkpoint_path());
  return sum;
}

template <class Body>
int guarded(std::ostream& err, Body&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    fmt::print(err, "config error: {}\n", e.what());
    return exit_config;
  } catch (const MeshError& e) {
    fmt::print(err, "mesh error: {}\n", e.what());
    return exit_config;
  } catch (const IoError& e) {
    fmt::print(err, "io error: {}\n", e.what());
    return exit_config;
  } catch (const InvariantViolation& e) {
    fmt::print(err, "invariant violation at step {}: {}\n", e.step(), e.what());
    return exit_invariant;
  } catch (const SimulationAborted& e) {
    fmt::print(err, "solver abort after step {}: {}\n", e.step(), e.what());
    return exit_solver;
  } catch (const SolverError& e) {
    fmt::print(err, "solver error: {}\n", e.what());
    return exit_solver;
  } catch (const std::filesystem::filesystem_error& e) {
    fmt::print(err, "io error: {}\n", e.what());
    return exit_config;
  }
}

/// Mean of the fine field over each coarse cell of a nested Cartesian pair.
inline std::vector<double> restrict_to(const Mesh& fine, const std::vector<double>& v, const Mesh& coarse,
                                       std::size_t n_coarse, const Rect& domain) {
  std::vector<double> sum(coarse.num_cells(), 0.0);
  std::vector<double> area(coarse.num_cells(), 0.0);
  const double hx = domain.width() / static_cast<double>(n_coarse);
  const double hy = domain.height() / static_cast<double>(n_coarse);
  for (std::size_t k = 0; k < fine.num_cells(); ++k) {
    const Point& x = fine.cell(k).center;
    const auto i = std::min(n_coarse - 1, static_cast<std::size_t>((x.x() - domain.x0) / hx));
    const auto j = std::min(n_coarse - 1, static_cast<std::size_t>((x.y() - domain.y0) / hy));
    const std::size_t c = j * n_coarse + i;
    sum[c] += fine.cell(k).area * v[k];
    area[c] += fine.cell(k).area;
  }
  for (std::size_t c = 0; c < sum.size(); ++c) sum[c] /= area[c];
  return sum;
}

}  // namespace detail

inline int cmd_run(const std::string& config_path, const RunFlags& flags, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] {
    RunConfig cfg = load_config(config_path);
    detail::apply_flags(cfg, flags);
    auto mesh = cfg.mesh.build();
    const RunSummary sum = detail::execute(cfg, mesh, flags, {}, out, err);
    detail::print_summary(out, sum);
    return int{exit_ok};
  });
}

inline int cmd_check_mesh(const std::string& path, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] {
    const Mesh mesh = load_triangulation(path);
    const RegularityReport r = check_admissibility(mesh);
    fmt::print(out, "cells            {}\n", mesh.num_cells());
    fmt::print(out, "edges            {} ({} interior)\n", mesh.edges().size(), mesh.interior_edges().size());
    fmt::print(out, "h                {:.6e}\n", mesh.h());
    fmt::print(out, "zeta             {:.6e}\n", r.zeta);
    fmt::print(out, "max edges/cell   {}\n", r.ell_star);
    fmt::print(out, "tau range        [{:.6e}, {:.6e}]\n", r.tau_star_min, r.tau_star_max);
    fmt::print(out, "super-admissible {}\n", r.super_admissible ? "yes" : "no");
    for (const auto& v : r.violations) {
      const char* kind = v.kind == AdmissibilityViolation::Kind::orthogonality ? "orthogonality"
                         : v.kind == AdmissibilityViolation::Kind::midpoint    ? "midpoint"
                                                                               : "degenerate distance";
      fmt::print(out, "  edge {}: {} defect {:.3e}\n", v.edge, kind, v.defect);
    }
    return r.super_admissible ? int{exit_ok} : int{exit_config};
  });
}

struct ReproduceOverrides {
  std::optional<std::size_t> n;
  std::optional<double> t_end;
  std::optional<std::string> mesh_file;
};

inline int cmd_reproduce(const std::string& name, const ReproduceOverrides& ov, const RunFlags& flags,
                         std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] {
    const PresetCase c = parse_preset(name);
    RunConfig cfg = preset_config(c, ov.n, ov.t_end);
    cfg.output.directory = std::filesystem::path("out") / name;
    if (ov.mesh_file) {
      cfg.mesh.type = MeshSpec::Type::file;
      cfg.mesh.path = *ov.mesh_file;
    }
    detail::apply_flags(cfg, flags);
    auto mesh = cfg.mesh.build();
    const auto snaps = snapshot_steps(snapshot_times(c), cfg.params.dt, cfg.params.t_end);

    std::map<std::size_t, double> energy_at;
    std::map<std::size_t, double> lower_at;
    auto record = [&](const State& s, const StepDiagnostics& d) {
      if (snaps.contains(s.step)) {
        energy_at[s.step] = d.energy;
        lower_at[s.step] = mass_fraction_below(s, *mesh, 0.5);
      }
    };
    const RunSummary sum = detail::execute(cfg, mesh, flags, snaps, out, err, record);
    detail::print_summary(out, sum);
    fmt::print(out, "\n{:>10}{:>22}{:>22}\n", "t", "energy", "mass share y<0.5");
    for (const auto& [step, e] : energy_at) {
      fmt::print(out, "{:>10.4f}{:>22.12e}{:>22.6f}\n", static_cast<double>(step) * cfg.params.dt, e, lower_at[step]);
    }
    fmt::print(out, "final mass share below y = 0.5: {:.6f}\n", mass_fraction_below(sum.final_state, *mesh, 0.5));
    return int{exit_ok};
  });
}

inline int cmd_refine_study(const std::string& config_path, std::vector<std::size_t> levels, const RunFlags& flags,
                            std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] {
    if (levels.size() < 2) throw ConfigError("refine-study: at least two levels are required");
    std::sort(levels.begin(), levels.end());
    if (std::adjacent_find(levels.begin(), levels.end()) != levels.end()) {
      throw ConfigError("refine-study: levels must be distinct");
    }
    RunConfig base = load_config(config_path);
    detail::apply_flags(base, flags);
    if (base.mesh.type != MeshSpec::Type::cartesian) throw ConfigError("refine-study: mesh.type must be cartesian");
    const std::size_t coarsest = levels.front();
    const std::size_t finest = levels.back();
    for (std::size_t n : levels) {
      if (n < 2) throw ConfigError("refine-study: levels must be >= 2");
      if (finest % n != 0) throw ConfigError(fmt::format("refine-study: level {} does not divide {}", n, finest));
    }
    const Rect domain = base.mesh.domain;
    const std::vector<double> fractions{0.25, 0.5, 1.0};

    struct Level {
      std::size_t n;
      double dt;
      std::shared_ptr<const Mesh> mesh;
      std::vector<std::vector<double>> samples;
      std::vector<double> times;
    };
    std::vector<Level> runs;
    for (std::size_t n : levels) {
      RunConfig cfg = base;
      cfg.mesh.n = n;
      // dt proportional to h, equal to the configured dt on the coarsest grid.
      cfg.params.dt = base.params.dt * static_cast<double>(coarsest) / static_cast<double>(n);
      cfg.output.directory = base.output.directory / fmt::format("level_{}", n);
      Level lv{n, cfg.params.dt, cfg.mesh.build(), {}, {}};
      const std::size_t total = step_count(cfg.params);
      std::map<std::size_t, std::size_t> wanted;
      for (std::size_t i = 0; i < fractions.size(); ++i) {
        wanted[static_cast<std::size_t>(std::llround(fractions[i] * static_cast<double>(total)))] = i;
      }
      lv.samples.resize(fractions.size());
      lv.times.resize(fractions.size());
      auto grab = [&](const State& s, const StepDiagnostics& d) {
        if (auto it = wanted.find(s.step); it != wanted.end()) {
          lv.samples[it->second] = s.c1;
          lv.times[it->second] = d.time;
        }
      };
      RunFlags f = flags;
      f.resume.reset();
      fmt::print(out, "level n = {}: dt = {:.6e}, {} steps\n", n, cfg.params.dt, total);
      out.flush();
      detail::execute(cfg, lv.mesh, f, {}, out, err, grab);
      runs.push_back(std::move(lv));
    }

    const Level& ref = runs.back();
    fmt::print(out, "\n{:>8}{:>14}{:>12}{:>20}{:>10}\n", "n", "h", "t", "L2 diff to finest", "ratio");
    for (std::size_t i = 0; i < fractions.size(); ++i) {
      double previous = 0.0;
      for (std::size_t l = 0; l + 1 < runs.size(); ++l) {
        const Level& lv = runs[l];
        const auto fine = detail::restrict_to(*ref.mesh, ref.samples[i], *lv.mesh, lv.n, domain);
        double s = 0.0;
        for (std::size_t k = 0; k < fine.size(); ++k) {
          const double d = lv.samples[i][k] - fine[k];
          s += lv.mesh->cell(k).area * d * d;
        }
        const double diff = std::sqrt(s);
        const std::string ratio = l == 0 ? std::string("-") : fmt::format("{:.3f}", previous / diff);
        fmt::print(out, "{:>8}{:>14.6e}{:>12.5f}{:>20.10e}{:>10}\n", lv.n, lv.mesh->h(), lv.times[i], diff, ratio);
        previous = diff;
      }
    }
    return int{exit_ok};
  });
}

/// Parses the command line and dispatches; usage errors exit with 1.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Finite-volume solver for the two-phase degenerate Cahn-Hilliard model", "chfv"};
  app.require_subcommand(1, 1);

  std::string config_path;
  std::string mesh_path;
  std::string case_name;
  std::vector<std::size_t> levels;
  RunFlags flags;
  ReproduceOverrides ov;

  auto* run = app.add_subcommand("run", "Run a simulation described by an INI config");
  run->add_option("config", config_path, "Config file")->required();
  detail::add_run_flags(*run, flags);

  auto* check = app.add_subcommand("check-mesh", "Report regularity and admissibility of a mesh file");
  check->add_option("path", mesh_path, "Mesh file")->required();

  auto* repro = app.add_subcommand("reproduce", "Run a reference experiment preset");
  repro->add_option("case", case_name, "spinodal | spinodal-gravity | cross | cross-gravity")->required();
  repro->add_option("--n", ov.n, "Cells per side of the Cartesian grid")->check(CLI::Range(2, 100000));
  repro->add_option("--t-end", ov.t_end, "Final time");
  repro->add_option("--mesh-file", ov.mesh_file, "Use a mesh file instead of the Cartesian grid");
  detail::add_run_flags(*repro, flags);

  auto* refine = app.add_subcommand("refine-study", "Compare solutions on nested Cartesian grids");
  refine->add_option("config", config_path, "Config file")->required();
  refine->add_option("--levels", levels, "Cells per side, e.g. 16,32,64")->delimiter(',')->required();
  detail::add_run_flags(*refine, flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? int{exit_ok} : int{exit_config};
  }

  if (*run) return cmd_run(config_path, flags, out, err);
  if (*check) return cmd_check_mesh(mesh_path, out, err);
  if (*repro) return cmd_reproduce(case_name, ov, flags, out, err);
  return cmd_refine_study(config_path, levels, flags, out, err);
}

}  // namespace chfv
