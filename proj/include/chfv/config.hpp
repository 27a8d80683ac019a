#pragma once

// INI run configuration. Sections and keys:
//
//   [physics]   alpha kappa theta1 theta2 eta1 eta2
//   [numerics]  dt t_end rho_num newton_tol newton_max_iter eps_proj damping
//               max_backtracks warm_start_mu homotopy_schedule (comma list)
//   [potential] type = none|gravity, gx gy rho1 rho2
//   [initial]   type = uniform_noise|cross|smooth|file, seed, and per type:
//               mean amplitude | center_x center_y width arm_length quadrature
//               | mean amplitude | path
//   [mesh]      type = cartesian|file, n, x0 y0 x1 y1 | path
//   [output]    directory csv vtk_every checkpoint_every
//   [run]       mode = checked|monitor, threads, cfl_threshold,
//               degeneracy_threshold
//
// Unknown sections or keys are rejected so that typos do not pass silently.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "chfv/errors.hpp"
#include "chfv/io.hpp"
#include "chfv/mesh.hpp"
#include "chfv/model.hpp"
#include "chfv/simulation.hpp"

namespace chfv {

struct MeshSpec {
  enum class Type { cartesian, file };
  Type type = Type::cartesian;
  std::size_t n = 64;
  Rect domain{};
  std::string path;

  std::shared_ptr<const Mesh> build() const {
    if (type == Type::cartesian) return std::make_shared<const Mesh>(build_cartesian(n, domain));
    return std::make_shared<const Mesh>(load_triangulation(path));
  }
};

struct RunConfig {
  ModelParams params;
  MeshSpec mesh;
  OutputPlan output;
  SimulationOptions options;
};

namespace detail {

using boost::property_tree::ptree;

inline const std::map<std::string, std::set<std::string>>& config_schema() {
  static const std::map<std::string, std::set<std::string>> schema{
      {"physics", {"alpha", "kappa", "theta1", "theta2", "eta1", "eta2"}},
      {"numerics",
       {"dt", "t_end", "rho_num", "newton_tol", "newton_max_iter", "eps_proj", "damping", "max_backtracks",
        "warm_start_mu", "homotopy_schedule"}},
      {"potential", {"type", "gx", "gy", "rho1", "rho2"}},
      {"initial",
       {"type", "seed", "mean", "amplitude", "center_x", "center_y", "width", "arm_length", "quadrature", "path"}},
      {"mesh", {"type", "n", "x0", "y0", "x1", "y1", "path"}},
      {"output", {"directory", "csv", "vtk_every", "checkpoint_every"}},
      {"run", {"mode", "threads", "cfl_threshold", "degeneracy_threshold"}},
  };
  return schema;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

class Reader {
 public:
  explicit Reader(const ptree& tree) : tree_(tree) {}

  std::optional<std::string> raw(const std::string& key) const {
    auto v = tree_.get_optional<std::string>(ptree::path_type(key, '.'));
    if (!v) return std::nullopt;
    return trim(*v);
  }

  double number(const std::string& key, double fallback) const {
    const auto v = raw(key);
    return v ? parse_number(key, *v) : fallback;
  }

  template <class Int>
  Int integer(const std::string& key, Int fallback) const {
    const auto v = raw(key);
    if (!v) return fallback;
    Int out{};
    const auto* end = v->data() + v->size();
    const auto [ptr, ec] = std::from_chars(v->data(), end, out);
    if (ec != std::errc() || ptr != end) throw ConfigError(key + ": expected an integer, got '" + *v + "'");
    return out;
  }

  bool boolean(const std::string& key, bool fallback) const {
    const auto v = raw(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
    if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
    throw ConfigError(key + ": expected true or false, got '" + *v + "'");
  }

  std::string text(const std::string& key, const std::string& fallback) const { return raw(key).value_or(fallback); }

  std::vector<double> number_list(const std::string& key, std::vector<double> fallback) const {
    const auto v = raw(key);
    if (!v) return fallback;
    std::vector<double> out;
    std::stringstream ss(*v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_number(key, trim(item)));
    if (out.empty()) throw ConfigError(key + ": empty list");
    return out;
  }

  static double parse_number(const std::string& key, const std::string& v) {
    try {
      std::size_t used = 0;
      const double d = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return d;
    } catch (const std::exception&) {
      throw ConfigError(key + ": expected a number, got '" + v + "'");
    }
  }

 private:
  const ptree& tree_;
};

}  // namespace detail

/// Parses INI text; `base_dir` resolves relative file paths.
inline RunConfig parse_config(std::istream& in, const std::filesystem::path& base_dir = ".") {
  detail::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("config syntax error: ") + e.what());
  }
  const auto& schema = detail::config_schema();
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) throw ConfigError("key '" + section + "' outside any section");
    const auto it = schema.find(section);
    if (it == schema.end()) throw ConfigError("unknown config section [" + section + "]");
    for (const auto& [key, value] : body) {
      if (!it->second.contains(key)) throw ConfigError("unknown config key " + section + "." + key);
    }
  }

  const detail::Reader r(tree);
  RunConfig cfg;
  auto& p = cfg.params;
  auto resolve = [&](const std::string& path) {
    const std::filesystem::path fp(path);
    return fp.is_absolute() ? fp.string() : (base_dir / fp).string();
  };

  p.physics.alpha = r.number("physics.alpha", p.physics.alpha);
  p.physics.kappa = r.number("physics.kappa", p.physics.kappa);
  p.physics.theta[0] = r.number("physics.theta1", p.physics.theta[0]);
  p.physics.theta[1] = r.number("physics.theta2", p.physics.theta[1]);
  p.physics.eta[0] = r.number("physics.eta1", p.physics.eta[0]);
  p.physics.eta[1] = r.number("physics.eta2", p.physics.eta[1]);

  p.dt = r.number("numerics.dt", p.dt);
  p.t_end = r.number("numerics.t_end", p.t_end);
  p.rho_num = r.number("numerics.rho_num", p.rho_num);
  p.newton.tol = r.number("numerics.newton_tol", p.newton.tol);
  p.newton.max_iter = r.integer<int>("numerics.newton_max_iter", p.newton.max_iter);
  p.newton.eps_proj = r.number("numerics.eps_proj", p.newton.eps_proj);
  p.newton.damping = r.number("numerics.damping", p.newton.damping);
  p.newton.max_backtracks = r.integer<int>("numerics.max_backtracks", p.newton.max_backtracks);
  p.newton.warm_start_mu = r.boolean("numerics.warm_start_mu", p.newton.warm_start_mu);
  cfg.options.homotopy_schedule = r.number_list("numerics.homotopy_schedule", cfg.options.homotopy_schedule);

  const std::string pot = r.text("potential.type", "none");
  if (pot == "none") {
    p.potential.type = PotentialSpec::Type::none;
  } else if (pot == "gravity") {
    p.potential.type = PotentialSpec::Type::gravity;
  } else {
    throw ConfigError("potential.type: unsupported value '" + pot + "' (none|gravity)");
  }
  p.potential.g = Point(r.number("potential.gx", p.potential.g.x()), r.number("potential.gy", p.potential.g.y()));
  p.potential.density[0] = r.number("potential.rho1", p.potential.density[0]);
  p.potential.density[1] = r.number("potential.rho2", p.potential.density[1]);

  p.seed = r.integer<std::uint64_t>("initial.seed", p.seed);
  const std::string ic = r.text("initial.type", "uniform_noise");
  if (ic == "uniform_noise") {
    UniformNoise s;
    s.mean = r.number("initial.mean", s.mean);
    s.amplitude = r.number("initial.amplitude", s.amplitude);
    p.initial = s;
  } else if (ic == "cross") {
    CrossShape s;
    s.center = Point(r.number("initial.center_x", s.center.x()), r.number("initial.center_y", s.center.y()));
    s.width = r.number("initial.width", s.width);
    s.arm_length = r.number("initial.arm_length", s.arm_length);
    s.quadrature = r.boolean("initial.quadrature", s.quadrature);
    p.initial = s;
  } else if (ic == "smooth") {
    SmoothBump s;
    s.mean = r.number("initial.mean", s.mean);
    s.amplitude = r.number("initial.amplitude", s.amplitude);
    p.initial = s;
  } else if (ic == "file") {
    const auto path = r.raw("initial.path");
    if (!path) throw ConfigError("initial.path is required for initial.type = file");
    p.initial = FromFile{resolve(*path)};
  } else {
    throw ConfigError("initial.type: unsupported value '" + ic + "' (uniform_noise|cross|smooth|file)");
  }

  const std::string mt = r.text("mesh.type", "cartesian");
  if (mt == "cartesian") {
    cfg.mesh.type = MeshSpec::Type::cartesian;
    cfg.mesh.n = r.integer<std::size_t>("mesh.n", cfg.mesh.n);
    cfg.mesh.domain = Rect{r.number("mesh.x0", 0.0), r.number("mesh.y0", 0.0), r.number("mesh.x1", 1.0),
                           r.number("mesh.y1", 1.0)};
    if (cfg.mesh.n < 2) throw ConfigError("mesh.n must be >= 2");
  } else if (mt == "file") {
    const auto path = r.raw("mesh.path");
    if (!path) throw ConfigError("mesh.path is required for mesh.type = file");
    cfg.mesh.type = MeshSpec::Type::file;
    cfg.mesh.path = resolve(*path);
  } else {
    throw ConfigError("mesh.type: unsupported value '" + mt + "' (cartesian|file)");
  }

  cfg.output.directory = r.text("output.directory", cfg.output.directory.string());
  cfg.output.csv_name = r.text("output.csv", cfg.output.csv_name);
  cfg.output.vtk_every = r.integer<std::size_t>("output.vtk_every", cfg.output.vtk_every);
  cfg.output.checkpoint_every = r.integer<std::size_t>("output.checkpoint_every", cfg.output.checkpoint_every);

  const std::string mode = r.text("run.mode", "checked");
  if (mode == "checked") {
    cfg.options.mode = CheckMode::checked;
  } else if (mode == "monitor") {
    cfg.options.mode = CheckMode::monitor;
  } else {
    throw ConfigError("run.mode: unsupported value '" + mode + "' (checked|monitor)");
  }
  cfg.options.threads = r.integer<unsigned>("run.threads", cfg.options.threads);
  cfg.options.cfl_threshold = r.number("run.cfl_threshold", cfg.options.cfl_threshold);
  cfg.options.degeneracy_threshold = r.number("run.degeneracy_threshold", cfg.options.degeneracy_threshold);

  p.validate();
  return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  return parse_config(in, path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

}  // namespace chfv
