#include <catch_amalgamated.hpp>

#include <sstream>

#include "chfv/config.hpp"
#include "chfv/presets.hpp"

using namespace chfv;
using Catch::Matchers::ContainsSubstring;

namespace {
RunConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in, "/base");
}
}  // namespace

TEST_CASE("full configuration is read", "[config]") {
  const RunConfig c = parse(R"(
[physics]
alpha = 1e-3
kappa = 2.0
theta1 = 0.3
theta2 = 0.4
eta1 = 1.5
eta2 = 0.5
[numerics]
dt = 2e-4
t_end = 0.1
rho_num = 0.5
newton_tol = 1e-8
newton_max_iter = 30
warm_start_mu = true
homotopy_schedule = 0, 0.5, 1
[potential]
type = gravity
gx = 0
gy = -0.98
rho1 = 5
rho2 = 1
[initial]
type = cross
width = 0.1
quadrature = false
seed = 99
[mesh]
type = cartesian
n = 32
x1 = 2
[output]
directory = results
vtk_every = 10
checkpoint_every = 100
[run]
mode = monitor
threads = 3
)");
  CHECK(c.params.physics.alpha == 1e-3);
  CHECK(c.params.physics.theta[1] == 0.4);
  CHECK(c.params.physics.eta[0] == 1.5);
  CHECK(c.params.dt == 2e-4);
  CHECK(c.params.newton.tol == 1e-8);
  CHECK(c.params.newton.max_iter == 30);
  CHECK(c.params.newton.warm_start_mu);
  CHECK(c.options.homotopy_schedule == std::vector<double>{0.0, 0.5, 1.0});
  CHECK(c.params.potential.type == PotentialSpec::Type::gravity);
  CHECK(c.params.potential.g.y() == -0.98);
  CHECK(std::holds_alternative<CrossShape>(c.params.initial));
  CHECK(std::get<CrossShape>(c.params.initial).width == 0.1);
  CHECK_FALSE(std::get<CrossShape>(c.params.initial).quadrature);
  CHECK(c.params.seed == 99);
  CHECK(c.mesh.n == 32);
  CHECK(c.mesh.domain.x1 == 2.0);
  CHECK(c.output.directory == "results");
  CHECK(c.output.vtk_every == 10);
  CHECK(c.options.mode == CheckMode::monitor);
  CHECK(c.options.threads == 3);
}

TEST_CASE("defaults apply to an empty file", "[config]") {
  const RunConfig c = parse("");
  CHECK(c.params.dt == 1e-4);
  CHECK(c.mesh.type == MeshSpec::Type::cartesian);
  CHECK(c.options.mode == CheckMode::checked);
}

TEST_CASE("configuration errors name the key", "[config]") {
  CHECK_THROWS_WITH(parse("[numerics]\ndt = 0\n"), "numerics.dt must be > 0");
  CHECK_THROWS_WITH(parse("[numerics]\ndt = abc\n"), ContainsSubstring("numerics.dt"));
  CHECK_THROWS_WITH(parse("[numerics]\nnewton_max_iter = 2.5\n"), ContainsSubstring("numerics.newton_max_iter"));
  CHECK_THROWS_WITH(parse("[numerics]\ndtt = 1\n"), ContainsSubstring("numerics.dtt"));
  CHECK_THROWS_WITH(parse("[physic]\nalpha = 1\n"), ContainsSubstring("physic"));
  CHECK_THROWS_WITH(parse("alpha = 1\n"), ContainsSubstring("outside any section"));
  CHECK_THROWS_WITH(parse("[potential]\ntype = magnetic\n"), ContainsSubstring("potential.type"));
  CHECK_THROWS_WITH(parse("[mesh]\ntype = file\n"), ContainsSubstring("mesh.path"));
  CHECK_THROWS_WITH(parse("[run]\nmode = loud\n"), ContainsSubstring("run.mode"));
  CHECK_THROWS_WITH(parse("[numerics]\nwarm_start_mu = maybe\n"), ContainsSubstring("numerics.warm_start_mu"));
  CHECK_THROWS_AS(parse("[physics\nalpha = 1\n"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/run.ini"), ConfigError);
}

TEST_CASE("relative paths resolve against the config directory", "[config]") {
  const RunConfig c = parse("[mesh]\ntype = file\npath = meshes/a.txt\n[initial]\ntype = file\npath = /abs/c.txt\n");
  CHECK(c.mesh.path == "/base/meshes/a.txt");
  CHECK(std::get<FromFile>(c.params.initial).path == "/abs/c.txt");
}

TEST_CASE("presets encode the reference parameter set", "[presets]") {
  for (const auto& name : preset_names()) {
    const PresetCase pc = parse_preset(name);
    const RunConfig c = preset_config(pc);
    const auto& p = c.params;
    CHECK(p.physics.alpha == 2e-4);
    CHECK(p.physics.kappa == 1.45);
    CHECK(p.physics.theta == std::array<double, 2>{0.35, 0.35});
    CHECK(p.physics.eta == std::array<double, 2>{1.0, 1.0});
    CHECK(p.rho_num == 1.0);
    CHECK(p.dt == 1e-4);
    CHECK(c.mesh.type == MeshSpec::Type::cartesian);
    CHECK(c.mesh.n == 64);
    CHECK(c.mesh.domain.x0 == 0.0);
    CHECK(c.mesh.domain.x1 == 1.0);
    CHECK(c.mesh.domain.y1 == 1.0);
    if (has_gravity(pc)) {
      CHECK(p.potential.type == PotentialSpec::Type::gravity);
      CHECK(p.potential.g == Point(0.0, -0.98));
      CHECK(p.potential.density == std::array<double, 2>{5.0, 1.0});
    } else {
      CHECK(p.potential.type == PotentialSpec::Type::none);
    }
    if (is_spinodal(pc)) {
      CHECK(std::holds_alternative<UniformNoise>(p.initial));
      CHECK(std::get<UniformNoise>(p.initial).mean == 0.5);
      CHECK(snapshot_times(pc) == std::vector<double>{0.005, 0.01, 0.02, 0.2});
    } else {
      CHECK(std::holds_alternative<CrossShape>(p.initial));
      CHECK(snapshot_times(pc) == std::vector<double>{0.02, 0.07, 0.15, 0.2, 0.5});
    }
  }
  CHECK(preset_config(PresetCase::cross_gravity).params.t_end == 0.5);
  CHECK(preset_config(PresetCase::spinodal).params.t_end == 0.2);
  CHECK_THROWS_AS(parse_preset("cross_gravity"), ConfigError);
}

TEST_CASE("snapshot steps are filtered by the final time", "[presets]") {
  const auto steps = snapshot_steps(snapshot_times(PresetCase::cross), 1e-4, 0.2);
  CHECK(steps == std::set<std::size_t>{200, 700, 1500, 2000});
  const auto spin = snapshot_steps(snapshot_times(PresetCase::spinodal), 1e-4, 0.2);
  CHECK(spin == std::set<std::size_t>{50, 100, 200, 2000});
}
