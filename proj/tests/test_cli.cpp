// End-to-end checks of the installed binary: subcommands, flag overrides,
// and the exit-code classes (0 ok, 2 config, 3 parse/io, 4 numerical).

#include <catch2/catch.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <string>

#include <toatrack/io.hpp>
#include <toatrack/model.hpp>

#include "fixtures.hpp"

namespace {

int run_cli(const std::string& args) {
  const std::string cmd =
      std::string("\"") + TOATRACK_CLI_PATH + "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  if (status == -1 || !WIFEXITED(status)) return -1;
  return WEXITSTATUS(status);
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  REQUIRE(out.good());
  out << text;
}

}  // namespace

TEST_CASE("cli prints defaults and validates layouts") {
  const fixtures::TempDir tmp("cli_validate");
  CHECK(run_cli("validate --print-defaults") == 0);

  toatrack::SensorLayoutFile file;
  file.sensors = toatrack::make_axes_layout();
  std::ofstream good(tmp.path("good.layout"));
  toatrack::save_sensor_layout(file, good);
  good.close();
  CHECK(run_cli("validate \"" + tmp.path("good.layout") + "\"") == 0);

  file.sensors.positions[6] = {0, 0, -2.5};
  std::ofstream broken(tmp.path("broken.layout"));
  toatrack::save_sensor_layout(file, broken);
  broken.close();
  CHECK(run_cli("validate \"" + tmp.path("broken.layout") + "\"") == 2);

  CHECK(run_cli("validate \"" + tmp.path("missing.layout") + "\"") == 3);
  CHECK(run_cli("validate") == 2);  // no layout, no --print-defaults
}

TEST_CASE("cli simulate and reconstruct round trip with default scenario") {
  const fixtures::TempDir tmp("cli_roundtrip");
  const std::string out = tmp.path("run");
  REQUIRE(run_cli("simulate --out \"" + out + "\"") == 0);
  CHECK(toatrack::load_toa(out + "_toa.csv", 1.0).num_emissions == 86);

  CHECK(run_cli("reconstruct --toa \"" + out + "_toa.csv\" --truth \"" + out +
                "_truth.csv\" --out \"" + out + "\"") == 0);
  std::ifstream recon(out + "_recon.csv");
  CHECK(recon.good());
}

TEST_CASE("cli reconstruct maps failure classes to exit codes") {
  const fixtures::TempDir tmp("cli_errors");
  const std::string out = tmp.path("run");
  REQUIRE(run_cli("simulate --out \"" + out + "\"") == 0);

  // missing required flag -> configuration class
  CHECK(run_cli("reconstruct --out \"" + out + "\"") == 2);
  // unreadable input -> parse class
  CHECK(run_cli("reconstruct --toa \"" + tmp.path("nope.csv") + "\"") == 3);
  // malformed input -> parse class
  write_file(tmp.path("trunc.csv"), "T_1,T_2,T_3,T_4,T_5,T_6,T_7\n1,2,3\n");
  CHECK(run_cli("reconstruct --toa \"" + tmp.path("trunc.csv") + "\"") == 3);

  // corrupt one emission so its system loses rank -> numerical class
  auto toa = toatrack::load_toa(out + "_toa.csv", 1.0);
  for (std::size_t k = 1; k < toa.num_sensors; ++k) toa(2, k) = toa(2, 0);
  toatrack::save_toa_csv(toa, tmp.path("corrupt.csv"));
  CHECK(run_cli("reconstruct --toa \"" + tmp.path("corrupt.csv") + "\" --out \"" +
                tmp.path("c") + "\"") == 4);
}

TEST_CASE("cli stability validates its level list") {
  const fixtures::TempDir tmp("cli_stability");
  CHECK(run_cli("stability --levels 1e-4 --out \"" + tmp.path("s") + "\"") == 2);
  CHECK(run_cli("stability --levels 1e-6,oops,1e-4 --out \"" + tmp.path("s") + "\"") ==
        2);
  CHECK(run_cli("stability --levels 1e-6,1e-5,1e-4 --out \"" + tmp.path("s") + "\"") ==
        0);
}

TEST_CASE("cli rejects unknown subcommands and flags") {
  CHECK(run_cli("frobnicate") == 2);
  CHECK(run_cli("simulate --frequency 7") == 2);
  CHECK(run_cli("") == 2);  // a subcommand is required
}

TEST_CASE("cli method override selects the oracle") {
  const fixtures::TempDir tmp("cli_method");
  // a short trajectory keeps the grid search cheap
  toatrack::Trajectory traj;
  traj.events = {{0.0, {2, 2, 1}}, {1.0, {2.2, 2, 1}}, {2.0, {2.4, 2, 1}}};
  const auto toa = toatrack::synthesize_toa(traj, toatrack::make_axes_layout(), 1.0);
  toatrack::save_toa_csv(toa, tmp.path("toa.csv"));
  toatrack::save_trajectory_csv(traj, tmp.path("truth.csv"));
  CHECK(run_cli("reconstruct --method oracle --toa \"" + tmp.path("toa.csv") +
                "\" --truth \"" + tmp.path("truth.csv") + "\" --out \"" +
                tmp.path("o") + "\"") == 0);
  CHECK(run_cli("reconstruct --method eight --toa \"" + tmp.path("toa.csv") + "\"") ==
        2);  // unknown method name is a configuration error
}
