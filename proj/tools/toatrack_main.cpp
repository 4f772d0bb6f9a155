#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <toatrack/toatrack.hpp>

namespace {

struct CommonArgs {
  std::string scenario_path;
  std::string method;
  std::string out_prefix;
  std::uint64_t seed = 0;
  bool seed_given = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--scenario", args.scenario_path, "Scenario file (key = value)");
  cmd->add_option("--method", args.method, "Override method: five|seven|oracle");
  cmd->add_option("--out", args.out_prefix, "Override output path prefix");
  cmd->add_option("--seed", args.seed, "Override noise seed")
      ->each([&args](const std::string&) { args.seed_given = true; });
}

toatrack::Scenario resolve_scenario(const CommonArgs& args) {
  toatrack::Scenario s;
  if (!args.scenario_path.empty()) s = toatrack::load_scenario(args.scenario_path);
  if (!args.method.empty()) {
    try {
      s.method = toatrack::parse_method(args.method);
    } catch (const toatrack::ParseError&) {
      throw toatrack::ConfigError("bad --method value '" + args.method + "'");
    }
  }
  if (!args.out_prefix.empty()) s.output_prefix = args.out_prefix;
  if (args.seed_given) s.seed = args.seed;
  return s;
}

std::vector<double> parse_levels(const std::string& csv) {
  std::vector<double> levels;
  std::size_t start = 0;
  while (start <= csv.size()) {
    const std::size_t pos = csv.find(',', start);
    const std::string field =
        csv.substr(start, pos == std::string::npos ? std::string::npos : pos - start);
    if (!field.empty()) {
      try {
        levels.push_back(toatrack::parse_double(field, 0));
      } catch (const toatrack::ParseError&) {
        throw toatrack::ConfigError("bad --levels value '" + field + "'");
      }
    }
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return levels;
}

int run_simulate(const CommonArgs& args) {
  const auto scenario = resolve_scenario(args);
  const auto out = toatrack::cmd_simulate(scenario);
  if (!out.subsonic.is_subsonic)
    std::cerr << "warning: max source speed " << out.subsonic.max_speed
              << " is not below the wave speed; arrival ordering is not guaranteed\n";
  std::cout << "wrote " << out.toa_path << " (" << out.emissions << "x" << out.sensors
            << ")\nwrote " << out.truth_path << "\n";
  return toatrack::kExitOk;
}

int run_reconstruct(const CommonArgs& args, const std::string& toa_path,
                    const std::string& truth_path) {
  const auto scenario = resolve_scenario(args);
  const auto out = toatrack::cmd_reconstruct(scenario, toa_path, truth_path);
  std::cout << "wrote " << out.recon_path << ": " << out.result.estimates.size()
            << " estimates, " << out.result.failures.size() << " failures\n";
  if (!out.result.position_errors.empty())
    std::cout << "max position error " << out.result.max_position_error()
              << ", max time error " << out.result.max_time_error() << "\n";
  for (const auto& f : out.result.failures)
    std::cerr << "event " << (f.j + 1) << ": " << f.kind << "\n";
  return out.result.failures.empty() ? toatrack::kExitOk : toatrack::kExitNumerical;
}

int run_stability(const CommonArgs& args, const std::string& levels_csv) {
  const auto scenario = resolve_scenario(args);
  std::vector<double> levels;
  if (!levels_csv.empty()) levels = parse_levels(levels_csv);
  const auto out = toatrack::cmd_stability(scenario, levels);
  std::cout << "slope=" << out.report.fitted_slope
            << " intercept=" << out.report.fitted_intercept
            << " fit_points=" << out.report.fit_point_count
            << " failures=" << out.report.failures.size() << "\n"
            << "wrote " << out.csv_path << "\nwrote " << out.json_path << "\n";
  return toatrack::kExitOk;
}

int run_validate(const std::string& layout_path, bool print_defaults) {
  if (print_defaults) {
    toatrack::print_default_scenario(std::cout);
    return toatrack::kExitOk;
  }
  if (layout_path.empty())
    throw toatrack::ConfigError("validate needs a layout file (or --print-defaults)");
  const auto out = toatrack::cmd_validate(layout_path);
  std::cout << toatrack::layout_kind_name(out.layout_kind) << " layout, "
            << out.sensor_count << " sensors, wave_speed " << out.wave_speed << "\n";
  if (out.report.ok()) {
    std::cout << "valid\n";
    return toatrack::kExitOk;
  }
  for (const auto& v : out.report.violations)
    std::cout << "violation: " << v.constraint << " residual=" << v.residual << " ("
              << v.detail << ")\n";
  return toatrack::kExitConfig;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Moving-source arrival-time simulation and TDOA reconstruction"};
  app.require_subcommand(1);

  CommonArgs sim_args, rec_args, sta_args;
  std::string toa_path, truth_path, levels_csv, layout_path;
  bool print_defaults = false;

  CLI::App* sim = app.add_subcommand(
      "simulate", "Synthesize a TOA matrix and ground-truth trajectory");
  add_common(sim, sim_args);

  CLI::App* rec = app.add_subcommand(
      "reconstruct", "Recover per-emission source positions and times from a TOA file");
  add_common(rec, rec_args);
  rec->add_option("--toa", toa_path, "TOA CSV file")->required();
  rec->add_option("--truth", truth_path, "Ground-truth trajectory CSV for error columns");

  CLI::App* sta = app.add_subcommand(
      "stability", "Noise-sweep experiment with log-log slope fit");
  add_common(sta, sta_args);
  sta->add_option("--levels", levels_csv, "Comma-separated noise levels (>= 3)");

  CLI::App* val = app.add_subcommand("validate", "Check a sensor layout file");
  val->add_option("layout", layout_path, "Layout or scenario file");
  val->add_flag("--print-defaults", print_defaults,
                "Print a fully annotated default scenario and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? toatrack::kExitOk : toatrack::kExitConfig;
  }

  try {
    if (sim->parsed()) return run_simulate(sim_args);
    if (rec->parsed()) return run_reconstruct(rec_args, toa_path, truth_path);
    if (sta->parsed()) return run_stability(sta_args, levels_csv);
    if (val->parsed()) return run_validate(layout_path, print_defaults);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return toatrack::exit_code_for(e);
  }
  return toatrack::kExitFailure;
}
