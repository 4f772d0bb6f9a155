#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "toatrack/errors.hpp"
#include "toatrack/io.hpp"
#include "toatrack/model.hpp"
#include "toatrack/solver.hpp"
#include "toatrack/stability.hpp"

namespace toatrack {

enum class TrajectorySource { BuiltinSpiral, BuiltinFolded, FromFile };

// One experiment configuration, loadable from a key-value file. Sensor keys
// match the standalone layout file, so a scenario file is also a valid
// argument wherever a layout is expected.
struct Scenario {
  SensorArray sensors = make_axes_layout();
  bool sensors_from_file = false;  // false: the default layout above
  double wave_speed = 1.0;
  TrajectorySource trajectory_source = TrajectorySource::BuiltinSpiral;
  std::string trajectory_path;  // used when trajectory_source == FromFile
  std::optional<double> noise_level;
  NoiseModel noise_model = NoiseModel::RelativeUniform;
  std::uint64_t seed = 0;
  Method method = Method::SevenPoint;
  std::string output_prefix = "out";

  std::optional<NoiseSpec> noise() const {
    if (!noise_level) return std::nullopt;
    return NoiseSpec{*noise_level, noise_model, seed};
  }
};

inline Method parse_method(const std::string& s, std::size_t line = 0) {
  if (s == "five") return Method::FivePoint;
  if (s == "seven") return Method::SevenPoint;
  if (s == "oracle") return Method::Oracle;
  throw ParseError("line " + std::to_string(line) + ": unknown method '" + s +
                   "' (expected five|seven|oracle)");
}

inline NoiseModel parse_noise_model(const std::string& s, std::size_t line = 0) {
  if (s == "relative_uniform") return NoiseModel::RelativeUniform;
  if (s == "relative_gaussian") return NoiseModel::RelativeGaussian;
  if (s == "absolute_uniform") return NoiseModel::AbsoluteUniform;
  throw ParseError("line " + std::to_string(line) + ": unknown noise_model '" + s + "'");
}

inline Scenario parse_scenario(std::istream& in) {
  Scenario s;
  bool saw_sensor = false;
  for (const KeyValueEntry& e : parse_key_value(in)) {
    if (e.key == "wave_speed") {
      s.wave_speed = parse_double(e.value, e.line);
    } else if (e.key == "layout_kind") {
      s.sensors.layout_kind = parse_layout_kind(e.value, e.line);
    } else if (e.key == "tolerance") {
      s.sensors.validation_tolerance = parse_double(e.value, e.line);
    } else if (e.key == "sensor") {
      if (!saw_sensor) {
        s.sensors.positions.clear();  // replace the default layout
        saw_sensor = true;
        s.sensors_from_file = true;
      }
      s.sensors.positions.push_back(parse_vec3(e.value, e.line));
    } else if (e.key == "trajectory") {
      if (e.value == "builtin_spiral") {
        s.trajectory_source = TrajectorySource::BuiltinSpiral;
      } else if (e.value == "builtin_folded") {
        s.trajectory_source = TrajectorySource::BuiltinFolded;
      } else {
        s.trajectory_source = TrajectorySource::FromFile;
        s.trajectory_path = e.value;
      }
    } else if (e.key == "method") {
      s.method = parse_method(e.value, e.line);
    } else if (e.key == "noise_level") {
      s.noise_level = parse_double(e.value, e.line);
    } else if (e.key == "noise_model") {
      s.noise_model = parse_noise_model(e.value, e.line);
    } else if (e.key == "seed") {
      std::uint64_t v = 0;
      const auto res = std::from_chars(e.value.data(), e.value.data() + e.value.size(), v);
      if (res.ec != std::errc{} || res.ptr != e.value.data() + e.value.size())
        throw ParseError("line " + std::to_string(e.line) + ": bad seed '" + e.value +
                         "'");
      s.seed = v;
    } else if (e.key == "out") {
      s.output_prefix = e.value;
    } else {
      throw ParseError("line " + std::to_string(e.line) + ": unknown key '" + e.key +
                       "'");
    }
  }
  return s;
}

inline Scenario load_scenario(const std::string& path) {
  auto in = detail::open_input(path);
  return parse_scenario(in);
}

// Rejects configurations the solvers would refuse anyway, with one message.
inline void validate_scenario(const Scenario& s) {
  if (!(s.wave_speed > 0.0)) throw ConfigError("wave_speed must be positive");
  if (s.noise_level && *s.noise_level < 0.0)
    throw ConfigError("noise_level must be >= 0");
  const std::size_t K = s.sensors.size();
  if (K < 5) throw ConfigError("at least 5 sensors are required");
  if (s.method == Method::SevenPoint) {
    if (K != 7) throw ConfigError("method seven requires exactly 7 sensors, got " +
                                  std::to_string(K));
    SensorArray as_axes = s.sensors;
    as_axes.layout_kind = LayoutKind::SevenPointAxes;
    const GeometryReport report = validate_sensor_geometry(as_axes);
    if (!report.ok())
      throw ConfigError("method seven requires an axes layout; violated: " +
                        report.violations.front().constraint);
  }
}

inline Trajectory make_scenario_trajectory(const Scenario& s) {
  switch (s.trajectory_source) {
    case TrajectorySource::BuiltinSpiral: return default_spiral_trajectory();
    case TrajectorySource::BuiltinFolded: return default_folded_trajectory();
    case TrajectorySource::FromFile: return load_trajectory(s.trajectory_path);
  }
  throw ConfigError("invalid trajectory source");
}

namespace detail {

inline void ensure_parent_dir(const std::string& path) {
  const std::filesystem::path parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(parent, ec);
    if (ec) throw IoError("cannot create directory '" + parent.string() + "'");
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Commands (thin wrappers the CLI binary maps onto subcommands)
// ---------------------------------------------------------------------------

struct SimulateOutput {
  std::string toa_path;
  std::string truth_path;
  std::size_t emissions = 0;
  std::size_t sensors = 0;
  SubsonicReport subsonic;
};

// Synthesizes arrivals for the scenario trajectory and writes the TOA matrix
// (perturbed when noise is configured) next to the ground-truth trajectory.
inline SimulateOutput cmd_simulate(const Scenario& scenario) {
  validate_scenario(scenario);
  const Trajectory trajectory = make_scenario_trajectory(scenario);
  ToaMatrix toa = synthesize_toa(trajectory, scenario.sensors, scenario.wave_speed);
  if (const auto noise = scenario.noise(); noise && noise->level > 0.0)
    toa = perturb_toa(toa, *noise);

  SimulateOutput out;
  out.toa_path = scenario.output_prefix + "_toa.csv";
  out.truth_path = scenario.output_prefix + "_truth.csv";
  out.emissions = toa.num_emissions;
  out.sensors = toa.num_sensors;
  out.subsonic = subsonic_check(trajectory, scenario.wave_speed);
  detail::ensure_parent_dir(out.toa_path);
  save_toa_csv(toa, out.toa_path);
  save_trajectory_csv(trajectory, out.truth_path);
  return out;
}

struct ReconstructOutput {
  std::string recon_path;
  ReconstructionResult result;
};

inline ReconstructOutput cmd_reconstruct(const Scenario& scenario,
                                         const std::string& toa_path,
                                         const std::string& truth_path = {}) {
  validate_scenario(scenario);
  const ToaMatrix toa = load_toa(toa_path, scenario.wave_speed);
  std::optional<Trajectory> truth;
  if (!truth_path.empty()) truth = load_trajectory(truth_path);

  ReconstructOutput out;
  out.result = reconstruct_trajectory(toa, scenario.sensors, scenario.method,
                                      truth ? &*truth : nullptr);
  out.recon_path = scenario.output_prefix + "_recon.csv";
  detail::ensure_parent_dir(out.recon_path);
  save_reconstruction_csv(out.result, out.recon_path);
  return out;
}

struct StabilityOutput {
  std::string csv_path;
  std::string json_path;
  StabilityReport report;
};

inline const std::vector<double>& default_stability_levels() {
  static const std::vector<double> levels = {1e-7, 1e-6, 1e-5, 1e-4, 1e-3};
  return levels;
}

inline StabilityOutput cmd_stability(const Scenario& scenario,
                                     std::vector<double> levels = {}) {
  validate_scenario(scenario);
  if (levels.empty()) levels = default_stability_levels();
  const Trajectory trajectory = make_scenario_trajectory(scenario);
  NoiseSpec spec_template;
  spec_template.model = scenario.noise_model;
  spec_template.seed = scenario.seed;

  StabilityOutput out;
  out.report = stability_experiment(trajectory, scenario.sensors, scenario.wave_speed,
                                    levels, spec_template, scenario.method);
  out.csv_path = scenario.output_prefix + "_stability.csv";
  out.json_path = scenario.output_prefix + "_stability.json";
  detail::ensure_parent_dir(out.csv_path);
  save_stability_csv(out.report, out.csv_path);
  save_stability_json(out.report, out.json_path);
  return out;
}

struct ValidateOutput {
  GeometryReport report;
  double wave_speed = 1.0;
  std::size_t sensor_count = 0;
  LayoutKind layout_kind = LayoutKind::Custom;
};

// Accepts either a standalone layout file or a full scenario file (the layout
// keys are a subset of the scenario keys).
inline ValidateOutput cmd_validate(const std::string& layout_path) {
  const Scenario s = load_scenario(layout_path);
  if (!s.sensors_from_file)
    throw ParseError("'" + layout_path + "' defines no sensors");
  if (!(s.wave_speed > 0.0)) throw InvariantViolation("wave_speed must be positive");
  ValidateOutput out;
  out.report = validate_sensor_geometry(s.sensors);
  out.wave_speed = s.wave_speed;
  out.sensor_count = s.sensors.size();
  out.layout_kind = s.sensors.layout_kind;
  return out;
}

// Complete annotated scenario with every default value spelled out.
inline void print_default_scenario(std::ostream& out) {
  const Scenario d;
  out << "# toatrack scenario file: `key = value` lines, '#' starts a comment.\n"
      << "# Every key below shows its default.\n"
      << "\n"
      << "# Propagation speed of the medium (dimensionless units).\n"
      << "wave_speed = " << format_double(d.wave_speed) << "\n"
      << "\n"
      << "# Declared layout family: five_point_generic | seven_point_axes | custom.\n"
      << "layout_kind = " << layout_kind_name(d.sensors.layout_kind) << "\n"
      << "\n"
      << "# Relative tolerance for geometry validation.\n"
      << "tolerance = " << format_double(d.sensors.validation_tolerance) << "\n"
      << "\n"
      << "# Observation points, one per line, in index order (k = 1, 2, ...).\n";
  for (const Vec3& p : d.sensors.positions)
    out << "sensor = " << format_double(p.x) << ' ' << format_double(p.y) << ' '
        << format_double(p.z) << "\n";
  out << "\n"
      << "# Source: builtin_spiral | builtin_folded | <path to trajectory CSV>.\n"
      << "trajectory = builtin_spiral\n"
      << "\n"
      << "# Reconstruction method: five | seven | oracle.\n"
      << "method = " << method_name(d.method) << "\n"
      << "\n"
      << "# Measurement noise; omit noise_level for clean data.\n"
      << "# noise_level = 0.01\n"
      << "# noise_model: relative_uniform | relative_gaussian | absolute_uniform.\n"
      << "noise_model = " << noise_model_name(d.noise_model) << "\n"
      << "seed = " << d.seed << "\n"
      << "\n"
      << "# Prefix for all output files.\n"
      << "out = " << d.output_prefix << "\n";
}

// Exit classes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,     // unexpected
  kExitConfig = 2,      // invalid configuration or geometry
  kExitParse = 3,       // unreadable or malformed input
  kExitNumerical = 4,   // solver failure
};

inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return kExitConfig;
  if (dynamic_cast<const ParseError*>(&e)) return kExitParse;
  if (dynamic_cast<const IoError*>(&e)) return kExitParse;
  if (dynamic_cast<const InvariantViolation*>(&e)) return kExitParse;
  if (dynamic_cast<const Error*>(&e)) return kExitNumerical;
  return kExitFailure;
}

}  // namespace toatrack
