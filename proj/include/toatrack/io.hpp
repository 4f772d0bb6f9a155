#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "toatrack/errors.hpp"
#include "toatrack/linsys.hpp"
#include "toatrack/model.hpp"
#include "toatrack/solver.hpp"
#include "toatrack/stability.hpp"

namespace toatrack {

// ---------------------------------------------------------------------------
// Number formatting: shortest representation that round-trips exactly, so
// write -> read -> write is byte-identical.
// ---------------------------------------------------------------------------

inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, std::size_t line) {
  // skip surrounding spaces; from_chars is strict
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw ParseError("line " + std::to_string(line) + ": bad number '" +
                     std::string(s) + "'");
  return v;
}

namespace detail {

inline std::string trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return std::string(s);
}

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string::npos) {
      fields.push_back(trim(std::string_view(line).substr(start)));
      break;
    }
    fields.push_back(trim(std::string_view(line).substr(start, pos - start)));
    start = pos + 1;
  }
  return fields;
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return in;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  return out;
}

// Non-empty, comment-stripped lines with their 1-based line numbers.
struct Line {
  std::string text;
  std::size_t number;
};

inline std::vector<Line> read_lines(std::istream& in, bool strip_hash_comments) {
  std::vector<Line> lines;
  std::string raw;
  std::size_t number = 0;
  while (std::getline(in, raw)) {
    ++number;
    if (strip_hash_comments) {
      const std::size_t hash = raw.find('#');
      if (hash != std::string::npos) raw.erase(hash);
    }
    const std::string text = trim(raw);
    if (!text.empty()) lines.push_back({text, number});
  }
  return lines;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Trajectory CSV: header `t,x,y,z`, one row per event
// ---------------------------------------------------------------------------

inline void save_trajectory_csv(const Trajectory& traj, std::ostream& out) {
  out << "t,x,y,z\n";
  for (const EmissionEvent& e : traj.events)
    out << format_double(e.t) << ',' << format_double(e.position.x) << ','
        << format_double(e.position.y) << ',' << format_double(e.position.z) << '\n';
}

inline void save_trajectory_csv(const Trajectory& traj, const std::string& path) {
  auto out = detail::open_output(path);
  save_trajectory_csv(traj, out);
}

inline Trajectory load_trajectory(std::istream& in) {
  const auto lines = detail::read_lines(in, false);
  if (lines.empty()) throw ParseError("empty trajectory file");
  if (lines.front().text != "t,x,y,z")
    throw ParseError("line " + std::to_string(lines.front().number) +
                     ": expected header 't,x,y,z'");
  Trajectory traj;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto fields = detail::split(lines[i].text, ',');
    if (fields.size() != 4)
      throw ParseError("line " + std::to_string(lines[i].number) +
                       ": expected 4 fields, got " + std::to_string(fields.size()));
    EmissionEvent e;
    e.t = parse_double(fields[0], lines[i].number);
    e.position = {parse_double(fields[1], lines[i].number),
                  parse_double(fields[2], lines[i].number),
                  parse_double(fields[3], lines[i].number)};
    if (!std::isfinite(e.t) || !e.position.finite())
      throw InvariantViolation("trajectory entries must be finite");
    if (e.t < 0.0) throw InvariantViolation("emission times must be non-negative");
    traj.events.push_back(e);
  }
  for (std::size_t j = 0; j + 1 < traj.events.size(); ++j)
    if (!(traj.events[j + 1].t > traj.events[j].t))
      throw InvariantViolation("emission times strictly increasing");
  return traj;
}

inline Trajectory load_trajectory(const std::string& path) {
  auto in = detail::open_input(path);
  return load_trajectory(in);
}

// ---------------------------------------------------------------------------
// TOA CSV. Written dense with header `T_1,...,T_K`; the sparse triplet form
// with header `j,k,T` (1-based indices) is accepted on input.
// ---------------------------------------------------------------------------

inline void save_toa_csv(const ToaMatrix& toa, std::ostream& out) {
  for (std::size_t k = 0; k < toa.num_sensors; ++k)
    out << (k ? "," : "") << "T_" << (k + 1);
  out << '\n';
  for (std::size_t j = 0; j < toa.num_emissions; ++j) {
    for (std::size_t k = 0; k < toa.num_sensors; ++k)
      out << (k ? "," : "") << format_double(toa(j, k));
    out << '\n';
  }
}

inline void save_toa_csv(const ToaMatrix& toa, const std::string& path) {
  auto out = detail::open_output(path);
  save_toa_csv(toa, out);
}

namespace detail {

inline void check_toa_invariants(const ToaMatrix& toa) {
  for (double v : toa.values)
    if (!std::isfinite(v) || !(v > 0.0))
      throw InvariantViolation("arrival times must be finite and positive");
}

inline ToaMatrix load_toa_dense(const std::vector<Line>& lines, double wave_speed) {
  const std::size_t K = split(lines.front().text, ',').size();
  ToaMatrix toa = ToaMatrix::zeros(lines.size() - 1, K, wave_speed);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto fields = split(lines[i].text, ',');
    if (fields.size() != K)
      throw ParseError("line " + std::to_string(lines[i].number) + ": expected " +
                       std::to_string(K) + " fields, got " +
                       std::to_string(fields.size()));
    for (std::size_t k = 0; k < K; ++k)
      toa(i - 1, k) = parse_double(fields[k], lines[i].number);
  }
  return toa;
}

inline ToaMatrix load_toa_triplet(const std::vector<Line>& lines, double wave_speed) {
  struct Entry {
    std::size_t j, k;
    double value;
  };
  std::vector<Entry> entries;
  std::size_t J = 0, K = 0;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto fields = split(lines[i].text, ',');
    if (fields.size() != 3)
      throw ParseError("line " + std::to_string(lines[i].number) +
                       ": expected 3 fields, got " + std::to_string(fields.size()));
    const double jd = parse_double(fields[0], lines[i].number);
    const double kd = parse_double(fields[1], lines[i].number);
    if (jd < 1 || kd < 1 || jd != std::floor(jd) || kd != std::floor(kd))
      throw ParseError("line " + std::to_string(lines[i].number) +
                       ": indices must be positive integers");
    Entry e{static_cast<std::size_t>(jd), static_cast<std::size_t>(kd),
            parse_double(fields[2], lines[i].number)};
    J = std::max(J, e.j);
    K = std::max(K, e.k);
    entries.push_back(e);
  }
  if (entries.empty()) throw ParseError("TOA triplet file has no data rows");
  ToaMatrix toa = ToaMatrix::zeros(J, K, wave_speed);
  std::vector<bool> seen(J * K, false);
  for (const Entry& e : entries) {
    toa(e.j - 1, e.k - 1) = e.value;
    seen[(e.j - 1) * K + (e.k - 1)] = true;
  }
  for (std::size_t i = 0; i < seen.size(); ++i)
    if (!seen[i])
      throw ParseError("TOA entry (" + std::to_string(i / K + 1) + "," +
                       std::to_string(i % K + 1) + ") missing");
  return toa;
}

}  // namespace detail

inline ToaMatrix load_toa(std::istream& in, double wave_speed = 1.0) {
  const auto lines = detail::read_lines(in, false);
  if (lines.empty()) throw ParseError("empty TOA file");
  const auto header = detail::split(lines.front().text, ',');
  ToaMatrix toa;
  if (header.size() == 3 && header[0] == "j" && header[1] == "k" && header[2] == "T") {
    toa = detail::load_toa_triplet(lines, wave_speed);
  } else if (!header.empty() && header[0] == "T_1") {
    toa = detail::load_toa_dense(lines, wave_speed);
  } else {
    throw ParseError("line " + std::to_string(lines.front().number) +
                     ": expected TOA header 'j,k,T' or 'T_1,...,T_K'");
  }
  detail::check_toa_invariants(toa);
  return toa;
}

inline ToaMatrix load_toa(const std::string& path, double wave_speed = 1.0) {
  auto in = detail::open_input(path);
  return load_toa(in, wave_speed);
}

// ---------------------------------------------------------------------------
// Sensor layout: key-value text, `sensor = x y z` lines in index order
// ---------------------------------------------------------------------------

struct SensorLayoutFile {
  SensorArray sensors;
  double wave_speed = 1.0;
};

inline std::string layout_kind_name(LayoutKind kind) {
  switch (kind) {
    case LayoutKind::FivePointGeneric: return "five_point_generic";
    case LayoutKind::SevenPointAxes: return "seven_point_axes";
    case LayoutKind::Custom: return "custom";
  }
  return "?";
}

inline LayoutKind parse_layout_kind(const std::string& s, std::size_t line) {
  if (s == "five_point_generic") return LayoutKind::FivePointGeneric;
  if (s == "seven_point_axes") return LayoutKind::SevenPointAxes;
  if (s == "custom") return LayoutKind::Custom;
  throw ParseError("line " + std::to_string(line) + ": unknown layout_kind '" + s + "'");
}

struct KeyValueEntry {
  std::string key;
  std::string value;
  std::size_t line;
};

// `key = value` lines; '#' starts a comment; blank lines ignored.
inline std::vector<KeyValueEntry> parse_key_value(std::istream& in) {
  std::vector<KeyValueEntry> entries;
  for (const auto& line : detail::read_lines(in, true)) {
    const std::size_t eq = line.text.find('=');
    if (eq == std::string::npos)
      throw ParseError("line " + std::to_string(line.number) +
                       ": expected 'key = value'");
    KeyValueEntry e;
    e.key = detail::trim(std::string_view(line.text).substr(0, eq));
    e.value = detail::trim(std::string_view(line.text).substr(eq + 1));
    e.line = line.number;
    if (e.key.empty())
      throw ParseError("line " + std::to_string(line.number) + ": empty key");
    entries.push_back(e);
  }
  return entries;
}

inline Vec3 parse_vec3(const std::string& s, std::size_t line) {
  std::istringstream iss(s);
  std::string a, b, c, rest;
  if (!(iss >> a >> b >> c) || (iss >> rest))
    throw ParseError("line " + std::to_string(line) + ": expected three coordinates");
  return {parse_double(a, line), parse_double(b, line), parse_double(c, line)};
}

inline SensorLayoutFile load_sensor_layout(std::istream& in) {
  SensorLayoutFile file;
  bool have_kind = false;
  for (const KeyValueEntry& e : parse_key_value(in)) {
    if (e.key == "wave_speed") {
      file.wave_speed = parse_double(e.value, e.line);
    } else if (e.key == "layout_kind") {
      file.sensors.layout_kind = parse_layout_kind(e.value, e.line);
      have_kind = true;
    } else if (e.key == "tolerance") {
      file.sensors.validation_tolerance = parse_double(e.value, e.line);
    } else if (e.key == "sensor") {
      file.sensors.positions.push_back(parse_vec3(e.value, e.line));
    } else {
      throw ParseError("line " + std::to_string(e.line) + ": unknown key '" + e.key +
                       "'");
    }
  }
  if (!(file.wave_speed > 0.0))
    throw InvariantViolation("wave_speed must be positive");
  if (file.sensors.positions.empty())
    throw ParseError("layout file defines no sensors");
  if (!have_kind) file.sensors.layout_kind = LayoutKind::Custom;
  for (const Vec3& p : file.sensors.positions)
    if (!p.finite()) throw InvariantViolation("sensor coordinates must be finite");
  return file;
}

inline SensorLayoutFile load_sensor_layout(const std::string& path) {
  auto in = detail::open_input(path);
  return load_sensor_layout(in);
}

inline void save_sensor_layout(const SensorLayoutFile& file, std::ostream& out) {
  out << "wave_speed = " << format_double(file.wave_speed) << '\n';
  out << "layout_kind = " << layout_kind_name(file.sensors.layout_kind) << '\n';
  out << "tolerance = " << format_double(file.sensors.validation_tolerance) << '\n';
  for (const Vec3& p : file.sensors.positions)
    out << "sensor = " << format_double(p.x) << ' ' << format_double(p.y) << ' '
        << format_double(p.z) << '\n';
}

// ---------------------------------------------------------------------------
// Result exports
// ---------------------------------------------------------------------------

inline void save_reconstruction_csv(const ReconstructionResult& result,
                                    std::ostream& out) {
  const bool with_errors = !result.position_errors.empty();
  out << "j,t_est,x_est,y_est,z_est,residual,cond";
  if (with_errors) out << ",err_pos,err_time";
  out << '\n';
  for (std::size_t i = 0; i < result.estimates.size(); ++i) {
    const SourceEstimate& e = result.estimates[i];
    const double residual =
        e.diagnostics ? e.diagnostics->residual_norm : std::nan("");
    const double cond = e.diagnostics ? e.diagnostics->condition : std::nan("");
    out << (e.j + 1) << ',' << format_double(e.time) << ','
        << format_double(e.position.x) << ',' << format_double(e.position.y) << ','
        << format_double(e.position.z) << ',' << format_double(residual) << ','
        << format_double(cond);
    if (with_errors)
      out << ',' << format_double(result.position_errors[i]) << ','
          << format_double(result.time_errors[i]);
    out << '\n';
  }
}

inline void save_reconstruction_csv(const ReconstructionResult& result,
                                    const std::string& path) {
  auto out = detail::open_output(path);
  save_reconstruction_csv(result, out);
}

inline void save_stability_csv(const StabilityReport& report, std::ostream& out) {
  out << "delta,j,perturb_norm,err_norm,bound,valid\n";
  for (const StabilityPoint& p : report.points) {
    out << format_double(p.delta) << ',' << (p.j + 1) << ','
        << format_double(p.perturb_norm) << ',' << format_double(p.error_norm) << ','
        << format_double(p.bound ? *p.bound : std::nan("")) << ','
        << (p.bound ? 1 : 0) << '\n';
  }
  out << "# slope=" << format_double(report.fitted_slope)
      << " intercept=" << format_double(report.fitted_intercept)
      << " fit_points=" << report.fit_point_count
      << " failures=" << report.failures.size() << '\n';
}

inline void save_stability_csv(const StabilityReport& report, const std::string& path) {
  auto out = detail::open_output(path);
  save_stability_csv(report, out);
}

inline nlohmann::json stability_to_json(const StabilityReport& report) {
  nlohmann::json j;
  j["fitted_slope"] = report.fitted_slope;
  j["fitted_intercept"] = report.fitted_intercept;
  j["fit_point_count"] = report.fit_point_count;
  j["points"] = nlohmann::json::array();
  for (const StabilityPoint& p : report.points) {
    nlohmann::json pj;
    pj["delta"] = p.delta;
    pj["j"] = p.j + 1;
    pj["perturb_norm"] = p.perturb_norm;
    pj["err_norm"] = p.error_norm;
    pj["bound"] = p.bound ? nlohmann::json(*p.bound) : nlohmann::json(nullptr);
    pj["valid"] = static_cast<bool>(p.bound);
    j["points"].push_back(pj);
  }
  j["failures"] = nlohmann::json::array();
  for (const StabilityFailure& f : report.failures)
    j["failures"].push_back({{"delta", f.delta}, {"j", f.j + 1}, {"kind", f.kind}});
  return j;
}

inline void save_stability_json(const StabilityReport& report, const std::string& path) {
  auto out = detail::open_output(path);
  out << stability_to_json(report).dump(2) << '\n';
}

// Debug dump of one assembled system: A augmented with b, one row per line.
inline std::string event_system_csv(const EventSystem& sys) {
  std::ostringstream out;
  for (Eigen::Index r = 0; r < sys.A.rows(); ++r) {
    for (Eigen::Index c = 0; c < 4; ++c) out << format_double(sys.A(r, c)) << ',';
    out << format_double(sys.b(r)) << '\n';
  }
  return out.str();
}

}  // namespace toatrack
