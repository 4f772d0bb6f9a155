#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "toatrack/errors.hpp"
#include "toatrack/vec3.hpp"

namespace toatrack {

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

enum class LayoutKind {
  FivePointGeneric,  // any K >= 5 placement, pairwise distinct
  SevenPointAxes,    // three mutually perpendicular lines through a center
  Custom,
};

// Fixed observation points. The order of `positions` defines the sensor
// index k; index 0 is the reference sensor used when differencing arrivals.
struct SensorArray {
  std::vector<Vec3> positions;
  LayoutKind layout_kind = LayoutKind::Custom;
  double validation_tolerance = 1e-9;  // relative

  std::size_t size() const { return positions.size(); }
};

// One pulse: when it was emitted and where the source was at that instant.
struct EmissionEvent {
  double t = 0.0;
  Vec3 position;
};

// The source sampled at its emission times only. The continuous path between
// emissions is unknown to every consumer here, so it is never represented.
struct Trajectory {
  std::vector<EmissionEvent> events;

  std::size_t size() const { return events.size(); }

  // Max |a(t_{j+1}) - a(t_j)| / (t_{j+1} - t_j) over consecutive events;
  // 0 for fewer than two events.
  double source_speed_bound() const {
    double worst = 0.0;
    for (std::size_t j = 0; j + 1 < events.size(); ++j) {
      const double dt = events[j + 1].t - events[j].t;
      if (dt <= 0.0) continue;
      const double v = distance(events[j + 1].position, events[j].position) / dt;
      if (v > worst) worst = v;
    }
    return worst;
  }
};

// J x K arrival times T[j][k]: the only measured data.
struct ToaMatrix {
  std::size_t num_emissions = 0;  // J
  std::size_t num_sensors = 0;    // K
  std::vector<double> values;     // row-major, values[j * K + k]
  double wave_speed = 1.0;

  static ToaMatrix zeros(std::size_t J, std::size_t K, double c) {
    ToaMatrix m;
    m.num_emissions = J;
    m.num_sensors = K;
    m.values.assign(J * K, 0.0);
    m.wave_speed = c;
    return m;
  }

  double operator()(std::size_t j, std::size_t k) const {
    return values[j * num_sensors + k];
  }
  double& operator()(std::size_t j, std::size_t k) {
    return values[j * num_sensors + k];
  }
};

// ---------------------------------------------------------------------------
// Sensor geometry validation
// ---------------------------------------------------------------------------

struct GeometryViolation {
  std::string constraint;  // stable identifier, e.g. "axis_symmetry"
  double residual = 0.0;   // measured size of the violation (relative)
  std::string detail;
};

struct GeometryReport {
  std::vector<GeometryViolation> violations;
  bool ok() const { return violations.empty(); }

  bool has(const std::string& constraint) const {
    for (const auto& v : violations)
      if (v.constraint == constraint) return true;
    return false;
  }
};

namespace detail {

inline double distinctness_scale(const Vec3& a, const Vec3& b) {
  return std::max(1.0, std::max(a.norm(), b.norm()));
}

// sin of the angle between (b - a) and (c - a); 0 when collinear.
inline double collinearity_residual(const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 u = b - a;
  const Vec3 v = c - a;
  const double denom = u.norm() * v.norm();
  if (denom == 0.0) return 0.0;  // degenerate; reported as distinctness instead
  return u.cross(v).norm() / denom;
}

// |cos| of the angle between two direction vectors; 0 when perpendicular.
inline double perpendicularity_residual(const Vec3& u, const Vec3& v) {
  const double denom = u.norm() * v.norm();
  if (denom == 0.0) return 0.0;
  return std::abs(u.dot(v)) / denom;
}

}  // namespace detail

// Report-style check of the invariants declared by `layout_kind`. An empty
// report means the layout is usable for the matching solver. Never throws;
// degenerate inputs surface as violations.
inline GeometryReport validate_sensor_geometry(const SensorArray& sensors) {
  GeometryReport report;
  const auto& x = sensors.positions;
  const double tol = sensors.validation_tolerance;
  const std::size_t K = x.size();

  const std::size_t required = sensors.layout_kind == LayoutKind::SevenPointAxes ? 7 : 5;
  if (K < required || (sensors.layout_kind == LayoutKind::SevenPointAxes && K != 7)) {
    report.violations.push_back(
        {"sensor_count", static_cast<double>(K),
         "layout requires " + std::to_string(required) + " sensors, got " +
             std::to_string(K)});
  }

  for (std::size_t a = 0; a < K; ++a) {
    for (std::size_t b = a + 1; b < K; ++b) {
      const double r = distance(x[a], x[b]) / detail::distinctness_scale(x[a], x[b]);
      if (r <= tol) {
        report.violations.push_back(
            {"distinct_positions", r,
             "sensors " + std::to_string(a + 1) + " and " + std::to_string(b + 1) +
                 " coincide"});
      }
    }
  }

  if (sensors.layout_kind == LayoutKind::SevenPointAxes && K == 7) {
    // Line i is directed by its first off-center sensor, so each constraint
    // below is broken by exactly one class of perturbation.
    struct Line {
      std::size_t first, second;
      const char* name;
    };
    const Line lines[3] = {{1, 2, "l1"}, {3, 4, "l2"}, {5, 6, "l3"}};

    for (const Line& ln : lines) {
      const double r = detail::collinearity_residual(x[0], x[ln.first], x[ln.second]);
      if (r > tol) {
        report.violations.push_back(
            {std::string("collinear_") + ln.name, r,
             "sensors " + std::to_string(ln.first + 1) + "," +
                 std::to_string(ln.second + 1) + " not on a line through sensor 1"});
      }
    }
    const Vec3 d1 = x[1] - x[0];
    const Vec3 d2 = x[3] - x[0];
    const Vec3 d3 = x[5] - x[0];
    const struct {
      const Vec3 *u, *v;
      const char* name;
    } pairs[3] = {{&d1, &d2, "l1_l2"}, {&d1, &d3, "l1_l3"}, {&d2, &d3, "l2_l3"}};
    for (const auto& p : pairs) {
      const double r = detail::perpendicularity_residual(*p.u, *p.v);
      if (r > tol) {
        report.violations.push_back({std::string("perpendicular_") + p.name, r,
                                     "axis directions are not perpendicular"});
      }
    }
    const double r6 = distance(x[0], x[5]);
    const double r7 = distance(x[0], x[6]);
    const double scale = std::max(r6, r7);
    if (scale > 0.0) {
      const double r = std::abs(r6 - r7) / scale;
      if (r > tol) {
        report.violations.push_back(
            {"axis_symmetry", r,
             "|x1-x6| and |x1-x7| differ: " + std::to_string(r6) + " vs " +
                 std::to_string(r7)});
      }
    }
  }
  return report;
}

// Seven sensors: the center plus a symmetric pair on each coordinate axis at
// distance `arm`. This is the canonical SevenPointAxes placement.
inline SensorArray make_axes_layout(double arm = 3.0) {
  SensorArray s;
  s.layout_kind = LayoutKind::SevenPointAxes;
  s.positions = {{0, 0, 0},    {arm, 0, 0}, {-arm, 0, 0}, {0, arm, 0},
                 {0, -arm, 0}, {0, 0, arm}, {0, 0, -arm}};
  return s;
}

// ---------------------------------------------------------------------------
// Forward problem
// ---------------------------------------------------------------------------

// Arrival times T[j][k] = t_j + |x_k - a(t_j)| / c.
inline ToaMatrix synthesize_toa(const Trajectory& trajectory, const SensorArray& sensors,
                                double c) {
  if (!(c > 0.0)) throw InvariantViolation("wave speed must be positive");
  const std::size_t J = trajectory.size();
  const std::size_t K = sensors.size();
  ToaMatrix toa = ToaMatrix::zeros(J, K, c);
  for (std::size_t j = 0; j < J; ++j) {
    const EmissionEvent& e = trajectory.events[j];
    for (std::size_t k = 0; k < K; ++k) {
      const double d = distance(sensors.positions[k], e.position);
      if (d < 1e-12) {
        throw SourceOnSensor("emission " + std::to_string(j + 1) +
                             " coincides with sensor " + std::to_string(k + 1));
      }
      toa(j, k) = e.t + d / c;
    }
  }
  return toa;
}

struct ArrivalOrderingReport {
  std::vector<bool> column_ordered;  // one flag per sensor column
  bool all_ordered = true;
};

// Strict monotonicity of each arrival column in the emission index. Holds for
// data from any subsonic source; a single emission is vacuously ordered.
inline ArrivalOrderingReport check_arrival_ordering(const ToaMatrix& toa) {
  ArrivalOrderingReport report;
  report.column_ordered.assign(toa.num_sensors, true);
  for (std::size_t k = 0; k < toa.num_sensors; ++k) {
    for (std::size_t j = 0; j + 1 < toa.num_emissions; ++j) {
      if (!(toa(j + 1, k) > toa(j, k))) {
        report.column_ordered[k] = false;
        report.all_ordered = false;
        break;
      }
    }
  }
  return report;
}

struct SubsonicReport {
  double max_speed = 0.0;  // max finite-difference speed between events
  bool is_subsonic = false;
};

// Advisory check of the speed assumption. The per-event inversion never uses
// it; only the arrival-ordering guarantee depends on it.
inline SubsonicReport subsonic_check(const Trajectory& trajectory, double c) {
  SubsonicReport r;
  r.max_speed = trajectory.source_speed_bound();
  r.is_subsonic = r.max_speed < c;
  return r;
}

// ---------------------------------------------------------------------------
// Built-in trajectories
// ---------------------------------------------------------------------------

inline Vec3 spiral_position(double t) {
  return {t + 5.0, std::sin(t) + 5.0, std::cos(t) + 5.0};
}

// Piecewise linear path with branch switches at t = 3 and t = 6; the first
// branch owns t = 3 (closed), the later branches are half-open below.
inline Vec3 folded_position(double t) {
  if (t <= 3.0) return {1.0 + t, 4.0 + t, 7.0 + t};
  if (t <= 6.0) return {-2.0 + t, 7.0 - t, -2.0 + t};
  return {-5.0 + t, 10.0 + t, -5.0 + t};
}

namespace detail {

template <typename PositionFn>
Trajectory sample_trajectory(double t_start, double t_end, double step, PositionFn&& pos) {
  if (!(step > 0.0)) throw InvariantViolation("step must be positive");
  if (!(t_end > t_start)) throw InvariantViolation("t_end must exceed t_start");
  if (t_start < 0.0) throw InvariantViolation("emission times must be non-negative");
  if ((t_end - t_start) / step > 1e7)
    throw InvariantViolation("step is too small for the sampling interval");
  // inclusive end point, guarded against one-ulp shortfalls
  const auto count =
      static_cast<std::size_t>(std::floor((t_end - t_start) / step + 1e-9)) + 1;
  Trajectory traj;
  traj.events.reserve(count);
  for (std::size_t j = 0; j < count; ++j) {
    const double t = t_start + static_cast<double>(j) * step;
    traj.events.push_back({t, pos(t)});
  }
  return traj;
}

}  // namespace detail

inline Trajectory make_spiral_trajectory(double t_start, double t_end, double step) {
  return detail::sample_trajectory(t_start, t_end, step, spiral_position);
}

inline Trajectory make_folded_trajectory(double step) {
  return detail::sample_trajectory(0.0, 9.0, step, folded_position);
}

// 86 emissions at t_j = (j - 1) * pi / 20.
inline Trajectory default_spiral_trajectory() {
  const double step = M_PI / 20.0;
  return make_spiral_trajectory(0.0, 85.0 * step, step);
}

// 46 emissions at t_j = (j - 1) * 0.2 over [0, 9].
inline Trajectory default_folded_trajectory() { return make_folded_trajectory(0.2); }

}  // namespace toatrack
