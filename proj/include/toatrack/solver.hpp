#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "toatrack/errors.hpp"
#include "toatrack/linsys.hpp"
#include "toatrack/model.hpp"
#include "toatrack/vec3.hpp"

namespace toatrack {

enum class Method { FivePoint, SevenPoint, Oracle };

inline const char* method_name(Method m) {
  switch (m) {
    case Method::FivePoint: return "five";
    case Method::SevenPoint: return "seven";
    case Method::Oracle: return "oracle";
  }
  return "?";
}

struct SourceEstimate {
  std::size_t j = 0;  // emission index (0-based)
  Vec3 position;
  double time = 0.0;
  std::optional<SolveDiagnostics> diagnostics;  // absent for the grid oracle
  Method method = Method::SevenPoint;
  bool causality_ok = true;  // time <= every arrival of this emission
};

struct EventFailure {
  std::size_t j = 0;
  std::string kind;  // "singular_system", "rank_deficient", "box_too_small"
  std::string message;
};

struct ReconstructionResult {
  std::vector<SourceEstimate> estimates;  // ascending j; successes only
  std::vector<EventFailure> failures;
  // Parallel to `estimates`; filled only when ground truth was supplied.
  std::vector<double> position_errors;
  std::vector<double> time_errors;

  double max_position_error() const {
    double m = 0.0;
    for (double e : position_errors) m = std::max(m, e);
    return m;
  }
  double max_time_error() const {
    double m = 0.0;
    for (double e : time_errors) m = std::max(m, e);
    return m;
  }
};

namespace detail {

inline bool causal(const ToaMatrix& toa, std::size_t j, double time) {
  for (std::size_t k = 0; k < toa.num_sensors; ++k)
    if (time > toa(j, k) + 1e-9) return false;
  return true;
}

inline std::vector<std::size_t> index_range(std::size_t first, std::size_t last) {
  std::vector<std::size_t> v;
  for (std::size_t k = first; k <= last; ++k) v.push_back(k);
  return v;
}

}  // namespace detail

// Direct solve from the first five sensors (rows 2..5 against the reference).
// Fails with SingularSystem when that subset is degenerate, e.g. coplanar.
inline SourceEstimate solve_event_five(const ToaMatrix& toa, std::size_t j,
                                       const SensorArray& sensors) {
  if (sensors.size() < 5 || toa.num_sensors < 5)
    throw ConfigError("five-point solve requires at least 5 sensors");
  const EventSystem sys = build_system(toa, j, sensors, detail::index_range(1, 4));
  const SolveResult r = solve_direct(sys);
  return {j, r.position, r.time, r.diagnostics, Method::FivePoint,
          detail::causal(toa, j, r.time)};
}

// Least-squares solve from all seven sensors of an axes layout.
inline SourceEstimate solve_event_seven(const ToaMatrix& toa, std::size_t j,
                                        const SensorArray& sensors) {
  if (sensors.size() != 7 || toa.num_sensors != 7)
    throw ConfigError("seven-point solve requires exactly 7 sensors");
  SensorArray as_axes = sensors;
  as_axes.layout_kind = LayoutKind::SevenPointAxes;
  const GeometryReport geometry = validate_sensor_geometry(as_axes);
  if (!geometry.ok())
    throw ConfigError("seven-point solve requires an axes layout; violated: " +
                      geometry.violations.front().constraint);
  const EventSystem sys = build_system(toa, j, sensors, detail::index_range(1, 6));
  const SolveResult r = solve_least_squares(sys);
  return {j, r.position, r.time, r.diagnostics, Method::SevenPoint,
          detail::causal(toa, j, r.time)};
}

// ---------------------------------------------------------------------------
// Geometric oracle
// ---------------------------------------------------------------------------

struct Box3 {
  Vec3 lo, hi;

  bool contains(const Vec3& p) const {
    return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y &&
           p.z >= lo.z && p.z <= hi.z;
  }
  Vec3 clamp(const Vec3& p) const {
    return {std::clamp(p.x, lo.x, hi.x), std::clamp(p.y, lo.y, hi.y),
            std::clamp(p.z, lo.z, hi.z)};
  }
  double diagonal() const { return (hi - lo).norm(); }
  double distance_to_boundary(const Vec3& p) const {
    const double dx = std::min(p.x - lo.x, hi.x - p.x);
    const double dy = std::min(p.y - lo.y, hi.y - p.y);
    const double dz = std::min(p.z - lo.z, hi.z - p.z);
    return std::min({dx, dy, dz});
  }
};

struct OracleParams {
  Box3 search_box;
  double coarse_step = 0.5;
  double refine_tol = 1e-6;
};

// Search region inferred from the data: the reference arrival bounds the
// range |p - x_1| <= c * T_j1 whenever the emission time is non-negative.
inline OracleParams default_oracle_params(const ToaMatrix& toa, std::size_t j,
                                          const SensorArray& sensors) {
  if (j >= toa.num_emissions) throw IndexOutOfRange("emission index out of range");
  const double radius = 1.1 * toa.wave_speed * toa(j, 0);
  const Vec3 center = sensors.positions.at(0);
  OracleParams p;
  p.search_box = {center - Vec3{radius, radius, radius},
                  center + Vec3{radius, radius, radius}};
  p.coarse_step = p.search_box.diagonal() / 64.0;
  p.refine_tol = 1e-6;
  return p;
}

namespace detail {

// Residuals differing by less than this count as the same minimum.
inline constexpr double kMirrorResidualTol = 1e-6;

struct RefinedPoint {
  Vec3 p;
  double value;
};

// Coordinate pattern search: move to the best axis neighbor while it
// improves, halve the step otherwise, stop below `tol`.
template <typename Objective>
RefinedPoint pattern_refine(Vec3 p, double step, double tol,
                            const Box3& box, Objective&& f) {
  double fp = f(p);
  int evals = 0;
  while (step >= tol && evals < 200000) {
    Vec3 best_p = p;
    double best_f = fp;
    for (int axis = 0; axis < 3; ++axis) {
      for (double sign : {-1.0, 1.0}) {
        Vec3 q = p;
        (axis == 0 ? q.x : axis == 1 ? q.y : q.z) += sign * step;
        q = box.clamp(q);
        const double fq = f(q);
        ++evals;
        if (fq < best_f) {
          best_f = fq;
          best_p = q;
        }
      }
    }
    if (best_f < fp) {
      p = best_p;
      fp = best_f;
    } else {
      step *= 0.5;
    }
  }
  return {p, fp};
}

}  // namespace detail

// Brute-force locator independent of the linear-system path: minimizes the
// range-difference residual
//
//   f(p) = sum_k ( |p - x_k| - |p - x_1| - c (T_k - T_1) )^2
//
// over the search box by coarse grid scan plus local refinement, then
// resolves a mirror-symmetric near-tie (axes layouts only) by which of the
// two symmetric sensors heard the pulse first. The emission time follows as
// t = T_1 - |p - x_1| / c.
inline SourceEstimate oracle_locate(const ToaMatrix& toa, std::size_t j,
                                    const SensorArray& sensors,
                                    const OracleParams& params) {
  if (j >= toa.num_emissions) throw IndexOutOfRange("emission index out of range");
  if (sensors.size() != toa.num_sensors)
    throw IndexOutOfRange("sensor array does not match TOA columns");
  if (!(params.coarse_step > 0.0) || !(params.refine_tol > 0.0))
    throw InvariantViolation("oracle steps must be positive");

  const Box3& box = params.search_box;
  const std::size_t K = toa.num_sensors;
  const double c = toa.wave_speed;
  const Vec3 x1 = sensors.positions[0];
  const double t1 = toa(j, 0);

  const auto objective = [&](const Vec3& p) {
    const double r1 = distance(p, x1);
    double f = 0.0;
    for (std::size_t k = 1; k < K; ++k) {
      const double r = distance(p, sensors.positions[k]) - r1 -
                       c * (toa(j, k) - t1);
      f += r * r;
    }
    return f;
  };

  // Coarse scan, keeping up to three well-separated starting cells so a
  // shallow secondary basin cannot trap the refinement.
  struct Cell {
    Vec3 p;
    double f;
  };
  std::vector<Cell> starts;
  starts.reserve(3);
  const double sep = 4.0 * params.coarse_step;
  const auto consider = [&](const Vec3& p, double f) {
    for (Cell& s : starts) {
      if (distance(s.p, p) < sep) {
        if (f < s.f) s = {p, f};
        return;
      }
    }
    if (starts.size() < 3) {
      starts.push_back({p, f});
      return;
    }
    auto worst = std::max_element(
        starts.begin(), starts.end(),
        [](const Cell& a, const Cell& b) { return a.f < b.f; });
    if (f < worst->f) *worst = {p, f};
  };
  for (double px = box.lo.x; px <= box.hi.x; px += params.coarse_step)
    for (double py = box.lo.y; py <= box.hi.y; py += params.coarse_step)
      for (double pz = box.lo.z; pz <= box.hi.z; pz += params.coarse_step)
        consider({px, py, pz}, objective(Vec3{px, py, pz}));

  std::sort(starts.begin(), starts.end(),
            [](const Cell& a, const Cell& b) { return a.f < b.f; });

  Vec3 best_p;
  double best_f = std::numeric_limits<double>::infinity();
  for (const Cell& s : starts) {
    const auto r =
        detail::pattern_refine(s.p, params.coarse_step, params.refine_tol, box, objective);
    if (r.value < best_f) {
      best_f = r.value;
      best_p = r.p;
    }
  }

  // Mirror disambiguation across the plane of the first two axes.
  SensorArray as_axes = sensors;
  as_axes.layout_kind = LayoutKind::SevenPointAxes;
  if (K == 7 && validate_sensor_geometry(as_axes).ok()) {
    const Vec3 x6 = sensors.positions[5];
    const Vec3 x7 = sensors.positions[6];
    Vec3 axis = x6 - x1;
    axis = axis / axis.norm();
    const Vec3 mirrored = best_p - axis * (2.0 * (best_p - x1).dot(axis));
    if (box.contains(mirrored)) {
      const auto m = detail::pattern_refine(mirrored, params.coarse_step,
                                            params.refine_tol, box, objective);
      const bool distinct = distance(m.p, best_p) > 10.0 * params.refine_tol;
      if (distinct && std::abs(m.value - best_f) < detail::kMirrorResidualTol) {
        const double t6 = toa(j, 5);
        const double t7 = toa(j, 6);
        if (t6 != t7) {
          const Vec3& preferred = t6 < t7 ? x6 : x7;
          if (distance(m.p, preferred) < distance(best_p, preferred)) {
            best_p = m.p;
            best_f = m.value;
          }
        }
      } else if (m.value < best_f) {
        best_p = m.p;
        best_f = m.value;
      }
    }
  }

  if (box.distance_to_boundary(best_p) <= params.refine_tol)
    throw BoxTooSmall("oracle minimizer lies on the search box boundary");

  const double time = t1 - distance(best_p, x1) / c;
  return {j, best_p, time, std::nullopt, Method::Oracle,
          detail::causal(toa, j, time)};
}

inline SourceEstimate oracle_locate(const ToaMatrix& toa, std::size_t j,
                                    const SensorArray& sensors) {
  return oracle_locate(toa, j, sensors, default_oracle_params(toa, j, sensors));
}

// ---------------------------------------------------------------------------
// Whole-trajectory sweep
// ---------------------------------------------------------------------------

// Applies the per-event solver independently for every emission. Numerical
// failures are collected per event; they never abort the sweep. Configuration
// problems (method/layout mismatch) throw before any event is attempted.
inline ReconstructionResult reconstruct_trajectory(const ToaMatrix& toa,
                                                   const SensorArray& sensors,
                                                   Method method,
                                                   const Trajectory* ground_truth = nullptr) {
  if (method == Method::FivePoint && sensors.size() < 5)
    throw ConfigError("five-point method requires at least 5 sensors");
  if (method == Method::SevenPoint) {
    if (sensors.size() != 7)
      throw ConfigError("seven-point method requires exactly 7 sensors");
    SensorArray as_axes = sensors;
    as_axes.layout_kind = LayoutKind::SevenPointAxes;
    const GeometryReport geometry = validate_sensor_geometry(as_axes);
    if (!geometry.ok())
      throw ConfigError("seven-point method requires an axes layout; violated: " +
                        geometry.violations.front().constraint);
  }
  if (ground_truth && ground_truth->size() != toa.num_emissions)
    throw ConfigError("ground truth length does not match TOA rows");

  ReconstructionResult result;
  for (std::size_t j = 0; j < toa.num_emissions; ++j) {
    try {
      SourceEstimate est;
      switch (method) {
        case Method::FivePoint: est = solve_event_five(toa, j, sensors); break;
        case Method::SevenPoint: est = solve_event_seven(toa, j, sensors); break;
        case Method::Oracle: est = oracle_locate(toa, j, sensors); break;
      }
      if (ground_truth) {
        const EmissionEvent& truth = ground_truth->events[j];
        result.position_errors.push_back(distance(est.position, truth.position));
        result.time_errors.push_back(std::abs(est.time - truth.t));
      }
      result.estimates.push_back(std::move(est));
    } catch (const SingularSystem& e) {
      result.failures.push_back({j, "singular_system", e.what()});
    } catch (const RankDeficient& e) {
      result.failures.push_back({j, "rank_deficient", e.what()});
    } catch (const BoxTooSmall& e) {
      result.failures.push_back({j, "box_too_small", e.what()});
    }
  }
  return result;
}

}  // namespace toatrack
