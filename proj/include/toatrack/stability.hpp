#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "toatrack/errors.hpp"
#include "toatrack/linsys.hpp"
#include "toatrack/model.hpp"
#include "toatrack/rng.hpp"
#include "toatrack/solver.hpp"

namespace toatrack {

enum class NoiseModel { RelativeUniform, RelativeGaussian, AbsoluteUniform };

inline const char* noise_model_name(NoiseModel m) {
  switch (m) {
    case NoiseModel::RelativeUniform: return "relative_uniform";
    case NoiseModel::RelativeGaussian: return "relative_gaussian";
    case NoiseModel::AbsoluteUniform: return "absolute_uniform";
  }
  return "?";
}

// The seed fully determines the perturbation; one draw per matrix entry in
// row-major order.
struct NoiseSpec {
  double level = 0.0;  // delta, relative (absolute for AbsoluteUniform)
  NoiseModel model = NoiseModel::RelativeUniform;
  std::uint64_t seed = 0;
};

inline ToaMatrix perturb_toa(const ToaMatrix& toa, const NoiseSpec& spec) {
  if (!(spec.level >= 0.0)) throw InvariantViolation("noise level must be >= 0");
  ToaMatrix out = toa;
  Rng rng(spec.seed);
  for (double& v : out.values) {
    switch (spec.model) {
      case NoiseModel::RelativeUniform: v *= 1.0 + spec.level * rng.uniform_pm1(); break;
      case NoiseModel::RelativeGaussian: v *= 1.0 + spec.level * rng.gaussian(); break;
      case NoiseModel::AbsoluteUniform: v += spec.level * rng.uniform_pm1(); break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Worst-case perturbation bounds
// ---------------------------------------------------------------------------

// Measured perturbation norms substitute directly for the bound parameters:
// delta_a for the matrix perturbation budget, delta_b for the data one. The
// bound expressions depend only on these products, so no separate uniform
// constant needs to be chosen.
struct BoundInputs {
  double norm_a = 0.0;    // ||A||
  double inv_norm = 0.0;  // ||A^-1|| (square) or ||(A^T A)^-1|| (rectangular)
  double norm_b = 0.0;    // ||b||
  double delta_a = 0.0;   // ||A~ - A||
  double delta_b = 0.0;   // ||b~ - b||
};

inline BoundInputs make_bound_inputs(const SpectralNorms& n, double delta_a,
                                     double delta_b) {
  return {n.norm_a, n.inv_norm, n.norm_b, delta_a, delta_b};
}

// Error bound for the square direct solve:
//
//   ||dX|| <= (||db|| + ||A^-1|| ||b|| ||dA||) / (||A^-1||^-1 - ||dA||)
//
// Empty when the denominator is not positive (perturbation too large for the
// hypothesis).
inline std::optional<double> bound_direct(const BoundInputs& in) {
  const double denom = 1.0 / in.inv_norm - in.delta_a;
  if (!(denom > 0.0)) return std::nullopt;
  return (in.delta_b + in.inv_norm * in.norm_b * in.delta_a) / denom;
}

// Error bound for the rectangular least-squares solve:
//
//   ||dX|| <= (||A|| + ||dA||) (||db|| + ||dA|| ||(A^T A)^-1|| ||A|| ||b||)
//             / (||(A^T A)^-1||^-1 - 2 ||A|| ||dA|| - ||dA||^2)
inline std::optional<double> bound_normal(const BoundInputs& in) {
  const double denom =
      1.0 / in.inv_norm - 2.0 * in.norm_a * in.delta_a - in.delta_a * in.delta_a;
  if (!(denom > 0.0)) return std::nullopt;
  return (in.norm_a + in.delta_a) *
         (in.delta_b + in.delta_a * in.inv_norm * in.norm_a * in.norm_b) / denom;
}

// ---------------------------------------------------------------------------
// Log-log slope fit
// ---------------------------------------------------------------------------

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};

// Ordinary least squares through (log10 x, log10 y).
inline LineFit fit_loglog(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 2)
    throw InvariantViolation("log-log fit needs at least two points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  double lx_min = INFINITY, lx_max = -INFINITY;
  for (const auto& [x, y] : points) {
    if (!(x > 0.0) || !(y > 0.0))
      throw InvariantViolation("log-log fit requires positive coordinates");
    const double lx = std::log10(x);
    const double ly = std::log10(y);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    lx_min = std::min(lx_min, lx);
    lx_max = std::max(lx_max, lx);
  }
  if (lx_max == lx_min) throw DegenerateFit("all abscissae are equal");
  const double n = static_cast<double>(points.size());
  const double denom = n * sxx - sx * sx;
  LineFit fit;
  fit.slope = (n * sxy - sx * sy) / denom;
  fit.intercept = (sy - fit.slope * sx) / n;
  return fit;
}

// ---------------------------------------------------------------------------
// Stability experiment
// ---------------------------------------------------------------------------

struct StabilityPoint {
  double delta = 0.0;           // noise level of this run
  std::size_t j = 0;            // emission index (0-based)
  double perturb_norm = 0.0;    // ||b~ - b||
  double error_norm = 0.0;      // ||X~ - X||
  std::optional<double> bound;  // theoretical bound, when its denominator is valid
};

struct StabilityFailure {
  double delta = 0.0;
  std::size_t j = 0;
  std::string kind;
};

struct StabilityReport {
  std::vector<StabilityPoint> points;
  std::vector<StabilityFailure> failures;  // excluded from the fit
  double fitted_slope = 0.0;
  double fitted_intercept = 0.0;
  std::size_t fit_point_count = 0;
};

namespace detail {

inline Eigen::Vector4d estimate_vector(const SolveResult& r) {
  return {r.position.x, r.position.y, r.position.z, r.time};
}

}  // namespace detail

// Synthesizes clean data, then for each noise level perturbs the arrivals,
// re-solves every emission, and records (||b~ - b||, ||X~ - X||) together
// with the matching theoretical bound. Each level derives its own seed from
// the template seed and the level index, so runs are deterministic and levels
// independent.
inline StabilityReport stability_experiment(const Trajectory& trajectory,
                                            const SensorArray& sensors, double c,
                                            const std::vector<double>& levels,
                                            const NoiseSpec& spec_template,
                                            Method method = Method::SevenPoint) {
  std::vector<double> distinct = levels;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 3)
    throw ConfigError("stability experiment needs at least 3 distinct noise levels");
  for (double d : levels)
    if (!(d > 0.0)) throw ConfigError("noise levels must be positive");
  if (method == Method::Oracle)
    throw ConfigError("stability experiment requires an algebraic method");

  const std::size_t last_row = method == Method::FivePoint ? 4 : 6;
  const auto solve = [&](const EventSystem& sys) {
    return method == Method::FivePoint ? solve_direct(sys) : solve_least_squares(sys);
  };

  const ToaMatrix toa = synthesize_toa(trajectory, sensors, c);
  const std::size_t J = toa.num_emissions;

  // noise-free baseline; must succeed for every emission
  std::vector<EventSystem> base_sys;
  std::vector<Eigen::Vector4d> base_x;
  std::vector<SpectralNorms> base_norms;
  base_sys.reserve(J);
  for (std::size_t j = 0; j < J; ++j) {
    base_sys.push_back(build_system(toa, j, sensors, detail::index_range(1, last_row)));
    base_x.push_back(detail::estimate_vector(solve(base_sys.back())));
    base_norms.push_back(norms(base_sys.back()));
  }

  StabilityReport report;
  for (std::size_t li = 0; li < levels.size(); ++li) {
    NoiseSpec spec;
    spec.level = levels[li];
    spec.model = spec_template.model;
    spec.seed = Rng::mix(spec_template.seed, li);
    const ToaMatrix noisy = perturb_toa(toa, spec);

    for (std::size_t j = 0; j < J; ++j) {
      const EventSystem sys =
          build_system(noisy, j, sensors, detail::index_range(1, last_row));
      StabilityPoint point;
      point.delta = levels[li];
      point.j = j;
      point.perturb_norm = (sys.b - base_sys[j].b).norm();
      const double delta_a = spectral_norm(sys.A - base_sys[j].A);
      const BoundInputs inputs =
          make_bound_inputs(base_norms[j], delta_a, point.perturb_norm);
      point.bound =
          method == Method::FivePoint ? bound_direct(inputs) : bound_normal(inputs);
      try {
        point.error_norm = (detail::estimate_vector(solve(sys)) - base_x[j]).norm();
      } catch (const SingularSystem&) {
        report.failures.push_back({levels[li], j, "singular_system"});
        continue;
      } catch (const RankDeficient&) {
        report.failures.push_back({levels[li], j, "rank_deficient"});
        continue;
      }
      report.points.push_back(point);
    }
  }

  std::vector<std::pair<double, double>> fit_points;
  for (const StabilityPoint& p : report.points)
    if (p.perturb_norm > 0.0 && p.error_norm > 0.0)
      fit_points.emplace_back(p.perturb_norm, p.error_norm);
  const LineFit fit = fit_loglog(fit_points);
  report.fitted_slope = fit.slope;
  report.fitted_intercept = fit.intercept;
  report.fit_point_count = fit_points.size();
  return report;
}

}  // namespace toatrack
