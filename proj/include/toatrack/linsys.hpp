#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <string>
#include <vector>

#include "toatrack/errors.hpp"
#include "toatrack/model.hpp"
#include "toatrack/vec3.hpp"

namespace toatrack {

// Relative threshold separating structural singularity from mere ill
// conditioning, applied to LU pivots and singular values alike.
inline constexpr double kRankTolerance = 1e-12;

// The linear system of one emission, obtained by differencing the squared
// range equations of each sensor against the reference sensor. Coordinates
// are shifted so the reference sensor sits at the origin; row r built from
// sensor k reads
//
//   x_k . a  +  c^2 (T_1 - T_k) t  =  c^2 (T_1^2 - T_k^2) / 2 + |x_k|^2 / 2
//
// with unknowns X = (a, t), all in shifted coordinates.
struct EventSystem {
  Eigen::MatrixX4d A;    // m x 4, m = number of selected rows
  Eigen::VectorXd b;     // m
  std::size_t j = 0;     // emission index (0-based)
  Vec3 reference_shift;  // original location of the reference sensor
  double c = 1.0;
};

struct SolveDiagnostics {
  double spectral_norm_A = 0.0;
  double inv_norm = 0.0;       // ||A^-1|| for square, ||(A^T A)^-1|| otherwise
  double condition = 0.0;      // sigma_max / sigma_min
  double residual_norm = 0.0;  // ||A X - b|| at the returned solution
};

struct SolveResult {
  Vec3 position;  // un-shifted
  double time = 0.0;
  SolveDiagnostics diagnostics;
};

inline double spectral_norm(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  return Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues()(0);
}

// Assembles rows for the selected sensors of emission j. `rows` lists 0-based
// sensor indices, each >= 1 (sensor 0 is the reference and cannot appear).
inline EventSystem build_system(const ToaMatrix& toa, std::size_t j,
                                const SensorArray& sensors,
                                const std::vector<std::size_t>& rows) {
  const std::size_t K = toa.num_sensors;
  if (sensors.size() != K)
    throw IndexOutOfRange("sensor array size " + std::to_string(sensors.size()) +
                          " does not match TOA columns " + std::to_string(K));
  if (j >= toa.num_emissions)
    throw IndexOutOfRange("emission index " + std::to_string(j) + " out of range");
  if (rows.empty()) throw IndexOutOfRange("row selection is empty");

  EventSystem sys;
  sys.j = j;
  sys.c = toa.wave_speed;
  sys.reference_shift = sensors.positions[0];
  sys.A.resize(static_cast<Eigen::Index>(rows.size()), 4);
  sys.b.resize(static_cast<Eigen::Index>(rows.size()));

  const double c2 = sys.c * sys.c;
  const double t1 = toa(j, 0);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const std::size_t k = rows[r];
    if (k < 1 || k >= K)
      throw IndexOutOfRange("row sensor index " + std::to_string(k) + " out of range");
    const Vec3 xk = sensors.positions[k] - sys.reference_shift;
    const double tk = toa(j, k);
    const auto i = static_cast<Eigen::Index>(r);
    sys.A(i, 0) = xk.x;
    sys.A(i, 1) = xk.y;
    sys.A(i, 2) = xk.z;
    sys.A(i, 3) = c2 * (t1 - tk);
    sys.b(i) = 0.5 * c2 * (t1 * t1 - tk * tk) + 0.5 * xk.squared_norm();
  }
  return sys;
}

// All non-reference sensors, in index order.
inline EventSystem build_system(const ToaMatrix& toa, std::size_t j,
                                const SensorArray& sensors) {
  std::vector<std::size_t> rows;
  for (std::size_t k = 1; k < toa.num_sensors; ++k) rows.push_back(k);
  return build_system(toa, j, sensors, rows);
}

namespace detail {

inline SolveResult finish_solve(const EventSystem& sys, const Eigen::Vector4d& x,
                                SolveDiagnostics diag) {
  diag.residual_norm = (sys.A * x - sys.b).norm();
  SolveResult result;
  result.position = Vec3{x(0), x(1), x(2)} + sys.reference_shift;
  result.time = x(3);
  result.diagnostics = diag;
  return result;
}

}  // namespace detail

// Direct solve of a square 4x4 event system by full-pivot LU. Singularity is
// decided on the pivot magnitudes, which keeps the structurally singular
// coplanar case (exact zero pivot) distinct from ill-conditioned systems.
inline SolveResult solve_direct(const EventSystem& sys) {
  if (sys.A.rows() != 4)
    throw InvariantViolation("solve_direct requires a square 4x4 system");

  const Eigen::Matrix4d a4 = sys.A;
  Eigen::JacobiSVD<Eigen::Matrix4d> svd(a4);
  const double norm_a = svd.singularValues()(0);
  const double sigma_min = svd.singularValues()(3);

  Eigen::FullPivLU<Eigen::Matrix4d> lu(a4);
  const double min_pivot = lu.matrixLU().diagonal().cwiseAbs().minCoeff();
  if (norm_a == 0.0 || min_pivot < kRankTolerance * norm_a)
    throw SingularSystem("event " + std::to_string(sys.j + 1) +
                         ": pivot " + std::to_string(min_pivot) +
                         " below rank threshold");

  SolveDiagnostics diag;
  diag.spectral_norm_A = norm_a;
  diag.inv_norm = 1.0 / sigma_min;
  diag.condition = norm_a / sigma_min;
  return detail::finish_solve(sys, lu.solve(Eigen::Vector4d(sys.b)), diag);
}

// Least-squares solve of an m x 4 system, m >= 4, via SVD. Coincides with the
// normal-equations solution whenever A has full column rank.
inline SolveResult solve_least_squares(const EventSystem& sys) {
  if (sys.A.rows() < 4)
    throw InvariantViolation("solve_least_squares requires at least 4 rows");

  Eigen::JacobiSVD<Eigen::MatrixX4d> svd(sys.A,
                                         Eigen::ComputeFullU | Eigen::ComputeFullV);
  const double norm_a = svd.singularValues()(0);
  const double sigma_min = svd.singularValues()(3);
  if (norm_a == 0.0 || sigma_min < kRankTolerance * norm_a)
    throw RankDeficient("event " + std::to_string(sys.j + 1) +
                        ": smallest singular value " + std::to_string(sigma_min) +
                        " below rank threshold");

  SolveDiagnostics diag;
  diag.spectral_norm_A = norm_a;
  diag.inv_norm = sys.A.rows() == 4 ? 1.0 / sigma_min : 1.0 / (sigma_min * sigma_min);
  diag.condition = norm_a / sigma_min;
  return detail::finish_solve(sys, svd.solve(sys.b), diag);
}

struct SpectralNorms {
  double norm_a = 0.0;
  double inv_norm = 0.0;  // ||A^-1|| for square, ||(A^T A)^-1|| otherwise
  double norm_b = 0.0;
};

// The norms consumed by the perturbation bounds, from the singular spectrum.
inline SpectralNorms norms(const Eigen::MatrixX4d& a, const Eigen::VectorXd& b) {
  Eigen::JacobiSVD<Eigen::MatrixX4d> svd(a);
  const double norm_a = svd.singularValues()(0);
  const double sigma_min = svd.singularValues()(svd.singularValues().size() - 1);
  if (norm_a == 0.0 || sigma_min < kRankTolerance * norm_a)
    throw RankDeficient("matrix is numerically rank deficient");
  SpectralNorms n;
  n.norm_a = norm_a;
  n.inv_norm = a.rows() == 4 ? 1.0 / sigma_min : 1.0 / (sigma_min * sigma_min);
  n.norm_b = b.norm();
  return n;
}

inline SpectralNorms norms(const EventSystem& sys) { return norms(sys.A, sys.b); }

}  // namespace toatrack
