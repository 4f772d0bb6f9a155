#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <toatrack/model.hpp>
#include <toatrack/rng.hpp>
#include <toatrack/vec3.hpp>

namespace fixtures {

// Five sensors spanning all three dimensions; the four offsets from the
// reference are linearly independent, so the direct solve is well posed.
inline toatrack::SensorArray noncoplanar5() {
  toatrack::SensorArray s;
  s.layout_kind = toatrack::LayoutKind::FivePointGeneric;
  s.positions = {{0, 0, 0}, {3, 0, 0}, {0, 3, 0}, {0, 0, 3}, {3, 3, 3}};
  return s;
}

inline toatrack::Trajectory single_event(double t, const toatrack::Vec3& p) {
  toatrack::Trajectory traj;
  traj.events.push_back({t, p});
  return traj;
}

// Random walk with per-step speed below 0.9 c.
inline toatrack::Trajectory random_subsonic_trajectory(toatrack::Rng& rng, double c,
                                                       std::size_t events = 8) {
  toatrack::Trajectory traj;
  double t = rng.uniform(0.0, 1.0);
  toatrack::Vec3 p{rng.uniform(-8.0, 8.0), rng.uniform(-8.0, 8.0),
                   rng.uniform(-8.0, 8.0)};
  for (std::size_t j = 0; j < events; ++j) {
    traj.events.push_back({t, p});
    const double dt = rng.uniform(0.2, 1.0);
    const double speed = rng.uniform(0.0, 0.9 * c);
    toatrack::Vec3 dir{rng.uniform_pm1(), rng.uniform_pm1(), rng.uniform_pm1()};
    const double n = dir.norm();
    if (n > 1e-9) dir = dir / n;
    t += dt;
    p = p + dir * (speed * dt);
  }
  return traj;
}

// Uniform point in [-10,10]^3 at least `clearance` away from every sensor.
inline toatrack::Vec3 random_off_sensor_point(toatrack::Rng& rng,
                                              const toatrack::SensorArray& sensors,
                                              double clearance = 0.1) {
  while (true) {
    toatrack::Vec3 p{rng.uniform(-10.0, 10.0), rng.uniform(-10.0, 10.0),
                     rng.uniform(-10.0, 10.0)};
    bool clear = true;
    for (const auto& s : sensors.positions)
      if (toatrack::distance(p, s) < clearance) clear = false;
    if (clear) return p;
  }
}

// Scratch directory unique to one test case, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    dir_ = std::filesystem::temp_directory_path() /
           ("toatrack_test_" + tag + "_" + std::to_string(counter_++));
    std::filesystem::create_directories(dir_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(dir_, ec);
  }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

 private:
  std::filesystem::path dir_;
  static inline int counter_ = 0;
};

}  // namespace fixtures
