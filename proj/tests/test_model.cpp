#include <catch2/catch.hpp>

#include <cmath>

#include <toatrack/model.hpp>
#include <toatrack/rng.hpp>

#include "fixtures.hpp"

using namespace toatrack;

namespace {

double ulp_of(double magnitude) {
  return std::nextafter(std::abs(magnitude), INFINITY) - std::abs(magnitude);
}

}  // namespace

TEST_CASE("axes layout validates clean") {
  const GeometryReport report = validate_sensor_geometry(make_axes_layout());
  CHECK(report.ok());
}

TEST_CASE("axes layout symmetry violation is reported alone") {
  SensorArray s = make_axes_layout();
  s.positions[6] = {0, 0, -2.5};
  const GeometryReport report = validate_sensor_geometry(s);
  REQUIRE(report.violations.size() == 1);
  CHECK(report.violations[0].constraint == "axis_symmetry");
  CHECK(report.violations[0].residual == Approx(0.5 / 3.0));
}

TEST_CASE("duplicated sensors are reported as distinctness violation") {
  SensorArray s = make_axes_layout();
  s.positions[2] = s.positions[1];
  const GeometryReport report = validate_sensor_geometry(s);
  REQUIRE(report.violations.size() == 1);
  CHECK(report.violations[0].constraint == "distinct_positions");
}

TEST_CASE("each axes constraint is broken in isolation") {
  // Perturbations chosen to touch exactly one constraint each.
  struct Case {
    std::size_t index;
    Vec3 position;
    const char* expected;
  };
  const Case cases[] = {
      {2, {-3, 1e-6, 0}, "collinear_l1"},
      {4, {1e-6, -3, 0}, "collinear_l2"},
      {6, {1e-6, 0, -3}, "collinear_l3"},
      {6, {0, 0, -2.5}, "axis_symmetry"},
  };
  for (const Case& c : cases) {
    SensorArray s = make_axes_layout();
    s.positions[c.index] = c.position;
    const GeometryReport report = validate_sensor_geometry(s);
    INFO("expected " << c.expected);
    REQUIRE(report.violations.size() == 1);
    CHECK(report.violations[0].constraint == c.expected);
  }

  // Rotating the second axis pair in-plane keeps it collinear and keeps the
  // third axis perpendicular; only l1-l2 perpendicularity breaks.
  SensorArray s = make_axes_layout();
  const double angle = 1e-6;
  const Vec3 d{3 * std::sin(angle), 3 * std::cos(angle), 0};
  s.positions[3] = d;
  s.positions[4] = -d;
  const GeometryReport report = validate_sensor_geometry(s);
  REQUIRE(report.violations.size() == 1);
  CHECK(report.violations[0].constraint == "perpendicular_l1_l2");
}

TEST_CASE("five point and custom layouts only require distinct positions") {
  SensorArray s = fixtures::noncoplanar5();
  CHECK(validate_sensor_geometry(s).ok());
  s.positions[4] = s.positions[1];
  CHECK(validate_sensor_geometry(s).has("distinct_positions"));
}

TEST_CASE("undersized array is reported") {
  SensorArray s;
  s.layout_kind = LayoutKind::Custom;
  s.positions = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  CHECK(validate_sensor_geometry(s).has("sensor_count"));
}

TEST_CASE("synthesize_toa matches hand-computed distances") {
  const auto toa =
      synthesize_toa(fixtures::single_event(0.0, {10, 0, 0}), make_axes_layout(), 1.0);
  REQUIRE(toa.num_emissions == 1);
  REQUIRE(toa.num_sensors == 7);
  const double s109 = std::sqrt(109.0);
  const double expected[7] = {10, 7, 13, s109, s109, s109, s109};
  for (std::size_t k = 0; k < 7; ++k) CHECK(toa(0, k) == Approx(expected[k]).epsilon(1e-15));
}

TEST_CASE("synthesize_toa with offset emission time") {
  const auto toa =
      synthesize_toa(fixtures::single_event(2.0, {1, 2, 3}), fixtures::noncoplanar5(), 1.0);
  const double expected[5] = {2 + std::sqrt(14.0), 2 + std::sqrt(17.0),
                              2 + std::sqrt(11.0), 2 + std::sqrt(5.0),
                              2 + std::sqrt(5.0)};
  for (std::size_t k = 0; k < 5; ++k) CHECK(toa(0, k) == Approx(expected[k]).epsilon(1e-15));
}

TEST_CASE("synthesize_toa rejects a source on a sensor") {
  CHECK_THROWS_AS(
      synthesize_toa(fixtures::single_event(1.0, {3, 0, 0}), make_axes_layout(), 1.0),
      SourceOnSensor);
  CHECK_THROWS_AS(
      synthesize_toa(fixtures::single_event(1.0, {1, 1, 1}), make_axes_layout(), 0.0),
      InvariantViolation);
}

TEST_CASE("forward model is exact to a few ulps") {
  Rng rng(101);
  const SensorArray sensors = make_axes_layout();
  for (int trial = 0; trial < 100; ++trial) {
    const Vec3 p = fixtures::random_off_sensor_point(rng, sensors);
    const double t = rng.uniform(0.0, 10.0);
    const auto toa = synthesize_toa(fixtures::single_event(t, p), sensors, 1.0);
    for (std::size_t k = 0; k < sensors.size(); ++k) {
      const double d = distance(sensors.positions[k], p);
      // T = t + d/c loses low bits of d when t dominates, so the comparison
      // tolerance scales with the larger of the two magnitudes.
      const double tol = 2.0 * ulp_of(std::max(toa(0, k), d));
      CHECK(std::abs(1.0 * (toa(0, k) - t) - d) <= tol);
    }
  }
}

TEST_CASE("toa is translation equivariant") {
  Rng rng(102);
  const Vec3 shift{12.5, -7.25, 3.75};
  for (int trial = 0; trial < 20; ++trial) {
    Trajectory traj = fixtures::random_subsonic_trajectory(rng, 1.0);
    SensorArray sensors = make_axes_layout();
    const auto base = synthesize_toa(traj, sensors, 1.0);

    for (auto& e : traj.events) e.position = e.position + shift;
    for (auto& p : sensors.positions) p = p + shift;
    const auto moved = synthesize_toa(traj, sensors, 1.0);

    for (std::size_t i = 0; i < base.values.size(); ++i)
      CHECK(moved.values[i] == Approx(base.values[i]).epsilon(1e-12));
  }
}

TEST_CASE("arrival ordering holds for randomized subsonic trajectories") {
  Rng rng(103);
  for (int trial = 0; trial < 100; ++trial) {
    const Trajectory traj = fixtures::random_subsonic_trajectory(rng, 1.0);
    REQUIRE(traj.source_speed_bound() < 1.0);
    SensorArray sensors;
    sensors.layout_kind = LayoutKind::Custom;
    while (sensors.positions.size() < 7) {
      const Vec3 candidate{rng.uniform(-12.0, 12.0), rng.uniform(-12.0, 12.0),
                           rng.uniform(-12.0, 12.0)};
      bool clear = true;
      for (const auto& e : traj.events)
        if (distance(candidate, e.position) < 0.1) clear = false;
      if (clear) sensors.positions.push_back(candidate);
    }
    const auto report = check_arrival_ordering(synthesize_toa(traj, sensors, 1.0));
    CHECK(report.all_ordered);
  }
}

TEST_CASE("arrival ordering for single emission is vacuous") {
  const auto toa =
      synthesize_toa(fixtures::single_event(0.0, {1, 1, 1}), make_axes_layout(), 1.0);
  CHECK(check_arrival_ordering(toa).all_ordered);
}

TEST_CASE("a constructed ordering violation is localized to its column") {
  Trajectory traj;
  traj.events.push_back({0.0, {5, 5, 5}});
  traj.events.push_back({1.0, {5.5, 5, 5}});
  auto toa = synthesize_toa(traj, make_axes_layout(), 1.0);
  toa(1, 2) = toa(0, 2) - 0.5;
  const auto report = check_arrival_ordering(toa);
  CHECK_FALSE(report.all_ordered);
  for (std::size_t k = 0; k < 7; ++k) CHECK(report.column_ordered[k] == (k != 2));
}

TEST_CASE("spiral speed exceeds unit wave speed") {
  const auto report = subsonic_check(default_spiral_trajectory(), 1.0);
  CHECK_FALSE(report.is_subsonic);
  CHECK(report.max_speed > 1.0);
  CHECK(report.max_speed == Approx(std::sqrt(2.0)).margin(0.01));
}

TEST_CASE("stationary and slow sources are subsonic") {
  Trajectory still;
  still.events.push_back({0.0, {1, 2, 3}});
  still.events.push_back({1.0, {1, 2, 3}});
  auto report = subsonic_check(still, 1.0);
  CHECK(report.is_subsonic);
  CHECK(report.max_speed == 0.0);

  Trajectory line;
  for (int j = 0; j < 5; ++j)
    line.events.push_back({static_cast<double>(j), {0.5 * j, 0, 0}});
  report = subsonic_check(line, 1.0);
  CHECK(report.is_subsonic);
  CHECK(report.max_speed == Approx(0.5));
}

TEST_CASE("spiral trajectory sampling") {
  const Trajectory traj = default_spiral_trajectory();
  REQUIRE(traj.size() == 86);
  CHECK(traj.events[0].t == 0.0);
  CHECK(traj.events[0].position.x == Approx(5.0));
  CHECK(traj.events[0].position.y == Approx(5.0));
  CHECK(traj.events[0].position.z == Approx(6.0));
  CHECK(traj.events[85].t == Approx(85.0 * M_PI / 20.0));

  const Trajectory one = make_spiral_trajectory(0.0, 0.01, 1.0);
  REQUIRE(one.size() == 1);
  CHECK(one.events[0].position.y == Approx(5.0));

  const Vec3 quarter = spiral_position(M_PI / 2.0);
  CHECK(quarter.x == Approx(M_PI / 2.0 + 5.0));
  CHECK(quarter.y == Approx(6.0));
  CHECK(quarter.z == Approx(5.0).margin(1e-15));

  CHECK_THROWS_AS(make_spiral_trajectory(0.0, 1.0, -0.1), InvariantViolation);
  CHECK_THROWS_AS(make_spiral_trajectory(1.0, 1.0, 0.1), InvariantViolation);
}

TEST_CASE("folded trajectory uses the printed branch boundaries") {
  const Trajectory traj = default_folded_trajectory();
  REQUIRE(traj.size() == 46);
  CHECK(folded_position(0.0).x == Approx(1.0));
  CHECK(folded_position(0.0).y == Approx(4.0));
  CHECK(folded_position(0.0).z == Approx(7.0));
  // t = 3 belongs to the first branch (closed upper end)
  CHECK(folded_position(3.0).x == Approx(4.0));
  CHECK(folded_position(3.0).y == Approx(7.0));
  CHECK(folded_position(3.0).z == Approx(10.0));
  CHECK(folded_position(9.0).x == Approx(4.0));
  CHECK(folded_position(9.0).y == Approx(19.0));
  CHECK(folded_position(9.0).z == Approx(4.0));
  CHECK(traj.events.back().t == Approx(9.0));
}
