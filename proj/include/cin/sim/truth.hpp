#pragma once

// Ground truth: traffic light, point-mass speed profiles along straight lane
// routes, and the per-tick reference navigation state.

#include "cin/sim/scenario.hpp"

#include <vector>

namespace cin::sim {

class TrafficLight {
 public:
  explicit TrafficLight(LightSchedule schedule) : schedule_(std::move(schedule)) {}

  struct State {
    bool green = false;
    double time_in_phase = 0;
  };

  State state(bool main_road, double t) const;
  bool green(bool main_road, double t) const { return state(main_road, t).green; }
  /// Earliest time >= t at which the road shows green; +inf if never.
  double next_green(bool main_road, double t) const;
  /// Times at which the main-road light changes, up to `horizon`.
  std::vector<double> transitions(double horizon) const;

 private:
  LightSchedule schedule_;
};

/// Piecewise-constant acceleration along the route coordinate s.
class SpeedProfile {
 public:
  struct Segment {
    double t0 = 0;
    double s0 = 0;
    double v0 = 0;
    double a = 0;
  };

  explicit SpeedProfile(double cruise);

  /// Starts a new constant-acceleration segment at t (>= the last start).
  void change(double t, double a);

  double position(double t) const;
  double speed(double t) const;
  double accel(double t) const;
  const std::vector<Segment>& segments() const { return segments_; }

 private:
  const Segment& at(double t) const;
  std::vector<Segment> segments_;
};

struct VehiclePlan {
  VehicleId id = 0;
  std::size_t entry = 0;
  Vector2d start = Vector2d::Zero();      // NED horizontal at s = 0
  Vector2d direction = Vector2d::UnitX();
  double stop_s = 0;                      // route coordinate of the lane's first stop point
  SpeedProfile profile{0.0};
  bool stops = false;
  int queue_index = -1;                   // 0 is first in line
  double stop_time = 0;                   // at rest from here
  double depart_time = 0;                 // accelerates from here

  Vector2d planar(double t) const { return start + profile.position(t) * direction; }
  Vector2d planar_velocity(double t) const { return profile.speed(t) * direction; }
  double yaw() const;
  /// Head-to-stop-line distance while at rest.
  double stopped_head_distance(const StopLineMapEntry& entry, double l0) const;
};

struct TruthTrajectory {
  VehicleId id = 0;
  std::vector<NavSolution> nav;   // one per IMU tick, including tick 0
  std::vector<Vector2d> planar;   // NED horizontal about the origin
  std::vector<Vector2d> accel;    // planar acceleration
};

struct Truth {
  std::vector<VehiclePlan> plans;
  std::vector<TruthTrajectory> vehicles;  // same order as config.vehicles
};

std::vector<VehiclePlan> plan_vehicles(const ScenarioConfig& config);

/// Plans every vehicle and samples it at the IMU ticks.
Truth generate_truth(const ScenarioConfig& config);

}  // namespace cin::sim
