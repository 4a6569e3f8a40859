#pragma once

// Scenario description: intersection map, light schedule, vehicles, sensor
// rates and the noise injected by the simulator versus the noise the filter assumes.

#include "cin/ins.hpp"
#include "cin/stopline.hpp"
#include "cin/v2v.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace cin::sim {

struct Rates {
  int imu = 100;    // Hz; 1e6 must be divisible by it
  int gnss = 5;     // each non-IMU rate must divide the IMU rate
  int beacon = 5;
  int range = 100;
  int trace = 10;
};

/// Light phases for the main road; the cross road is always the complement.
struct LightPhase {
  bool main_green = false;
  double duration = 0;  // s
};

struct LightSchedule {
  std::vector<LightPhase> phases{{false, 50.0}, {true, 1e9}};
  bool repeat = false;
};

struct Kinematics {
  double cruise = 8.0;          // m/s
  double brake = 2.0;           // comfortable deceleration, m/s^2
  double max_decel = 3.0;       // m/s^2
  double accel = 1.5;           // departure acceleration, m/s^2
  double queue_gap = 2.0;       // bumper-to-bumper, m
  double vehicle_length = 4.5;  // m
  double reaction = 1.0;        // departure delay after green or after the predecessor, s
};

/// Intersection generated from a few numbers. Entries are ordered by
/// approach (main forward, main backward, cross forward, cross backward),
/// then lane (0 is next to the centerline).
struct Layout {
  double heading_deg = 0.0;  // main-road forward heading from north
  int main_lanes = 2;        // per direction
  int cross_lanes = 1;
  double lane_width = 3.5;
  double setback = 1.0;  // stop line to the crossing road's edge
  StopLinePrior prior;
};

struct Approach {
  StopLineMapEntry entry;
  bool main_road = true;
};

struct VehicleSpec {
  VehicleId id = 0;
  std::size_t entry = 0;        // index into the map
  double start_distance = 50;   // m behind this lane's first stop point at t = 0
  double cruise = 0;            // m/s; 0 means the scenario default
};

struct OutageWindow {
  double start = 0;
  double end = 0;
  std::vector<VehicleId> vehicles;  // empty means all
};

struct ImuErrorModel {
  double gyro_arw = 0.3;         // deg/sqrt(h)
  double accel_vrw = 0.05;       // m/s/sqrt(h)
  double gyro_bias = 10.0;       // deg/h, 1-sigma random constant
  double accel_bias = 0.01;      // m/s^2, 1-sigma random constant

  ImuNoise psd() const;
  double gyro_bias_rad() const;
};

struct GnssErrorModel {
  double white_position = 0.5;  // m per axis
  double white_velocity = 0.1;  // m/s per axis
  double bias_sigma = 3.0;      // m per axis, first-order Gauss-Markov
  double bias_tau = 60.0;       // s
};

struct SensorErrors {
  ImuErrorModel imu;
  GnssErrorModel gnss;
  double range_sigma = 0.1;
  bool initial_error = true;  // draw the initial INS error from the filter's P0
};

struct InitialSigma {
  double position = 3.0;        // m, horizontal
  double height = 3.0;          // m
  double velocity = 0.2;        // m/s
  double roll_pitch_deg = 0.1;
  double yaw_deg = 0.5;
};

struct FilterSettings {
  ImuErrorModel imu;
  GnssNoise gnss;
  double range_sigma = 0.1;
  InitialSigma initial;
  std::optional<double> gate_alpha = 0.001;  // v2v rows only; nullopt disables
  V2vConfig v2v;
  StopDetection detection;
};

enum class RangeDecimation { beacon, none };

struct ScenarioConfig {
  std::uint64_t seed = 1;
  double duration = 110.0;
  Geodetic origin{39.9 * std::numbers::pi / 180, 116.3 * std::numbers::pi / 180, 50.0};
  std::vector<Approach> map;
  std::optional<Layout> layout;  // set when the map was generated
  LightSchedule light;
  Kinematics kinematics;
  std::vector<VehicleSpec> vehicles;
  Rates rates;
  double beacon_offset = 0.1;  // s after each GNSS epoch
  RangeDecimation range_decimation = RangeDecimation::beacon;
  double comm_range = 150.0;
  std::vector<OutageWindow> outages;
  double after_green_window = 60.0;
  SensorErrors sensors;
  FilterSettings filter;

  int imu_tick_us() const { return 1000000 / rates.imu; }
  std::int64_t ticks() const;
  double tick_time(std::int64_t tick) const;
  /// Ticks between events of the given rate.
  int stride(int rate) const { return rates.imu / rate; }
  int beacon_offset_ticks() const;
  const VehicleSpec* find_vehicle(VehicleId id) const;
};

std::vector<Approach> generate_layout(const Layout& layout);

/// Throws ConfigError naming the offending field.
void validate(const ScenarioConfig& config);

/// `base_dir` resolves a relative map.file path.
ScenarioConfig scenario_from_json(const nlohmann::json& doc, const std::string& base_dir = ".");
ScenarioConfig load_scenario(const std::string& path);
nlohmann::json map_to_json(const std::vector<Approach>& map);

}  // namespace cin::sim
