#pragma once

// Sensor synthesis on the IMU tick grid and the ordered event sequence the
// runner consumes. Every random draw comes from CounterRng, so one vehicle's
// streams do not depend on how many other vehicles exist.

#include "cin/sim/rng.hpp"
#include "cin/sim/truth.hpp"

#include <cstdint>
#include <vector>

namespace cin::sim {

struct VehicleSensors {
  VehicleId id = 0;
  ImuBiases bias;                        // true constant IMU biases
  ErrorState15 initial_error = ErrorState15::Zero();
  std::vector<ImuSample> imu;            // imu[k] covers (t_k, t_{k+1}]
  std::vector<GnssFix> gnss;             // one per GNSS epoch, epoch m at tick m * stride
  std::vector<std::uint8_t> first_stopped;  // per tick, from truth (emulated perception)
};

struct RangeEvent {
  std::int64_t tick = 0;
  RangeMeasurement measurement;  // from < to
};

enum class EventKind : std::uint8_t { imu = 0, gnss = 1, beacon = 2, range = 3 };

const char* to_string(EventKind kind);

/// `vehicle` is the sender/owner index into config.vehicles; `index` selects
/// the GNSS epoch or range event.
struct Event {
  std::int64_t tick = 0;
  EventKind kind = EventKind::imu;
  std::uint32_t vehicle = 0;
  std::uint32_t index = 0;
};

struct SensorData {
  std::vector<VehicleSensors> vehicles;  // same order as config.vehicles
  std::vector<RangeEvent> ranges;        // ordered by tick, then (from, to)
};

bool is_gnss_tick(const ScenarioConfig& config, std::int64_t tick);
bool is_beacon_tick(const ScenarioConfig& config, std::int64_t tick);
bool is_range_tick(const ScenarioConfig& config, std::int64_t tick);

/// Both vehicles inside comm range and outside every outage window.
bool linked(const ScenarioConfig& config, const Truth& truth, std::size_t a, std::size_t b,
            std::int64_t tick);

/// IMU specific force and rate that reproduce truth[k+1] from truth[k]
/// under the discrete mechanization, before errors are added.
ImuSample ideal_imu(const NavSolution& from, const NavSolution& to);

SensorData synthesize_sensors(const ScenarioConfig& config, const Truth& truth, std::uint64_t seed);

/// Events in dispatch order: tick, then kind (IMU < GNSS < beacon < range), then vehicle.
std::vector<Event> event_sequence(const ScenarioConfig& config, const SensorData& data);

}  // namespace cin::sim
