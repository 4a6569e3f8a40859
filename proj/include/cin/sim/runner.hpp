#pragma once

// Multi-vehicle event loop running SP, SL-SP, CP and SL-CP on identical
// sensor streams.

#include "cin/sim/sensors.hpp"

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cin::sim {

enum class Method { sp, sl_sp, cp, sl_cp };

inline constexpr Method kAllMethods[] = {Method::sp, Method::sl_sp, Method::cp, Method::sl_cp};

const char* to_string(Method m);
std::optional<Method> parse_method(std::string_view text);
inline bool uses_stopline(Method m) { return m == Method::sl_sp || m == Method::sl_cp; }
inline bool cooperative(Method m) { return m == Method::cp || m == Method::sl_cp; }

struct TraceSample {
  double t = 0;
  Vector2d truth = Vector2d::Zero();
  Vector2d estimate = Vector2d::Zero();
  double error = 0;  // horizontal norm
  UpdateCase tag = UpdateCase::prediction_only;
  double nees = 0;   // horizontal, 2 dof
};

struct VehicleTrace {
  VehicleId id = 0;
  std::vector<TraceSample> samples;
};

struct Diagnostics {
  std::size_t updates = 0;
  std::size_t rejected = 0;
  std::size_t gated_rows = 0;
  std::size_t skipped_ranges = 0;  // coincident or stale
};

struct MethodRun {
  Method method = Method::sp;
  std::vector<VehicleTrace> traces;  // same order as config.vehicles
  Diagnostics diagnostics;
};

/// Half-open [start, end) in seconds.
struct Phase {
  std::string name;
  double start = 0;
  double end = 0;
};

struct RoleEvent {
  double t = 0;
  VehicleId id = 0;
  bool first_stopped = false;
};

struct ScenarioResult {
  std::uint64_t seed = 0;
  double duration = 0;
  std::vector<MethodRun> runs;
  std::vector<Phase> phases;
  std::optional<VehicleId> first_stopped_vehicle;
  std::vector<RoleEvent> roles;
};

/// Flag transitions in time order (ties by id).
std::vector<RoleEvent> role_events(const ScenarioConfig& config, const SensorData& data);

/// pre_stop, stopped, after_green and tail, derived from the first flag
/// onset and the next green for that vehicle's road. Empty phases are dropped.
std::vector<Phase> derive_phases(const ScenarioConfig& config, const Truth& truth, const SensorData& data,
                                 std::optional<VehicleId>* first_vehicle = nullptr);

MethodRun run_method(const ScenarioConfig& config, const Truth& truth, const SensorData& data,
                     const std::vector<Event>& events, Method method);

ScenarioResult run_scenario(const ScenarioConfig& config, std::span<const Method> methods = kAllMethods,
                            std::optional<std::uint64_t> seed = std::nullopt);

}  // namespace cin::sim
