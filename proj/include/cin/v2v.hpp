#pragma once

// V2V payloads, the linearized inter-vehicle range observation and the
// update-case scheduler for cooperative positioning.

#include "cin/ekf.hpp"
#include "cin/ins.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace cin {

using VehicleId = std::uint32_t;

struct BeaconPacket {
  VehicleId sender = 0;
  double timestamp = 0;
  Vector2d position = Vector2d::Zero();  // NED-horizontal about the map origin
  Matrix2d pos_cov = Matrix2d::Zero();
  bool first_stopped = false;
};

struct RangeMeasurement {
  VehicleId from = 0;
  VehicleId to = 0;
  double distance = 0;
  double timestamp = 0;
  double sigma = 0.1;
};

struct V2vConfig {
  double staleness = 0.25;  // s
  double d_min = 0.5;       // m
};

class CoincidentPositions : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class StaleData : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class WireFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Latest beacon and range per neighbor. Iteration is ordered by sender id.
class NeighborTable {
 public:
  struct Entry {
    std::optional<BeaconPacket> beacon;
    std::optional<RangeMeasurement> range;
    double staleness = 0;
  };

  explicit NeighborTable(double staleness_bound = V2vConfig{}.staleness)
      : staleness_bound_(staleness_bound) {}

  void record(const BeaconPacket& beacon);
  /// Stores the range under the counterpart of `self`.
  void record(const RangeMeasurement& range, VehicleId self);
  /// Refresh staleness and drop neighbors whose newest data is older than the bound.
  void evict(double now);

  const std::map<VehicleId, Entry>& entries() const { return entries_; }
  const Entry* find(VehicleId id) const;
  std::size_t size() const { return entries_.size(); }

 private:
  double staleness_bound_;
  std::map<VehicleId, Entry> entries_;
};

/// One-row range observation of vehicle i against neighbor j's beacon.
Observation15 range_observation(const NavSolution& nav_i, const Geodetic& origin,
                                const BeaconPacket& beacon_j, const RangeMeasurement& range,
                                const V2vConfig& config = {});

/// Unit line-of-sight row from the neighbor toward `self_position`.
Vector2d line_of_sight(const Vector2d& self_position, const Vector2d& neighbor_position);

enum class UpdateCase { prediction_only, case1, case2, case3 };

const char* to_string(UpdateCase c);

UpdateCase select_case(bool has_gnss, std::size_t neighbor_obs_ready);

/// Self rows first, then one row per neighbor. Empty when there is nothing to fuse.
std::optional<Observation15> assemble_update(UpdateCase update_case,
                                             const std::optional<Observation15>& self_obs,
                                             std::span<const Observation15> neighbor_obs);

BeaconPacket emit_beacon(VehicleId sender, const FilterState15& fs, const NavSolution& nav,
                         const Geodetic& origin, bool first_stopped);

/// Length-prefixed little-endian record, version 0x01.
inline constexpr std::uint8_t kBeaconWireVersion = 0x01;
inline constexpr std::size_t kBeaconPayloadSize = 1 + 4 + 8 + 2 * 8 + 3 * 8 + 1;

std::vector<std::uint8_t> encode_beacon(const BeaconPacket& packet);
BeaconPacket decode_beacon(std::span<const std::uint8_t> bytes);

}  // namespace cin
