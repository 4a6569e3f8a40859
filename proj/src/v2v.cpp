#include "cin/v2v.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

namespace cin {

void NeighborTable::record(const BeaconPacket& beacon) {
  Entry& e = entries_[beacon.sender];
  if (!e.beacon || e.beacon->timestamp <= beacon.timestamp) e.beacon = beacon;
}

void NeighborTable::record(const RangeMeasurement& range, VehicleId self) {
  const VehicleId other = range.from == self ? range.to : range.from;
  Entry& e = entries_[other];
  if (!e.range || e.range->timestamp <= range.timestamp) e.range = range;
}

void NeighborTable::evict(double now) {
  for (auto it = entries_.begin(); it != entries_.end();) {
    double newest = -std::numeric_limits<double>::infinity();
    if (it->second.beacon) newest = std::max(newest, it->second.beacon->timestamp);
    if (it->second.range) newest = std::max(newest, it->second.range->timestamp);
    it->second.staleness = std::max(0.0, now - newest);
    if (it->second.staleness > staleness_bound_) {
      it = entries_.erase(it);
    } else {
      ++it;
    }
  }
}

const NeighborTable::Entry* NeighborTable::find(VehicleId id) const {
  const auto it = entries_.find(id);
  return it == entries_.end() ? nullptr : &it->second;
}

Vector2d line_of_sight(const Vector2d& self_position, const Vector2d& neighbor_position) {
  const Vector2d diff = self_position - neighbor_position;
  return diff / diff.norm();
}

Observation15 range_observation(const NavSolution& nav_i, const Geodetic& origin,
                                const BeaconPacket& beacon_j, const RangeMeasurement& range,
                                const V2vConfig& config) {
  if (std::abs(beacon_j.timestamp - range.timestamp) > config.staleness ||
      std::abs(range.timestamp - nav_i.timestamp) > config.staleness) {
    throw StaleData("range_observation: beacon, range and navigation epochs are not aligned");
  }
  const Vector2d p_i = ned_from_geodetic(origin, nav_i.position).head<2>();
  const Vector2d diff = p_i - beacon_j.position;
  const double predicted = diff.norm();
  if (!(predicted > config.d_min)) {
    throw CoincidentPositions("range_observation: vehicles closer than d_min");
  }
  const Vector2d u = diff / predicted;
  const Vector2d scale = horizontal_scale(nav_i.position);

  Observation15 obs;
  obs.kind = ObservationKind::v2v;
  obs.z = Eigen::VectorXd::Constant(1, predicted - range.distance);
  obs.H = Observation15::Jacobian::Zero(1, kErrorStates);
  obs.H(0, state::latitude) = scale(0) * u(0);
  obs.H(0, state::longitude) = scale(1) * u(1);
  const double neighbor_var = u.dot(beacon_j.pos_cov * u);
  obs.R = Eigen::MatrixXd::Constant(1, 1, neighbor_var + range.sigma * range.sigma);
  return obs;
}

const char* to_string(UpdateCase c) {
  switch (c) {
    case UpdateCase::prediction_only: return "none";
    case UpdateCase::case1: return "case1";
    case UpdateCase::case2: return "case2";
    case UpdateCase::case3: return "case3";
  }
  return "?";
}

UpdateCase select_case(bool has_gnss, std::size_t neighbor_obs_ready) {
  if (has_gnss && neighbor_obs_ready > 0) return UpdateCase::case3;
  if (has_gnss) return UpdateCase::case1;
  if (neighbor_obs_ready > 0) return UpdateCase::case2;
  return UpdateCase::prediction_only;
}

std::optional<Observation15> assemble_update(UpdateCase update_case,
                                             const std::optional<Observation15>& self_obs,
                                             std::span<const Observation15> neighbor_obs) {
  if (update_case != select_case(self_obs.has_value(), neighbor_obs.size())) {
    throw std::invalid_argument("assemble_update: observations do not match the update case");
  }
  if (update_case == UpdateCase::prediction_only) return std::nullopt;
  if (update_case == UpdateCase::case1) return *self_obs;

  std::vector<Observation15> parts;
  parts.reserve(neighbor_obs.size() + 1);
  if (self_obs) parts.push_back(*self_obs);
  parts.insert(parts.end(), neighbor_obs.begin(), neighbor_obs.end());
  if (parts.size() == 1) return parts.front();
  Observation15 out = stack<double, kErrorStates>(parts);
  if (!self_obs) out.kind = ObservationKind::v2v;
  return out;
}

BeaconPacket emit_beacon(VehicleId sender, const FilterState15& fs, const NavSolution& nav,
                         const Geodetic& origin, bool first_stopped) {
  Geodetic corrected = nav.position;
  corrected.latitude -= fs.x(state::latitude);
  corrected.longitude -= fs.x(state::longitude);
  BeaconPacket packet;
  packet.sender = sender;
  packet.timestamp = nav.timestamp;
  packet.position = ned_from_geodetic(origin, corrected).head<2>();
  packet.pos_cov = horizontal_position_covariance(fs.P, nav.position);
  packet.first_stopped = first_stopped;
  return packet;
}

// --- wire format ------------------------------------------------------------

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[at + i]) << (8 * i);
  return v;
}

double get_f64(std::span<const std::uint8_t> in, std::size_t at) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(in[at + i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace

std::vector<std::uint8_t> encode_beacon(const BeaconPacket& packet) {
  std::vector<std::uint8_t> out;
  out.reserve(4 + kBeaconPayloadSize);
  put_u32(out, static_cast<std::uint32_t>(kBeaconPayloadSize));
  out.push_back(kBeaconWireVersion);
  put_u32(out, packet.sender);
  put_f64(out, packet.timestamp);
  put_f64(out, packet.position(0));
  put_f64(out, packet.position(1));
  put_f64(out, packet.pos_cov(0, 0));
  put_f64(out, packet.pos_cov(0, 1));
  put_f64(out, packet.pos_cov(1, 1));
  out.push_back(packet.first_stopped ? 0x01 : 0x00);
  return out;
}

BeaconPacket decode_beacon(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw WireFormatError("decode_beacon: truncated length prefix");
  const std::uint32_t length = get_u32(bytes, 0);
  if (length != kBeaconPayloadSize || bytes.size() != 4 + length) {
    throw WireFormatError("decode_beacon: unexpected record length");
  }
  if (bytes[4] != kBeaconWireVersion) throw WireFormatError("decode_beacon: unsupported version");
  BeaconPacket p;
  std::size_t at = 5;
  p.sender = get_u32(bytes, at);
  at += 4;
  p.timestamp = get_f64(bytes, at);
  at += 8;
  p.position(0) = get_f64(bytes, at);
  p.position(1) = get_f64(bytes, at + 8);
  at += 16;
  p.pos_cov(0, 0) = get_f64(bytes, at);
  p.pos_cov(0, 1) = get_f64(bytes, at + 8);
  p.pos_cov(1, 0) = p.pos_cov(0, 1);
  p.pos_cov(1, 1) = get_f64(bytes, at + 16);
  at += 24;
  const std::uint8_t flags = bytes[at];
  if (flags & ~0x01u) throw WireFormatError("decode_beacon: unknown flag bits");
  p.first_stopped = (flags & 0x01u) != 0;
  return p;
}

}  // namespace cin
