#include "cin/sim/sensors.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

namespace cin::sim {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

Vector3d normal3(const CounterRng& rng, std::uint64_t entity, Stream stream, std::uint64_t tick) {
  return {rng.normal(entity, stream, tick, 0), rng.normal(entity, stream, tick, 1),
          rng.normal(entity, stream, tick, 2)};
}

bool in_outage(const ScenarioConfig& config, VehicleId id, double t) {
  for (const auto& w : config.outages) {
    if (t < w.start || t >= w.end) continue;
    if (w.vehicles.empty() || std::find(w.vehicles.begin(), w.vehicles.end(), id) != w.vehicles.end()) {
      return true;
    }
  }
  return false;
}

}  // namespace

const char* to_string(EventKind kind) {
  switch (kind) {
    case EventKind::imu: return "imu";
    case EventKind::gnss: return "gnss";
    case EventKind::beacon: return "beacon";
    case EventKind::range: return "range";
  }
  return "?";
}

bool is_gnss_tick(const ScenarioConfig& config, std::int64_t tick) {
  return tick % config.stride(config.rates.gnss) == 0;
}

bool is_beacon_tick(const ScenarioConfig& config, std::int64_t tick) {
  const std::int64_t offset = config.beacon_offset_ticks();
  return tick >= offset && (tick - offset) % config.stride(config.rates.beacon) == 0;
}

bool is_range_tick(const ScenarioConfig& config, std::int64_t tick) {
  if (tick % config.stride(config.rates.range) != 0) return false;
  return config.range_decimation == RangeDecimation::none || is_beacon_tick(config, tick);
}

bool linked(const ScenarioConfig& config, const Truth& truth, std::size_t a, std::size_t b,
            std::int64_t tick) {
  const double t = config.tick_time(tick);
  if (in_outage(config, truth.vehicles[a].id, t) || in_outage(config, truth.vehicles[b].id, t)) return false;
  return (truth.vehicles[a].planar[tick] - truth.vehicles[b].planar[tick]).norm() <= config.comm_range;
}

ImuSample ideal_imu(const NavSolution& from, const NavSolution& to) {
  const double dt = to.timestamp - from.timestamp;
  const Vector3d w_ie = earth_rate_ned(from.position.latitude);
  const Vector3d w_en = transport_rate_ned(from.position, from.velocity);
  const Matrix3d Ct = from.body_to_ned().transpose();
  const Vector3d gravity(0, 0, normal_gravity(from.position.latitude, from.position.height));
  ImuSample s;
  s.timestamp = to.timestamp;
  s.gyro = Ct * (w_ie + w_en);
  s.accel = Ct * ((to.velocity - from.velocity) / dt - gravity + (2.0 * w_ie + w_en).cross(from.velocity));
  return s;
}

SensorData synthesize_sensors(const ScenarioConfig& config, const Truth& truth, std::uint64_t seed) {
  const CounterRng rng(seed);
  const std::int64_t ticks = config.ticks();
  const double dt = 1.0 / config.rates.imu;
  const ImuErrorModel& imu_model = config.sensors.imu;
  const ImuNoise psd = imu_model.psd();
  const double gyro_sigma = std::sqrt(psd.gyro_psd / dt);
  const double accel_sigma = std::sqrt(psd.accel_psd / dt);
  const GnssErrorModel& gm = config.sensors.gnss;
  const int gnss_stride = config.stride(config.rates.gnss);
  const double gnss_dt = gnss_stride * dt;
  const double phi = std::exp(-gnss_dt / gm.bias_tau);
  const double drive = gm.bias_sigma * std::sqrt(1.0 - phi * phi);

  SensorData data;
  for (std::size_t v = 0; v < truth.vehicles.size(); ++v) {
    const TruthTrajectory& traj = truth.vehicles[v];
    const std::uint64_t key = traj.id;
    VehicleSensors s;
    s.id = traj.id;
    s.bias.gyro = imu_model.gyro_bias_rad() * normal3(rng, key, Stream::gyro_bias, 0);
    s.bias.accel = imu_model.accel_bias * normal3(rng, key, Stream::accel_bias, 0);

    if (config.sensors.initial_error) {
      const InitialSigma& is = config.filter.initial;
      const Vector3d a = normal3(rng, key, Stream::initial_error, 0);
      const Vector3d vel = normal3(rng, key, Stream::initial_error, 1);
      const Vector3d pos = normal3(rng, key, Stream::initial_error, 2);
      s.initial_error.segment<3>(state::attitude) =
          Vector3d(is.roll_pitch_deg * a(0), is.roll_pitch_deg * a(1), is.yaw_deg * a(2)) * kDeg;
      s.initial_error.segment<3>(state::velocity) = is.velocity * vel;
      s.initial_error.segment<3>(state::position) = ned_to_geodetic_delta<double>(
          Vector3d(is.position * pos(0), is.position * pos(1), is.height * pos(2)), traj.nav.front().position);
    }

    s.imu.reserve(ticks);
    for (std::int64_t k = 0; k < ticks; ++k) {
      ImuSample sample = ideal_imu(traj.nav[k], traj.nav[k + 1]);
      sample.gyro += s.bias.gyro + gyro_sigma * normal3(rng, key, Stream::gyro_noise, k);
      sample.accel += s.bias.accel + accel_sigma * normal3(rng, key, Stream::accel_noise, k);
      s.imu.push_back(sample);
    }

    Vector3d bias = gm.bias_sigma * normal3(rng, key, Stream::gnss_bias, 0);
    for (std::int64_t k = 0, m = 0; k <= ticks; k += gnss_stride, ++m) {
      if (m > 0) bias = phi * bias + drive * normal3(rng, key, Stream::gnss_bias, m);
      const Vector2d p = traj.planar[k];
      const Vector3d error = bias + gm.white_position * normal3(rng, key, Stream::gnss_position, m);
      GnssFix fix;
      fix.timestamp = config.tick_time(k);
      fix.position = geodetic_from_ned<double>(config.origin, Vector3d(Vector3d(p(0), p(1), 0.0) + error));
      fix.velocity = traj.nav[k].velocity + gm.white_velocity * normal3(rng, key, Stream::gnss_velocity, m);
      s.gnss.push_back(fix);
    }
    data.vehicles.push_back(std::move(s));
  }

  // First-stopped flags from truth speed, position and same-lane occupancy.
  for (std::size_t v = 0; v < truth.vehicles.size(); ++v) {
    const VehiclePlan& plan = truth.plans[v];
    const StopLineMapEntry& entry = config.map[plan.entry].entry;
    std::vector<std::size_t> lane;
    for (std::size_t o = 0; o < truth.plans.size(); ++o)
      if (o != v && truth.plans[o].entry == plan.entry) lane.push_back(o);
    auto& flags = data.vehicles[v].first_stopped;
    flags.resize(ticks + 1);
    std::vector<Vector2d> occupancy(lane.size());
    for (std::int64_t k = 0; k <= ticks; ++k) {
      for (std::size_t i = 0; i < lane.size(); ++i) occupancy[i] = truth.vehicles[lane[i]].planar[k];
      const double speed = truth.vehicles[v].nav[k].velocity.head<2>().norm();
      flags[k] = detect_first_stopped(speed, truth.vehicles[v].planar[k], entry, occupancy,
                                      config.filter.detection);
    }
  }

  // Two-way ranges per linked pair, ordered by id.
  std::vector<std::size_t> order(truth.vehicles.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return truth.vehicles[a].id < truth.vehicles[b].id; });
  for (std::int64_t k = 0; k <= ticks; ++k) {
    if (!is_range_tick(config, k)) continue;
    for (std::size_t x = 0; x < order.size(); ++x) {
      for (std::size_t y = x + 1; y < order.size(); ++y) {
        const std::size_t a = order[x];
        const std::size_t b = order[y];
        if (!linked(config, truth, a, b, k)) continue;
        const VehicleId ia = truth.vehicles[a].id;
        const VehicleId ib = truth.vehicles[b].id;
        const double d = (truth.vehicles[a].planar[k] - truth.vehicles[b].planar[k]).norm() +
                         config.sensors.range_sigma * rng.normal(pair_key(ia, ib), Stream::range, k, 0);
        RangeMeasurement m;
        m.from = ia;
        m.to = ib;
        m.distance = std::max(0.0, d);
        m.timestamp = config.tick_time(k);
        m.sigma = config.filter.range_sigma;
        data.ranges.push_back({k, m});
      }
    }
  }
  return data;
}

std::vector<Event> event_sequence(const ScenarioConfig& config, const SensorData& data) {
  std::vector<Event> events;
  const std::int64_t ticks = config.ticks();
  std::vector<std::size_t> order(data.vehicles.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return data.vehicles[a].id < data.vehicles[b].id; });
  std::map<VehicleId, std::uint32_t> index_of;
  for (std::size_t i = 0; i < data.vehicles.size(); ++i) index_of[data.vehicles[i].id] = static_cast<std::uint32_t>(i);

  const int gnss_stride = config.stride(config.rates.gnss);
  std::size_t next_range = 0;
  for (std::int64_t k = 0; k <= ticks; ++k) {
    if (k > 0)
      for (std::size_t v : order) events.push_back({k, EventKind::imu, static_cast<std::uint32_t>(v), 0});
    if (is_gnss_tick(config, k))
      for (std::size_t v : order)
        events.push_back({k, EventKind::gnss, static_cast<std::uint32_t>(v), static_cast<std::uint32_t>(k / gnss_stride)});
    if (is_beacon_tick(config, k))
      for (std::size_t v : order) events.push_back({k, EventKind::beacon, static_cast<std::uint32_t>(v), 0});
    while (next_range < data.ranges.size() && data.ranges[next_range].tick == k) {
      const auto& r = data.ranges[next_range];
      events.push_back({k, EventKind::range, index_of.at(r.measurement.from), static_cast<std::uint32_t>(next_range)});
      ++next_range;
    }
  }
  return events;
}

}  // namespace cin::sim
