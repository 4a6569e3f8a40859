#include "cin/sim/runner.hpp"

#include "cin/log.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace cin::sim {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

struct Agent {
  NavSolution nav;
  FilterState15 fs;
  ImuBiases biases;
  NeighborTable table;
};

Matrix15d initial_covariance(const FilterSettings& f, const Geodetic& at) {
  using namespace state;
  const Vector2d scale = horizontal_scale(at);
  const auto sq = [](double x) { return x * x; };
  Matrix15d P = Matrix15d::Zero();
  P(attitude, attitude) = P(attitude + 1, attitude + 1) = sq(f.initial.roll_pitch_deg * kDeg);
  P(attitude + 2, attitude + 2) = sq(f.initial.yaw_deg * kDeg);
  for (int i = 0; i < 3; ++i) P(velocity + i, velocity + i) = sq(f.initial.velocity);
  P(latitude, latitude) = sq(f.initial.position / scale(0));
  P(longitude, longitude) = sq(f.initial.position / scale(1));
  P(height, height) = sq(f.initial.height);
  for (int i = 0; i < 3; ++i) {
    P(gyro_bias + i, gyro_bias + i) = sq(f.imu.gyro_bias_rad());
    P(accel_bias + i, accel_bias + i) = sq(f.imu.accel_bias);
  }
  return P;
}

double horizontal_nees(const Vector2d& error, const Matrix15d& P, const Geodetic& at) {
  const Matrix2d Ph = horizontal_position_covariance(P, at);
  const Eigen::LDLT<Matrix2d> ldlt(Ph);
  if (ldlt.info() != Eigen::Success || !(Ph.determinant() > 0)) return std::numeric_limits<double>::infinity();
  return error.dot(ldlt.solve(error));
}

}  // namespace

const char* to_string(Method m) {
  switch (m) {
    case Method::sp: return "sp";
    case Method::sl_sp: return "sl-sp";
    case Method::cp: return "cp";
    case Method::sl_cp: return "sl-cp";
  }
  return "?";
}

std::optional<Method> parse_method(std::string_view text) {
  for (Method m : kAllMethods)
    if (text == to_string(m)) return m;
  return std::nullopt;
}

std::vector<RoleEvent> role_events(const ScenarioConfig& config, const SensorData& data) {
  std::vector<RoleEvent> events;
  for (const auto& v : data.vehicles) {
    bool previous = false;
    for (std::size_t k = 0; k < v.first_stopped.size(); ++k) {
      const bool now = v.first_stopped[k] != 0;
      if (now != previous) events.push_back({config.tick_time(static_cast<std::int64_t>(k)), v.id, now});
      previous = now;
    }
  }
  std::sort(events.begin(), events.end(), [](const RoleEvent& a, const RoleEvent& b) {
    return a.t != b.t ? a.t < b.t : a.id < b.id;
  });
  return events;
}

std::vector<Phase> derive_phases(const ScenarioConfig& config, const Truth& truth, const SensorData& data,
                                 std::optional<VehicleId>* first_vehicle) {
  const double end = config.duration;
  std::optional<std::size_t> first;
  std::int64_t onset = std::numeric_limits<std::int64_t>::max();
  for (std::size_t v = 0; v < data.vehicles.size(); ++v) {
    const auto& flags = data.vehicles[v].first_stopped;
    const auto it = std::find(flags.begin(), flags.end(), 1);
    if (it == flags.end()) continue;
    const std::int64_t k = it - flags.begin();
    if (k < onset || (k == onset && data.vehicles[v].id < data.vehicles[*first].id)) {
      onset = k;
      first = v;
    }
  }
  if (first_vehicle) *first_vehicle = first ? std::optional<VehicleId>(data.vehicles[*first].id) : std::nullopt;

  std::vector<Phase> phases;
  auto add = [&](const char* name, double a, double b) {
    a = std::min(a, end);
    b = std::min(b, end);
    if (b > a) phases.push_back({name, a, b});
  };
  if (!first) {
    add("pre_stop", 0.0, end);
    return phases;
  }
  const double t_s1 = config.tick_time(onset);
  const TrafficLight light(config.light);
  const bool main_road = config.map[truth.plans[*first].entry].main_road;
  const double t_green = std::max(t_s1, light.next_green(main_road, t_s1));
  add("pre_stop", 0.0, t_s1);
  add("stopped", t_s1, t_green);
  add("after_green", t_green, t_green + config.after_green_window);
  add("tail", t_green + config.after_green_window, end);
  return phases;
}

MethodRun run_method(const ScenarioConfig& config, const Truth& truth, const SensorData& data,
                     const std::vector<Event>& events, Method method) {
  const std::size_t n = data.vehicles.size();
  const double dt = 1.0 / config.rates.imu;
  const FilterSettings& fset = config.filter;
  const Matrix15d Q = process_noise(fset.imu.psd(), dt);
  const int trace_stride = config.stride(config.rates.trace);
  const std::int64_t ticks = config.ticks();

  std::vector<Agent> agents(n);
  std::vector<std::size_t> order(n);
  MethodRun run;
  run.method = method;
  run.traces.resize(n);
  for (std::size_t v = 0; v < n; ++v) {
    Agent& a = agents[v];
    a.nav = inject_error(truth.vehicles[v].nav.front(), data.vehicles[v].initial_error);
    a.fs.P = initial_covariance(fset, a.nav.position);
    a.table = NeighborTable(fset.v2v.staleness);
    run.traces[v].id = data.vehicles[v].id;
    run.traces[v].samples.reserve(static_cast<std::size_t>(ticks / trace_stride + 1));
    order[v] = v;
  }
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return data.vehicles[a].id < data.vehicles[b].id; });

  std::vector<const GnssFix*> pending_gnss(n, nullptr);
  std::vector<UpdateCase> tags(n, UpdateCase::prediction_only);

  auto update_vehicle = [&](std::size_t v, std::int64_t tick) {
    Agent& a = agents[v];
    const double t = config.tick_time(tick);
    std::optional<Observation15> self;
    if (pending_gnss[v]) {
      self = gnss_observation(a.nav, *pending_gnss[v], fset.gnss);
      if (uses_stopline(method) && data.vehicles[v].first_stopped[tick]) {
        const StopLineMapEntry& entry = config.map[truth.plans[v].entry].entry;
        const Observation15 parts[] = {build_stopline_observation(a.nav, entry, entry.prior, config.origin),
                                       *self};
        self = stack<double, kErrorStates>(parts);
        self->kind = ObservationKind::sp_sl;
      }
    }
    std::vector<Observation15> neighbor;
    if (cooperative(method)) {
      a.table.evict(t);
      for (const auto& [id, entry] : a.table.entries()) {
        if (!entry.range || !entry.beacon || entry.range->timestamp != t) continue;
        try {
          Observation15 obs = range_observation(a.nav, config.origin, *entry.beacon, *entry.range, fset.v2v);
          if (fset.gate_alpha) {
            const Eigen::VectorXd nu = innovation(a.fs, obs);
            const Eigen::MatrixXd S = innovation_covariance(a.fs, obs);
            if (!gate<double>(nu, S, *fset.gate_alpha)) {
              ++run.diagnostics.gated_rows;
              log::debug("t=", t, " vehicle ", data.vehicles[v].id, ": gated range row from ", id);
              continue;
            }
          }
          neighbor.push_back(std::move(obs));
        } catch (const std::runtime_error& e) {
          ++run.diagnostics.skipped_ranges;
          log::debug("t=", t, " vehicle ", data.vehicles[v].id, ": ", e.what());
        }
      }
    }
    const UpdateCase c = select_case(self.has_value(), neighbor.size());
    tags[v] = c;
    const std::optional<Observation15> obs = assemble_update(c, self, neighbor);
    if (!obs) return;
    try {
      a.fs = update(a.fs, *obs);
    } catch (const UpdateRejected& e) {
      ++run.diagnostics.rejected;
      log::warn("t=", t, " vehicle ", data.vehicles[v].id, ": update rejected (", e.what(), ")");
      return;
    }
    ++run.diagnostics.updates;
    const FeedbackResult fb = apply_feedback(a.nav, a.fs.x, a.biases);
    a.nav = fb.nav;
    a.biases = fb.biases;
    a.fs.x.setZero();
  };

  auto finish_tick = [&](std::int64_t tick) {
    for (std::size_t v : order) update_vehicle(v, tick);
    if (tick % trace_stride == 0 && tick < ticks) {
      for (std::size_t v = 0; v < n; ++v) {
        const Agent& a = agents[v];
        TraceSample s;
        s.t = config.tick_time(tick);
        s.truth = truth.vehicles[v].planar[tick];
        s.estimate = ned_from_geodetic(config.origin, a.nav.position).head<2>();
        s.error = (s.estimate - s.truth).norm();
        s.tag = tags[v];
        s.nees = horizontal_nees(s.estimate - s.truth, a.fs.P, a.nav.position);
        run.traces[v].samples.push_back(s);
      }
    }
    std::fill(pending_gnss.begin(), pending_gnss.end(), nullptr);
    std::fill(tags.begin(), tags.end(), UpdateCase::prediction_only);
  };

  std::int64_t current = 0;
  for (const Event& e : events) {
    if (e.tick != current) {
      finish_tick(current);
      current = e.tick;
    }
    Agent& a = agents[e.vehicle];
    const double t = config.tick_time(e.tick);
    switch (e.kind) {
      case EventKind::imu: {
        const ImuSample imu = correct_imu(data.vehicles[e.vehicle].imu[e.tick - 1], a.biases);
        const Matrix15d F = build_transition(a.nav, imu, dt);
        a.nav = mechanize(a.nav, imu, dt);
        a.nav.timestamp = t;
        a.fs = predict<double, kErrorStates>(a.fs, F, Q);
        a.fs.timestamp = t;
        break;
      }
      case EventKind::gnss:
        pending_gnss[e.vehicle] = &data.vehicles[e.vehicle].gnss[e.index];
        break;
      case EventKind::beacon: {
        if (!cooperative(method)) break;
        const BeaconPacket packet = decode_beacon(encode_beacon(emit_beacon(
            data.vehicles[e.vehicle].id, a.fs, a.nav, config.origin, data.vehicles[e.vehicle].first_stopped[e.tick])));
        for (std::size_t r : order) {
          if (r != e.vehicle && linked(config, truth, e.vehicle, r, e.tick)) agents[r].table.record(packet);
        }
        break;
      }
      case EventKind::range: {
        if (!cooperative(method)) break;
        const RangeMeasurement& m = data.ranges[e.index].measurement;
        for (std::size_t v = 0; v < n; ++v) {
          if (data.vehicles[v].id == m.from || data.vehicles[v].id == m.to) agents[v].table.record(m, data.vehicles[v].id);
        }
        break;
      }
    }
  }
  finish_tick(current);
  return run;
}

ScenarioResult run_scenario(const ScenarioConfig& config, std::span<const Method> methods,
                            std::optional<std::uint64_t> seed) {
  ScenarioResult result;
  result.seed = seed.value_or(config.seed);
  result.duration = config.duration;
  const Truth truth = generate_truth(config);
  const SensorData data = synthesize_sensors(config, truth, result.seed);
  const std::vector<Event> events = event_sequence(config, data);
  result.phases = derive_phases(config, truth, data, &result.first_stopped_vehicle);
  result.roles = role_events(config, data);
  for (Method m : methods) {
    result.runs.push_back(run_method(config, truth, data, events, m));
    const Diagnostics& d = result.runs.back().diagnostics;
    log::info("seed ", result.seed, " ", to_string(m), ": ", d.updates, " updates, ", d.rejected, " rejected, ",
              d.gated_rows, " gated rows");
  }
  return result;
}

}  // namespace cin::sim
