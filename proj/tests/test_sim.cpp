#include "cin/config_error.hpp"
#include "cin/sim/runner.hpp"

#include <doctest.h>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <set>

using namespace cin;
using namespace cin::sim;
using nlohmann::json;

namespace {

json base_doc() {
  return json::parse(R"({
    "seed": 3,
    "duration": 30,
    "origin": {"lat_deg": 39.96, "lon_deg": 116.35, "height": 50.0},
    "map": {"layout": {"heading_deg": 17.0}},
    "light": {"phases": [{"main": "red", "duration": 20}, {"main": "green", "duration": 1000}]},
    "vehicles": [{"id": 0, "entry": 0, "start_distance": 40}]
  })");
}

json noiseless(json doc) {
  doc["sensors"] = json::parse(R"({
    "imu": {"gyro_arw_deg_per_sqrt_h": 0, "accel_vrw_mps_per_sqrt_h": 0, "gyro_bias_deg_per_h": 0,
            "accel_bias_mps2": 0},
    "gnss": {"white_position": 0, "white_velocity": 0, "bias_sigma": 0},
    "range_sigma": 0,
    "initial_error": false
  })");
  // The filter keeps nonzero noise so the update stays well posed.
  doc["filter"] = json::parse(R"({
    "imu": {"gyro_arw_deg_per_sqrt_h": 0.3, "accel_vrw_mps_per_sqrt_h": 0.05, "gyro_bias_deg_per_h": 10,
            "accel_bias_mps2": 0.01}
  })");
  return doc;
}

std::string config_error_location(const json& doc) {
  try {
    scenario_from_json(doc);
  } catch (const ConfigError& e) {
    return e.location();
  }
  return "<no error>";
}

}  // namespace

TEST_CASE("a single vehicle at a red light stops with its head m_xb before the line") {
  const ScenarioConfig c = scenario_from_json(base_doc());
  const auto plans = plan_vehicles(c);
  REQUIRE(plans.size() == 1);
  REQUIRE(plans[0].stops);
  CHECK(plans[0].queue_index == 0);
  const StopLineMapEntry& entry = c.map[plans[0].entry].entry;
  CHECK(std::abs(plans[0].stopped_head_distance(entry, entry.prior.l0) - entry.prior.m_xb) <= 1e-6);
}

TEST_CASE("green throughout keeps every vehicle at cruise speed") {
  json doc = base_doc();
  doc["light"] = json::parse(R"({"phases": [{"main": "green", "duration": 1000}]})");
  // The cross road is red while the main road is green; main-road traffic only.
  doc["vehicles"] = json::parse(R"([{"id": 0, "entry": 0, "start_distance": 40},
                                    {"id": 1, "entry": 2, "start_distance": 90, "cruise": 6}])");
  const ScenarioConfig c = scenario_from_json(doc);
  const auto plans = plan_vehicles(c);
  for (std::size_t v = 0; v < plans.size(); ++v) {
    CHECK_FALSE(plans[v].stops);
    const double cruise = c.vehicles[v].cruise > 0 ? c.vehicles[v].cruise : c.kinematics.cruise;
    for (std::int64_t k = 0; k <= c.ticks(); k += 7) {
      CHECK(plans[v].profile.speed(c.tick_time(k)) >= cruise - 1e-12);
    }
  }
}

TEST_CASE("a two-vehicle queue rests with the configured gap") {
  json doc = base_doc();
  doc["vehicles"] = json::parse(R"([{"id": 0, "entry": 0, "start_distance": 40},
                                    {"id": 1, "entry": 0, "start_distance": 55}])");
  const ScenarioConfig c = scenario_from_json(doc);
  const auto plans = plan_vehicles(c);
  REQUIRE(plans[1].stops);
  CHECK(plans[1].queue_index == 1);
  const double t = std::max(plans[0].stop_time, plans[1].stop_time) + 0.5;
  const double spacing = (plans[0].planar(t) - plans[1].planar(t)).norm();
  CHECK(std::abs(spacing - (c.kinematics.vehicle_length + c.kinematics.queue_gap)) <= 1e-6);
}

TEST_CASE("stopping beyond the maximum deceleration is a config error") {
  json doc = base_doc();
  // Red from t = 0 and 5 m to go at 8 m/s needs 6.4 m/s^2.
  doc["vehicles"] = json::parse(R"([{"id": 0, "entry": 0, "start_distance": 5}])");
  CHECK_THROWS_AS(generate_truth(scenario_from_json(doc)), ConfigError);
}

TEST_CASE("truth velocity matches the position difference at sample midpoints") {
  json doc = base_doc();
  doc["vehicles"] = json::parse(R"([{"id": 0, "entry": 0, "start_distance": 40},
                                    {"id": 1, "entry": 0, "start_distance": 55},
                                    {"id": 2, "entry": 4, "start_distance": 120}])");
  const ScenarioConfig c = scenario_from_json(doc);
  const Truth truth = generate_truth(c);
  const double dt = 1.0 / c.rates.imu;
  std::size_t checked = 0;
  for (std::size_t v = 0; v < truth.vehicles.size(); ++v) {
    std::set<std::int64_t> kinks;
    for (const auto& seg : truth.plans[v].profile.segments()) kinks.insert(static_cast<std::int64_t>(std::floor(seg.t0 / dt)));
    const auto& tr = truth.vehicles[v];
    for (std::int64_t k = 0; k + 1 <= c.ticks(); ++k) {
      if (kinks.count(k)) continue;
      const Vector3d dp = ned_from_geodetic(c.origin, tr.nav[k + 1].position) - ned_from_geodetic(c.origin, tr.nav[k].position);
      const Vector3d v_mid = 0.5 * (tr.nav[k].velocity + tr.nav[k + 1].velocity);
      CHECK((dp / dt - v_mid).norm() <= 1e-6);
      ++checked;
    }
  }
  CHECK(checked > 3 * static_cast<std::size_t>(c.ticks()) - 50);
}

TEST_CASE("noise-free sensors reproduce truth") {
  json doc = noiseless(base_doc());
  doc["vehicles"] = json::parse(R"([{"id": 0, "entry": 0, "start_distance": 40},
                                    {"id": 1, "entry": 2, "start_distance": 50}])");
  const ScenarioConfig c = scenario_from_json(doc);
  const Truth truth = generate_truth(c);
  const SensorData data = synthesize_sensors(c, truth, 9);
  const int stride = c.stride(c.rates.gnss);
  for (std::size_t v = 0; v < data.vehicles.size(); ++v) {
    for (std::size_t m = 0; m < data.vehicles[v].gnss.size(); ++m) {
      const GnssFix& fix = data.vehicles[v].gnss[m];
      const NavSolution& ref = truth.vehicles[v].nav[m * stride];
      CHECK(fix.position.latitude == ref.position.latitude);
      CHECK(fix.position.longitude == ref.position.longitude);
      CHECK(fix.position.height == ref.position.height);
      CHECK(fix.velocity == ref.velocity);
    }
  }
  REQUIRE_FALSE(data.ranges.empty());
  for (const auto& r : data.ranges) {
    const Vector2d d = truth.vehicles[r.measurement.from].planar[r.tick] - truth.vehicles[r.measurement.to].planar[r.tick];
    CHECK(r.measurement.distance == d.norm());
  }
}

TEST_CASE("vehicles beyond comm range never produce ranges") {
  json doc = base_doc();
  doc["comm_range"] = 150;
  doc["light"] = json::parse(R"({"phases": [{"main": "green", "duration": 1000}]})");
  doc["vehicles"] = json::parse(R"([{"id": 0, "entry": 0, "start_distance": 10},
                                    {"id": 1, "entry": 0, "start_distance": 310}])");
  const ScenarioConfig c = scenario_from_json(doc);
  const Truth truth = generate_truth(c);
  REQUIRE((truth.vehicles[0].planar[0] - truth.vehicles[1].planar[0]).norm() == doctest::Approx(300.0));
  CHECK(synthesize_sensors(c, truth, 1).ranges.empty());
}

TEST_CASE("event counts match the configured rates every second over 600 s") {
  json doc = base_doc();
  doc["duration"] = 600;
  doc["light"] = json::parse(R"({"phases": [{"main": "green", "duration": 1000}]})");
  doc["vehicles"] = json::parse(R"([{"id": 0, "entry": 0, "start_distance": 10},
                                    {"id": 1, "entry": 0, "start_distance": 40}])");
  for (const char* decimation : {"beacon", "none"}) {
    CAPTURE(decimation);
    doc["range_decimation"] = decimation;
    const ScenarioConfig c = scenario_from_json(doc);
    const Truth truth = generate_truth(c);
    const SensorData data = synthesize_sensors(c, truth, 5);
    const auto events = event_sequence(c, data);
    const int range_rate = std::string(decimation) == "beacon" ? c.rates.beacon : c.rates.range;
    const std::int64_t per_second = c.rates.imu;
    std::vector<std::array<int, 4>> counts(600, std::array<int, 4>{});
    for (const Event& e : events) {
      if (e.tick == 0) continue;  // events at t = 0 belong to no full (t-1, t] second
      const std::int64_t second = (e.tick - 1) / per_second;
      if (second < 600) ++counts[second][static_cast<int>(e.kind)];
    }
    bool ok = true;
    for (const auto& n : counts) {
      ok = ok && n[0] == 2 * c.rates.imu && n[1] == 2 * c.rates.gnss && n[2] == 2 * c.rates.beacon &&
           n[3] == range_rate;
    }
    CHECK(ok);
  }
}

TEST_CASE("events are ordered by tick, kind and vehicle") {
  json doc = base_doc();
  doc["vehicles"] = json::parse(R"([{"id": 0, "entry": 0, "start_distance": 40},
                                    {"id": 1, "entry": 2, "start_distance": 50},
                                    {"id": 2, "entry": 4, "start_distance": 60}])");
  const ScenarioConfig c = scenario_from_json(doc);
  const Truth truth = generate_truth(c);
  const auto events = event_sequence(c, synthesize_sensors(c, truth, 2));
  for (std::size_t i = 1; i < events.size(); ++i) {
    const Event& a = events[i - 1];
    const Event& b = events[i];
    CHECK(std::tie(a.tick, a.kind) <= std::tie(b.tick, b.kind));
    if (a.tick == b.tick && a.kind == b.kind && a.kind != EventKind::range) CHECK(a.vehicle < b.vehicle);
  }
}

TEST_CASE("a vehicle's noise does not depend on which other vehicles exist") {
  json doc = base_doc();
  doc["vehicles"] = json::parse(R"([{"id": 7, "entry": 0, "start_distance": 40}])");
  const ScenarioConfig one = scenario_from_json(doc);
  doc["vehicles"] = json::parse(R"([{"id": 2, "entry": 2, "start_distance": 50},
                                    {"id": 7, "entry": 0, "start_distance": 40}])");
  const ScenarioConfig two = scenario_from_json(doc);
  const SensorData a = synthesize_sensors(one, generate_truth(one), 11);
  const SensorData b = synthesize_sensors(two, generate_truth(two), 11);
  const VehicleSensors& sa = a.vehicles[0];
  const VehicleSensors& sb = b.vehicles[1];
  REQUIRE(sa.imu.size() == sb.imu.size());
  bool same = sa.initial_error == sb.initial_error;
  for (std::size_t k = 0; k < sa.imu.size(); ++k) same = same && sa.imu[k].gyro == sb.imu[k].gyro && sa.imu[k].accel == sb.imu[k].accel;
  for (std::size_t m = 0; m < sa.gnss.size(); ++m) same = same && sa.gnss[m].position.latitude == sb.gnss[m].position.latitude;
  CHECK(same);
}

TEST_CASE("noise-free runs track truth") {
  json doc = noiseless(base_doc());
  doc["vehicles"] = json::parse(R"([{"id": 0, "entry": 0, "start_distance": 40},
                                    {"id": 1, "entry": 0, "start_distance": 55},
                                    {"id": 2, "entry": 2, "start_distance": 50}])");
  const ScenarioConfig c = scenario_from_json(doc);
  const ScenarioResult r = run_scenario(c);
  for (const auto& run : r.runs) {
    const std::string method = to_string(run.method);
    CAPTURE(method);
    double worst = 0;
    for (const auto& trace : run.traces)
      for (const auto& s : trace.samples) worst = std::max(worst, s.error);
    // The stop-line rows assume rest once speed < v_stop; the vehicle is then
    // at most v_stop^2 / (2 brake) short of its rest point.
    const double v_stop = c.filter.detection.v_stop;
    const double bound = uses_stopline(run.method) ? v_stop * v_stop / (2 * c.kinematics.brake) : 1e-3;
    CHECK(worst <= bound);
    CHECK(run.diagnostics.rejected == 0);
  }
}

TEST_CASE("identical seeds replay bit for bit") {
  json doc = base_doc();
  doc["vehicles"] = json::parse(R"([{"id": 0, "entry": 0, "start_distance": 40},
                                    {"id": 1, "entry": 2, "start_distance": 50}])");
  const ScenarioConfig c = scenario_from_json(doc);
  const ScenarioResult a = run_scenario(c, kAllMethods, 17);
  const ScenarioResult b = run_scenario(c, kAllMethods, 17);
  bool same = true;
  for (std::size_t m = 0; m < a.runs.size(); ++m)
    for (std::size_t v = 0; v < a.runs[m].traces.size(); ++v)
      for (std::size_t k = 0; k < a.runs[m].traces[v].samples.size(); ++k) {
        const auto& x = a.runs[m].traces[v].samples[k];
        const auto& y = b.runs[m].traces[v].samples[k];
        same = same && x.estimate == y.estimate && x.nees == y.nees && x.tag == y.tag;
      }
  CHECK(same);
  const ScenarioResult other = run_scenario(c, kAllMethods, 18);
  CHECK(other.runs[0].traces[0].samples.back().estimate != a.runs[0].traces[0].samples.back().estimate);
}

TEST_CASE("SL-CP equals CP bit for bit before the first stop") {
  const ScenarioConfig c = load_scenario(CIN_SOURCE_DIR "/configs/scenario1.json");
  const Method methods[] = {Method::cp, Method::sl_cp};
  const ScenarioResult r = run_scenario(c, methods, 4);
  REQUIRE(r.phases.front().name == "pre_stop");
  const double t_stop = r.phases.front().end;
  std::size_t compared = 0;
  bool same = true;
  for (std::size_t v = 0; v < r.runs[0].traces.size(); ++v) {
    const auto& a = r.runs[0].traces[v].samples;
    const auto& b = r.runs[1].traces[v].samples;
    for (std::size_t k = 0; k < a.size() && a[k].t < t_stop; ++k) {
      same = same && a[k].estimate == b[k].estimate && a[k].nees == b[k].nees;
      ++compared;
    }
  }
  CHECK(compared > 0);
  CHECK(same);
}

TEST_CASE("the first-stopped role hands over on the next red") {
  const ScenarioConfig c = load_scenario(CIN_SOURCE_DIR "/configs/scenario2.json");
  const Truth truth = generate_truth(c);
  const SensorData data = synthesize_sensors(c, truth, c.seed);
  const auto events = role_events(c, data);
  const TrafficLight light(c.light);
  std::vector<VehicleId> onsets;
  for (const RoleEvent& e : events) {
    if (e.first_stopped) onsets.push_back(e.id);
  }
  // Vehicle 2 arrives during the second red on the lane vehicle 0 vacated.
  REQUIRE(std::find(onsets.begin(), onsets.end(), 0u) != onsets.end());
  REQUIRE(std::find(onsets.begin(), onsets.end(), 2u) != onsets.end());
  double off0 = -1;
  double on2 = -1;
  for (const RoleEvent& e : events) {
    if (e.id == 0 && !e.first_stopped) off0 = e.t;
    if (e.id == 2 && e.first_stopped) on2 = e.t;
  }
  CHECK(off0 > 0);
  CHECK(on2 > off0);
  CHECK(light.green(true, off0 - 1.0 / c.rates.imu) == true);
  CHECK(light.green(true, on2) == false);
  // Vehicle 1 queues behind vehicle 0 and never holds the role.
  CHECK(std::find(onsets.begin(), onsets.end(), 1u) == onsets.end());
  // The flag matches the truth-side rule tick by tick.
  const std::size_t i2 = 2;
  const std::int64_t k_on = static_cast<std::int64_t>(std::llround(on2 * c.rates.imu));
  CHECK(data.vehicles[i2].first_stopped[k_on] == 1);
  CHECK(data.vehicles[i2].first_stopped[k_on - 1] == 0);
  CHECK(truth.plans[i2].profile.speed(c.tick_time(k_on)) < c.filter.detection.v_stop);
  CHECK(truth.plans[i2].profile.speed(c.tick_time(k_on - 1)) >= c.filter.detection.v_stop);
}

TEST_CASE("phases partition the run") {
  for (const char* name : {"/configs/scenario1.json", "/configs/scenario2.json", "/configs/consistency.json"}) {
    const ScenarioConfig c = load_scenario(std::string(CIN_SOURCE_DIR) + name);
    const Truth truth = generate_truth(c);
    const SensorData data = synthesize_sensors(c, truth, c.seed);
    const auto phases = derive_phases(c, truth, data);
    REQUIRE_FALSE(phases.empty());
    CHECK(phases.front().start == 0.0);
    CHECK(phases.back().end == c.duration);
    for (std::size_t i = 0; i < phases.size(); ++i) {
      CHECK(phases[i].end > phases[i].start);
      if (i > 0) CHECK(phases[i].start == phases[i - 1].end);
    }
  }
}

TEST_CASE("config errors carry the offending field") {
  json doc = base_doc();
  doc["vehicles"][0]["entry"] = 99;
  CHECK(config_error_location(doc) == "/vehicles/0/entry");

  doc = base_doc();
  doc["rates"] = {{"imu", 100}, {"gnss", 3}};
  CHECK(config_error_location(doc) == "/rates/gnss");

  doc = base_doc();
  doc["light"]["phases"][1]["main"] = "amber";
  CHECK(config_error_location(doc) == "/light/phases/1/main");

  doc = base_doc();
  doc.erase("vehicles");
  CHECK(config_error_location(doc) == "/vehicles");

  doc = base_doc();
  doc["comm_range"] = -1;
  CHECK(config_error_location(doc) == "/comm_range");

  doc = base_doc();
  doc["filter"] = {{"gate_alpha", 2.0}};
  CHECK(config_error_location(doc) == "/filter/gate_alpha");
}
