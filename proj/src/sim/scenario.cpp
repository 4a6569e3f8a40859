#include "cin/sim/scenario.hpp"

#include "cin/config_error.hpp"
#include "json_util.hpp"

#include <cmath>
#include <filesystem>
#include <numbers>

namespace cin::sim {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

ImuErrorModel imu_from_json(const JsonReader& r, const ImuErrorModel& base) {
  ImuErrorModel m;
  m.gyro_arw = r.non_negative("gyro_arw_deg_per_sqrt_h", base.gyro_arw);
  m.accel_vrw = r.non_negative("accel_vrw_mps_per_sqrt_h", base.accel_vrw);
  m.gyro_bias = r.non_negative("gyro_bias_deg_per_h", base.gyro_bias);
  m.accel_bias = r.non_negative("accel_bias_mps2", base.accel_bias);
  return m;
}

std::vector<Approach> map_from_entries(const nlohmann::json& doc, const std::string& where) {
  std::vector<StopLineMapEntry> entries;
  try {
    entries = stopline_map_from_json(doc);
  } catch (const ConfigError& e) {
    throw ConfigError(where + e.location(), e.message());
  }
  const nlohmann::json& list = doc.is_object() ? doc.at("entries") : doc;
  std::vector<Approach> map;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const JsonReader r(list[i], where + "/entries/" + std::to_string(i));
    const std::string road = r.string_or("road", "main");
    if (road != "main" && road != "cross") throw ConfigError(r.child_path("road"), "expected \"main\" or \"cross\"");
    map.push_back({entries[i], road == "main"});
  }
  return map;
}

}  // namespace

ImuNoise ImuErrorModel::psd() const {
  const double arw = gyro_arw * kDeg / 60.0;  // rad/sqrt(s)
  const double vrw = accel_vrw / 60.0;        // m/s/sqrt(s)
  return ImuNoise{arw * arw, vrw * vrw, 0.0, 0.0};
}

double ImuErrorModel::gyro_bias_rad() const { return gyro_bias * kDeg / 3600.0; }

std::int64_t ScenarioConfig::ticks() const {
  return static_cast<std::int64_t>(std::llround(duration * rates.imu));
}

double ScenarioConfig::tick_time(std::int64_t tick) const {
  return static_cast<double>(tick * imu_tick_us()) * 1e-6;
}

int ScenarioConfig::beacon_offset_ticks() const {
  return static_cast<int>(std::llround(beacon_offset * rates.imu));
}

const VehicleSpec* ScenarioConfig::find_vehicle(VehicleId id) const {
  for (const auto& v : vehicles)
    if (v.id == id) return &v;
  return nullptr;
}

std::vector<Approach> generate_layout(const Layout& layout) {
  std::vector<Approach> map;
  const double base = layout.heading_deg * kDeg;
  const double main_half = layout.main_lanes * layout.lane_width;
  const double cross_half = layout.cross_lanes * layout.lane_width;
  struct Spec {
    double heading;
    int lanes;
    double crossing_half;
    bool main;
  };
  const Spec specs[] = {{base, layout.main_lanes, cross_half, true},
                        {base + std::numbers::pi, layout.main_lanes, cross_half, true},
                        {base + std::numbers::pi / 2, layout.cross_lanes, main_half, false},
                        {base - std::numbers::pi / 2, layout.cross_lanes, main_half, false}};
  for (const Spec& s : specs) {
    const Vector2d along(std::cos(s.heading), std::sin(s.heading));
    const Vector2d right(-along(1), along(0));
    const Vector2d stop_point = -(s.crossing_half + layout.setback) * along;
    for (int lane = 0; lane < s.lanes; ++lane) {
      StopLineMapEntry e;
      e.stop_line = LineGeometry::through(stop_point, right);
      e.left_lane_line = LineGeometry::through(lane * layout.lane_width * right, along);
      e.road = RoadFrame<double>::from_angle(s.heading);
      e.approach_side = -along;
      e.lane_side = right;
      e.prior = layout.prior;
      map.push_back({e, s.main});
    }
  }
  return map;
}

void validate(const ScenarioConfig& c) {
  const Rates& r = c.rates;
  if (r.imu <= 0 || 1000000 % r.imu != 0) throw ConfigError("/rates/imu", "must divide 1e6 Hz");
  const std::pair<const char*, int> others[] = {
      {"/rates/gnss", r.gnss}, {"/rates/beacon", r.beacon}, {"/rates/range", r.range}, {"/rates/trace", r.trace}};
  for (const auto& [where, rate] : others) {
    if (rate <= 0 || r.imu % rate != 0) throw ConfigError(where, "must be positive and divide the IMU rate");
  }
  if (!(c.duration > 0)) throw ConfigError("/duration", "must be positive");
  if (!(c.comm_range > 0)) throw ConfigError("/comm_range", "must be positive");
  if (!(c.beacon_offset >= 0) || std::abs(c.beacon_offset * r.imu - c.beacon_offset_ticks()) > 1e-9) {
    throw ConfigError("/beacon_offset", "must be a non-negative multiple of the IMU period");
  }
  if (c.map.empty()) throw ConfigError("/map", "no stop-line entries");
  for (std::size_t i = 0; i < c.map.size(); ++i) {
    try {
      cin::validate(c.map[i].entry);
    } catch (const GeometryError& e) {
      throw ConfigError("/map/entries/" + std::to_string(i), e.what());
    }
  }
  if (c.vehicles.empty()) throw ConfigError("/vehicles", "at least one vehicle required");
  for (std::size_t i = 0; i < c.vehicles.size(); ++i) {
    const auto& v = c.vehicles[i];
    const std::string where = "/vehicles/" + std::to_string(i);
    if (v.entry >= c.map.size()) throw ConfigError(where + "/entry", "no such map entry");
    if (!(v.start_distance >= 0)) throw ConfigError(where + "/start_distance", "must be non-negative");
    for (std::size_t j = 0; j < i; ++j) {
      if (c.vehicles[j].id == v.id) throw ConfigError(where + "/id", "duplicate vehicle id");
    }
  }
  if (c.light.phases.empty()) throw ConfigError("/light/phases", "at least one phase required");
  for (std::size_t i = 0; i < c.light.phases.size(); ++i) {
    if (!(c.light.phases[i].duration > 0)) {
      throw ConfigError("/light/phases/" + std::to_string(i) + "/duration", "must be positive");
    }
  }
  const Kinematics& k = c.kinematics;
  if (!(k.cruise > 0) || !(k.brake > 0) || !(k.max_decel >= k.brake) || !(k.accel > 0) ||
      !(k.queue_gap >= 0) || !(k.vehicle_length > 0) || !(k.reaction >= 0)) {
    throw ConfigError("/kinematics", "speeds and accelerations must be positive, max_decel >= brake");
  }
  for (std::size_t i = 0; i < c.outages.size(); ++i) {
    if (!(c.outages[i].end > c.outages[i].start)) {
      throw ConfigError("/outages/" + std::to_string(i), "end must follow start");
    }
  }
  if (c.filter.gate_alpha && !(*c.filter.gate_alpha > 0 && *c.filter.gate_alpha <= 1)) {
    throw ConfigError("/filter/gate_alpha", "must lie in (0, 1]");
  }
  if (!(c.filter.range_sigma > 0)) throw ConfigError("/filter/range_sigma", "must be positive");
}

ScenarioConfig scenario_from_json(const nlohmann::json& doc, const std::string& base_dir) {
  const JsonReader root(doc, "");
  ScenarioConfig c;
  c.seed = root.unsigned_or("seed", c.seed);
  c.duration = root.positive("duration", c.duration);
  c.comm_range = root.positive("comm_range", c.comm_range);
  c.beacon_offset = root.non_negative("beacon_offset", c.beacon_offset);
  c.after_green_window = root.positive("after_green_window", c.after_green_window);

  if (auto o = root.optional_object("origin")) {
    c.origin.latitude = o->number("lat_deg") * kDeg;
    c.origin.longitude = o->number("lon_deg") * kDeg;
    c.origin.height = o->number_or("height", 0.0);
    if (!c.origin.valid()) throw ConfigError(o->path(), "latitude out of range");
  }

  if (auto r = root.optional_object("rates")) {
    c.rates.imu = static_cast<int>(r->integer_or("imu", c.rates.imu));
    c.rates.gnss = static_cast<int>(r->integer_or("gnss", c.rates.gnss));
    c.rates.beacon = static_cast<int>(r->integer_or("beacon", c.rates.beacon));
    c.rates.range = static_cast<int>(r->integer_or("range", c.rates.range));
    c.rates.trace = static_cast<int>(r->integer_or("trace", c.rates.trace));
  }
  const std::string decimation = root.string_or("range_decimation", "beacon");
  if (decimation == "beacon") {
    c.range_decimation = RangeDecimation::beacon;
  } else if (decimation == "none") {
    c.range_decimation = RangeDecimation::none;
  } else {
    throw ConfigError("/range_decimation", "expected \"beacon\" or \"none\"");
  }

  // Map: generated layout, inline entries or an external map file.
  const JsonReader m = root.object("map");
  if (auto l = m.optional_object("layout")) {
    Layout layout;
    layout.heading_deg = l->number_or("heading_deg", layout.heading_deg);
    layout.main_lanes = static_cast<int>(l->integer_or("main_lanes", layout.main_lanes));
    layout.cross_lanes = static_cast<int>(l->integer_or("cross_lanes", layout.cross_lanes));
    layout.lane_width = l->positive("lane_width", layout.lane_width);
    layout.setback = l->non_negative("setback", layout.setback);
    layout.prior.m_yb = layout.lane_width / 2;
    if (auto p = l->optional_object("priors")) {
      layout.prior.m_xb = p->non_negative("m_xb", layout.prior.m_xb);
      layout.prior.sigma_xb = p->positive("sigma_xb", layout.prior.sigma_xb);
      layout.prior.m_yb = p->non_negative("m_yb", layout.prior.m_yb);
      layout.prior.sigma_yb = p->positive("sigma_yb", layout.prior.sigma_yb);
      layout.prior.l0 = p->non_negative("l0", layout.prior.l0);
    }
    if (layout.main_lanes < 1) throw ConfigError(l->child_path("main_lanes"), "must be at least 1");
    if (layout.cross_lanes < 1) throw ConfigError(l->child_path("cross_lanes"), "must be at least 1");
    c.layout = layout;
    c.map = generate_layout(layout);
  } else if (m.has("entries")) {
    c.map = map_from_entries(doc.at("map"), "/map");
  } else if (m.has("file")) {
    std::filesystem::path p(m.string("file"));
    if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
    c.map = map_from_entries(parse_json_file(p.string()), p.string() + ":");
  } else {
    throw ConfigError("/map", "expected one of layout, entries or file");
  }

  if (auto l = root.optional_object("light")) {
    c.light.phases.clear();
    for (const auto& p : l->objects("phases")) {
      const std::string main = p.string("main");
      if (main != "red" && main != "green") throw ConfigError(p.child_path("main"), "expected \"red\" or \"green\"");
      c.light.phases.push_back({main == "green", p.positive("duration", 1.0)});
    }
    c.light.repeat = l->boolean_or("repeat", false);
  }

  if (auto k = root.optional_object("kinematics")) {
    Kinematics& kin = c.kinematics;
    kin.cruise = k->positive("cruise", kin.cruise);
    kin.brake = k->positive("brake", kin.brake);
    kin.max_decel = k->positive("max_decel", kin.max_decel);
    kin.accel = k->positive("accel", kin.accel);
    kin.queue_gap = k->non_negative("queue_gap", kin.queue_gap);
    kin.vehicle_length = k->positive("vehicle_length", kin.vehicle_length);
    kin.reaction = k->non_negative("reaction", kin.reaction);
  }

  for (const auto& v : root.objects("vehicles")) {
    VehicleSpec spec;
    const std::int64_t id = v.integer("id");
    if (id < 0 || id > 0xffffffffLL) throw ConfigError(v.child_path("id"), "must fit in u32");
    spec.id = static_cast<VehicleId>(id);
    const std::int64_t entry = v.integer("entry");
    if (entry < 0) throw ConfigError(v.child_path("entry"), "must be non-negative");
    spec.entry = static_cast<std::size_t>(entry);
    spec.start_distance = v.non_negative("start_distance", spec.start_distance);
    spec.cruise = v.non_negative("cruise", 0.0);
    c.vehicles.push_back(spec);
  }

  if (root.has("outages")) {
    for (const auto& o : root.objects("outages")) {
      OutageWindow w;
      w.start = o.number("start");
      w.end = o.number("end");
      if (o.has("vehicles")) {
        const auto& ids = o.raw("vehicles");
        if (!ids.is_array()) throw ConfigError(o.child_path("vehicles"), "expected an array of ids");
        for (const auto& id : ids) {
          if (!id.is_number_unsigned()) throw ConfigError(o.child_path("vehicles"), "expected vehicle ids");
          w.vehicles.push_back(id.get<VehicleId>());
        }
      }
      c.outages.push_back(w);
    }
  }

  if (auto s = root.optional_object("sensors")) {
    if (auto i = s->optional_object("imu")) c.sensors.imu = imu_from_json(*i, c.sensors.imu);
    if (auto g = s->optional_object("gnss")) {
      GnssErrorModel& gm = c.sensors.gnss;
      gm.white_position = g->non_negative("white_position", gm.white_position);
      gm.white_velocity = g->non_negative("white_velocity", gm.white_velocity);
      gm.bias_sigma = g->non_negative("bias_sigma", gm.bias_sigma);
      gm.bias_tau = g->positive("bias_tau", gm.bias_tau);
    }
    c.sensors.range_sigma = s->non_negative("range_sigma", c.sensors.range_sigma);
    c.sensors.initial_error = s->boolean_or("initial_error", c.sensors.initial_error);
  }

  c.filter.imu = c.sensors.imu;
  if (auto f = root.optional_object("filter")) {
    FilterSettings& fs = c.filter;
    if (auto i = f->optional_object("imu")) fs.imu = imu_from_json(*i, fs.imu);
    if (auto g = f->optional_object("gnss")) {
      fs.gnss.horizontal_sigma = g->positive("position_sigma", fs.gnss.horizontal_sigma);
      fs.gnss.vertical_sigma = g->positive("vertical_sigma", fs.gnss.horizontal_sigma);
      fs.gnss.velocity_sigma = g->positive("velocity_sigma", fs.gnss.velocity_sigma);
    }
    fs.range_sigma = f->positive("range_sigma", fs.range_sigma);
    if (auto i = f->optional_object("initial_sigma")) {
      fs.initial.position = i->positive("position", fs.initial.position);
      fs.initial.height = i->positive("height", fs.initial.height);
      fs.initial.velocity = i->positive("velocity", fs.initial.velocity);
      fs.initial.roll_pitch_deg = i->positive("roll_pitch_deg", fs.initial.roll_pitch_deg);
      fs.initial.yaw_deg = i->positive("yaw_deg", fs.initial.yaw_deg);
    }
    if (f->has("gate_alpha")) {
      const auto& g = f->raw("gate_alpha");
      if (g.is_null()) {
        fs.gate_alpha.reset();
      } else {
        fs.gate_alpha = f->number("gate_alpha");
      }
    }
    fs.v2v.staleness = f->positive("staleness", fs.v2v.staleness);
    fs.v2v.d_min = f->positive("d_min", fs.v2v.d_min);
    fs.detection.v_stop = f->positive("v_stop", fs.detection.v_stop);
    fs.detection.d_gate = f->positive("d_gate", fs.detection.d_gate);
  }

  validate(c);
  return c;
}

ScenarioConfig load_scenario(const std::string& path) {
  const std::filesystem::path p(path);
  return scenario_from_json(parse_json_file(path), p.has_parent_path() ? p.parent_path().string() : ".");
}

nlohmann::json map_to_json(const std::vector<Approach>& map) {
  std::vector<StopLineMapEntry> entries;
  for (const auto& a : map) entries.push_back(a.entry);
  nlohmann::json doc = stopline_map_to_json(entries);
  for (std::size_t i = 0; i < map.size(); ++i) doc["entries"][i]["road"] = map[i].main_road ? "main" : "cross";
  return doc;
}

}  // namespace cin::sim
