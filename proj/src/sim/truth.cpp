#include "cin/sim/truth.hpp"

#include "cin/config_error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace cin::sim {

// --- traffic light ------------------------------------------------------------

TrafficLight::State TrafficLight::state(bool main_road, double t) const {
  const auto& phases = schedule_.phases;
  double cycle = 0;
  for (const auto& p : phases) cycle += p.duration;
  double local = t;
  if (schedule_.repeat && local >= cycle) local = std::fmod(local, cycle);
  double start = 0;
  for (const auto& p : phases) {
    if (local < start + p.duration) return {p.main_green == main_road, local - start};
    start += p.duration;
  }
  const auto& last = phases.back();
  return {last.main_green == main_road, local - (start - last.duration)};
}

double TrafficLight::next_green(bool main_road, double t) const {
  if (green(main_road, t)) return t;
  double cycle = 0;
  for (const auto& p : schedule_.phases) cycle += p.duration;
  for (double boundary : transitions(t + 2 * cycle)) {
    if (boundary > t && green(main_road, boundary)) return boundary;
  }
  return std::numeric_limits<double>::infinity();
}

std::vector<double> TrafficLight::transitions(double horizon) const {
  std::vector<double> out;
  double start = 0;
  bool previous = schedule_.phases.front().main_green;
  for (std::size_t i = 1;; ++i) {
    const std::size_t n = schedule_.phases.size();
    if (!schedule_.repeat && i >= n) break;
    start += schedule_.phases[(i - 1) % n].duration;
    if (start > horizon) break;
    const bool now = schedule_.phases[i % n].main_green;
    if (now != previous) out.push_back(start);
    previous = now;
  }
  return out;
}

// --- speed profile --------------------------------------------------------------

SpeedProfile::SpeedProfile(double cruise) { segments_.push_back({0.0, 0.0, cruise, 0.0}); }

void SpeedProfile::change(double t, double a) {
  const Segment& last = segments_.back();
  if (t < last.t0) throw std::logic_error("SpeedProfile: segments must be appended in time order");
  double v = speed(t);
  if (std::abs(v) < 1e-9) v = 0.0;
  segments_.push_back({t, position(t), v, a});
}

const SpeedProfile::Segment& SpeedProfile::at(double t) const {
  auto it = std::upper_bound(segments_.begin(), segments_.end(), t,
                             [](double value, const Segment& s) { return value < s.t0; });
  return it == segments_.begin() ? segments_.front() : *std::prev(it);
}

double SpeedProfile::position(double t) const {
  const Segment& s = at(t);
  const double dt = t - s.t0;
  return s.s0 + s.v0 * dt + 0.5 * s.a * dt * dt;
}

double SpeedProfile::speed(double t) const {
  const Segment& s = at(t);
  return s.v0 + s.a * (t - s.t0);
}

double SpeedProfile::accel(double t) const { return at(t).a; }

double VehiclePlan::yaw() const { return std::atan2(direction(1), direction(0)); }

double VehiclePlan::stopped_head_distance(const StopLineMapEntry& entry, double l0) const {
  const Vector2d head = planar(stop_time) + l0 * direction;
  return distance_behind(entry, head);
}

// --- planning ---------------------------------------------------------------------

std::vector<VehiclePlan> plan_vehicles(const ScenarioConfig& config) {
  const Kinematics& kin = config.kinematics;
  const TrafficLight light(config.light);
  std::vector<VehiclePlan> plans(config.vehicles.size());

  std::map<std::size_t, std::vector<std::size_t>> lanes;
  for (std::size_t i = 0; i < config.vehicles.size(); ++i) lanes[config.vehicles[i].entry].push_back(i);

  for (auto& [entry_index, members] : lanes) {
    std::sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
      return config.vehicles[a].start_distance < config.vehicles[b].start_distance;
    });
    const Approach& approach = config.map[entry_index];
    const StopLineMapEntry& entry = approach.entry;
    const StopLinePrior& prior = entry.prior;
    const Vector2d stop_point = solve_position(entry, prior.l0 + prior.m_xb, prior.m_yb);
    Vector2d direction = entry.left_lane_line.direction();
    if (direction.dot(-entry.approach_side) < 0) direction = -direction;

    const VehiclePlan* predecessor = nullptr;
    const VehicleSpec* predecessor_spec = nullptr;
    for (std::size_t index : members) {
      const VehicleSpec& spec = config.vehicles[index];
      const std::string where = "/vehicles/" + std::to_string(index);
      if (predecessor_spec && spec.start_distance - predecessor_spec->start_distance < kin.vehicle_length) {
        throw ConfigError(where + "/start_distance", "overlaps the vehicle ahead at t = 0");
      }
      const double cruise = spec.cruise > 0 ? spec.cruise : kin.cruise;
      VehiclePlan plan;
      plan.id = spec.id;
      plan.entry = entry_index;
      plan.direction = direction;
      plan.start = stop_point - spec.start_distance * direction;
      plan.stop_s = spec.start_distance;
      plan.profile = SpeedProfile(cruise);

      // Braking onto `target` with the comfortable deceleration when possible.
      auto braking = [&](double target, double& decel) {
        if (!(target > 0)) throw ConfigError(where + "/start_distance", "starts at or past its stop point");
        decel = kin.brake;
        const double needed = cruise * cruise / (2 * target);
        if (needed > decel) decel = needed;
        if (decel > kin.max_decel) {
          throw ConfigError(where + "/start_distance", "cannot stop before the stop line within max_decel");
        }
        return (target - cruise * cruise / (2 * decel)) / cruise;
      };

      double target = 0;
      double depart = 0;
      double decel = 0;
      double brake_start = 0;
      bool stops = false;
      int queue = -1;
      if (predecessor && predecessor->stops) {
        const double candidate = plan.stop_s - (predecessor->queue_index + 1) *
                                                   (kin.vehicle_length + kin.queue_gap);
        double d = 0;
        const double t_b = braking(candidate, d);
        if (predecessor->depart_time > t_b) {
          stops = true;
          queue = predecessor->queue_index + 1;
          target = candidate;
          decel = d;
          brake_start = t_b;
          depart = predecessor->depart_time + kin.reaction;
        }
      }
      if (!stops) {
        const double t_line = (plan.stop_s + prior.m_xb) / cruise;
        if (!light.green(approach.main_road, t_line)) {
          stops = true;
          queue = 0;
          target = plan.stop_s;
          brake_start = braking(target, decel);
          depart = light.next_green(approach.main_road, t_line) + kin.reaction;
        }
      }
      if (stops) {
        const double stop_time = brake_start + cruise / decel;
        depart = std::max(depart, stop_time);
        plan.stops = true;
        plan.queue_index = queue;
        plan.stop_time = stop_time;
        plan.depart_time = depart;
        plan.profile.change(brake_start, -decel);
        plan.profile.change(stop_time, 0.0);
        if (std::isfinite(depart)) {
          plan.profile.change(depart, kin.accel);
          plan.profile.change(depart + cruise / kin.accel, 0.0);
        }
      }
      plans[index] = plan;
      predecessor = &plans[index];
      predecessor_spec = &spec;
    }

    // Same-lane vehicles must keep at least a vehicle length apart.
    for (std::size_t k = 1; k < members.size(); ++k) {
      const VehiclePlan& ahead = plans[members[k - 1]];
      const VehiclePlan& behind = plans[members[k]];
      for (double t = 0; t <= config.duration; t += 0.05) {
        const double gap = (ahead.profile.position(t) - ahead.stop_s) - (behind.profile.position(t) - behind.stop_s);
        if (gap < kin.vehicle_length - 1e-9) {
          throw ConfigError("/vehicles/" + std::to_string(members[k]),
                            "runs into vehicle " + std::to_string(ahead.id));
        }
      }
    }
  }
  return plans;
}

Truth generate_truth(const ScenarioConfig& config) {
  Truth truth;
  truth.plans = plan_vehicles(config);
  const std::int64_t ticks = config.ticks();
  for (const VehiclePlan& plan : truth.plans) {
    TruthTrajectory traj;
    traj.id = plan.id;
    traj.nav.reserve(ticks + 1);
    traj.planar.reserve(ticks + 1);
    traj.accel.reserve(ticks + 1);
    const Eigen::Quaterniond attitude = attitude_from_euler(0.0, 0.0, plan.yaw());
    for (std::int64_t k = 0; k <= ticks; ++k) {
      const double t = config.tick_time(k);
      const Vector2d p = plan.planar(t);
      const Vector2d v = plan.planar_velocity(t);
      NavSolution nav;
      nav.attitude = attitude;
      nav.velocity = Vector3d(v(0), v(1), 0.0);
      nav.position = geodetic_from_ned(config.origin, Vector3d(p(0), p(1), 0.0));
      nav.timestamp = t;
      traj.nav.push_back(nav);
      traj.planar.push_back(p);
      traj.accel.push_back(plan.profile.accel(t) * plan.direction);
    }
    truth.vehicles.push_back(std::move(traj));
  }
  return truth;
}

}  // namespace cin::sim
