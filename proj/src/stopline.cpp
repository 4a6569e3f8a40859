#include "cin/stopline.hpp"

#include "cin/config_error.hpp"
#include "json_util.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <fstream>
#include <numbers>

namespace cin {

namespace {

double side_sign(const LineGeometry& line, const Vector2d& side) {
  return line.normal().dot(side) >= 0.0 ? 1.0 : -1.0;
}

}  // namespace

LineGeometry LineGeometry::from_coefficients(double a, double b, double c) {
  const double norm = std::hypot(a, b);
  if (!(norm > 0.0) || !std::isfinite(norm) || !std::isfinite(c)) {
    throw GeometryError("line normal must be finite and non-zero");
  }
  return LineGeometry{a / norm, b / norm, c / norm};
}

LineGeometry LineGeometry::from_slope_intercept(double slope, double intercept) {
  // e = k n + b  <=>  k n - e + b = 0
  return from_coefficients(slope, -1.0, intercept);
}

LineGeometry LineGeometry::through(const Vector2d& point, const Vector2d& direction) {
  const Vector2d normal(-direction(1), direction(0));
  return from_coefficients(normal(0), normal(1), -normal.dot(point));
}

void validate(const LineGeometry& line) {
  if (!std::isfinite(line.a) || !std::isfinite(line.b) || !std::isfinite(line.c)) {
    throw GeometryError("line coefficients must be finite");
  }
  if (std::abs(line.a * line.a + line.b * line.b - 1.0) > 1e-12) {
    throw GeometryError("line coefficients are not normalized");
  }
}

void validate(const StopLinePrior& prior) {
  if (!(prior.sigma_xb > 0.0) || !(prior.sigma_yb > 0.0)) {
    throw GeometryError("stop-line prior sigmas must be positive");
  }
  if (!(prior.m_xb >= 0.0) || !(prior.m_yb >= 0.0) || !(prior.l0 >= 0.0)) {
    throw GeometryError("stop-line prior means and l0 must be non-negative");
  }
}

void validate(const StopLineMapEntry& entry) {
  validate(entry.stop_line);
  validate(entry.left_lane_line);
  validate(entry.prior);
  if (std::abs(entry.approach_side.norm() - 1.0) > 1e-9 ||
      std::abs(entry.lane_side.norm() - 1.0) > 1e-9) {
    throw GeometryError("approach_side and lane_side must be unit vectors");
  }
  const Vector2d ns = entry.stop_line.normal();
  const Vector2d nl = entry.left_lane_line.normal();
  if (std::abs(ns(0) * nl(1) - ns(1) * nl(0)) <= 1e-6) {
    throw DegenerateGeometry("stop line and lane line are parallel");
  }
  if (std::abs(ns.dot(entry.approach_side)) <= 1e-6 ||
      std::abs(nl.dot(entry.lane_side)) <= 1e-6) {
    throw GeometryError("side vectors must not run along their lines");
  }
}

double distance_to_line(const LineGeometry& line, const Vector2d& p) {
  return std::abs(line.signed_distance(p));
}

double distance_behind(const StopLineMapEntry& entry, const Vector2d& p) {
  return side_sign(entry.stop_line, entry.approach_side) * entry.stop_line.signed_distance(p);
}

Vector2d solve_position(const StopLineMapEntry& entry, double d_e, double d_l) {
  if (!(d_e >= 0.0) || !(d_l >= 0.0)) {
    throw std::invalid_argument("solve_position: distances must be non-negative");
  }
  Matrix2d A;
  A.row(0) = entry.stop_line.normal().transpose();
  A.row(1) = entry.left_lane_line.normal().transpose();
  const Eigen::JacobiSVD<Matrix2d> svd(A);
  const Vector2d sv = svd.singularValues();
  if (!(sv(1) > 0.0) || sv(0) / sv(1) > kMaxStopLineCondition) {
    throw DegenerateGeometry("solve_position: stop line and lane line are near parallel");
  }
  const Vector2d rhs(side_sign(entry.stop_line, entry.approach_side) * d_e - entry.stop_line.c,
                     side_sign(entry.left_lane_line, entry.lane_side) * d_l -
                         entry.left_lane_line.c);
  return A.partialPivLu().solve(rhs);
}

Observation15 build_stopline_observation(const NavSolution& nav, const StopLineMapEntry& entry,
                                         const StopLinePrior& prior, const Geodetic& origin) {
  const Vector2d p_sl = solve_position(entry, prior.m_xb + prior.l0, prior.m_yb);
  const Vector2d p_ins = ned_from_geodetic(origin, nav.position).head<2>();
  const Vector2d scale = horizontal_scale(nav.position);

  Observation15 obs;
  obs.kind = ObservationKind::sp_sl;
  obs.z = p_ins - p_sl;
  obs.H = Observation15::Jacobian::Zero(2, kErrorStates);
  obs.H(0, state::latitude) = scale(0);
  obs.H(1, state::longitude) = scale(1);
  const Matrix2d road_cov =
      Vector2d(prior.sigma_xb * prior.sigma_xb, prior.sigma_yb * prior.sigma_yb).asDiagonal();
  obs.R = rotate_road_covariance(entry.road, road_cov);
  return obs;
}

bool detect_first_stopped(double speed, const Vector2d& position, const StopLineMapEntry& entry,
                          std::span<const Vector2d> occupancy, const StopDetection& rule) {
  if (!(speed < rule.v_stop)) return false;
  const double behind = distance_behind(entry, position);
  if (behind < 0.0 || behind > rule.d_gate) return false;
  for (const Vector2d& other : occupancy) {
    const double other_behind = distance_behind(entry, other);
    if (other_behind >= 0.0 && other_behind < behind) return false;
  }
  return true;
}

// --- map file ---------------------------------------------------------------

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

LineGeometry line_from_json(const JsonReader& r) {
  const double a = r.number("a");
  const double b = r.number("b");
  const double c = r.number("c");
  try {
    return LineGeometry::from_coefficients(a, b, c);
  } catch (const GeometryError& e) {
    throw ConfigError(r.path(), e.what());
  }
}

Vector2d unit_from_json(const JsonReader& r, const char* key) {
  const Vector2d v = r.vector2(key);
  if (std::abs(v.norm() - 1.0) > 1e-6) {
    throw ConfigError(r.child_path(key), "must be a unit vector");
  }
  return v.normalized();
}

}  // namespace

std::vector<StopLineMapEntry> stopline_map_from_json(const nlohmann::json& doc) {
  const nlohmann::json* list = &doc;
  std::string base;
  if (doc.is_object()) {
    if (!doc.contains("entries")) throw ConfigError("/entries", "missing required field");
    list = &doc.at("entries");
    base = "/entries";
  }
  if (!list->is_array()) throw ConfigError(base.empty() ? "/" : base, "expected an array");

  std::vector<StopLineMapEntry> entries;
  for (std::size_t i = 0; i < list->size(); ++i) {
    const JsonReader r((*list)[i], base + "/" + std::to_string(i));
    StopLineMapEntry entry;
    entry.stop_line = line_from_json(r.object("stop_line"));
    entry.left_lane_line = line_from_json(r.object("lane_line"));
    entry.road = RoadFrame<double>::from_angle(r.number("theta_deg") * kDeg);
    entry.approach_side = unit_from_json(r, "approach_side");
    entry.lane_side = unit_from_json(r, "lane_side");
    const JsonReader pr = r.object("priors");
    entry.prior.m_xb = pr.number("m_xb");
    entry.prior.sigma_xb = pr.number("sigma_xb");
    entry.prior.m_yb = pr.number("m_yb");
    entry.prior.sigma_yb = pr.number("sigma_yb");
    entry.prior.l0 = pr.number("l0");
    try {
      validate(entry);
    } catch (const GeometryError& e) {
      throw ConfigError(r.path(), e.what());
    }
    entries.push_back(entry);
  }
  return entries;
}

nlohmann::json stopline_map_to_json(std::span<const StopLineMapEntry> entries) {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& e : entries) {
    list.push_back({
        {"stop_line", {{"a", e.stop_line.a}, {"b", e.stop_line.b}, {"c", e.stop_line.c}}},
        {"lane_line",
         {{"a", e.left_lane_line.a}, {"b", e.left_lane_line.b}, {"c", e.left_lane_line.c}}},
        {"theta_deg", e.road.theta / kDeg},
        {"approach_side", {e.approach_side(0), e.approach_side(1)}},
        {"lane_side", {e.lane_side(0), e.lane_side(1)}},
        {"priors",
         {{"m_xb", e.prior.m_xb},
          {"sigma_xb", e.prior.sigma_xb},
          {"m_yb", e.prior.m_yb},
          {"sigma_yb", e.prior.sigma_yb},
          {"l0", e.prior.l0}}},
    });
  }
  return nlohmann::json{{"entries", list}};
}

std::vector<StopLineMapEntry> load_stopline_map(const std::string& path) {
  return stopline_map_from_json(parse_json_file(path));
}

}  // namespace cin
