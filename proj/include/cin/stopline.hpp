#pragma once

// Stop-line map geometry, the first-stopped vehicle position solve and the
// stop-line observation built from it.

#include "cin/ekf.hpp"
#include "cin/geodesy.hpp"
#include "cin/ins.hpp"

#include <json.hpp>

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cin {

/// a*n + b*e + c = 0 with a^2 + b^2 = 1.
struct LineGeometry {
  double a = 1.0;
  double b = 0.0;
  double c = 0.0;

  /// Normalizes the coefficients; throws if (a, b) is zero.
  static LineGeometry from_coefficients(double a, double b, double c);
  /// Slope-intercept form e = k*n + intercept.
  static LineGeometry from_slope_intercept(double slope, double intercept);
  /// Line through `point` with direction `direction` (north/east).
  static LineGeometry through(const Vector2d& point, const Vector2d& direction);

  Vector2d normal() const { return {a, b}; }
  Vector2d direction() const { return {-b, a}; }
  double signed_distance(const Vector2d& p) const { return a * p(0) + b * p(1) + c; }
  /// Foot of the perpendicular from `p`.
  Vector2d project(const Vector2d& p) const { return p - signed_distance(p) * normal(); }
};

struct StopLinePrior {
  double m_xb = 1.0;      // mean head-to-stop-line distance
  double sigma_xb = 0.5;
  double m_yb = 1.75;     // mean centerline-to-left-lane-line distance
  double sigma_yb = 0.3;
  double l0 = 1.5;        // body origin to vehicle head
};

struct StopLineMapEntry {
  LineGeometry stop_line;
  LineGeometry left_lane_line;
  RoadFrame<double> road;
  Vector2d approach_side = Vector2d(-1.0, 0.0);  // from the stop line toward approaching traffic
  Vector2d lane_side = Vector2d(0.0, 1.0);       // from the left lane line into the lane
  StopLinePrior prior;
};

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when the stop line and lane line are (near) parallel.
class DegenerateGeometry : public GeometryError {
 public:
  using GeometryError::GeometryError;
};

void validate(const LineGeometry& line);
void validate(const StopLinePrior& prior);
void validate(const StopLineMapEntry& entry);

double distance_to_line(const LineGeometry& line, const Vector2d& p);

/// Distance of `p` behind the stop line, positive on the approach side.
double distance_behind(const StopLineMapEntry& entry, const Vector2d& p);

/// Point at distance d_e behind the stop line and d_l inside the lane.
Vector2d solve_position(const StopLineMapEntry& entry, double d_e, double d_l);

inline constexpr double kMaxStopLineCondition = 1e6;

/// Stop-line pseudo-measurement in NED meters about `origin`.
Observation15 build_stopline_observation(const NavSolution& nav, const StopLineMapEntry& entry,
                                         const StopLinePrior& prior, const Geodetic& origin);

struct StopDetection {
  double v_stop = 0.3;  // m/s
  double d_gate = 6.0;  // m
};

/// First-stopped rule: slow, within the gate behind the line, and nobody from
/// `occupancy` (same-lane vehicles) between this vehicle and the line.
bool detect_first_stopped(double speed, const Vector2d& position, const StopLineMapEntry& entry,
                          std::span<const Vector2d> occupancy, const StopDetection& rule = {});

/// Map file I/O. Entries carry their own priors.
std::vector<StopLineMapEntry> stopline_map_from_json(const nlohmann::json& doc);
nlohmann::json stopline_map_to_json(std::span<const StopLineMapEntry> entries);
std::vector<StopLineMapEntry> load_stopline_map(const std::string& path);

}  // namespace cin
