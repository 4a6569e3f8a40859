#pragma once

// Error metrics over phase intervals, the per-run metrics document, comparison
// tables and Monte Carlo aggregation.

#include "cin/sim/runner.hpp"

#include <json.hpp>

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cin {

class UndefinedMetric : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PlanarSample {
  double t = 0;
  Vector2d p = Vector2d::Zero();
};

/// Half-open [start, end).
struct Interval {
  double start = 0;
  double end = 0;
  bool contains(double t) const { return t >= start && t < end; }
};

/// RMSE of the horizontal error over estimate samples inside `interval`. Each
/// sample is paired with the nearest truth sample; pairs further apart than
/// `tolerance` are dropped. Truth must be sorted by time.
double compute_rmse(std::span<const PlanarSample> estimate, std::span<const PlanarSample> truth,
                    const Interval& interval, double tolerance);

struct PhaseStats {
  double rmse = 0;
  double max = 0;
  double nees_mean = 0;
  std::size_t samples = 0;
};

/// Statistics of one trace over one phase. Throws UndefinedMetric when the
/// phase holds no samples.
PhaseStats phase_stats(const sim::VehicleTrace& trace, const sim::Phase& phase, double tolerance);

/// Per method, per vehicle, per phase statistics plus run diagnostics.
/// Phases without samples carry null statistics.
nlohmann::json run_metrics(const sim::ScenarioResult& result, double tolerance);

/// One table per phase, methods as rows and vehicles as columns. Pure in
/// `metrics`; `field` selects the per-phase value ("rmse" or "rmse_mean").
std::string render_tables(const nlohmann::json& metrics, const std::string& field = "rmse");

struct NeesSeries {
  std::vector<double> t;
  std::vector<double> mean;  // per trace step, averaged over runs
  std::size_t runs = 0;
};

/// What a Monte Carlo batch keeps of one run.
struct RunRecord {
  nlohmann::json metrics;
  std::vector<std::string> methods;
  std::vector<VehicleId> vehicles;
  std::vector<double> times;
  std::vector<std::vector<double>> nees;  // [method * vehicles + vehicle][step]
};

RunRecord make_record(const sim::ScenarioResult& result, double tolerance);

/// Accumulates run records in the order they are added.
class MonteCarloAccumulator {
 public:
  void add(const RunRecord& record);
  std::size_t runs() const { return metrics_.size(); }
  /// Mean RMSE with a normal-approximation 95% interval, per method, vehicle and phase,
  /// plus the NEES summary against the two-sided 95% bounds for 2 dof.
  nlohmann::json summary() const;
  /// Per-step mean NEES for (method, vehicle index).
  NeesSeries nees(std::size_t method, std::size_t vehicle) const;
  const std::vector<std::string>& method_names() const { return methods_; }
  const std::vector<VehicleId>& vehicle_ids() const { return vehicles_; }

 private:
  std::vector<nlohmann::json> metrics_;
  std::vector<std::string> methods_;
  std::vector<VehicleId> vehicles_;
  std::vector<double> times_;
  std::vector<std::vector<double>> nees_sum_;  // [method * vehicles + vehicle][step]
};

/// Runs seeds seed+0..runs-1 on `threads` workers. Records are merged in run
/// order, so the result does not depend on the thread count.
MonteCarloAccumulator run_monte_carlo(const sim::ScenarioConfig& config, std::size_t runs,
                                      std::span<const sim::Method> methods, unsigned threads);

struct NeesBoundsCheck {
  double lower = 0;
  double upper = 0;
  double fraction_inside = 0;
};

NeesBoundsCheck check_nees(const NeesSeries& series, double confidence = 0.95);

}  // namespace cin
