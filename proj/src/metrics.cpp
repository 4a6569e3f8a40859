#include "cin/metrics.hpp"

#include "cin/stats.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <optional>
#include <sstream>
#include <thread>

namespace cin {

namespace {

// Two-sided 95% normal quantile.
constexpr double kZ95 = 1.959963984540054;

nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

const PlanarSample* nearest(std::span<const PlanarSample> truth, double t) {
  if (truth.empty()) return nullptr;
  const auto it = std::lower_bound(truth.begin(), truth.end(), t,
                                   [](const PlanarSample& s, double v) { return s.t < v; });
  if (it == truth.end()) return &truth.back();
  if (it == truth.begin()) return &*it;
  const auto prev = std::prev(it);
  return (t - prev->t) <= (it->t - t) ? &*prev : &*it;
}

nlohmann::json phases_json(const std::vector<sim::Phase>& phases) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& p : phases) out.push_back({{"name", p.name}, {"start", p.start}, {"end", p.end}});
  return out;
}

}  // namespace

double compute_rmse(std::span<const PlanarSample> estimate, std::span<const PlanarSample> truth,
                    const Interval& interval, double tolerance) {
  double sum = 0;
  std::size_t count = 0;
  for (const PlanarSample& s : estimate) {
    if (!interval.contains(s.t)) continue;
    const PlanarSample* ref = nearest(truth, s.t);
    if (!ref || std::abs(ref->t - s.t) > tolerance) continue;
    sum += (s.p - ref->p).squaredNorm();
    ++count;
  }
  if (count == 0) throw UndefinedMetric("compute_rmse: no aligned samples in the interval");
  return std::sqrt(sum / static_cast<double>(count));
}

PhaseStats phase_stats(const sim::VehicleTrace& trace, const sim::Phase& phase, double tolerance) {
  std::vector<PlanarSample> estimate;
  std::vector<PlanarSample> truth;
  estimate.reserve(trace.samples.size());
  truth.reserve(trace.samples.size());
  PhaseStats stats;
  double nees = 0;
  for (const auto& s : trace.samples) {
    estimate.push_back({s.t, s.estimate});
    truth.push_back({s.t, s.truth});
    if (s.t < phase.start || s.t >= phase.end) continue;
    stats.max = std::max(stats.max, s.error);
    nees += s.nees;
    ++stats.samples;
  }
  stats.rmse = compute_rmse(estimate, truth, {phase.start, phase.end}, tolerance);
  stats.nees_mean = nees / static_cast<double>(stats.samples);
  return stats;
}

nlohmann::json run_metrics(const sim::ScenarioResult& result, double tolerance) {
  nlohmann::json doc;
  doc["seed"] = result.seed;
  doc["duration"] = result.duration;
  doc["first_stopped_vehicle"] =
      result.first_stopped_vehicle ? nlohmann::json(*result.first_stopped_vehicle) : nlohmann::json();
  doc["phases"] = phases_json(result.phases);
  doc["roles"] = nlohmann::json::array();
  for (const auto& r : result.roles) {
    doc["roles"].push_back({{"t", r.t}, {"id", r.id}, {"first_stopped", r.first_stopped}});
  }
  doc["methods"] = nlohmann::json::array();
  for (const auto& run : result.runs) {
    nlohmann::json m;
    m["name"] = sim::to_string(run.method);
    m["diagnostics"] = {{"updates", run.diagnostics.updates},
                        {"rejected", run.diagnostics.rejected},
                        {"gated_rows", run.diagnostics.gated_rows},
                        {"skipped_ranges", run.diagnostics.skipped_ranges}};
    m["vehicles"] = nlohmann::json::array();
    for (const auto& trace : run.traces) {
      nlohmann::json v;
      v["id"] = trace.id;
      for (const auto& phase : result.phases) {
        try {
          const PhaseStats s = phase_stats(trace, phase, tolerance);
          v["phases"][phase.name] = {{"rmse", s.rmse},
                                     {"max", s.max},
                                     {"nees_mean", finite_or_null(s.nees_mean)},
                                     {"samples", s.samples}};
        } catch (const UndefinedMetric&) {
          v["phases"][phase.name] = {{"rmse", nullptr}, {"max", nullptr}, {"nees_mean", nullptr}, {"samples", 0}};
        }
      }
      m["vehicles"].push_back(std::move(v));
    }
    doc["methods"].push_back(std::move(m));
  }
  return doc;
}

std::string render_tables(const nlohmann::json& metrics, const std::string& field) {
  std::ostringstream os;
  char buf[64];
  const auto& methods = metrics.at("methods");
  for (const auto& phase : metrics.at("phases")) {
    const std::string name = phase.at("name").get<std::string>();
    std::snprintf(buf, sizeof buf, "[%.2f s, %.2f s)", phase.at("start").get<double>(),
                  phase.at("end").get<double>());
    os << "RMSE (m) during " << name << ' ' << buf << '\n';
    os << "  method";
    if (!methods.empty()) {
      for (const auto& v : methods.front().at("vehicles")) {
        std::snprintf(buf, sizeof buf, "%9s", ("V" + std::to_string(v.at("id").get<VehicleId>())).c_str());
        os << buf;
      }
    }
    os << '\n';
    for (const auto& m : methods) {
      std::snprintf(buf, sizeof buf, "  %-6s", m.at("name").get<std::string>().c_str());
      os << buf;
      for (const auto& v : m.at("vehicles")) {
        const auto& rmse = v.at("phases").at(name).at(field);
        if (rmse.is_null()) {
          std::snprintf(buf, sizeof buf, "%9s", "-");
        } else {
          std::snprintf(buf, sizeof buf, "%9.2f", rmse.get<double>());
        }
        os << buf;
      }
      os << '\n';
    }
    os << '\n';
  }
  return os.str();
}

RunRecord make_record(const sim::ScenarioResult& result, double tolerance) {
  RunRecord rec;
  rec.metrics = run_metrics(result, tolerance);
  for (const auto& run : result.runs) rec.methods.emplace_back(sim::to_string(run.method));
  if (!result.runs.empty()) {
    for (const auto& trace : result.runs.front().traces) rec.vehicles.push_back(trace.id);
    if (!rec.vehicles.empty()) {
      for (const auto& s : result.runs.front().traces.front().samples) rec.times.push_back(s.t);
    }
  }
  for (const auto& run : result.runs) {
    for (const auto& trace : run.traces) {
      std::vector<double> series;
      series.reserve(trace.samples.size());
      for (const auto& s : trace.samples) series.push_back(s.nees);
      rec.nees.push_back(std::move(series));
    }
  }
  return rec;
}

void MonteCarloAccumulator::add(const RunRecord& record) {
  if (metrics_.empty()) {
    methods_ = record.methods;
    vehicles_ = record.vehicles;
    times_ = record.times;
    nees_sum_.assign(methods_.size() * vehicles_.size(), std::vector<double>(times_.size(), 0.0));
  } else if (record.metrics.at("phases") != metrics_.front().at("phases") || record.methods != methods_ ||
             record.vehicles != vehicles_ || record.times != times_) {
    throw std::runtime_error("MonteCarloAccumulator: runs disagree on phases, methods or sampling");
  }
  for (std::size_t i = 0; i < nees_sum_.size(); ++i) {
    for (std::size_t k = 0; k < times_.size(); ++k) nees_sum_[i][k] += record.nees[i][k];
  }
  metrics_.push_back(record.metrics);
}

MonteCarloAccumulator run_monte_carlo(const sim::ScenarioConfig& config, std::size_t runs,
                                      std::span<const sim::Method> methods, unsigned threads) {
  const double tolerance = 0.5 / config.rates.gnss;
  std::vector<std::optional<RunRecord>> records(runs);
  std::vector<std::exception_ptr> errors(runs);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < runs; i = next++) {
      try {
        records[i] = make_record(sim::run_scenario(config, methods, config.seed + i), tolerance);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(runs)));
  std::vector<std::thread> pool;
  for (unsigned i = 1; i < n; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  MonteCarloAccumulator acc;
  for (std::size_t i = 0; i < runs; ++i) {
    if (errors[i]) std::rethrow_exception(errors[i]);
    acc.add(*records[i]);
  }
  return acc;
}

NeesSeries MonteCarloAccumulator::nees(std::size_t method, std::size_t vehicle) const {
  NeesSeries out;
  out.t = times_;
  out.runs = metrics_.size();
  out.mean = nees_sum_.at(method * vehicles_.size() + vehicle);
  for (double& x : out.mean) x /= static_cast<double>(out.runs);
  return out;
}

NeesBoundsCheck check_nees(const NeesSeries& series, double confidence) {
  const auto bounds = mean_chi_square_bounds<double>(2, static_cast<int>(series.runs), confidence);
  NeesBoundsCheck out{bounds.lower, bounds.upper, 0.0};
  std::size_t inside = 0;
  for (double x : series.mean) inside += (x >= bounds.lower && x <= bounds.upper) ? 1 : 0;
  out.fraction_inside = series.mean.empty() ? 0.0 : static_cast<double>(inside) / series.mean.size();
  return out;
}

nlohmann::json MonteCarloAccumulator::summary() const {
  if (metrics_.empty()) throw std::runtime_error("MonteCarloAccumulator: no runs");
  const nlohmann::json& first = metrics_.front();
  nlohmann::json doc;
  doc["runs"] = metrics_.size();
  doc["seeds"] = nlohmann::json::array();
  for (const auto& m : metrics_) doc["seeds"].push_back(m.at("seed"));
  doc["phases"] = first.at("phases");
  doc["first_stopped_vehicle"] = first.at("first_stopped_vehicle");
  doc["methods"] = nlohmann::json::array();
  for (std::size_t mi = 0; mi < methods_.size(); ++mi) {
    nlohmann::json m;
    m["name"] = methods_[mi];
    for (const char* key : {"updates", "rejected", "gated_rows", "skipped_ranges"}) {
      std::size_t total = 0;
      for (const auto& run : metrics_) total += run.at("methods")[mi].at("diagnostics").at(key).get<std::size_t>();
      m["diagnostics"][key] = total;
    }
    m["vehicles"] = nlohmann::json::array();
    for (std::size_t vi = 0; vi < vehicles_.size(); ++vi) {
      nlohmann::json v;
      v["id"] = vehicles_[vi];
      for (const auto& phase : first.at("phases")) {
        const std::string name = phase.at("name").get<std::string>();
        std::vector<double> values;
        for (const auto& run : metrics_) {
          const auto& r = run.at("methods")[mi].at("vehicles")[vi].at("phases").at(name).at("rmse");
          if (!r.is_null()) values.push_back(r.get<double>());
        }
        nlohmann::json p;
        p["runs"] = values.size();
        if (values.empty()) {
          p["rmse_mean"] = nullptr;
          p["rmse_ci95"] = nullptr;
        } else {
          double mean = 0;
          for (double x : values) mean += x;
          mean /= static_cast<double>(values.size());
          p["rmse_mean"] = mean;
          if (values.size() > 1) {
            double ss = 0;
            for (double x : values) ss += (x - mean) * (x - mean);
            const double half = kZ95 * std::sqrt(ss / static_cast<double>(values.size() - 1) / values.size());
            p["rmse_ci95"] = {mean - half, mean + half};
          } else {
            p["rmse_ci95"] = nullptr;
          }
        }
        v["phases"][name] = std::move(p);
      }
      const NeesSeries series = nees(mi, vi);
      const NeesBoundsCheck check = check_nees(series);
      double mean = 0;
      for (double x : series.mean) mean += x;
      mean /= static_cast<double>(std::max<std::size_t>(series.mean.size(), 1));
      v["nees"] = {{"lower", check.lower},
                   {"upper", check.upper},
                   {"fraction_inside", check.fraction_inside},
                   {"mean", finite_or_null(mean)}};
      m["vehicles"].push_back(std::move(v));
    }
    doc["methods"].push_back(std::move(m));
  }
  return doc;
}

}  // namespace cin
