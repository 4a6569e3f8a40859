#include "cin/cli.hpp"

#include "cin/config_error.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <thread>

namespace cin::cli {

namespace {

namespace fs = std::filesystem;

struct Options {
  std::string config;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::string methods = "sp,sl-sp,cp,sl-cp";
  std::size_t runs = 1;
  unsigned threads = 0;
};

std::vector<sim::Method> parse_methods(const std::string& text) {
  std::vector<sim::Method> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto m = sim::parse_method(item);
    if (!m) throw ConfigError("--methods", "unknown method '" + item + "'");
    if (std::find(out.begin(), out.end(), *m) != out.end()) {
      throw ConfigError("--methods", "duplicate method '" + item + "'");
    }
    out.push_back(*m);
  }
  if (out.empty()) throw ConfigError("--methods", "no methods selected");
  return out;
}

sim::ScenarioConfig load(const Options& o) {
  try {
    return sim::load_scenario(o.config);
  } catch (const ConfigError& e) {
    if (e.location().rfind(o.config, 0) == 0) throw;
    throw ConfigError(o.config + ":" + e.location(), e.message());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
  if (!f) throw std::runtime_error("cannot write " + path.string());
}

void write_json(const fs::path& path, const nlohmann::json& doc) { write_text(path, doc.dump(2) + "\n"); }

int cmd_run(const Options& o, std::ostream& out) {
  const auto methods = parse_methods(o.methods);
  const sim::ScenarioConfig config = load(o);
  const sim::ScenarioResult result = sim::run_scenario(config, methods, o.seed);
  const nlohmann::json metrics = run_metrics(result, 0.5 / config.rates.gnss);

  const fs::path dir(o.out_dir);
  fs::create_directories(dir);
  for (const auto& run : result.runs) {
    for (const auto& trace : run.traces) {
      write_trace_csv(dir / ("trace_v" + std::to_string(trace.id) + "_" + sim::to_string(run.method) + ".csv"),
                      trace);
    }
  }
  write_json(dir / "metrics.json", metrics);
  write_json(dir / "map.json", sim::map_to_json(config.map));
  const std::string tables = render_tables(metrics);
  write_text(dir / "tables.txt", tables);
  out << tables;
  return kExitOk;
}

int cmd_montecarlo(const Options& o, std::ostream& out) {
  if (o.runs < 1) throw ConfigError("--runs", "must be at least 1");
  const auto methods = parse_methods(o.methods);
  const sim::ScenarioConfig config = load(o);
  const unsigned threads = o.threads ? o.threads : std::max(1u, std::thread::hardware_concurrency());
  const MonteCarloAccumulator acc = run_monte_carlo(config, o.runs, methods, threads);
  const nlohmann::json summary = acc.summary();

  const fs::path dir(o.out_dir);
  fs::create_directories(dir);
  write_json(dir / "montecarlo.json", summary);
  for (std::size_t m = 0; m < acc.method_names().size(); ++m) {
    std::string csv = "t";
    for (VehicleId id : acc.vehicle_ids()) csv += ",v" + std::to_string(id);
    const NeesSeries first = acc.nees(m, 0);
    const NeesBoundsCheck bounds = check_nees(first);
    csv += ",lower,upper\n";
    std::vector<NeesSeries> series;
    for (std::size_t v = 0; v < acc.vehicle_ids().size(); ++v) series.push_back(acc.nees(m, v));
    char buf[64];
    for (std::size_t k = 0; k < first.t.size(); ++k) {
      std::snprintf(buf, sizeof buf, "%.3f", first.t[k]);
      csv += buf;
      for (const auto& s : series) {
        std::snprintf(buf, sizeof buf, ",%.6f", s.mean[k]);
        csv += buf;
      }
      std::snprintf(buf, sizeof buf, ",%.6f,%.6f\n", bounds.lower, bounds.upper);
      csv += buf;
    }
    write_text(dir / ("nees_" + acc.method_names()[m] + ".csv"), csv);
  }
  const std::string tables = render_tables(summary, "rmse_mean");
  write_text(dir / "tables.txt", tables);
  out << "mean over " << o.runs << " runs\n" << tables;
  return kExitOk;
}

}  // namespace

void write_trace_csv(const fs::path& path, const sim::VehicleTrace& trace) {
  std::string csv = "t,truth_n,truth_e,est_n,est_e,err_norm,case_tag\n";
  char buf[160];
  for (const auto& s : trace.samples) {
    std::snprintf(buf, sizeof buf, "%.3f,%.6f,%.6f,%.6f,%.6f,%.6f,%s\n", s.t, s.truth(0), s.truth(1), s.estimate(0),
                  s.estimate(1), s.error, to_string(s.tag));
    csv += buf;
  }
  write_text(path, csv);
}

int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Stop-line aided cooperative positioning simulator"};
  app.require_subcommand(1);
  Options o;

  CLI::App* run = app.add_subcommand("run", "Run one scenario with every selected method");
  run->add_option("--config", o.config, "Scenario JSON")->required();
  run->add_option("--out", o.out_dir, "Output directory")->required();
  run->add_option("--seed", o.seed, "Override the scenario seed");
  run->add_option("--methods", o.methods, "Comma-separated subset of sp,sl-sp,cp,sl-cp");

  CLI::App* mc = app.add_subcommand("montecarlo", "Run seeds seed+0..runs-1 and aggregate");
  mc->add_option("--config", o.config, "Scenario JSON")->required();
  mc->add_option("--runs", o.runs, "Number of runs")->required();
  mc->add_option("--out", o.out_dir, "Output directory")->required();
  mc->add_option("--methods", o.methods, "Comma-separated subset of sp,sl-sp,cp,sl-cp");
  mc->add_option("--threads", o.threads, "Worker threads (default: hardware concurrency)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    if (run->parsed()) return cmd_run(o, out);
    return cmd_montecarlo(o, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace cin::cli
