// karma: run, validate and post-process auction experiments.
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "karma/experiment.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kRuntimeError = 2;

int cmd_run(const std::string& spec_path, const std::string& out, int workers, int reps,
            const std::vector<std::string>& series) {
  const karma::ExperimentSpec spec = karma::load_spec(spec_path);
  karma::RunOptions options;
  options.workers = workers;
  options.only_series = series;
  if (reps > 0) options.replications = reps;

  const fs::path dir = out.empty() ? fs::path("results") / spec.name : fs::path(out);
  const auto start = std::chrono::steady_clock::now();
  const karma::SweepResult result = karma::run_experiment(spec, options);
  karma::write_outputs(spec, result, dir);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  std::cerr << spec.name << ": " << result.grid.size() << " grid points, " << result.rows.size()
            << " rows in " << secs << " s -> " << dir.string() << '\n';
  for (const auto& s : result.slopes) {
    std::cerr << "  slope " << s.series << '/' << s.stat << " = " << s.fit.slope << " (se "
              << s.fit.std_error << ")\n";
  }
  return kOk;
}

int cmd_validate(const std::string& spec_path, bool simulate) {
  const karma::ExperimentSpec spec = karma::load_spec(spec_path);
  std::cout << spec.name << " (" << spec.kind << "): valid, " << spec.series.size()
            << " series\n";
  for (const auto& report : karma::validate_spec(spec, simulate)) {
    std::cout << "series " << report.label << '\n';
    for (const auto& item : report.checks) {
      std::printf("  %-14s %-24s %s", karma::to_string(item.status), item.id.c_str(),
                  item.description.c_str());
      if (!item.detail.empty()) std::printf(" [%s]", item.detail.c_str());
      std::printf("\n");
    }
  }
  return kOk;
}

int cmd_list(const std::string& spec_dir) {
  std::cout << "kinds:\n";
  for (const auto& k : karma::experiment_kinds()) std::cout << "  " << k << '\n';

  std::vector<fs::path> files;
  if (fs::is_directory(spec_dir)) {
    for (const auto& e : fs::directory_iterator(spec_dir))
      if (e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::cout << "bundled specs (" << spec_dir << "):\n";
  for (const auto& f : files) {
    try {
      const auto spec = karma::load_spec(f);
      std::string description;
      if (spec.raw.contains("description")) description = spec.raw["description"].get<std::string>();
      std::printf("  %-28s %-26s %s\n", f.filename().string().c_str(), spec.kind.c_str(),
                  description.c_str());
    } catch (const std::exception& e) {
      std::printf("  %-28s INVALID: %s\n", f.filename().string().c_str(), e.what());
    }
  }
  return kOk;
}

int cmd_fit_slope(const std::string& csv) {
  const auto slopes = karma::fit_slopes_from_csv(csv);
  std::cout << "series,stat_name,slope,std_error,n_points\n";
  for (const auto& s : slopes) {
    std::printf("%s,%s,%.17g,%.17g,%d\n", s.series.c_str(), s.stat.c_str(), s.fit.slope,
                s.fit.std_error, s.fit.n_points);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Repeated karma auction simulator"};
  app.set_version_flag("--version", std::string(KARMA_VERSION));
  app.require_subcommand(1);

  std::string spec_path, out, csv, spec_dir = KARMA_SPEC_DIR;
  int workers = 0, reps = 0;
  bool simulate = false;
  std::vector<std::string> series;

  auto* run = app.add_subcommand("run", "Run an experiment spec and write CSV results");
  run->add_option("spec", spec_path, "Experiment spec (JSON)")->required();
  run->add_option("--out,-o", out, "Output directory (default results/<name>)");
  run->add_option("--workers,-j", workers, "Worker threads (default KARMA_WORKERS or all cores)");
  run->add_option("--reps", reps, "Override the replication count");
  run->add_option("--series", series, "Only run these series labels");

  auto* validate = app.add_subcommand("validate", "Check a spec and its parameter assumptions");
  validate->add_option("spec", spec_path, "Experiment spec (JSON)")->required();
  validate->add_flag("--simulate", simulate, "Measure hitting times with a short simulation");

  auto* list = app.add_subcommand("list-experiments", "List experiment kinds and bundled specs");
  list->add_option("--spec-dir", spec_dir, "Directory of bundled specs");

  auto* fit = app.add_subcommand("fit-slope", "Fit log-log slopes to a results.csv");
  fit->add_option("results", csv, "results.csv written by 'run'")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*run) return cmd_run(spec_path, out, workers, reps, series);
    if (*validate) return cmd_validate(spec_path, simulate);
    if (*list) return cmd_list(spec_dir);
    if (*fit) return cmd_fit_slope(csv);
  } catch (const karma::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return kOk;
}
