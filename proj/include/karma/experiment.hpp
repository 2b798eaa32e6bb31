#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "karma/metrics.hpp"
#include "karma/sim.hpp"

namespace karma {

using Json = nlohmann::json;

// Experiment kinds accepted in the "kind" field.
const std::vector<std::string>& experiment_kinds();

// T grid used when a spec gives none: 10^2, 10^2.5, ..., 10^5.
std::vector<int> default_horizons();

// One curve of a sweep: the base configuration with the series patch merged
// in (JSON merge patch semantics).
struct SeriesSpec {
  std::string label;
  Json config;
  std::vector<int> horizons;
};

struct ExperimentSpec {
  Json raw;  // the file as written
  std::string name;
  std::string kind;
  std::uint64_t seed = 1;
  int replications = 100;
  std::vector<SeriesSpec> series;
};

// Throws ConfigError on malformed input; nothing is simulated.
ExperimentSpec parse_spec(const Json& doc);
ExperimentSpec load_spec(const std::filesystem::path& path);

// Engine configurations for one series at horizon T.
StationaryConfig build_stationary(const Json& config, int horizon);
PopulationConfig build_population(const Json& config, int horizon);

struct GridPoint {
  int id = 0;
  std::string series;
  int horizon = 0;
  std::string param_hash;
};

struct StatRow {
  int grid_id = 0;
  int horizon = 0;
  std::string param_hash;
  std::string stat;
  Summary summary;
};

struct SlopeRow {
  std::string series;
  std::string stat;
  SlopeFit fit;
};

struct EpisodeRow {
  int round = 0;
  std::string label;
  double cumulative_saved = 0.0;
  double multiplier = 0.0;  // after the round's update
  double karma = 0.0;       // after the round's settlement
};

struct SweepResult {
  std::vector<GridPoint> grid;
  std::vector<StatRow> rows;  // sorted by grid id, then in the kind's statistic order
  std::vector<SlopeRow> slopes;
  std::vector<EpisodeRow> episode;

  // Throws ConfigError when absent.
  const StatRow& row(const std::string& series, int horizon, const std::string& stat) const;
};

struct RunOptions {
  int workers = 0;  // 0: KARMA_WORKERS or the hardware thread count
  std::vector<std::string> only_series;  // empty: all
  std::optional<int> replications;       // override
};

SweepResult run_experiment(const ExperimentSpec& spec, const RunOptions& options = {});

// results.csv, slopes.csv, manifest.json and, for episodes, episode.csv.
void write_outputs(const ExperimentSpec& spec, const SweepResult& result,
                   const std::filesystem::path& dir);

void write_results_csv(const SweepResult& result, std::ostream& os);
void write_slopes_csv(const SweepResult& result, std::ostream& os);
void write_episode_csv(const SweepResult& result, std::ostream& os);

struct SeriesReport {
  std::string label;
  std::vector<AssumptionItem> checks;
};

// Assumption diagnostics per series, evaluated at the largest horizon. Hard
// errors surface as ConfigError from parsing and engine construction. With
// `simulate` the population settings also run a few replications at the
// largest horizon to measure hitting times.
std::vector<SeriesReport> validate_spec(const ExperimentSpec& spec, bool simulate = false);

// Reads a results.csv and fits log-log slopes of every statistic per series.
// Series come from the manifest.json next to the file; without one, all rows
// of a statistic form a single series.
std::vector<SlopeRow> fit_slopes_from_csv(const std::filesystem::path& results_csv);

// FNV-1a, 64 bit, as 16 hex digits.
std::string fnv1a_hex(const std::string& text);

}  // namespace karma
