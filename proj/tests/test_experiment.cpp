#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "doctest.h"
#include "karma/experiment.hpp"

using namespace karma;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("karma_test_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

Json small_regret_spec() {
  return Json::parse(R"({
    "name": "tiny", "kind": "stationary-regret", "seed": 5, "replications": 1,
    "horizons": [200], "strategy": "K", "initial_multiplier": 5, "gain_share": 0.1,
    "budget": {"kind": "horizon-power", "coef": 3, "exponent": 0.5},
    "step": {"kind": "horizon-power", "coef": 20, "exponent": -0.5}
  })");
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(KARMA_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("spec parsing") {
  const ExperimentSpec s = parse_spec(small_regret_spec());
  CHECK(s.name == "tiny");
  CHECK(s.series.size() == 1);
  CHECK(s.series[0].label == "base");
  CHECK(s.series[0].horizons == std::vector<int>{200});

  Json bad = small_regret_spec();
  bad["kind"] = "nonsense";
  CHECK_THROWS_AS(parse_spec(bad), ConfigError);

  bad = small_regret_spec();
  bad["valuation"] = {{"kind", "uniform"}, {"lo", 1.0}, {"hi", 0.0}};
  CHECK_THROWS_AS(parse_spec(bad), ConfigError);

  bad = small_regret_spec();
  bad["replications"] = 0;
  CHECK_THROWS_AS(parse_spec(bad), ConfigError);

  CHECK_THROWS_AS(load_spec("/nonexistent/spec.json"), ConfigError);
  CHECK(default_horizons() == std::vector<int>{100, 316, 1000, 3162, 10000, 31623, 100000});
}

TEST_CASE("series patches merge into the base") {
  Json doc = small_regret_spec();
  doc["series"] = Json::parse(R"([
    {"label": "a", "patch": {}},
    {"label": "b", "patch": {"step": {"exponent": -0.25}}}])");
  const ExperimentSpec s = parse_spec(doc);
  REQUIRE(s.series.size() == 2);
  CHECK(s.series[1].config["step"]["exponent"] == -0.25);
  CHECK(s.series[1].config["step"]["coef"] == 20);
  const auto sc = build_stationary(s.series[1].config, 10000);
  CHECK(step_at(sc.agent.step, 1, 10000) == doctest::Approx(2.0));
  CHECK(sc.agent.initial_karma == doctest::Approx(300));
}

TEST_CASE("one grid point, one replication") {
  const ExperimentSpec s = parse_spec(small_regret_spec());
  const SweepResult r = run_experiment(s);
  REQUIRE(r.grid.size() == 1);
  std::ostringstream os;
  write_results_csv(r, os);
  const auto l = lines(os.str());
  CHECK(l.front() == "grid_id,T,param_hash,stat_name,mean,ci_lo,ci_hi,n_reps");
  const std::vector<std::string> stats{"regret",
                                       "cost_per_period",
                                       "hindsight_cost_per_period",
                                       "saved_per_period",
                                       "final_multiplier",
                                       "final_karma",
                                       "hitting_full",
                                       "hitting_ratio"};
  REQUIRE(l.size() == stats.size() + 1);
  for (std::size_t i = 0; i < stats.size(); ++i) {
    const std::string prefix = "0,200," + r.grid[0].param_hash + "," + stats[i] + ",";
    CHECK(l[i + 1].rfind(prefix, 0) == 0);
    CHECK(l[i + 1].substr(l[i + 1].size() - 2) == ",1");
  }
  CHECK(r.row("base", 200, "regret").summary.n == 1);
  CHECK_THROWS_AS(r.row("base", 200, "nothing"), ConfigError);
}

TEST_CASE("results do not depend on the worker count and repeat byte for byte") {
  Json doc = small_regret_spec();
  doc["replications"] = 6;
  doc["horizons"] = {100, 300, 900};
  const ExperimentSpec s = parse_spec(doc);
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  RunOptions one, four;
  one.workers = 1, four.workers = 4;
  write_outputs(s, run_experiment(s, one), a);
  write_outputs(s, run_experiment(s, four), b);
  CHECK(slurp(a / "results.csv") == slurp(b / "results.csv"));
  CHECK(slurp(a / "slopes.csv") == slurp(b / "slopes.csv"));

  const auto sl = lines(slurp(a / "slopes.csv"));
  CHECK(sl.front() == "series,stat_name,slope,std_error,intercept,n_points");
  CHECK(sl.size() == 2);
  CHECK(sl[1].rfind("base,regret,", 0) == 0);

  const Json manifest = Json::parse(slurp(a / "manifest.json"));
  CHECK(manifest["name"] == "tiny");
  CHECK(manifest["seed"] == 5);
  CHECK(manifest["version"] == KARMA_VERSION);
  CHECK(manifest["grid"].size() == 3);

  // slopes recomputed from the CSV match the sweep's own fit
  const auto refit = fit_slopes_from_csv(a / "results.csv");
  bool found = false;
  for (const auto& row : refit)
    if (row.series == "base" && row.stat == "regret") {
      found = true;
      const auto direct = run_experiment(s, one).slopes;
      CHECK(row.fit.slope == doctest::Approx(direct.front().fit.slope).epsilon(1e-12));
    }
  CHECK(found);
}

TEST_CASE("episode output") {
  const ExperimentSpec s = parse_spec(Json::parse(R"({
    "name": "ep", "kind": "episode-comparison", "seed": 3, "replications": 1, "horizons": [50],
    "budget": {"kind": "fixed", "value": 200}, "step": {"kind": "fixed", "eps": 0.01},
    "gain_share": 0.05,
    "competing": {"marginal": {"kind": "uniform", "lo": 0, "hi": 50}},
    "series": [{"label": "K", "patch": {"strategy": "K", "initial_multiplier": 1.5}},
               {"label": "A", "patch": {"strategy": "A", "initial_multiplier": 1.5}}]
  })"));
  const SweepResult r = run_experiment(s);
  std::ostringstream os;
  write_episode_csv(r, os);
  const auto l = lines(os.str());
  CHECK(l.front() == "t,strategy,cumulative_saved,multiplier,karma");
  CHECK(l.size() == 1 + 3 * 50);
  CHECK(l[1].rfind("1,K,", 0) == 0);
  CHECK(l[51].rfind("1,hindsight,", 0) == 0);
  CHECK(l[101].rfind("1,A,", 0) == 0);
  CHECK(r.row("K", 50, "saved_total").summary.mean >= 0.0);
}

TEST_CASE("bundled specs parse") {
  int n = 0;
  for (const auto& e : fs::directory_iterator(KARMA_SPEC_DIR)) {
    if (e.path().extension() != ".json") continue;
    CAPTURE(e.path().string());
    CHECK_NOTHROW(validate_spec(load_spec(e.path())));
    ++n;
  }
  CHECK(n == 10);
}

TEST_CASE("the hitting-time configuration passes the empirical item") {
  const auto spec = load_spec(fs::path(KARMA_SPEC_DIR) / "fig2a_hitting_time.json");
  const auto reports = validate_spec(spec, true);
  REQUIRE(!reports.empty());
  REQUIRE(reports[0].label == "ck6");
  bool seen = false;
  for (const auto& item : reports[0].checks)
    if (item.id == "empirical-hitting-time") {
      seen = true;
      CHECK(item.status == CheckStatus::kPass);
    }
  CHECK(seen);
}

TEST_CASE("command line exit codes") {
  const fs::path dir = scratch("cli");
  {
    std::ofstream(dir / "tiny.json") << small_regret_spec().dump();
    std::ofstream(dir / "broken.json") << "{ not json";
    Json bad = small_regret_spec();
    bad["kind"] = "nonsense";
    std::ofstream(dir / "bad.json") << bad.dump();
  }
  const std::string d = dir.string();
  CHECK(run_cli("--version") == 0);
  CHECK(run_cli("") == 1);
  CHECK(run_cli("frobnicate") == 1);
  CHECK(run_cli("validate " + d + "/tiny.json") == 0);
  CHECK(run_cli("validate " + d + "/broken.json") == 1);
  CHECK(run_cli("validate " + d + "/bad.json") == 1);
  CHECK(run_cli("validate " + d + "/missing.json") == 1);
  CHECK(run_cli("run " + d + "/tiny.json --out " + d + "/out") == 0);
  CHECK(fs::exists(dir / "out" / "results.csv"));
  CHECK(run_cli("fit-slope " + d + "/out/results.csv") == 0);
  CHECK(run_cli("run " + d + "/tiny.json --out /proc/karma/out") == 2);
  CHECK(run_cli("list-experiments") == 0);
}
