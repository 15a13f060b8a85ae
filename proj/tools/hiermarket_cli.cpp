// Command-line front end: run experiments, sweeps and scenario overlays, or
// analyze an externally supplied price series.
//
// Exit codes: 0 success, 1 configuration error, 2 runtime failure.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hiermarket/bubble.hpp"
#include "hiermarket/config.hpp"
#include "hiermarket/runner.hpp"
#include "hiermarket/stylized.hpp"

namespace {

using namespace hiermarket;

struct CommonOpts {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  unsigned threads = 0;
};

int execute(ExperimentConfig cfg, const CommonOpts& opts) {
  if (opts.seed) cfg.master_seed = *opts.seed;
  if (opts.out_dir) cfg.output.dir = *opts.out_dir;
  RunRecord record = run_experiment(cfg, opts.threads);
  export_record(record, cfg.output.dir);
  long failed = 0;
  for (const auto& t : record.trials)
    if (!t.ok) {
      ++failed;
      std::cerr << "trial " << t.point << "/" << t.trial << " failed: " << t.error << "\n";
    }
  std::cout << "wrote " << cfg.output.dir << "/trials.csv and summary.json ("
            << record.trials.size() - static_cast<std::size_t>(failed) << "/"
            << record.trials.size() << " trials ok)\n";
  return failed == 0 ? 0 : 2;
}

// Reads a CSV with a header line; takes the `price` column (and `fundamental`
// when present), or a single unnamed column of prices.
void read_series_csv(const std::string& path, std::vector<double>& prices,
                     std::vector<double>& fundamentals) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open series file '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("series file '" + path + "' is empty");
  int price_col = -1, fund_col = -1, n_cols = 0;
  {
    std::stringstream header(line);
    std::string cell;
    while (std::getline(header, cell, ',')) {
      if (cell == "price") price_col = n_cols;
      if (cell == "fundamental") fund_col = n_cols;
      ++n_cols;
    }
  }
  if (price_col < 0) {
    if (n_cols != 1) throw ConfigError("series file needs a 'price' column");
    price_col = 0;
    // single column without a recognized header: treat line 1 as data
    try {
      prices.push_back(std::stod(line));
    } catch (...) {
      // header text, skip it
    }
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string cell;
    int col = 0;
    while (std::getline(row, cell, ',')) {
      if (col == price_col) prices.push_back(std::stod(cell));
      if (col == fund_col) fundamentals.push_back(std::stod(cell));
      ++col;
    }
  }
  if (prices.size() < 2) throw ConfigError("series file has fewer than 2 price rows");
}

int analyze_series(const std::string& path, int level, long downsample) {
  std::vector<double> prices, fundamentals;
  read_series_csv(path, prices, fundamentals);
  if (fundamentals.size() != prices.size()) fundamentals.assign(prices.size(), prices.front());

  StylizedReport rep = compute_stylized(prices, fundamentals);
  nlohmann::ordered_json out;
  auto put = [&out](const char* key, const std::optional<double>& v) {
    if (v)
      out[key] = *v;
    else
      out[key] = nullptr;
  };
  out["sigma"] = rep.sigma;
  out["f_sigma"] = rep.f_sigma;
  put("tail_alpha_2_5", rep.tail_alpha_2_5);
  put("tail_alpha_5", rep.tail_alpha_5);
  put("tail_alpha_10", rep.tail_alpha_10);
  put("kurtosis_t1", rep.kurtosis_t1);
  put("kurtosis_t10", rep.kurtosis_t10);
  put("kurtosis_t50", rep.kurtosis_t50);
  put("acf_abs_lag10", rep.acf_abs_lag10);
  put("acf_sq_lag10", rep.acf_sq_lag10);
  put("decay_a", rep.decay_a);
  put("decay_beta", rep.decay_beta);

  long n_obs = (static_cast<long>(prices.size()) + downsample - 1) / downsample;
  if (n_obs >= 100) {
    BubbleReport bub = detect_bubbles(prices, downsample, level);
    out["sadf_stat"] = bub.sadf_stat;
    out["gsadf_stat"] = bub.gsadf_stat;
    out["sadf_significant"] = bub.sadf_significant;
    out["gsadf_significant"] = bub.gsadf_significant;
    nlohmann::ordered_json intervals = nlohmann::ordered_json::array();
    for (auto [a, b] : bub.explosive_intervals) intervals.push_back({a, b});
    out["explosive_intervals"] = intervals;
  } else {
    out["bubble_tests"] = "skipped (fewer than 100 observations after downsampling)";
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical agent-based market simulator and analysis suite"};
  app.require_subcommand(1);
  app.footer("Environment: HIERMARKET_THREADS overrides the worker-pool size.");

  CommonOpts opts;

  auto add_common = [&opts](CLI::App* cmd, bool config_required = true) {
    cmd->add_option("--config", opts.config_path, "experiment config file (JSON)")
        ->required(config_required);
    cmd->add_option("--seed", opts.seed, "override master_seed");
    cmd->add_option("--out", opts.out_dir, "override output directory");
    cmd->add_option("--threads", opts.threads, "worker-pool size (0 = auto)");
  };

  auto* run_cmd = app.add_subcommand("run", "run a single experiment");
  add_common(run_cmd);

  auto* sweep_cmd = app.add_subcommand("sweep", "run a parameter sweep");
  add_common(sweep_cmd);
  std::string sweep_param;
  std::vector<double> sweep_values;
  sweep_cmd->add_option("--param", sweep_param, "parameter to sweep")->required();
  sweep_cmd->add_option("--values", sweep_values, "comma-separated values")
      ->required()
      ->delimiter(',');

  auto* analyze_cmd = app.add_subcommand("analyze", "stylized facts + bubble report for a price CSV");
  std::string series_path;
  int level = 90;
  long downsample = 1;
  analyze_cmd->add_option("--series", series_path, "CSV with a 'price' column")->required();
  analyze_cmd->add_option("--level", level, "significance level")
      ->check(CLI::IsMember({90, 95}));
  analyze_cmd->add_option("--downsample", downsample, "keep one observation per N rows")
      ->check(CLI::PositiveNumber);

  auto* scenario_cmd = app.add_subcommand("scenario", "scenario overlay on a base config");
  scenario_cmd->require_subcommand(1);
  auto* echo_cmd = scenario_cmd->add_subcommand("echo", "echo-chamber overlay");
  add_common(echo_cmd);
  std::string echo_mode;
  double echo_e = 1.0;
  echo_cmd->add_option("--mode", echo_mode, "asymmetric|symmetric")
      ->required()
      ->check(CLI::IsMember({"asymmetric", "symmetric"}));
  echo_cmd->add_option("--E", echo_e, "echo multiplier (>= 1)")->required();
  auto* pnd_cmd = scenario_cmd->add_subcommand("pnd", "pump-and-dump overlay");
  add_common(pnd_cmd);
  PumpDumpConfig pnd_cfg;
  pnd_cmd->add_option("--target", pnd_cfg.target, "corrupted community node id")->required();
  pnd_cmd->add_option("--T0", pnd_cfg.t_begin, "corruption window start (steps)")->required();
  pnd_cmd->add_option("--T1", pnd_cfg.t_end, "corruption window end (steps)")->required();
  pnd_cmd->add_option("--S", pnd_cfg.S, "signal strength")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (analyze_cmd->parsed()) return analyze_series(series_path, level, downsample);

    ExperimentConfig cfg = load_config(opts.config_path);
    if (sweep_cmd->parsed()) {
      cfg.sweep = SweepSpec{sweep_param, sweep_values};
      validate_config(cfg);
    } else if (echo_cmd->parsed()) {
      cfg.echo.mode = echo_mode == "asymmetric" ? EchoMode::Asymmetric : EchoMode::Symmetric;
      cfg.echo.E = echo_e;
      validate_config(cfg);
    } else if (pnd_cmd->parsed()) {
      cfg.pnd = pnd_cfg;
      validate_config(cfg);
    }
    return execute(std::move(cfg), opts);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
