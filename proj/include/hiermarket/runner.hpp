#pragma once

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "hiermarket/bubble.hpp"
#include "hiermarket/config.hpp"
#include "hiermarket/market.hpp"
#include "hiermarket/rng.hpp"
#include "hiermarket/scenario.hpp"
#include "hiermarket/stylized.hpp"

namespace hiermarket {

struct TrialResult {
  long point = 0;
  long trial = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  double volatility = 0.0;
  double f_sigma = 0.0;
  double max_price = 0.0;
  StylizedReport stylized;
  std::optional<BubbleReport> bubble;
  bool explosive_90 = false;  // GSADF stat above the 90% critical value
  std::optional<bool> pnd_success;
  MarketSeries series;  // kept only when the config asks for series export
};

struct PointAggregate {
  std::string param;  // empty for a plain run
  double value = 0.0;
  long trials_ok = 0;
  double volatility_mean = 0.0;
  double f_sigma_mean = 0.0;
  double max_price_mean = 0.0;
  double explosive_fraction = 0.0;
  std::optional<double> tail_alpha_10_mean;
  std::optional<double> kurtosis_t1_mean, kurtosis_t10_mean, kurtosis_t50_mean;
  std::optional<double> acf_abs_mean, acf_sq_mean;
  std::optional<double> decay_beta_mean;
  std::optional<double> pnd_success_fraction;
};

struct RunRecord {
  ExperimentConfig config;
  std::vector<TrialResult> trials;       // canonical order: point-major, trial-minor
  std::vector<PointAggregate> points;
  std::vector<double> baseline_maxima;   // pump-and-dump baseline peaks (t >= T0)
};

namespace detail {

inline unsigned worker_count(unsigned requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("HIERMARKET_THREADS")) {
    long v = std::atol(env);
    if (v > 0) return static_cast<unsigned>(v);
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

// Run jobs 0..count-1 on a small pool; each job owns its state.
template <typename Fn>
void parallel_for(long count, unsigned threads, Fn&& fn) {
  if (threads <= 1 || count <= 1) {
    for (long i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<long> next{0};
  std::vector<std::thread> pool;
  unsigned n = std::min<unsigned>(threads, static_cast<unsigned>(count));
  pool.reserve(n);
  for (unsigned t = 0; t < n; ++t)
    pool.emplace_back([&] {
      for (long i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
    });
  for (auto& th : pool) th.join();
}

// All per-trial metrics live on the analysis grid: one observation every
// `downsample` steps (default 1/dt, i.e. one per unit time). Per-step prices
// move by at most one tick, so per-step returns are quantized to ±tick/p and
// carry no usable tail or aggregation structure.
inline void analyze_trial(TrialResult& res, const MarketSeries& series,
                          const ExperimentConfig& cfg) {
  std::vector<double> prices, fundamentals;
  for (std::size_t i = static_cast<std::size_t>(cfg.burn_in); i < series.price.size();
       i += static_cast<std::size_t>(cfg.downsample)) {
    prices.push_back(series.price[i]);
    fundamentals.push_back(series.fundamental[i]);
  }
  res.stylized = compute_stylized(prices, fundamentals);
  res.volatility = res.stylized.sigma;
  res.f_sigma = res.stylized.f_sigma;
  res.max_price = *std::max_element(prices.begin(), prices.end());

  long n_obs = static_cast<long>(prices.size());
  if (n_obs >= 100) {
    res.bubble = detect_bubbles(prices, 1, cfg.level);
    res.explosive_90 =
        res.bubble->gsadf_stat > critical_value(BubbleTest::Gsadf, n_obs, 90).cv;
    for (auto& [a, b] : res.bubble->explosive_intervals) {
      a = cfg.burn_in + a * cfg.downsample;
      b = cfg.burn_in + b * cfg.downsample;
    }
    res.bubble->stride = cfg.downsample;
  }
}

inline void accumulate_mean(std::optional<double>& mean, long& count,
                            const std::optional<double>& v) {
  if (!v) return;
  ++count;
  mean = mean.value_or(0.0) + (*v - mean.value_or(0.0)) / static_cast<double>(count);
}

}  // namespace detail

/// Execute all trials of an experiment (optionally on a worker pool). Every
/// trial is fully determined by (config, master_seed); results are collected
/// in trial order, so the record is identical for any pool size.
inline RunRecord run_experiment(const ExperimentConfig& cfg, unsigned threads = 0) {
  RunRecord record;
  record.config = cfg;

  std::vector<std::pair<std::string, double>> points;  // (label, value)
  if (cfg.sweep) {
    for (std::size_t i = 0; i < cfg.sweep->values.size(); ++i)
      points.emplace_back(cfg.sweep->param + "[" + std::to_string(i) + "]",
                          cfg.sweep->values[i]);
  } else {
    points.emplace_back("run", 0.0);
  }
  long n_points = static_cast<long>(points.size());
  long n_jobs = n_points * cfg.trials;
  record.trials.resize(static_cast<std::size_t>(n_jobs));

  unsigned workers = detail::worker_count(threads);

  // pump-and-dump baselines: 50 uncorrupted runs with their own seed stream
  constexpr long kBaselineRuns = 50;
  if (cfg.pnd) {
    record.baseline_maxima.assign(kBaselineRuns, 0.0);
    detail::parallel_for(kBaselineRuns, workers, [&](long i) {
      ExperimentConfig base = cfg;
      base.pnd.reset();
      Simulation sim(base.params, base.hierarchy,
                     derive_seed(cfg.master_seed, "baseline", static_cast<std::uint64_t>(i)));
      sim.run(cfg.steps);
      const auto& p = sim.series().price;
      record.baseline_maxima[static_cast<std::size_t>(i)] =
          *std::max_element(p.begin() + cfg.pnd->t_begin, p.end());
    });
  }

  detail::parallel_for(n_jobs, workers, [&](long job) {
    long point = job / cfg.trials;
    long trial = job % cfg.trials;
    TrialResult& res = record.trials[static_cast<std::size_t>(job)];
    res.point = point;
    res.trial = trial;
    std::string label = points[static_cast<std::size_t>(point)].first;
    if (cfg.pnd) label = cfg.sweep ? "corrupted:" + label : "corrupted";
    res.seed = derive_seed(cfg.master_seed, label, static_cast<std::uint64_t>(trial));
    try {
      ExperimentConfig local = cfg;
      if (cfg.sweep)
        apply_param(local, cfg.sweep->param, cfg.sweep->values[static_cast<std::size_t>(point)]);
      Simulation sim(local.params, local.hierarchy, res.seed, local.echo, local.pnd);
      sim.run(local.steps);
      detail::analyze_trial(res, sim.series(), local);
      if (cfg.pnd)
        res.pnd_success =
            pnd_success(sim.series().price, record.baseline_maxima, cfg.pnd->t_begin);
      if (cfg.output.write_series) res.series = sim.series();
      res.ok = true;
    } catch (const std::exception& e) {
      res.ok = false;
      res.error = e.what();
    }
  });

  // aggregates over successful trials, in canonical trial order
  for (long point = 0; point < n_points; ++point) {
    PointAggregate agg;
    if (cfg.sweep) {
      agg.param = cfg.sweep->param;
      agg.value = cfg.sweep->values[static_cast<std::size_t>(point)];
    }
    long n_hill = 0, n_k1 = 0, n_k10 = 0, n_k50 = 0, n_abs = 0, n_sq = 0, n_beta = 0;
    long explosive = 0, pnd_successes = 0, pnd_evaluated = 0;
    for (long trial = 0; trial < cfg.trials; ++trial) {
      const TrialResult& res = record.trials[static_cast<std::size_t>(point * cfg.trials + trial)];
      if (!res.ok) continue;
      ++agg.trials_ok;
      double c = static_cast<double>(agg.trials_ok);
      agg.volatility_mean += (res.volatility - agg.volatility_mean) / c;
      agg.f_sigma_mean += (res.f_sigma - agg.f_sigma_mean) / c;
      agg.max_price_mean += (res.max_price - agg.max_price_mean) / c;
      if (res.explosive_90) ++explosive;
      detail::accumulate_mean(agg.tail_alpha_10_mean, n_hill, res.stylized.tail_alpha_10);
      detail::accumulate_mean(agg.kurtosis_t1_mean, n_k1, res.stylized.kurtosis_t1);
      detail::accumulate_mean(agg.kurtosis_t10_mean, n_k10, res.stylized.kurtosis_t10);
      detail::accumulate_mean(agg.kurtosis_t50_mean, n_k50, res.stylized.kurtosis_t50);
      detail::accumulate_mean(agg.acf_abs_mean, n_abs, res.stylized.acf_abs_lag10);
      detail::accumulate_mean(agg.acf_sq_mean, n_sq, res.stylized.acf_sq_lag10);
      detail::accumulate_mean(agg.decay_beta_mean, n_beta, res.stylized.decay_beta);
      if (res.pnd_success) {
        ++pnd_evaluated;
        if (*res.pnd_success) ++pnd_successes;
      }
    }
    if (agg.trials_ok > 0)
      agg.explosive_fraction = static_cast<double>(explosive) / static_cast<double>(agg.trials_ok);
    if (pnd_evaluated > 0)
      agg.pnd_success_fraction =
          static_cast<double>(pnd_successes) / static_cast<double>(pnd_evaluated);
    record.points.push_back(agg);
  }
  return record;
}

namespace detail {

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string fmt_opt(const std::optional<double>& v) {
  return v ? fmt_double(*v) : std::string();
}

}  // namespace detail

/// Write the per-trial metrics table, the aggregate summary and (optionally)
/// per-step series files. Re-exporting an unchanged record is byte-identical.
inline void export_record(const RunRecord& record, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("export: cannot create directory '" + dir + "'");

  const ExperimentConfig& cfg = record.config;
  {
    std::ofstream out(fs::path(dir) / "trials.csv", std::ios::binary);
    if (!out) throw std::runtime_error("export: cannot write trials.csv in '" + dir + "'");
    out << "point,param,value,trial,seed,volatility,f_sigma,max_price,"
           "tail_alpha_2_5,tail_alpha_5,tail_alpha_10,"
           "kurtosis_t1,kurtosis_t10,kurtosis_t50,acf_abs_lag10,acf_sq_lag10,"
           "decay_a,decay_beta,sadf_stat,gsadf_stat,sadf_significant,"
           "gsadf_significant,explosive_90,n_explosive_intervals,pnd_success,ok,error\n";
    using detail::fmt_double;
    using detail::fmt_opt;
    for (const TrialResult& t : record.trials) {
      out << t.point << ',';
      if (cfg.sweep)
        out << cfg.sweep->param << ','
            << fmt_double(cfg.sweep->values[static_cast<std::size_t>(t.point)]) << ',';
      else
        out << ",,";
      out << t.trial << ',' << t.seed << ',' << fmt_double(t.volatility) << ','
          << fmt_double(t.f_sigma) << ',' << fmt_double(t.max_price) << ','
          << fmt_opt(t.stylized.tail_alpha_2_5) << ',' << fmt_opt(t.stylized.tail_alpha_5)
          << ',' << fmt_opt(t.stylized.tail_alpha_10) << ','
          << fmt_opt(t.stylized.kurtosis_t1) << ',' << fmt_opt(t.stylized.kurtosis_t10)
          << ',' << fmt_opt(t.stylized.kurtosis_t50) << ','
          << fmt_opt(t.stylized.acf_abs_lag10) << ',' << fmt_opt(t.stylized.acf_sq_lag10)
          << ',' << fmt_opt(t.stylized.decay_a) << ',' << fmt_opt(t.stylized.decay_beta)
          << ',';
      if (t.bubble)
        out << fmt_double(t.bubble->sadf_stat) << ',' << fmt_double(t.bubble->gsadf_stat)
            << ',' << (t.bubble->sadf_significant ? 1 : 0) << ','
            << (t.bubble->gsadf_significant ? 1 : 0) << ',' << (t.explosive_90 ? 1 : 0)
            << ',' << t.bubble->explosive_intervals.size() << ',';
      else
        out << ",,,,,,";
      out << (t.pnd_success ? (*t.pnd_success ? "1" : "0") : "") << ',' << (t.ok ? 1 : 0)
          << ',' << t.error << '\n';
    }
  }

  {
    nlohmann::ordered_json summary;
    summary["steps"] = cfg.steps;
    summary["trials"] = cfg.trials;
    summary["master_seed"] = cfg.master_seed;
    summary["burn_in"] = cfg.burn_in;
    summary["downsample"] = cfg.downsample;
    summary["level"] = cfg.level;
    nlohmann::ordered_json pts = nlohmann::ordered_json::array();
    for (const PointAggregate& p : record.points) {
      nlohmann::ordered_json jp;
      if (!p.param.empty()) {
        jp["param"] = p.param;
        jp["value"] = p.value;
      }
      jp["trials_ok"] = p.trials_ok;
      jp["volatility_mean"] = p.volatility_mean;
      jp["f_sigma_mean"] = p.f_sigma_mean;
      jp["max_price_mean"] = p.max_price_mean;
      jp["explosive_fraction"] = p.explosive_fraction;
      auto put = [&jp](const char* key, const std::optional<double>& v) {
        if (v) jp[key] = *v;
      };
      put("tail_alpha_10_mean", p.tail_alpha_10_mean);
      put("kurtosis_t1_mean", p.kurtosis_t1_mean);
      put("kurtosis_t10_mean", p.kurtosis_t10_mean);
      put("kurtosis_t50_mean", p.kurtosis_t50_mean);
      put("acf_abs_mean", p.acf_abs_mean);
      put("acf_sq_mean", p.acf_sq_mean);
      put("decay_beta_mean", p.decay_beta_mean);
      put("pnd_success_fraction", p.pnd_success_fraction);
      pts.push_back(jp);
    }
    summary["points"] = pts;
    if (!record.baseline_maxima.empty()) summary["baseline_maxima"] = record.baseline_maxima;
    std::ofstream out(fs::path(dir) / "summary.json", std::ios::binary);
    if (!out) throw std::runtime_error("export: cannot write summary.json in '" + dir + "'");
    out << summary.dump(2) << '\n';
  }

  if (cfg.output.write_series) {
    for (const TrialResult& t : record.trials) {
      if (!t.ok) continue;
      std::string name = "series_" + std::to_string(t.point) + "_" + std::to_string(t.trial) + ".csv";
      std::ofstream out(fs::path(dir) / name, std::ios::binary);
      if (!out) throw std::runtime_error("export: cannot write " + name + " in '" + dir + "'");
      out << "step,price,fundamental,n_o,n_p,n_f\n";
      for (long i = 0; i < t.series.size(); ++i)
        out << i << ',' << detail::fmt_double(t.series.price[static_cast<std::size_t>(i)]) << ','
            << detail::fmt_double(t.series.fundamental[static_cast<std::size_t>(i)]) << ','
            << t.series.n_o[static_cast<std::size_t>(i)] << ','
            << t.series.n_p[static_cast<std::size_t>(i)] << ','
            << t.series.n_f[static_cast<std::size_t>(i)] << '\n';
    }
  }
}

}  // namespace hiermarket
