#pragma once

#include <Eigen/Dense>

#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "tlpo/errors.hpp"
#include "tlpo/max_sharpe.hpp"
#include "tlpo/moments.hpp"
#include "tlpo/panel.hpp"
#include "tlpo/simulate.hpp"
#include "tlpo/strategies.hpp"
#include "tlpo/transfer.hpp"

namespace tlpo {

/// Walk-forward backtest: hold out the last oos_size shared periods, refit
/// each strategy on an expanding window, and realize one payoff per period.
struct BacktestConfig {
  Index oos_size = 0;
  Index refit_every = 1;
  std::vector<StrategySpec> strategies;
};

struct StrategyRun {
  std::string label;
  StrategySpec spec;  // as executed, with the validation block length frozen
  std::vector<double> payoffs;
  std::vector<TransferWeights> refit_weights;  // one per refit when applicable
};

struct BacktestResult {
  std::vector<Index> oos_times;  // shared panel times of the held-out periods
  std::vector<StrategyRun> runs;
};

inline BacktestResult run_backtest(const AlignedPanel& panel, const BacktestConfig& cfg) {
  if (cfg.oos_size < 2)
    throw std::invalid_argument("backtest needs at least two held-out periods");
  if (cfg.oos_size > panel.n_tilde - 2)
    throw std::invalid_argument("held-out span leaves fewer than two training rows");
  if (cfg.refit_every < 1)
    throw std::invalid_argument("refit interval must be at least 1");

  const Index train = panel.n_tilde - cfg.oos_size;
  std::vector<StrategySpec> resolved = cfg.strategies;
  for (auto& spec : resolved) {
    validate_solver_config(spec.solver);
    if (spec.kind != StrategyKind::Tl) continue;
    // The validation block length is frozen from the first training window
    // rather than re-derived as the window grows.
    if (spec.h == 0) spec.h = train / 5;
    if (spec.h < 2 || train / spec.h < 2)
      throw std::invalid_argument(
          "training window too short for the validation schedule");
  }

  BacktestResult result;
  for (Index s = train + 1; s <= panel.n_tilde; ++s) result.oos_times.push_back(s);

  for (const auto& spec : resolved) {
    StrategyRun run;
    run.label = strategy_name(spec.kind);
    run.spec = spec;
    run.payoffs.reserve(static_cast<std::size_t>(cfg.oos_size));
    Allocation current;
    for (Index j = 0; j < cfg.oos_size; ++j) {
      const Index s = train + 1 + j;
      if (j % cfg.refit_every == 0) {
        const AlignedPanel window = truncate_before(panel, s);
        AllocationOutcome outcome = allocate_detailed(spec, window);
        current = std::move(outcome.allocation);
        if (outcome.weights) run.refit_weights.push_back(std::move(*outcome.weights));
      }
      const Index row = time_to_row(panel.target.rows(), panel.n_tilde, s);
      run.payoffs.push_back(current.weights.dot(panel.target.values.row(row)));
    }
    result.runs.push_back(std::move(run));
  }
  return result;
}

/// Sample Sharpe ratio of a payoff series: mean over (n-1)-divisor standard
/// deviation. A constant series has no defined value.
inline double ssr(const std::vector<double>& payoffs) {
  const std::size_t n = payoffs.size();
  if (n < 2) throw std::invalid_argument("sample Sharpe ratio needs at least two payoffs");
  double mean = 0.0;
  for (double x : payoffs) mean += x;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double x : payoffs) ss += (x - mean) * (x - mean);
  const double variance = ss / static_cast<double>(n - 1);
  if (!(variance > 0.0))
    throw zero_variance_error("payoff series has zero sample variance");
  return mean / std::sqrt(variance);
}

enum class ExperimentKind { Example1, Sim1, Ff3 };

inline std::string experiment_name(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::Example1: return "example1";
    case ExperimentKind::Sim1: return "sim1";
    case ExperimentKind::Ff3: return "ff3";
  }
  throw std::invalid_argument("unknown experiment kind");
}

inline ExperimentKind parse_experiment(const std::string& name) {
  if (name == "example1") return ExperimentKind::Example1;
  if (name == "sim1") return ExperimentKind::Sim1;
  if (name == "ff3") return ExperimentKind::Ff3;
  throw std::invalid_argument("unknown experiment name: '" + name + "'");
}

/// Synthetic stand-in calibration used by the factor design when no observed
/// returns are supplied: loadings share one direction with per-asset scale,
/// so assets differ in both mean and risk.
inline FactorCoefficients default_factor_coefficients(Index d = 5) {
  if (d < 1) throw std::invalid_argument("need at least one asset");
  FactorCoefficients out;
  out.alpha.resize(d);
  out.beta.resize(d, 3);
  const Eigen::RowVector3d direction(0.9, 0.6, 0.7);
  for (Index i = 0; i < d; ++i) {
    out.alpha(i) = 0.3 + 0.1 * static_cast<double>(i);
    out.beta.row(i) = (0.6 + 0.2 * static_cast<double>(i)) * direction;
  }
  return out;
}

struct ExperimentParams {
  Example1Config example1;
  VarFactorConfig sim1;
  FactorPanelConfig ff3;
  bool ff3_synthetic_factors = true;
  Index ff3_factor_horizon = 0;  // synthetic factor path length; 0 = longest dataset
  Eigen::VectorXd ff3_factor_mean = (Eigen::VectorXd(3) << 0.3, 0.2, 0.4).finished();
  Eigen::MatrixXd ff3_factor_cov = ar1_covariance(3, 0.3);
  Index oos_size = 0;  // 0 disables the walk-forward metrics
  Index refit_every = 1;
  std::vector<StrategySpec> strategies;
  std::vector<Index> informative;  // datasets counted by the weight-mass metric
  Index tl_h = 0;                  // block length for the whole-panel weight fit
  SolverConfig solver;
  int jobs = 1;
};

struct MetricStats {
  double mean = std::numeric_limits<double>::quiet_NaN();
  double se = std::numeric_limits<double>::quiet_NaN();
  int count = 0;
};

struct StrategySummary {
  std::string label;
  std::string metric;
  MetricStats stats;
};

/// Population Sharpe statistics for the i.i.d. benchmark: mean and
/// n-divisor variance of the realized ratios, per strategy, plus the
/// variance ratio of the uniform combination to the target-only fit.
struct Example1Stats {
  double esr = std::numeric_limits<double>::quiet_NaN();
  double vsr = std::numeric_limits<double>::quiet_NaN();
  double esr_equal = std::numeric_limits<double>::quiet_NaN();
  double vsr_equal = std::numeric_limits<double>::quiet_NaN();
  double esr_pool = std::numeric_limits<double>::quiet_NaN();
  double vsr_pool = std::numeric_limits<double>::quiet_NaN();
  double vsr_ratio = std::numeric_limits<double>::quiet_NaN();
};

struct ReplicationRecord {
  std::string strategy;
  int replication = 0;
  std::string metric;
  double value = 0.0;
};

struct MonteCarloSummary {
  std::string experiment;
  std::uint64_t master_seed = 0;
  int replications = 0;
  std::vector<StrategySummary> strategies;
  std::optional<Example1Stats> example1;
  std::optional<MetricStats> gamma;  // informative weight mass of the transfer fit
  std::vector<ReplicationRecord> records;
};

namespace detail {

inline MetricStats stats_of(const std::vector<double>& xs) {
  MetricStats out;
  out.count = static_cast<int>(xs.size());
  if (xs.empty()) return out;
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  out.mean = mean;
  if (xs.size() >= 2) {
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
    out.se = sd / std::sqrt(static_cast<double>(xs.size()));
  }
  return out;
}

inline double population_variance(const std::vector<double>& xs) {
  if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(xs.size());
}

/// Runs fn(j) for j = 0..reps-1, optionally across worker threads. Results
/// land in replication order. If any replication throws, the error from the
/// smallest failing index is rethrown after the pool drains.
template <class Fn>
inline std::vector<std::vector<ReplicationRecord>> run_replications(int reps, int jobs,
                                                                    Fn&& fn) {
  std::vector<std::vector<ReplicationRecord>> out(static_cast<std::size_t>(reps));
  if (jobs <= 1) {
    for (int j = 0; j < reps; ++j) out[static_cast<std::size_t>(j)] = fn(j);
    return out;
  }
  std::atomic<int> next{0};
  std::atomic<bool> stop{false};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  int first_error_rep = reps;
  auto worker = [&]() {
    while (!stop.load()) {
      const int j = next.fetch_add(1);
      if (j >= reps) break;
      try {
        out[static_cast<std::size_t>(j)] = fn(j);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (j < first_error_rep) {
          first_error_rep = j;
          first_error = std::current_exception();
        }
        stop.store(true);
      }
    }
  };
  std::vector<std::thread> pool;
  const int n_workers = std::min(jobs, reps);
  pool.reserve(static_cast<std::size_t>(n_workers));
  for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
  return out;
}

inline std::vector<double> metric_values(const std::vector<ReplicationRecord>& records,
                                         const std::string& label,
                                         const std::string& metric) {
  std::vector<double> xs;
  for (const auto& r : records)
    if (r.strategy == label && r.metric == metric) xs.push_back(r.value);
  return xs;
}

}  // namespace detail

/// Monte Carlo over independent replications of one experiment design.
/// Replication j draws from stream (master_seed, j), so results are
/// reproducible and independent of the job count; varying a design knob
/// such as the shift scale keeps the underlying draws fixed.
inline MonteCarloSummary monte_carlo(ExperimentKind kind, const ExperimentParams& params,
                                     int replications, std::uint64_t master_seed) {
  if (replications < 1)
    throw std::invalid_argument("need at least one replication");
  if (params.jobs < 1) throw std::invalid_argument("jobs must be at least 1");
  validate_solver_config(params.solver);
  for (std::size_t a = 0; a < params.strategies.size(); ++a)
    for (std::size_t b = a + 1; b < params.strategies.size(); ++b)
      if (params.strategies[a].kind == params.strategies[b].kind)
        throw std::invalid_argument("duplicate strategy in experiment");

  auto evaluate_panel = [&](const AlignedPanel& panel,
                            const std::vector<Index>& informative,
                            int j) -> std::vector<ReplicationRecord> {
    std::vector<ReplicationRecord> recs;
    StrategySpec tl;
    tl.kind = StrategyKind::Tl;
    tl.h = params.tl_h;
    tl.solver = params.solver;
    const AllocationOutcome fit = allocate_detailed(tl, panel);
    recs.push_back({"tl", j, "gamma", informative_mass(*fit.weights, informative)});
    if (params.oos_size >= 2 && !params.strategies.empty()) {
      BacktestConfig bc;
      bc.oos_size = params.oos_size;
      bc.refit_every = params.refit_every;
      bc.strategies = params.strategies;
      const BacktestResult bt = run_backtest(panel, bc);
      for (const auto& run : bt.runs)
        recs.push_back({run.label, j, "ssr", ssr(run.payoffs)});
    }
    return recs;
  };

  auto replicate = [&](int j) -> std::vector<ReplicationRecord> {
    RngStream stream(master_seed, static_cast<std::uint64_t>(j));
    switch (kind) {
      case ExperimentKind::Example1: {
        const AlignedPanel panel = gen_example1(stream, params.example1);
        const GaussianMoments pop = example1_population_moments(params.example1);
        std::vector<ReplicationRecord> recs;
        StrategySpec spec;
        spec.solver = params.solver;
        for (StrategyKind k : {StrategyKind::NonTransfer, StrategyKind::TlEqual,
                               StrategyKind::Pool}) {
          spec.kind = k;
          const Allocation phi = allocate(spec, panel);
          recs.push_back({strategy_name(k), j, "sr", sharpe_value(phi, pop)});
        }
        return recs;
      }
      case ExperimentKind::Sim1: {
        const AlignedPanel panel = gen_var_factor(stream, params.sim1);
        const std::vector<Index> informative =
            params.informative.empty() ? informative_datasets(params.sim1.source_modes)
                                       : params.informative;
        return evaluate_panel(panel, informative, j);
      }
      case ExperimentKind::Ff3: {
        FactorPanelConfig cfg = params.ff3;
        if (cfg.coefficients.alpha.size() == 0)
          cfg.coefficients = default_factor_coefficients();
        if (params.ff3_synthetic_factors) {
          const std::vector<Index> sizes = detail::resolve_sizes(
              cfg.n0, cfg.sizes, cfg.source_modes.size(), false);
          Index horizon = params.ff3_factor_horizon;
          if (horizon <= 0) horizon = *std::max_element(sizes.begin(), sizes.end());
          cfg.factors = detail::mvn_rows(stream, params.ff3_factor_mean,
                                         detail::mvn_factor(params.ff3_factor_cov),
                                         horizon);
        }
        const AlignedPanel panel = gen_factor_panel(stream, cfg);
        const std::vector<Index> informative =
            params.informative.empty() ? informative_datasets(cfg.source_modes)
                                       : params.informative;
        return evaluate_panel(panel, informative, j);
      }
    }
    throw std::invalid_argument("unknown experiment kind");
  };

  const auto per_rep = detail::run_replications(replications, params.jobs, replicate);

  MonteCarloSummary summary;
  summary.experiment = experiment_name(kind);
  summary.master_seed = master_seed;
  summary.replications = replications;
  for (const auto& recs : per_rep)
    summary.records.insert(summary.records.end(), recs.begin(), recs.end());

  if (kind == ExperimentKind::Example1) {
    Example1Stats ex;
    const auto sr = detail::metric_values(summary.records, "non_transfer", "sr");
    const auto sr_eq = detail::metric_values(summary.records, "tl_equal", "sr");
    const auto sr_pool = detail::metric_values(summary.records, "pool", "sr");
    ex.esr = detail::stats_of(sr).mean;
    ex.vsr = detail::population_variance(sr);
    ex.esr_equal = detail::stats_of(sr_eq).mean;
    ex.vsr_equal = detail::population_variance(sr_eq);
    ex.esr_pool = detail::stats_of(sr_pool).mean;
    ex.vsr_pool = detail::population_variance(sr_pool);
    if (ex.vsr > 0.0) ex.vsr_ratio = ex.vsr_equal / ex.vsr;
    summary.example1 = ex;
    for (const char* label : {"non_transfer", "tl_equal", "pool"})
      summary.strategies.push_back(
          {label, "sr", detail::stats_of(detail::metric_values(summary.records, label, "sr"))});
  } else {
    summary.gamma = detail::stats_of(detail::metric_values(summary.records, "tl", "gamma"));
    if (params.oos_size >= 2) {
      for (const auto& spec : params.strategies) {
        const std::string label = strategy_name(spec.kind);
        summary.strategies.push_back(
            {label, "ssr",
             detail::stats_of(detail::metric_values(summary.records, label, "ssr"))});
      }
    }
  }
  return summary;
}

}  // namespace tlpo
