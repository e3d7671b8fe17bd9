// Command-line front end: simulate the experiment designs, backtest
// strategies on CSV panels, solve one allocation, and re-render reports.
//
// Exit codes: 0 success, 2 usage error, 3 unreadable or invalid input,
// 4 numerical failure.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "tlpo/tlpo.hpp"

namespace {

using tlpo::Index;
using ordered_json = tlpo::ordered_json;

std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(csv);
  while (std::getline(is, cur, ',')) {
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

// Precedence for every setting: explicit flag, then config file, then the
// built-in default already sitting in the variable.
template <class T>
void merge_flag(const CLI::App* sub, const std::string& flag, const ordered_json& cfg,
                const std::string& key, T& var) {
  if (sub->count(flag) > 0) return;
  if (!cfg.is_object() || !cfg.contains(key)) return;
  try {
    var = cfg.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw tlpo::io_error("config key '" + key + "': " + e.what());
  }
}

ordered_json load_config(const std::string& path) {
  if (path.empty()) return ordered_json::object();
  std::ifstream in(path);
  if (!in) throw tlpo::io_error("cannot open config: " + path);
  ordered_json cfg;
  try {
    in >> cfg;
  } catch (const nlohmann::json::exception& e) {
    throw tlpo::io_error("malformed config JSON in " + path + ": " + e.what());
  }
  if (!cfg.is_object()) throw tlpo::io_error("config root must be a JSON object");
  return cfg;
}

tlpo::ReportFormat parse_format(const std::string& name) {
  if (name == "json") return tlpo::ReportFormat::Json;
  if (name == "csv") return tlpo::ReportFormat::Csv;
  if (name == "table") return tlpo::ReportFormat::Table;
  throw tlpo::io_error("unknown format: '" + name + "'");
}

std::vector<tlpo::SourceMode> parse_modes(const std::vector<std::string>& names) {
  std::vector<tlpo::SourceMode> out;
  for (const auto& n : names) {
    if (n == "decay")
      out.push_back(tlpo::SourceMode::TimeDecay);
    else if (n == "shift")
      out.push_back(tlpo::SourceMode::RhoShift);
    else
      throw tlpo::io_error("unknown source mode: '" + n + "' (use decay|shift)");
  }
  return out;
}

Eigen::VectorXd to_vector(const std::vector<double>& xs) {
  Eigen::VectorXd v(static_cast<Index>(xs.size()));
  for (Index i = 0; i < v.size(); ++i) v(i) = xs[static_cast<std::size_t>(i)];
  return v;
}

std::vector<Index> to_indices(const std::vector<std::int64_t>& xs) {
  std::vector<Index> out;
  for (auto x : xs) out.push_back(static_cast<Index>(x));
  return out;
}

// Flags shared by every simulate design and by backtest/solve.
struct StrategyOpts {
  std::string strategies = "tl,non_transfer";
  std::int64_t h = 0;
  double lambda = 0.2;
  std::int64_t tlc_source = 1;
  int restarts = 1;
  int max_iters = 5000;
  double tol = 1e-8;
  double pd_floor = 1e-8;
};

void add_strategy_flags(CLI::App* sub, StrategyOpts& o, bool with_list) {
  if (with_list)
    sub->add_option("--strategies", o.strategies,
                    "comma list of tl,tl_equal,non_transfer,pool,tlc");
  sub->add_option("--h", o.h, "validation block length (0 = rows/5)");
  sub->add_option("--lambda", o.lambda, "penalty strength for tlc");
  sub->add_option("--tlc-source", o.tlc_source, "source dataset anchoring tlc");
  sub->add_option("--restarts", o.restarts, "extra solver restarts");
  sub->add_option("--max-iters", o.max_iters, "solver iteration cap");
  sub->add_option("--tol", o.tol, "solver convergence tolerance");
  sub->add_option("--pd-floor", o.pd_floor, "relative covariance eigenvalue floor");
}

void merge_strategy_flags(const CLI::App* sub, const ordered_json& cfg, StrategyOpts& o) {
  merge_flag(sub, "--strategies", cfg, "strategies", o.strategies);
  merge_flag(sub, "--h", cfg, "h", o.h);
  merge_flag(sub, "--lambda", cfg, "lambda", o.lambda);
  merge_flag(sub, "--tlc-source", cfg, "tlc_source", o.tlc_source);
  merge_flag(sub, "--restarts", cfg, "restarts", o.restarts);
  merge_flag(sub, "--max-iters", cfg, "max_iters", o.max_iters);
  merge_flag(sub, "--tol", cfg, "tol", o.tol);
  merge_flag(sub, "--pd-floor", cfg, "pd_floor", o.pd_floor);
}

tlpo::SolverConfig solver_of(const StrategyOpts& o) {
  tlpo::SolverConfig solver;
  solver.restarts = o.restarts;
  solver.max_iters = o.max_iters;
  solver.tol = o.tol;
  solver.pd_floor = o.pd_floor;
  return solver;
}

tlpo::StrategySpec spec_of(const std::string& name, const StrategyOpts& o) {
  tlpo::StrategySpec spec;
  spec.kind = tlpo::parse_strategy(name);
  spec.h = static_cast<Index>(o.h);
  spec.lambda = o.lambda;
  spec.tlc_source = static_cast<Index>(o.tlc_source);
  spec.solver = solver_of(o);
  return spec;
}

std::vector<tlpo::StrategySpec> specs_of(const StrategyOpts& o) {
  std::vector<tlpo::StrategySpec> out;
  for (const auto& name : split_list(o.strategies)) out.push_back(spec_of(name, o));
  return out;
}

ordered_json strategy_echo(const StrategyOpts& o) {
  ordered_json j;
  j["strategies"] = o.strategies;
  j["h"] = o.h;
  j["lambda"] = o.lambda;
  j["tlc_source"] = o.tlc_source;
  j["restarts"] = o.restarts;
  j["max_iters"] = o.max_iters;
  j["tol"] = o.tol;
  j["pd_floor"] = o.pd_floor;
  return j;
}

struct RunOpts {
  std::uint64_t seed = 0;
  int reps = 100;
  int jobs = 1;
  std::int64_t oos = 0;
  std::int64_t refit_every = 1;
  std::int64_t tl_h = 0;
  std::string informative;  // comma list of dataset indices
  std::string out;
  std::string format = "table";
  std::string config_path;
};

void add_run_flags(CLI::App* sub, RunOpts& o) {
  sub->add_option("--seed", o.seed, "master seed")->required();
  sub->add_option("--reps", o.reps, "number of replications");
  sub->add_option("--jobs", o.jobs, "worker threads");
  sub->add_option("--oos", o.oos, "held-out periods for the walk-forward metrics");
  sub->add_option("--refit-every", o.refit_every, "periods between refits");
  sub->add_option("--tl-h", o.tl_h, "block length for the whole-panel weight fit");
  sub->add_option("--informative", o.informative,
                  "datasets counted by the weight-mass metric, e.g. 0,1,5");
  sub->add_option("--out", o.out, "directory for summary.json/summary.csv/replications.csv");
  sub->add_option("--format", o.format, "stdout format: table|json|csv");
  sub->add_option("--config", o.config_path, "JSON config file; flags override it");
}

void merge_run_flags(const CLI::App* sub, const ordered_json& cfg, RunOpts& o) {
  merge_flag(sub, "--reps", cfg, "reps", o.reps);
  merge_flag(sub, "--jobs", cfg, "jobs", o.jobs);
  merge_flag(sub, "--oos", cfg, "oos", o.oos);
  merge_flag(sub, "--refit-every", cfg, "refit_every", o.refit_every);
  merge_flag(sub, "--tl-h", cfg, "tl_h", o.tl_h);
  merge_flag(sub, "--informative", cfg, "informative", o.informative);
  merge_flag(sub, "--out", cfg, "out", o.out);
  merge_flag(sub, "--format", cfg, "format", o.format);
}

std::vector<Index> parse_informative(const std::string& csv) {
  std::vector<Index> out;
  for (const auto& tok : split_list(csv)) {
    try {
      out.push_back(static_cast<Index>(std::stoll(tok)));
    } catch (const std::exception&) {
      throw tlpo::io_error("bad dataset index in --informative: '" + tok + "'");
    }
  }
  return out;
}

void emit(const tlpo::ExperimentReport& report, const RunOpts& run) {
  if (!run.out.empty()) tlpo::write_report_files(report, run.out);
  std::cout << tlpo::summarize(report, parse_format(run.format));
}

void fill_params(tlpo::ExperimentParams& params, const RunOpts& run,
                 const StrategyOpts& strat) {
  params.oos_size = static_cast<Index>(run.oos);
  params.refit_every = static_cast<Index>(run.refit_every);
  params.strategies = run.oos > 0 ? specs_of(strat) : std::vector<tlpo::StrategySpec>{};
  params.informative = parse_informative(run.informative);
  params.tl_h = static_cast<Index>(run.tl_h);
  params.solver = solver_of(strat);
  params.jobs = run.jobs;
}

ordered_json run_echo(const std::string& experiment, const RunOpts& run,
                      const StrategyOpts& strat) {
  ordered_json j;
  j["experiment"] = experiment;
  j["reps"] = run.reps;
  j["oos"] = run.oos;
  j["refit_every"] = run.refit_every;
  j["tl_h"] = run.tl_h;
  if (!run.informative.empty()) j["informative"] = run.informative;
  j["strategy"] = strategy_echo(strat);
  return j;
}

// Runs the experiment once per sweep value (or once with no sweep) and
// assembles the report. The same master seed drives every sweep point, so
// points differ only through the swept parameter.
tlpo::ExperimentReport run_points(
    tlpo::ExperimentKind kind, const tlpo::ExperimentParams& base, const RunOpts& run,
    const std::string& sweep_name, const std::vector<double>& sweep_values,
    const std::function<void(tlpo::ExperimentParams&, double)>& apply,
    ordered_json echo) {
  tlpo::ExperimentReport report;
  report.experiment = tlpo::experiment_name(kind);
  report.master_seed = run.seed;
  report.replications = run.reps;
  report.config = std::move(echo);
  if (sweep_values.size() > 1) report.sweep_name = sweep_name;
  for (double value : sweep_values) {
    tlpo::ExperimentParams params = base;
    apply(params, value);
    tlpo::SweepPoint point;
    point.value = value;
    point.summary = tlpo::monte_carlo(kind, params, run.reps, run.seed);
    report.points.push_back(std::move(point));
  }
  return report;
}

int protected_main(int argc, char** argv) {
  CLI::App app{"transfer-learning portfolio toolkit"};
  // Help stays on --help alone; -h would shadow the --h block-length flag.
  app.set_help_flag("--help", "print this help message and exit");
  app.require_subcommand(1);

  // ---- simulate ----
  auto* simulate = app.add_subcommand("simulate", "run a Monte Carlo experiment");
  simulate->require_subcommand(1);

  struct Example1Opts {
    RunOpts run;
    StrategyOpts strat;
    std::int64_t n = 500;
    std::int64_t sources = 5;
    std::vector<double> mean;
    double cov_decay = 0.5;
  } ex1;
  auto* ex1_cmd = simulate->add_subcommand(
      "example1", "i.i.d. Gaussian panel with identical datasets");
  add_run_flags(ex1_cmd, ex1.run);
  add_strategy_flags(ex1_cmd, ex1.strat, true);
  ex1_cmd->add_option("--n", ex1.n, "rows per dataset");
  ex1_cmd->add_option("--sources", ex1.sources, "number of source datasets");
  ex1_cmd->add_option("--mean", ex1.mean, "asset mean vector")->delimiter(',');
  ex1_cmd->add_option("--cov-decay", ex1.cov_decay, "correlation decay of the noise");
  ex1_cmd->callback([&]() {
    const ordered_json cfg = load_config(ex1.run.config_path);
    merge_run_flags(ex1_cmd, cfg, ex1.run);
    merge_strategy_flags(ex1_cmd, cfg, ex1.strat);
    merge_flag(ex1_cmd, "--n", cfg, "n", ex1.n);
    merge_flag(ex1_cmd, "--sources", cfg, "sources", ex1.sources);
    merge_flag(ex1_cmd, "--mean", cfg, "mean", ex1.mean);
    merge_flag(ex1_cmd, "--cov-decay", cfg, "cov_decay", ex1.cov_decay);

    tlpo::ExperimentParams params;
    fill_params(params, ex1.run, ex1.strat);
    params.example1.n_tilde = static_cast<Index>(ex1.n);
    params.example1.num_sources = static_cast<Index>(ex1.sources);
    if (!ex1.mean.empty()) params.example1.mean = to_vector(ex1.mean);
    params.example1.cov_decay = ex1.cov_decay;

    ordered_json echo = run_echo("example1", ex1.run, ex1.strat);
    echo["n"] = ex1.n;
    echo["sources"] = ex1.sources;
    echo["cov_decay"] = ex1.cov_decay;
    emit(run_points(tlpo::ExperimentKind::Example1, params, ex1.run, "", {0.0},
                    [](tlpo::ExperimentParams&, double) {}, std::move(echo)),
         ex1.run);
  });

  struct Sim1Opts {
    RunOpts run;
    StrategyOpts strat;
    std::vector<double> n0{500};
    std::vector<double> rho{1.0};
    std::vector<std::int64_t> sizes;
    std::vector<double> alpha;
    std::vector<double> pi;
    double delta_scale = 0.1;
    double noise_decay = 0.5;
    std::int64_t burn_in = 200;
    std::vector<std::string> modes;
  } sim1;
  auto* sim1_cmd = simulate->add_subcommand(
      "sim1", "factor panel driven by a latent autoregressive state");
  add_run_flags(sim1_cmd, sim1.run);
  add_strategy_flags(sim1_cmd, sim1.strat, true);
  sim1_cmd->add_option("--n0", sim1.n0, "target rows; a comma list sweeps it")
      ->delimiter(',');
  sim1_cmd->add_option("--rho", sim1.rho, "shift scale; a comma list sweeps it")
      ->delimiter(',');
  sim1_cmd->add_option("--sizes", sim1.sizes, "explicit rows per dataset")->delimiter(',');
  sim1_cmd->add_option("--alpha", sim1.alpha, "asset intercepts")->delimiter(',');
  sim1_cmd->add_option("--pi", sim1.pi, "target loading vector")->delimiter(',');
  sim1_cmd->add_option("--delta-scale", sim1.delta_scale, "perturbation variance");
  sim1_cmd->add_option("--noise-decay", sim1.noise_decay, "noise correlation decay");
  sim1_cmd->add_option("--burn-in", sim1.burn_in, "state warm-up steps");
  sim1_cmd->add_option("--modes", sim1.modes, "per-source decay|shift list")
      ->delimiter(',');
  sim1_cmd->callback([&]() {
    const ordered_json cfg = load_config(sim1.run.config_path);
    merge_run_flags(sim1_cmd, cfg, sim1.run);
    merge_strategy_flags(sim1_cmd, cfg, sim1.strat);
    merge_flag(sim1_cmd, "--n0", cfg, "n0", sim1.n0);
    merge_flag(sim1_cmd, "--rho", cfg, "rho", sim1.rho);
    merge_flag(sim1_cmd, "--sizes", cfg, "sizes", sim1.sizes);
    merge_flag(sim1_cmd, "--alpha", cfg, "alpha", sim1.alpha);
    merge_flag(sim1_cmd, "--pi", cfg, "pi", sim1.pi);
    merge_flag(sim1_cmd, "--delta-scale", cfg, "delta_scale", sim1.delta_scale);
    merge_flag(sim1_cmd, "--noise-decay", cfg, "noise_decay", sim1.noise_decay);
    merge_flag(sim1_cmd, "--burn-in", cfg, "burn_in", sim1.burn_in);
    merge_flag(sim1_cmd, "--modes", cfg, "modes", sim1.modes);
    if (sim1.n0.size() > 1 && sim1.rho.size() > 1)
      throw tlpo::io_error("sweep either --n0 or --rho, not both");

    tlpo::ExperimentParams params;
    fill_params(params, sim1.run, sim1.strat);
    auto& dgp = params.sim1;
    dgp.sizes = to_indices(sim1.sizes);
    if (!sim1.alpha.empty()) dgp.alpha = to_vector(sim1.alpha);
    if (!sim1.pi.empty()) dgp.pi_base = to_vector(sim1.pi);
    dgp.delta_scale = sim1.delta_scale;
    dgp.noise_decay = sim1.noise_decay;
    dgp.burn_in = static_cast<Index>(sim1.burn_in);
    if (!sim1.modes.empty()) dgp.source_modes = parse_modes(sim1.modes);
    dgp.n0 = static_cast<Index>(sim1.n0.front());
    dgp.rho = sim1.rho.front();

    ordered_json echo = run_echo("sim1", sim1.run, sim1.strat);
    echo["n0"] = sim1.n0;
    echo["rho"] = sim1.rho;
    echo["delta_scale"] = sim1.delta_scale;
    echo["noise_decay"] = sim1.noise_decay;
    echo["burn_in"] = sim1.burn_in;

    std::string sweep_name;
    std::vector<double> values{0.0};
    std::function<void(tlpo::ExperimentParams&, double)> apply =
        [](tlpo::ExperimentParams&, double) {};
    if (sim1.n0.size() > 1) {
      sweep_name = "n0";
      values = sim1.n0;
      apply = [](tlpo::ExperimentParams& p, double v) {
        p.sim1.n0 = static_cast<Index>(v);
      };
    } else if (sim1.rho.size() > 1) {
      sweep_name = "rho";
      values = sim1.rho;
      apply = [](tlpo::ExperimentParams& p, double v) { p.sim1.rho = v; };
    }
    emit(run_points(tlpo::ExperimentKind::Sim1, params, sim1.run, sweep_name, values,
                    apply, std::move(echo)),
         sim1.run);
  });

  struct Ff3Opts {
    RunOpts run;
    StrategyOpts strat;
    std::vector<double> n0{500};
    std::vector<double> rho{1.0};
    std::vector<std::int64_t> sizes;
    std::string returns_path;
    std::string factors_path;
    std::int64_t horizon = 0;
    double delta_scale = 0.1;
    double noise_decay = 0.5;
    std::vector<std::string> modes;
  } ff3;
  auto* ff3_cmd = simulate->add_subcommand(
      "ff3", "three-factor panel with calibrated or synthetic loadings");
  add_run_flags(ff3_cmd, ff3.run);
  add_strategy_flags(ff3_cmd, ff3.strat, true);
  ff3_cmd->add_option("--n0", ff3.n0, "target rows; a comma list sweeps it")
      ->delimiter(',');
  ff3_cmd->add_option("--rho", ff3.rho, "shift scale; a comma list sweeps it")
      ->delimiter(',');
  ff3_cmd->add_option("--sizes", ff3.sizes, "explicit rows per dataset")->delimiter(',');
  ff3_cmd->add_option("--returns", ff3.returns_path,
                      "returns CSV used to calibrate the loadings");
  ff3_cmd->add_option("--factors", ff3.factors_path,
                      "observed factor CSV (date + 3 columns)");
  ff3_cmd->add_option("--horizon", ff3.horizon, "synthetic factor path length");
  ff3_cmd->add_option("--delta-scale", ff3.delta_scale, "perturbation variance");
  ff3_cmd->add_option("--noise-decay", ff3.noise_decay, "noise correlation decay");
  ff3_cmd->add_option("--modes", ff3.modes, "per-source decay|shift list")
      ->delimiter(',');
  ff3_cmd->callback([&]() {
    const ordered_json cfg = load_config(ff3.run.config_path);
    merge_run_flags(ff3_cmd, cfg, ff3.run);
    merge_strategy_flags(ff3_cmd, cfg, ff3.strat);
    merge_flag(ff3_cmd, "--n0", cfg, "n0", ff3.n0);
    merge_flag(ff3_cmd, "--rho", cfg, "rho", ff3.rho);
    merge_flag(ff3_cmd, "--sizes", cfg, "sizes", ff3.sizes);
    merge_flag(ff3_cmd, "--returns", cfg, "returns", ff3.returns_path);
    merge_flag(ff3_cmd, "--factors", cfg, "factors", ff3.factors_path);
    merge_flag(ff3_cmd, "--horizon", cfg, "horizon", ff3.horizon);
    merge_flag(ff3_cmd, "--delta-scale", cfg, "delta_scale", ff3.delta_scale);
    merge_flag(ff3_cmd, "--noise-decay", cfg, "noise_decay", ff3.noise_decay);
    merge_flag(ff3_cmd, "--modes", cfg, "modes", ff3.modes);
    if (ff3.n0.size() > 1 && ff3.rho.size() > 1)
      throw tlpo::io_error("sweep either --n0 or --rho, not both");
    if (ff3.returns_path.empty() != ff3.factors_path.empty())
      throw tlpo::io_error("--returns and --factors must be given together");

    tlpo::ExperimentParams params;
    fill_params(params, ff3.run, ff3.strat);
    auto& dgp = params.ff3;
    dgp.sizes = to_indices(ff3.sizes);
    dgp.delta_scale = ff3.delta_scale;
    dgp.noise_decay = ff3.noise_decay;
    if (!ff3.modes.empty()) dgp.source_modes = parse_modes(ff3.modes);
    dgp.n0 = static_cast<Index>(ff3.n0.front());
    dgp.rho = ff3.rho.front();
    params.ff3_factor_horizon = static_cast<Index>(ff3.horizon);
    if (!ff3.factors_path.empty()) {
      dgp.factors = tlpo::load_factor_csv(ff3.factors_path);
      dgp.coefficients =
          tlpo::fit_factor_ols(tlpo::load_returns_csv(ff3.returns_path), dgp.factors);
      params.ff3_synthetic_factors = false;
    }

    ordered_json echo = run_echo("ff3", ff3.run, ff3.strat);
    echo["n0"] = ff3.n0;
    echo["rho"] = ff3.rho;
    echo["delta_scale"] = ff3.delta_scale;
    echo["noise_decay"] = ff3.noise_decay;
    echo["calibrated"] = !ff3.factors_path.empty();

    std::string sweep_name;
    std::vector<double> values{0.0};
    std::function<void(tlpo::ExperimentParams&, double)> apply =
        [](tlpo::ExperimentParams&, double) {};
    if (ff3.n0.size() > 1) {
      sweep_name = "n0";
      values = ff3.n0;
      apply = [](tlpo::ExperimentParams& p, double v) {
        p.ff3.n0 = static_cast<Index>(v);
      };
    } else if (ff3.rho.size() > 1) {
      sweep_name = "rho";
      values = ff3.rho;
      apply = [](tlpo::ExperimentParams& p, double v) { p.ff3.rho = v; };
    }
    emit(run_points(tlpo::ExperimentKind::Ff3, params, ff3.run, sweep_name, values,
                    apply, std::move(echo)),
         ff3.run);
  });

  // ---- backtest ----
  struct BacktestOpts {
    StrategyOpts strat;
    std::string target;
    std::vector<std::string> sources;
    std::string rf_path;
    bool no_header = false;
    std::int64_t oos = 0;
    std::int64_t refit_every = 1;
    std::string out;
    std::string format = "table";
    std::string config_path;
  } bt;
  auto* bt_cmd = app.add_subcommand("backtest", "walk-forward backtest on CSV panels");
  add_strategy_flags(bt_cmd, bt.strat, true);
  bt_cmd->add_option("--target", bt.target, "target returns CSV")->required();
  bt_cmd->add_option("--sources,--source", bt.sources, "source returns CSVs")
      ->delimiter(',');
  bt_cmd->add_option("--rf", bt.rf_path,
                     "per-period risk-free CSV applied to the target");
  bt_cmd->add_flag("--no-header", bt.no_header, "CSV files have no header row");
  bt_cmd->add_option("--oos", bt.oos, "held-out periods")->required();
  bt_cmd->add_option("--refit-every", bt.refit_every, "periods between refits");
  bt_cmd->add_option("--out", bt.out, "directory for report files");
  bt_cmd->add_option("--format", bt.format, "stdout format: table|json|csv");
  bt_cmd->add_option("--config", bt.config_path, "JSON config file; flags override it");
  bt_cmd->callback([&]() {
    const ordered_json cfg = load_config(bt.config_path);
    merge_strategy_flags(bt_cmd, cfg, bt.strat);
    merge_flag(bt_cmd, "--sources", cfg, "sources", bt.sources);
    merge_flag(bt_cmd, "--rf", cfg, "rf", bt.rf_path);
    merge_flag(bt_cmd, "--refit-every", cfg, "refit_every", bt.refit_every);
    merge_flag(bt_cmd, "--out", cfg, "out", bt.out);
    merge_flag(bt_cmd, "--format", cfg, "format", bt.format);

    tlpo::ReturnMatrix target = tlpo::load_returns_csv(bt.target, !bt.no_header);
    if (!bt.rf_path.empty()) {
      const tlpo::ReturnMatrix rf = tlpo::load_returns_csv(bt.rf_path, !bt.no_header);
      if (rf.cols() != 1)
        throw tlpo::io_error("risk-free CSV must have exactly one column");
      target = tlpo::to_excess(std::move(target), tlpo::RiskFreeSeries{rf.values.col(0)});
    }
    std::vector<tlpo::ReturnMatrix> sources;
    for (const auto& path : bt.sources)
      sources.push_back(tlpo::load_returns_csv(path, !bt.no_header));
    const tlpo::AlignedPanel panel =
        tlpo::align_panel(std::move(target), std::move(sources));

    tlpo::BacktestConfig bc;
    bc.oos_size = static_cast<Index>(bt.oos);
    bc.refit_every = static_cast<Index>(bt.refit_every);
    bc.strategies = specs_of(bt.strat);
    const tlpo::BacktestResult result = tlpo::run_backtest(panel, bc);

    tlpo::MonteCarloSummary summary;
    summary.experiment = "backtest";
    summary.master_seed = 0;
    summary.replications = static_cast<int>(bt.oos);
    for (const auto& run : result.runs) {
      tlpo::MetricStats stats;
      stats.mean = tlpo::ssr(run.payoffs);
      stats.count = static_cast<int>(run.payoffs.size());
      summary.strategies.push_back({run.label, "ssr", stats});
      for (std::size_t t = 0; t < run.payoffs.size(); ++t)
        summary.records.push_back({run.label,
                                   static_cast<int>(result.oos_times[t]), "payoff",
                                   run.payoffs[t]});
    }
    ordered_json echo;
    echo["target"] = bt.target;
    echo["sources"] = bt.sources;
    echo["oos"] = bt.oos;
    echo["refit_every"] = bt.refit_every;
    echo["strategy"] = strategy_echo(bt.strat);
    tlpo::ExperimentReport report =
        tlpo::single_point_report(std::move(summary), std::move(echo));
    if (!bt.out.empty()) tlpo::write_report_files(report, bt.out);
    std::cout << tlpo::summarize(report, parse_format(bt.format));
  });

  // ---- solve ----
  struct SolveOpts {
    StrategyOpts strat;
    std::string strategy;
    std::string target;
    std::vector<std::string> sources;
    bool no_header = false;
  } sv;
  auto* sv_cmd = app.add_subcommand("solve", "print one allocation for a CSV panel");
  add_strategy_flags(sv_cmd, sv.strat, false);
  sv_cmd->add_option("--strategy", sv.strategy,
                     "tl|tl_equal|non_transfer|pool|tlc (default: tl with sources, "
                     "non_transfer without)");
  sv_cmd->add_option("--target", sv.target, "target returns CSV")->required();
  sv_cmd->add_option("--sources,--source", sv.sources, "source returns CSVs")
      ->delimiter(',');
  sv_cmd->add_flag("--no-header", sv.no_header, "CSV files have no header row");
  sv_cmd->callback([&]() {
    tlpo::ReturnMatrix target = tlpo::load_returns_csv(sv.target, !sv.no_header);
    std::vector<tlpo::ReturnMatrix> sources;
    for (const auto& path : sv.sources)
      sources.push_back(tlpo::load_returns_csv(path, !sv.no_header));
    const bool has_sources = !sources.empty();
    const tlpo::AlignedPanel panel =
        tlpo::align_panel(std::move(target), std::move(sources));
    std::string name = sv.strategy;
    if (name.empty()) name = has_sources ? "tl" : "non_transfer";
    const tlpo::Allocation phi = tlpo::allocate(spec_of(name, sv.strat), panel);
    for (Index i = 0; i < phi.dim(); ++i) {
      if (i > 0) std::cout << ',';
      std::cout << tlpo::detail::csv_number(phi.weights(i));
    }
    std::cout << '\n';
  });

  // ---- report ----
  struct ReportOpts {
    std::string in;
    std::string format = "table";
  } rp;
  auto* rp_cmd = app.add_subcommand("report", "re-render a summary.json");
  rp_cmd->add_option("--in", rp.in, "summary.json produced by simulate or backtest")
      ->required();
  rp_cmd->add_option("--format", rp.format, "output format: table|json|csv");
  rp_cmd->callback([&]() {
    const tlpo::ExperimentReport report = tlpo::load_report(rp.in);
    std::cout << tlpo::summarize(report, parse_format(rp.format));
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return protected_main(argc, argv);
  } catch (const tlpo::numerical_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  } catch (const tlpo::io_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 1;
  }
}
