#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "tlpo/errors.hpp"
#include "tlpo/max_sharpe.hpp"
#include "tlpo/moments.hpp"
#include "tlpo/panel.hpp"
#include "tlpo/rng.hpp"

namespace tlpo {

/// Covariance with entries rho^|i-j|: unit variances, geometrically decaying
/// cross-correlations.
inline Eigen::MatrixXd ar1_covariance(Index d, double rho) {
  if (d < 1) throw std::invalid_argument("covariance dimension must be positive");
  if (!(std::abs(rho) < 1.0))
    throw std::invalid_argument("correlation decay must lie in (-1, 1)");
  Eigen::MatrixXd cov(d, d);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j)
      cov(i, j) = std::pow(rho, static_cast<double>(std::abs(i - j)));
  return cov;
}

namespace detail {

/// Square factor L with L L' = cov, via Cholesky when positive definite and
/// a spectral square root otherwise. Significantly indefinite input is an
/// error; tiny negative eigenvalues are clipped to zero.
inline Eigen::MatrixXd mvn_factor(const Eigen::MatrixXd& cov) {
  if (cov.rows() != cov.cols()) throw std::invalid_argument("covariance is not square");
  if (!is_symmetric(cov)) throw std::invalid_argument("covariance is not symmetric");
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  if (es.info() != Eigen::Success)
    throw numerical_error("covariance factorization failed");
  const Eigen::VectorXd evals = es.eigenvalues();
  const double scale = std::max(1.0, evals.cwiseAbs().maxCoeff());
  if (evals.minCoeff() < -1e-10 * scale)
    throw numerical_error("covariance is not positive semidefinite");
  return es.eigenvectors() * evals.cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

/// Draws n rows of mean + L z with z standard normal, filling row-major so
/// the draw order is row by row.
inline Eigen::MatrixXd mvn_rows(RngStream& rng, const Eigen::VectorXd& mean,
                                const Eigen::MatrixXd& factor, Index n) {
  const Index d = mean.size();
  Eigen::MatrixXd out(n, d);
  Eigen::VectorXd z(d);
  for (Index r = 0; r < n; ++r) {
    for (Index i = 0; i < d; ++i) z(i) = rng.normal();
    out.row(r) = (mean + factor * z).transpose();
  }
  return out;
}

}  // namespace detail

/// i.i.d. Gaussian rows with the given moments.
inline ReturnMatrix sample_mvn(RngStream& rng, const GaussianMoments& m, Index n,
                               std::string label = "mvn") {
  if (n < 2) throw std::invalid_argument("sample needs at least two rows");
  if (m.dim() < 1) throw std::invalid_argument("moments have no assets");
  if (m.cov.rows() != m.dim() || m.cov.cols() != m.dim())
    throw std::invalid_argument("covariance shape does not match mean");
  ReturnMatrix rm;
  rm.label = std::move(label);
  rm.values = detail::mvn_rows(rng, m.mean, detail::mvn_factor(m.cov), n);
  return rm;
}

/// Benchmark i.i.d. design: every dataset drawn from the same five-asset
/// Gaussian with geometrically correlated noise, so sources are maximally
/// informative about the target.
struct Example1Config {
  Index n_tilde = 500;
  Index num_sources = 5;
  Eigen::VectorXd mean = (Eigen::VectorXd(5) << 1.5, 1.9, 2.8, 1.7, -0.9).finished();
  double cov_decay = 0.5;
};

inline GaussianMoments example1_population_moments(const Example1Config& cfg) {
  if (cfg.mean.size() < 1) throw std::invalid_argument("mean vector is empty");
  GaussianMoments m;
  m.mean = cfg.mean;
  m.cov = ar1_covariance(cfg.mean.size(), cfg.cov_decay);
  m.n_obs = 0;
  return m;
}

inline AlignedPanel gen_example1(RngStream& rng, const Example1Config& cfg) {
  if (cfg.n_tilde < 2) throw std::invalid_argument("n_tilde must be at least 2");
  if (cfg.num_sources < 0) throw std::invalid_argument("num_sources must be nonnegative");
  const GaussianMoments pop = example1_population_moments(cfg);
  ReturnMatrix target = sample_mvn(rng, pop, cfg.n_tilde, "target");
  std::vector<ReturnMatrix> sources;
  sources.reserve(static_cast<std::size_t>(cfg.num_sources));
  for (Index m = 1; m <= cfg.num_sources; ++m)
    sources.push_back(sample_mvn(rng, pop, cfg.n_tilde, "source" + std::to_string(m)));
  return align_panel(std::move(target), std::move(sources));
}

inline double spectral_radius(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("matrix is not square");
  Eigen::EigenSolver<Eigen::MatrixXd> es(m, false);
  if (es.info() != Eigen::Success) throw numerical_error("eigenvalue computation failed");
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

/// Uniform(-1, 1) entries, redrawn until the spectral radius is below one,
/// so the driven process is stationary.
inline Eigen::MatrixXd gen_stationary_matrix(RngStream& rng, Index d) {
  if (d < 1) throw std::invalid_argument("matrix dimension must be positive");
  for (int attempt = 0; attempt < 10000; ++attempt) {
    Eigen::MatrixXd b(d, d);
    for (Index i = 0; i < d; ++i)
      for (Index j = 0; j < d; ++j) b(i, j) = rng.uniform(-1.0, 1.0);
    if (spectral_radius(b) < 1.0) return b;
  }
  throw numerical_error("failed to draw a stationary coefficient matrix");
}

/// How a source's loadings deviate from the target's.
enum class SourceMode {
  TimeDecay,  // perturbation shrinks like 1/t: informative in the limit
  RhoShift,   // constant perturbation scaled by rho: persistently biased
};

/// Factor-driven design: returns load on a latent VAR(1) state, target
/// loadings are fixed, and each source's loadings deviate per its mode.
struct VarFactorConfig {
  Index n0 = 500;                 // target rows; source m defaults to (m+1) * n0
  std::vector<Index> sizes;       // explicit per-dataset rows, target first
  Eigen::VectorXd alpha = Eigen::VectorXd::Constant(5, 0.5);
  Eigen::VectorXd pi_base = (Eigen::VectorXd(3) << 0.9, 0.6, 0.7).finished();
  double rho = 1.0;               // shift scale for RhoShift sources
  double delta_scale = 0.1;       // variance of the per-source perturbation
  double noise_decay = 0.5;       // rho^|i-j| correlation of state and return noise
  std::vector<SourceMode> source_modes = {SourceMode::TimeDecay, SourceMode::RhoShift,
                                          SourceMode::RhoShift, SourceMode::RhoShift,
                                          SourceMode::TimeDecay};
  Index burn_in = 200;
};

/// Datasets whose loadings converge to the target's: the target itself and
/// every time-decaying source.
inline std::vector<Index> informative_datasets(const std::vector<SourceMode>& modes) {
  std::vector<Index> out{0};
  for (std::size_t m = 0; m < modes.size(); ++m)
    if (modes[m] == SourceMode::TimeDecay) out.push_back(static_cast<Index>(m) + 1);
  return out;
}

struct VarFactorDiagnostics {
  Eigen::MatrixXd transition;            // the VAR coefficient matrix
  std::vector<Eigen::VectorXd> deltas;   // per-source perturbation, index m-1
  std::vector<Eigen::MatrixXd> loadings; // per-dataset loadings, rows = periods
};

namespace detail {

inline std::vector<Index> resolve_sizes(Index n0, const std::vector<Index>& sizes,
                                        std::size_t num_sources, bool proportional) {
  std::vector<Index> out;
  if (sizes.empty()) {
    if (n0 < 2) throw std::invalid_argument("target size must be at least 2");
    for (std::size_t m = 0; m <= num_sources; ++m)
      out.push_back(proportional ? static_cast<Index>(m + 1) * n0 : n0);
  } else {
    if (sizes.size() != num_sources + 1)
      throw std::invalid_argument("sizes must list the target and every source");
    out = sizes;
  }
  for (Index n : out)
    if (n < 2) throw std::invalid_argument("every dataset needs at least two rows");
  return out;
}

}  // namespace detail

/// Simulates the VAR-factor panel. All datasets share one latent state path
/// (aligned at the end, longer datasets reaching further back) and differ
/// only through their loading perturbations.
inline AlignedPanel gen_var_factor(RngStream& rng, const VarFactorConfig& cfg,
                                   VarFactorDiagnostics* diag = nullptr) {
  const Index d = cfg.alpha.size();
  const Index f = cfg.pi_base.size();
  if (d < 1 || f < 1) throw std::invalid_argument("alpha and pi_base must be nonempty");
  if (cfg.burn_in < 0) throw std::invalid_argument("burn_in must be nonnegative");
  if (!(cfg.delta_scale >= 0.0))
    throw std::invalid_argument("delta_scale must be nonnegative");
  const std::vector<Index> sizes =
      detail::resolve_sizes(cfg.n0, cfg.sizes, cfg.source_modes.size(), true);
  const Index num_datasets = static_cast<Index>(sizes.size());
  const Index n_max = *std::max_element(sizes.begin(), sizes.end());

  const Eigen::MatrixXd omega = ar1_covariance(d, cfg.noise_decay);
  const Eigen::MatrixXd omega_factor = detail::mvn_factor(omega);
  const Eigen::MatrixXd transition = gen_stationary_matrix(rng, d);

  const double delta_sd = std::sqrt(cfg.delta_scale);
  std::vector<Eigen::VectorXd> deltas;
  for (Index m = 1; m < num_datasets; ++m) {
    Eigen::VectorXd delta(f);
    for (Index j = 0; j < f; ++j) delta(j) = delta_sd * rng.normal();
    deltas.push_back(std::move(delta));
  }

  // One shared state path: burn in from zero, then record n_max steps. Each
  // column of the state is driven by its own correlated innovation.
  std::vector<Eigen::MatrixXd> path;
  path.reserve(static_cast<std::size_t>(n_max));
  Eigen::MatrixXd state = Eigen::MatrixXd::Zero(d, f);
  Eigen::VectorXd z(d);
  for (Index step = 0; step < cfg.burn_in + n_max; ++step) {
    Eigen::MatrixXd innovation(d, f);
    for (Index j = 0; j < f; ++j) {
      for (Index i = 0; i < d; ++i) z(i) = rng.normal();
      innovation.col(j) = omega_factor * z;
    }
    state = transition * state + innovation;
    if (step >= cfg.burn_in) path.push_back(state);
  }

  if (diag) {
    diag->transition = transition;
    diag->deltas = deltas;
    diag->loadings.assign(static_cast<std::size_t>(num_datasets), Eigen::MatrixXd());
  }

  ReturnMatrix target;
  std::vector<ReturnMatrix> sources;
  for (Index m = 0; m < num_datasets; ++m) {
    const Index n_m = sizes[static_cast<std::size_t>(m)];
    const Index offset = n_max - n_m;  // global index of this dataset's first row
    ReturnMatrix rm;
    rm.label = m == 0 ? "target" : "source" + std::to_string(m);
    rm.values.resize(n_m, d);
    Eigen::MatrixXd loadings(n_m, f);
    for (Index t = 1; t <= n_m; ++t) {
      Eigen::VectorXd pi = cfg.pi_base;
      if (m > 0) {
        const auto& delta = deltas[static_cast<std::size_t>(m - 1)];
        if (cfg.source_modes[static_cast<std::size_t>(m - 1)] == SourceMode::TimeDecay)
          pi += delta / static_cast<double>(t);
        else
          pi += cfg.rho * delta;
      }
      loadings.row(t - 1) = pi.transpose();
      for (Index i = 0; i < d; ++i) z(i) = rng.normal();
      rm.values.row(t - 1) =
          (cfg.alpha + path[static_cast<std::size_t>(offset + t - 1)] * pi +
           omega_factor * z)
              .transpose();
    }
    if (diag) diag->loadings[static_cast<std::size_t>(m)] = std::move(loadings);
    if (m == 0)
      target = std::move(rm);
    else
      sources.push_back(std::move(rm));
  }
  return align_panel(std::move(target), std::move(sources));
}

/// Intercept and three-factor loadings of each asset, by least squares.
struct FactorCoefficients {
  Eigen::VectorXd alpha;  // d
  Eigen::MatrixXd beta;   // d x 3
};

/// Ordinary least squares of each asset on [1, factors]. A rank-deficient
/// design is accepted only when the normal equations remain consistent
/// (the minimum-norm solution is returned); otherwise it is an error.
inline FactorCoefficients fit_factor_ols(const ReturnMatrix& returns,
                                         const Eigen::MatrixXd& factors) {
  validate_return_matrix(returns);
  if (factors.cols() != 3) throw std::invalid_argument("factor matrix must have 3 columns");
  if (factors.rows() != returns.rows())
    throw std::invalid_argument("factor rows do not match return rows");
  if (!factors.allFinite())
    throw std::invalid_argument("factor matrix contains non-finite entries");
  const Index n = returns.rows();
  if (n < 4) throw std::invalid_argument("factor regression needs at least 4 rows");

  Eigen::MatrixXd design(n, 4);
  design.col(0).setOnes();
  design.rightCols(3) = factors;
  const Eigen::MatrixXd gram = design.transpose() * design;
  const Eigen::MatrixXd rhs = design.transpose() * returns.values;  // 4 x d

  Eigen::MatrixXd coef;
  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() == Eigen::Success) {
    coef = llt.solve(rhs);
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
    if (es.info() != Eigen::Success)
      throw numerical_error("factor regression failed to factorize");
    const Eigen::VectorXd evals = es.eigenvalues();
    const double cutoff = 1e-12 * std::max(1.0, evals.cwiseAbs().maxCoeff());
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(4);
    for (Index i = 0; i < 4; ++i)
      if (evals(i) > cutoff) inv(i) = 1.0 / evals(i);
    coef = es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose() * rhs;
    const double residual = (gram * coef - rhs).cwiseAbs().maxCoeff();
    if (residual > 1e-8 * std::max(1.0, rhs.cwiseAbs().maxCoeff()))
      throw numerical_error("factor design is rank deficient");
  }
  FactorCoefficients out;
  out.alpha = coef.row(0).transpose();
  out.beta = coef.bottomRows(3).transpose();
  return out;
}

/// Calibrated-factor design: asset loadings come from a fitted three-factor
/// model, the factor path is observed, and sources perturb the factor
/// exposure row per their mode with a fresh perturbation every period.
struct FactorPanelConfig {
  FactorCoefficients coefficients;
  Eigen::MatrixXd factors;   // T x 3 observed factor path, T >= max dataset size
  Index n0 = 500;
  std::vector<Index> sizes;  // defaults to n0 rows for every dataset
  double rho = 1.0;
  double delta_scale = 0.1;
  double noise_decay = 0.5;
  std::vector<SourceMode> source_modes = {SourceMode::TimeDecay, SourceMode::RhoShift,
                                          SourceMode::RhoShift, SourceMode::RhoShift,
                                          SourceMode::TimeDecay};
};

struct FactorPanelDiagnostics {
  std::vector<Eigen::MatrixXd> exposures;  // per-dataset factor rows used
};

inline AlignedPanel gen_factor_panel(RngStream& rng, const FactorPanelConfig& cfg,
                                     FactorPanelDiagnostics* diag = nullptr) {
  const Index d = cfg.coefficients.alpha.size();
  if (d < 1) throw std::invalid_argument("coefficients are empty");
  if (cfg.coefficients.beta.rows() != d || cfg.coefficients.beta.cols() != 3)
    throw std::invalid_argument("beta must be d x 3");
  if (cfg.factors.cols() != 3)
    throw std::invalid_argument("factor matrix must have 3 columns");
  if (!(cfg.delta_scale >= 0.0))
    throw std::invalid_argument("delta_scale must be nonnegative");
  const std::vector<Index> sizes =
      detail::resolve_sizes(cfg.n0, cfg.sizes, cfg.source_modes.size(), false);
  const Index num_datasets = static_cast<Index>(sizes.size());
  const Index n_max = *std::max_element(sizes.begin(), sizes.end());
  if (cfg.factors.rows() < n_max)
    throw std::invalid_argument("factor path shorter than the largest dataset");

  const Eigen::MatrixXd omega_factor = detail::mvn_factor(ar1_covariance(d, cfg.noise_decay));
  const double delta_sd = std::sqrt(cfg.delta_scale);
  if (diag) diag->exposures.assign(static_cast<std::size_t>(num_datasets), Eigen::MatrixXd());

  ReturnMatrix target;
  std::vector<ReturnMatrix> sources;
  Eigen::VectorXd z(d);
  Eigen::VectorXd eps(3);
  for (Index m = 0; m < num_datasets; ++m) {
    const Index n_m = sizes[static_cast<std::size_t>(m)];
    const Index offset = cfg.factors.rows() - n_m;  // align every dataset at the end
    ReturnMatrix rm;
    rm.label = m == 0 ? "target" : "source" + std::to_string(m);
    rm.values.resize(n_m, d);
    Eigen::MatrixXd exposures(n_m, 3);
    for (Index t = 1; t <= n_m; ++t) {
      Eigen::VectorXd x = cfg.factors.row(offset + t - 1).transpose();
      if (m > 0) {
        for (Index j = 0; j < 3; ++j) eps(j) = delta_sd * rng.normal();
        if (cfg.source_modes[static_cast<std::size_t>(m - 1)] == SourceMode::TimeDecay)
          x += eps / static_cast<double>(t);
        else
          x += cfg.rho * eps;
      }
      exposures.row(t - 1) = x.transpose();
      for (Index i = 0; i < d; ++i) z(i) = rng.normal();
      rm.values.row(t - 1) =
          (cfg.coefficients.alpha + cfg.coefficients.beta * x + omega_factor * z)
              .transpose();
    }
    if (diag) diag->exposures[static_cast<std::size_t>(m)] = std::move(exposures);
    if (m == 0)
      target = std::move(rm);
    else
      sources.push_back(std::move(rm));
  }
  return align_panel(std::move(target), std::move(sources));
}

/// Loads a T x 3 factor matrix from CSV with a header of date plus three
/// factor columns; the date column is required and discarded.
inline Eigen::MatrixXd load_factor_csv(const std::filesystem::path& path) {
  const ReturnMatrix rm = load_returns_csv(path, true);
  if (rm.timestamps.empty())
    throw io_error(path.string() + ": factor file needs a leading date column");
  if (rm.cols() != 3)
    throw io_error(path.string() + ": factor file must have exactly 3 factor columns");
  return rm.values;
}

/// Best achievable Sharpe ratio under known moments: an exhaustive lattice
/// sweep refined by the solver, keeping whichever is larger.
inline double oracle_sharpe(const GaussianMoments& m, double step) {
  const GridResult grid = grid_search_sharpe(m, step);
  const Allocation solved = max_sharpe(m);
  return std::max(grid.value, sharpe_value(solved, m));
}

}  // namespace tlpo
