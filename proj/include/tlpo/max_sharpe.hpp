#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <utility>
#include <vector>

#include "tlpo/errors.hpp"
#include "tlpo/moments.hpp"
#include "tlpo/rng.hpp"

namespace tlpo {

/// A long-only portfolio: nonnegative weights summing to one.
struct Allocation {
  Eigen::VectorXd weights;

  Index dim() const { return weights.size(); }
};

struct SolverConfig {
  int restarts = 1;        // extra randomized starts for the nonconvex paths
  int max_iters = 5000;    // projected-gradient iteration cap per start
  double tol = 1e-8;       // relative improvement threshold for convergence
  double pd_floor = 1e-8;  // relative eigenvalue floor for covariance repair
};

inline void validate_solver_config(const SolverConfig& cfg) {
  if (cfg.restarts < 1) throw std::invalid_argument("restarts must be at least 1");
  if (cfg.max_iters < 1) throw std::invalid_argument("max_iters must be at least 1");
  if (!(cfg.tol > 0.0)) throw std::invalid_argument("tol must be positive");
  if (!(cfg.pd_floor > 0.0)) throw std::invalid_argument("pd_floor must be positive");
}

/// Clamps sub-epsilon negatives to zero and renormalizes to an exact unit
/// sum. Genuinely negative weights or an all-zero vector are rejected.
inline Allocation make_allocation(Eigen::VectorXd w) {
  if (w.size() < 1)
    throw std::invalid_argument("allocation needs at least one asset");
  if (!w.allFinite())
    throw std::invalid_argument("allocation has non-finite entries");
  if (w.minCoeff() < -1e-9)
    throw std::invalid_argument("allocation has a negative weight");
  w = w.cwiseMax(0.0);
  const double s = w.sum();
  if (!(s > 0.0)) throw std::invalid_argument("allocation weights sum to zero");
  w /= s;
  return Allocation{std::move(w)};
}

/// Euclidean projection onto the probability simplex.
inline Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v) {
  const Index d = v.size();
  if (d < 1) throw std::invalid_argument("cannot project an empty vector");
  std::vector<double> u(v.data(), v.data() + d);
  std::sort(u.begin(), u.end(), std::greater<double>());
  double cumsum = 0.0;
  double theta = 0.0;
  for (Index i = 0; i < d; ++i) {
    cumsum += u[static_cast<std::size_t>(i)];
    const double t = (cumsum - 1.0) / static_cast<double>(i + 1);
    if (u[static_cast<std::size_t>(i)] > t) theta = t;
  }
  return (v.array() - theta).max(0.0).matrix();
}

/// Sharpe ratio of an allocation under given moments, with no covariance
/// repair: mean over standard deviation of the portfolio return.
inline double sharpe_value(const Allocation& phi, const GaussianMoments& m) {
  if (phi.dim() != m.dim() || m.cov.rows() != m.dim() || m.cov.cols() != m.dim())
    throw std::invalid_argument("allocation and moments disagree on dimension");
  const double variance = phi.weights.dot(m.cov * phi.weights);
  if (!(variance > 0.0))
    throw numerical_error("portfolio variance is not positive");
  return m.mean.dot(phi.weights) / std::sqrt(variance);
}

namespace detail {

/// Projected gradient ascent over the probability simplex with backtracking
/// line search. Converges when three consecutive accepted steps improve by
/// less than tol relative to the objective scale. Returns the final value
/// and leaves the iterate in w.
template <class Eval, class Grad>
inline double simplex_ascent(Eigen::VectorXd& w, Eval&& eval, Grad&& grad,
                             int max_iters, double tol) {
  double f = eval(w);
  double step = 1.0;
  int stall = 0;
  for (int iter = 0; iter < max_iters; ++iter) {
    const Eigen::VectorXd g = grad(w);
    if (!g.allFinite()) break;
    double s = step;
    bool improved = false;
    Eigen::VectorXd w_try;
    double f_try = f;
    for (int trial = 0; trial < 60; ++trial) {
      w_try = project_to_simplex(w + s * g);
      f_try = eval(w_try);
      if (f_try > f) {
        improved = true;
        break;
      }
      s *= 0.5;
    }
    if (!improved) break;
    const double rel = (f_try - f) / std::max(1.0, std::abs(f_try));
    w = w_try;
    f = f_try;
    step = std::min(s * 2.0, 1e6);
    if (rel < tol) {
      if (++stall >= 3) break;
    } else {
      stall = 0;
    }
  }
  return f;
}

inline double sharpe_ratio_raw(const Eigen::VectorXd& phi, const Eigen::VectorXd& mu,
                               const Eigen::MatrixXd& cov) {
  const double variance = phi.dot(cov * phi);
  if (!(variance > 0.0)) return -std::numeric_limits<double>::infinity();
  return mu.dot(phi) / std::sqrt(variance);
}

inline Eigen::VectorXd sharpe_gradient(const Eigen::VectorXd& phi,
                                       const Eigen::VectorXd& mu,
                                       const Eigen::MatrixXd& cov) {
  const Eigen::VectorXd cp = cov * phi;
  const double variance = phi.dot(cp);
  const double sigma = std::sqrt(variance);
  return mu / sigma - (mu.dot(phi) / (variance * sigma)) * cp;
}

/// Gradient ascent on the cone form of the problem: maximize mu'y subject
/// to y >= 0 and y'Sigma y = 1. Each step clamps to the nonnegative orthant
/// and renormalizes to the unit variance shell. Requires max(mu) > 0.
inline Eigen::VectorXd cone_ascent(const Eigen::VectorXd& mu,
                                   const Eigen::MatrixXd& cov,
                                   const SolverConfig& cfg) {
  const Index d = mu.size();
  Index best = -1;
  double best_ratio = -std::numeric_limits<double>::infinity();
  for (Index i = 0; i < d; ++i) {
    if (mu(i) <= 0.0) continue;
    const double r = mu(i) / std::sqrt(cov(i, i));
    if (r > best_ratio) {
      best_ratio = r;
      best = i;
    }
  }
  Eigen::VectorXd y = Eigen::VectorXd::Zero(d);
  y(best) = 1.0 / std::sqrt(cov(best, best));
  double f = mu.dot(y);
  double step = 1.0;
  int stall = 0;
  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    const Eigen::VectorXd g = mu - f * (cov * y);
    if (g.squaredNorm() <= 1e-30) break;
    double s = step;
    bool improved = false;
    Eigen::VectorXd y_try;
    double f_try = f;
    for (int trial = 0; trial < 60; ++trial) {
      y_try = (y + s * g).cwiseMax(0.0);
      const double q = y_try.dot(cov * y_try);
      if (q > 0.0) {
        y_try /= std::sqrt(q);
        f_try = mu.dot(y_try);
        if (f_try > f) {
          improved = true;
          break;
        }
      }
      s *= 0.5;
    }
    if (!improved) break;
    const double rel = (f_try - f) / std::max(1.0, std::abs(f_try));
    y = y_try;
    f = f_try;
    step = std::min(s * 2.0, 1e6);
    if (rel < cfg.tol) {
      if (++stall >= 3) break;
    } else {
      stall = 0;
    }
  }
  return y;
}

/// Active-set refinement: solves Sigma_AA z_A = mu_A on a working support,
/// dropping negative entries and admitting the worst outside violator until
/// the stationarity conditions hold. Returns false if the iteration fails
/// to verify within its pass budget.
inline bool active_set_polish(const Eigen::VectorXd& mu, const Eigen::MatrixXd& cov,
                              Eigen::VectorXd& z_out) {
  const Index d = mu.size();
  std::vector<Index> active(static_cast<std::size_t>(d));
  for (Index i = 0; i < d; ++i) active[static_cast<std::size_t>(i)] = i;
  const double mu_scale = std::max(1.0, mu.cwiseAbs().maxCoeff());

  const int max_passes = static_cast<int>(2 * d + 8);
  for (int pass = 0; pass < max_passes; ++pass) {
    const Index na = static_cast<Index>(active.size());
    if (na == 0) return false;
    Eigen::MatrixXd cov_aa(na, na);
    Eigen::VectorXd mu_a(na);
    for (Index r = 0; r < na; ++r) {
      mu_a(r) = mu(active[static_cast<std::size_t>(r)]);
      for (Index c = 0; c < na; ++c)
        cov_aa(r, c) = cov(active[static_cast<std::size_t>(r)],
                           active[static_cast<std::size_t>(c)]);
    }
    Eigen::LLT<Eigen::MatrixXd> llt(cov_aa);
    if (llt.info() != Eigen::Success) return false;
    const Eigen::VectorXd z_a = llt.solve(mu_a);
    const double z_scale = std::max(1.0, z_a.cwiseAbs().maxCoeff());

    Index drop = -1;
    double z_min = -1e-12 * z_scale;
    for (Index r = 0; r < na; ++r) {
      if (z_a(r) < z_min) {
        z_min = z_a(r);
        drop = r;
      }
    }
    if (drop >= 0) {
      active.erase(active.begin() + static_cast<std::ptrdiff_t>(drop));
      continue;
    }

    Eigen::VectorXd z = Eigen::VectorXd::Zero(d);
    for (Index r = 0; r < na; ++r)
      z(active[static_cast<std::size_t>(r)]) = std::max(z_a(r), 0.0);
    const Eigen::VectorXd s = cov * z;
    const double viol_tol = 1e-10 * std::max(mu_scale, s.cwiseAbs().maxCoeff());
    Index add = -1;
    double worst = viol_tol;
    for (Index i = 0; i < d; ++i) {
      if (z(i) > 0.0) continue;
      const bool in_active =
          std::find(active.begin(), active.end(), i) != active.end();
      if (in_active) continue;
      const double viol = mu(i) - s(i);
      if (viol > worst) {
        worst = viol;
        add = i;
      }
    }
    if (add >= 0) {
      active.push_back(add);
      std::sort(active.begin(), active.end());
      continue;
    }
    if (!(mu.dot(z) > 0.0)) return false;
    z_out = z;
    return true;
  }
  return false;
}

inline Eigen::VectorXd seeded_simplex_point(RngStream& rng, Index d) {
  Eigen::VectorXd w(d);
  for (Index i = 0; i < d; ++i) w(i) = -std::log(rng.uniform(1e-12, 1.0));
  return w / w.sum();
}

/// Multi-start projected gradient on the Sharpe ratio over the simplex:
/// one start per vertex, the barycenter, the best point of a coarse grid,
/// and any extra seeded restarts. First incumbent within tol wins.
inline Allocation simplex_multistart_sharpe(const Eigen::VectorXd& mu,
                                            const Eigen::MatrixXd& cov,
                                            const SolverConfig& cfg) {
  const Index d = mu.size();
  std::vector<Eigen::VectorXd> starts;
  for (Index i = 0; i < d; ++i) starts.push_back(Eigen::VectorXd::Unit(d, i));
  starts.push_back(Eigen::VectorXd::Constant(d, 1.0 / static_cast<double>(d)));
  if (d <= 6) {
    // coarse sweep to seed a start near the global basin
    const double coarse = 0.1;
    const Index k = static_cast<Index>(std::llround(1.0 / coarse));
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(d);
    Eigen::VectorXd best_phi = Eigen::VectorXd::Unit(d, 0);
    double best_val = -std::numeric_limits<double>::infinity();
    std::function<void(Index, Index)> rec = [&](Index pos, Index rem) {
      if (pos == d - 1) {
        counts(pos) = static_cast<double>(rem);
        const Eigen::VectorXd phi = counts * coarse;
        const double val = sharpe_ratio_raw(phi, mu, cov);
        if (val > best_val) {
          best_val = val;
          best_phi = phi;
        }
        return;
      }
      for (Index c = rem; c >= 0; --c) {
        counts(pos) = static_cast<double>(c);
        rec(pos + 1, rem - c);
      }
    };
    rec(0, k);
    starts.push_back(best_phi);
  }
  RngStream rng(0x5eedu, 1);
  for (int r = 1; r < cfg.restarts; ++r) starts.push_back(seeded_simplex_point(rng, d));

  auto eval = [&](const Eigen::VectorXd& w) { return sharpe_ratio_raw(w, mu, cov); };
  auto grad = [&](const Eigen::VectorXd& w) { return sharpe_gradient(w, mu, cov); };

  Eigen::VectorXd best = starts.front();
  double best_val = -std::numeric_limits<double>::infinity();
  for (auto& w0 : starts) {
    Eigen::VectorXd w = w0;
    const double val = simplex_ascent(w, eval, grad, cfg.max_iters, cfg.tol);
    if (val > best_val + cfg.tol) {
      best_val = val;
      best = w;
    }
  }
  return make_allocation(best);
}

}  // namespace detail

/// Maximizes the Sharpe ratio over long-only allocations. The covariance is
/// floored to positive definite first. When some mean is positive the
/// problem is solved on its conic form by projected gradient ascent and an
/// exact active-set refinement; otherwise a multi-start search over the
/// simplex handles the (possibly multimodal) ratio directly.
inline Allocation max_sharpe(const GaussianMoments& m, const SolverConfig& cfg = {}) {
  validate_solver_config(cfg);
  if (m.dim() < 1) throw std::invalid_argument("moments have no assets");
  const GaussianMoments mw = ensure_positive_definite(m, absolute_pd_floor(m, cfg.pd_floor));
  const Index d = mw.dim();
  if (d == 1) return Allocation{Eigen::VectorXd::Ones(1)};

  if (mw.mean.maxCoeff() > 0.0) {
    const Eigen::VectorXd y = detail::cone_ascent(mw.mean, mw.cov, cfg);
    Allocation incumbent = make_allocation(y);
    double incumbent_val = sharpe_value(incumbent, mw);
    Eigen::VectorXd z;
    if (detail::active_set_polish(mw.mean, mw.cov, z)) {
      Allocation polished = make_allocation(z);
      const double polished_val = sharpe_value(polished, mw);
      if (polished_val >= incumbent_val) return polished;
    }
    return incumbent;
  }
  return detail::simplex_multistart_sharpe(mw.mean, mw.cov, cfg);
}

/// Maximizes sharpe(phi) - lambda * ||anchor - phi||^2 over the simplex.
/// lambda = 0 reduces exactly to max_sharpe; large lambda pins the solution
/// to the anchor allocation.
inline Allocation max_sharpe_penalized(const GaussianMoments& m, const Allocation& anchor,
                                       double lambda, const SolverConfig& cfg = {}) {
  validate_solver_config(cfg);
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be nonnegative");
  if (anchor.dim() != m.dim())
    throw std::invalid_argument("anchor and moments disagree on dimension");
  if (std::abs(anchor.weights.sum() - 1.0) > 1e-6 || anchor.weights.minCoeff() < -1e-9)
    throw std::invalid_argument("anchor is not a long-only allocation");
  if (lambda == 0.0) return max_sharpe(m, cfg);

  const GaussianMoments mw = ensure_positive_definite(m, absolute_pd_floor(m, cfg.pd_floor));
  const Index d = mw.dim();
  if (d == 1) return Allocation{Eigen::VectorXd::Ones(1)};

  auto eval = [&](const Eigen::VectorXd& w) {
    return detail::sharpe_ratio_raw(w, mw.mean, mw.cov) -
           lambda * (anchor.weights - w).squaredNorm();
  };
  auto grad = [&](const Eigen::VectorXd& w) {
    return (detail::sharpe_gradient(w, mw.mean, mw.cov) +
            2.0 * lambda * (anchor.weights - w))
        .eval();
  };

  std::vector<Eigen::VectorXd> starts;
  starts.push_back(anchor.weights);
  starts.push_back(max_sharpe(mw, cfg).weights);
  for (Index i = 0; i < d; ++i) starts.push_back(Eigen::VectorXd::Unit(d, i));
  starts.push_back(Eigen::VectorXd::Constant(d, 1.0 / static_cast<double>(d)));
  RngStream rng(0x5eedu, 2);
  for (int r = 1; r < cfg.restarts; ++r)
    starts.push_back(detail::seeded_simplex_point(rng, d));

  Eigen::VectorXd best = starts.front();
  double best_val = -std::numeric_limits<double>::infinity();
  for (auto& w0 : starts) {
    Eigen::VectorXd w = w0;
    const double val = detail::simplex_ascent(w, eval, grad, cfg.max_iters, cfg.tol);
    if (val > best_val + cfg.tol) {
      best_val = val;
      best = w;
    }
  }
  return make_allocation(best);
}

struct GridResult {
  Allocation best;
  double value = 0.0;
};

/// Exhaustive Sharpe evaluation on the lattice of allocations with weights
/// in multiples of step. The reciprocal of step must be integral and the
/// lattice size is capped to keep the enumeration tractable.
inline GridResult grid_search_sharpe(const GaussianMoments& m, double step) {
  if (m.dim() < 1) throw std::invalid_argument("moments have no assets");
  if (!(step > 0.0) || step > 1.0)
    throw std::invalid_argument("grid step must lie in (0, 1]");
  const Index k = static_cast<Index>(std::llround(1.0 / step));
  if (std::abs(static_cast<double>(k) * step - 1.0) > 1e-9)
    throw std::invalid_argument("grid step must divide 1 evenly");
  const Index d = m.dim();

  double lattice_size = 1.0;
  for (Index i = 1; i < d; ++i)
    lattice_size *= static_cast<double>(k + i) / static_cast<double>(i);
  if (lattice_size > 2e7)
    throw std::invalid_argument("grid lattice is too large to enumerate");

  Eigen::VectorXd counts = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd best_phi = Eigen::VectorXd::Unit(d, 0);
  double best_val = -std::numeric_limits<double>::infinity();
  std::function<void(Index, Index)> rec = [&](Index pos, Index rem) {
    if (pos == d - 1) {
      counts(pos) = static_cast<double>(rem);
      const Eigen::VectorXd phi = counts * step;
      const double val = detail::sharpe_ratio_raw(phi, m.mean, m.cov);
      if (val > best_val) {
        best_val = val;
        best_phi = phi;
      }
      return;
    }
    for (Index c = rem; c >= 0; --c) {
      counts(pos) = static_cast<double>(c);
      rec(pos + 1, rem - c);
    }
  };
  rec(0, k);
  if (!std::isfinite(best_val))
    throw numerical_error("no grid point has positive portfolio variance");
  return GridResult{make_allocation(best_phi), best_val};
}

}  // namespace tlpo
