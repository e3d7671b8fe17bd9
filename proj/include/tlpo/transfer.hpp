#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <utility>
#include <vector>

#include "tlpo/errors.hpp"
#include "tlpo/max_sharpe.hpp"
#include "tlpo/moments.hpp"
#include "tlpo/panel.hpp"

namespace tlpo {

/// Forward-validation schedule over the shared window: k = floor(n_tilde / h)
/// checkpoints tau_i = n_tilde - (k - i) * h + 1 for i = 1..k, spaced h
/// periods apart with the last one at n_tilde + 1 - ... the final checkpoint
/// tau_k = n_tilde - 0 * h + 1 lands one past the last shared period, so an
/// allocation fitted there uses every available row.
struct ValidationSchedule {
  Index h = 0;
  Index k = 0;
  std::vector<Index> taus;  // size k, ascending, step h
};

inline ValidationSchedule build_schedule(const AlignedPanel& panel, Index h) {
  if (h < 2) throw std::invalid_argument("validation block length must be at least 2");
  const Index k = panel.n_tilde / h;
  if (k < 2)
    throw std::invalid_argument("shared window too short for two validation blocks");
  for (Index m = 0; m < panel.num_datasets(); ++m) {
    const Index first_segment = panel.dataset(m).rows() - (k - 1) * h;
    if (first_segment < 2)
      throw std::invalid_argument("dataset '" + panel.dataset(m).label +
                                  "' has a degenerate first training segment");
  }
  ValidationSchedule sched;
  sched.h = h;
  sched.k = k;
  sched.taus.reserve(static_cast<std::size_t>(k));
  for (Index i = 1; i <= k; ++i) sched.taus.push_back(panel.n_tilde - (k - i) * h + 1);
  return sched;
}

/// Per-dataset maximum-Sharpe allocations fitted at every checkpoint, plus
/// the target block moments used to score combinations one block ahead.
struct CandidateAllocations {
  Index k = 0;
  Index dim = 0;
  Index h = 0;
  std::vector<std::vector<Allocation>> allocations;  // [dataset][checkpoint]
  std::vector<GaussianMoments> target_blocks;        // blocks ending at tau_2..tau_k

  Index num_datasets() const { return static_cast<Index>(allocations.size()); }

  /// Moments of the target block covering times tau_{i} - h .. tau_{i} - 1,
  /// indexed by the checkpoint i = 2..k it ends in front of.
  const GaussianMoments& validation_moments(Index i) const {
    if (i < 2 || i > k) throw std::invalid_argument("validation index outside 2..k");
    return target_blocks[static_cast<std::size_t>(i - 2)];
  }
};

/// Fits one max-Sharpe allocation per (dataset, checkpoint) on the expanding
/// history before the checkpoint, and captures the target validation blocks.
/// Covariances are floored to positive definite throughout.
inline CandidateAllocations fit_candidates(const AlignedPanel& panel,
                                           const ValidationSchedule& sched,
                                           const SolverConfig& cfg = {}) {
  validate_solver_config(cfg);
  if (sched.k < 2 || static_cast<Index>(sched.taus.size()) != sched.k)
    throw std::invalid_argument("invalid validation schedule");
  CandidateAllocations cand;
  cand.k = sched.k;
  cand.dim = panel.dim;
  cand.h = sched.h;
  cand.allocations.resize(static_cast<std::size_t>(panel.num_datasets()));
  for (Index m = 0; m < panel.num_datasets(); ++m) {
    auto& row = cand.allocations[static_cast<std::size_t>(m)];
    row.reserve(static_cast<std::size_t>(sched.k));
    for (Index i = 0; i < sched.k; ++i) {
      const GaussianMoments mom = expanding_moments(
          panel.dataset(m), panel.n_tilde, sched.taus[static_cast<std::size_t>(i)]);
      row.push_back(max_sharpe(mom, cfg));
    }
  }
  cand.target_blocks.reserve(static_cast<std::size_t>(sched.k - 1));
  for (Index i = 2; i <= sched.k; ++i) {
    GaussianMoments bm = block_moments(panel.target, panel.n_tilde,
                                       sched.taus[static_cast<std::size_t>(i - 1)],
                                       sched.h);
    const double floor_abs = absolute_pd_floor(bm, cfg.pd_floor);
    cand.target_blocks.push_back(ensure_positive_definite(std::move(bm), floor_abs));
  }
  return cand;
}

/// Convex combination weights over the target and source datasets.
struct TransferWeights {
  Eigen::VectorXd values;  // size M + 1, dataset 0 first

  Index size() const { return values.size(); }
};

inline TransferWeights uniform_weights(Index num_datasets) {
  if (num_datasets < 1)
    throw std::invalid_argument("weights need at least one dataset");
  return TransferWeights{Eigen::VectorXd::Constant(
      num_datasets, 1.0 / static_cast<double>(num_datasets))};
}

inline void validate_weights(const TransferWeights& w) {
  if (w.size() < 1) throw std::invalid_argument("weights are empty");
  if (!w.values.allFinite())
    throw std::invalid_argument("weights have non-finite entries");
  if (w.values.minCoeff() < -1e-9)
    throw std::invalid_argument("weights have a negative entry");
  if (std::abs(w.values.sum() - 1.0) > 1e-6)
    throw std::invalid_argument("weights do not sum to one");
}

namespace detail {

/// Flattened view of the candidate table used in the weight-criterion hot
/// loop: one dim x num_datasets matrix per checkpoint.
struct WeightCriterion {
  std::vector<Eigen::MatrixXd> phi;           // [i-1] for i = 1..k-1
  std::vector<const GaussianMoments*> block;  // validation moments at i+1
  Index num_datasets = 0;

  explicit WeightCriterion(const CandidateAllocations& cand) {
    num_datasets = cand.num_datasets();
    if (cand.k < 2) throw std::invalid_argument("candidate table has no validation steps");
    for (Index i = 1; i <= cand.k - 1; ++i) {
      Eigen::MatrixXd p(cand.dim, num_datasets);
      for (Index m = 0; m < num_datasets; ++m)
        p.col(m) = cand.allocations[static_cast<std::size_t>(m)]
                                   [static_cast<std::size_t>(i - 1)]
                                       .weights;
      phi.push_back(std::move(p));
      block.push_back(&cand.validation_moments(i + 1));
    }
  }

  double operator()(const Eigen::VectorXd& w) const {
    double total = 0.0;
    for (std::size_t j = 0; j < phi.size(); ++j) {
      const Eigen::VectorXd combined = phi[j] * w;
      const double variance = combined.dot(block[j]->cov * combined);
      if (!(variance > 0.0))
        throw numerical_error("validation block variance is not positive");
      total += block[j]->mean.dot(combined) / std::sqrt(variance);
    }
    return total / static_cast<double>(phi.size());
  }
};

inline void enumerate_weight_grid(Index d, double step,
                                  const std::function<void(const Eigen::VectorXd&)>& visit) {
  const Index k = static_cast<Index>(std::llround(1.0 / step));
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(d);
  std::function<void(Index, Index)> rec = [&](Index pos, Index rem) {
    if (pos == d - 1) {
      counts(pos) = static_cast<double>(rem);
      visit(counts * step);
      return;
    }
    for (Index c = rem; c >= 0; --c) {
      counts(pos) = static_cast<double>(c);
      rec(pos + 1, rem - c);
    }
  };
  rec(0, k);
}

}  // namespace detail

/// Average one-block-ahead Sharpe ratio of the combined allocation across
/// the validation checkpoints: at each i = 1..k-1 the candidates fitted at
/// tau_i are blended with w and scored on the target block ending at
/// tau_{i+1}.
inline double weight_objective(const TransferWeights& w,
                               const CandidateAllocations& cand) {
  validate_weights(w);
  if (w.size() != cand.num_datasets())
    throw std::invalid_argument("weight count does not match dataset count");
  return detail::WeightCriterion(cand)(w.values);
}

/// Maximizes the validation criterion over the weight simplex by multi-start
/// projected gradient ascent with forward-difference gradients, cross-checked
/// against a fine grid when only a couple of sources are present.
inline TransferWeights solve_weights(const CandidateAllocations& cand,
                                     const SolverConfig& cfg = {}) {
  validate_solver_config(cfg);
  const Index n = cand.num_datasets();
  if (n < 1) throw std::invalid_argument("candidate table is empty");
  if (n == 1) return TransferWeights{Eigen::VectorXd::Ones(1)};
  const detail::WeightCriterion crit(cand);

  auto eval = [&](const Eigen::VectorXd& w) { return crit(w); };
  const double fd = 1e-6;
  auto grad = [&](const Eigen::VectorXd& w) {
    const double f0 = crit(w);
    Eigen::VectorXd g(n);
    for (Index j = 0; j < n; ++j) {
      Eigen::VectorXd wp = w;
      wp(j) += fd;
      g(j) = (crit(wp) - f0) / fd;
    }
    return g;
  };

  std::vector<Eigen::VectorXd> starts;
  for (Index i = 0; i < n; ++i) starts.push_back(Eigen::VectorXd::Unit(n, i));
  starts.push_back(Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n)));
  RngStream rng(0x5eedu, 3);
  for (int r = 1; r < cfg.restarts; ++r)
    starts.push_back(detail::seeded_simplex_point(rng, n));

  Eigen::VectorXd grid_best;
  double grid_val = -std::numeric_limits<double>::infinity();
  if (n <= 3) {
    detail::enumerate_weight_grid(n, 0.01, [&](const Eigen::VectorXd& w) {
      const double v = crit(w);
      if (v > grid_val) {
        grid_val = v;
        grid_best = w;
      }
    });
    starts.push_back(grid_best);
  }

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
  if (grid_val > best_val) best = grid_best;
  Eigen::VectorXd w = best.cwiseMax(0.0);
  return TransferWeights{w / w.sum()};
}

/// Blends the full-history max-Sharpe allocations of all datasets with the
/// given weights into the final target allocation.
inline Allocation final_allocation(const AlignedPanel& panel, const TransferWeights& w,
                                   const SolverConfig& cfg = {}) {
  validate_solver_config(cfg);
  validate_weights(w);
  if (w.size() != panel.num_datasets())
    throw std::invalid_argument("weight count does not match dataset count");
  Eigen::VectorXd combined = Eigen::VectorXd::Zero(panel.dim);
  for (Index m = 0; m < panel.num_datasets(); ++m) {
    const GaussianMoments mom =
        expanding_moments(panel.dataset(m), panel.n_tilde, panel.n_tilde + 1);
    combined += w.values(m) * max_sharpe(mom, cfg).weights;
  }
  return make_allocation(std::move(combined));
}

/// Total weight assigned to a designated set of datasets.
inline double informative_mass(const TransferWeights& w, const std::vector<Index>& datasets) {
  validate_weights(w);
  double total = 0.0;
  for (Index m : datasets) {
    if (m < 0 || m >= w.size())
      throw std::invalid_argument("dataset index outside weight vector");
    total += w.values(m);
  }
  return total;
}

}  // namespace tlpo
