#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <utility>

#include "tlpo/errors.hpp"
#include "tlpo/max_sharpe.hpp"
#include "tlpo/moments.hpp"
#include "tlpo/panel.hpp"
#include "tlpo/transfer.hpp"

namespace tlpo {

enum class StrategyKind {
  Tl,           // forward-validated transfer weights
  TlEqual,      // uniform transfer weights
  NonTransfer,  // target history only
  Pool,         // all datasets concatenated into one sample
  Tlc,          // penalized pull toward one source's allocation
};

inline std::string strategy_name(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::Tl: return "tl";
    case StrategyKind::TlEqual: return "tl_equal";
    case StrategyKind::NonTransfer: return "non_transfer";
    case StrategyKind::Pool: return "pool";
    case StrategyKind::Tlc: return "tlc";
  }
  throw std::invalid_argument("unknown strategy kind");
}

inline StrategyKind parse_strategy(const std::string& name) {
  if (name == "tl") return StrategyKind::Tl;
  if (name == "tl_equal") return StrategyKind::TlEqual;
  if (name == "non_transfer" || name == "non") return StrategyKind::NonTransfer;
  if (name == "pool") return StrategyKind::Pool;
  if (name == "tlc") return StrategyKind::Tlc;
  throw std::invalid_argument("unknown strategy name: '" + name + "'");
}

struct StrategySpec {
  StrategyKind kind = StrategyKind::NonTransfer;
  Index h = 0;             // validation block length; 0 means target_rows / 5
  double lambda = 0.2;     // penalty strength for Tlc
  Index tlc_source = 1;    // source dataset anchoring Tlc
  SolverConfig solver;
};

inline Index default_block_length(const AlignedPanel& panel) {
  return panel.target.rows() / 5;
}

/// Moments of all datasets concatenated into one sample, with a single
/// shared divisor of total rows minus one.
inline GaussianMoments pool_moments(const AlignedPanel& panel) {
  Index total = 0;
  for (Index m = 0; m < panel.num_datasets(); ++m) total += panel.dataset(m).rows();
  Eigen::MatrixXd stacked(total, panel.dim);
  Index at = 0;
  for (Index m = 0; m < panel.num_datasets(); ++m) {
    const auto& values = panel.dataset(m).values;
    stacked.middleRows(at, values.rows()) = values;
    at += values.rows();
  }
  return detail::moments_of_block(stacked);
}

/// An allocation plus the transfer weights that produced it, when any.
struct AllocationOutcome {
  Allocation allocation;
  std::optional<TransferWeights> weights;
};

inline AllocationOutcome allocate_detailed(const StrategySpec& spec,
                                           const AlignedPanel& panel) {
  validate_solver_config(spec.solver);
  switch (spec.kind) {
    case StrategyKind::NonTransfer: {
      const GaussianMoments mom =
          expanding_moments(panel.target, panel.n_tilde, panel.n_tilde + 1);
      return AllocationOutcome{max_sharpe(mom, spec.solver), std::nullopt};
    }
    case StrategyKind::Pool:
      return AllocationOutcome{max_sharpe(pool_moments(panel), spec.solver),
                               std::nullopt};
    case StrategyKind::TlEqual: {
      const TransferWeights w = uniform_weights(panel.num_datasets());
      return AllocationOutcome{final_allocation(panel, w, spec.solver), w};
    }
    case StrategyKind::Tl: {
      const Index h = spec.h > 0 ? spec.h : default_block_length(panel);
      const ValidationSchedule sched = build_schedule(panel, h);
      const CandidateAllocations cand = fit_candidates(panel, sched, spec.solver);
      const TransferWeights w = solve_weights(cand, spec.solver);
      return AllocationOutcome{final_allocation(panel, w, spec.solver), w};
    }
    case StrategyKind::Tlc: {
      if (panel.num_sources() < 1)
        throw std::invalid_argument("penalized strategy needs at least one source");
      if (spec.tlc_source < 1 || spec.tlc_source > panel.num_sources())
        throw std::invalid_argument("penalized strategy source index out of range");
      const auto& source = panel.dataset(spec.tlc_source);
      const Allocation anchor = max_sharpe(
          expanding_moments(source, panel.n_tilde, panel.n_tilde + 1), spec.solver);
      const GaussianMoments target_mom =
          expanding_moments(panel.target, panel.n_tilde, panel.n_tilde + 1);
      return AllocationOutcome{
          max_sharpe_penalized(target_mom, anchor, spec.lambda, spec.solver),
          std::nullopt};
    }
  }
  throw std::invalid_argument("unknown strategy kind");
}

inline Allocation allocate(const StrategySpec& spec, const AlignedPanel& panel) {
  return allocate_detailed(spec, panel).allocation;
}

}  // namespace tlpo
