#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>

#include "tlpo/errors.hpp"
#include "tlpo/panel.hpp"

namespace tlpo {

/// Sample mean vector and covariance matrix of a window of returns.
struct GaussianMoments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  Index n_obs = 0;

  Index dim() const { return mean.size(); }
};

inline bool is_symmetric(const Eigen::MatrixXd& m, double tol = 1e-12) {
  if (m.rows() != m.cols()) return false;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

inline double min_eigenvalue(const Eigen::MatrixXd& sym) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success)
    throw numerical_error("eigenvalue computation failed");
  return es.eigenvalues().minCoeff();
}

namespace detail {

/// Mean and (n-1)-divisor covariance of a block of rows, symmetrized exactly.
inline GaussianMoments moments_of_block(const Eigen::Ref<const Eigen::MatrixXd>& block) {
  const Index n = block.rows();
  if (n < 2) throw std::invalid_argument("moment window needs at least two rows");
  GaussianMoments m;
  m.n_obs = n;
  m.mean = block.colwise().mean();
  const Eigen::MatrixXd centered = block.rowwise() - m.mean.transpose();
  m.cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
  m.cov = ((m.cov + m.cov.transpose()) * 0.5).eval();
  return m;
}

}  // namespace detail

/// Moments of all history strictly before shared panel time t: the first
/// N - n_tilde + t - 1 rows of the dataset. Valid for t = 2..n_tilde+1;
/// t = n_tilde+1 uses the full dataset.
inline GaussianMoments expanding_moments(const ReturnMatrix& data, Index n_tilde,
                                         Index t) {
  validate_return_matrix(data);
  if (n_tilde < 1 || n_tilde > data.rows())
    throw std::invalid_argument("n_tilde outside dataset row count");
  if (t < 2 || t > n_tilde + 1)
    throw std::invalid_argument("expanding window time outside shared range");
  const Index count = data.rows() - n_tilde + t - 1;
  if (count < 2)
    throw std::invalid_argument("expanding window has fewer than two rows");
  return detail::moments_of_block(data.values.topRows(count));
}

/// Moments of the h rows at shared panel times t-h .. t-1, the block that
/// immediately precedes time t. Requires the dataset to reach back h periods
/// before t.
inline GaussianMoments block_moments(const ReturnMatrix& data, Index n_tilde,
                                     Index t, Index h) {
  validate_return_matrix(data);
  if (n_tilde < 1 || n_tilde > data.rows())
    throw std::invalid_argument("n_tilde outside dataset row count");
  if (h < 2) throw std::invalid_argument("block length must be at least two");
  if (t < 2 || t > n_tilde + 1)
    throw std::invalid_argument("block window time outside shared range");
  const Index start = (t - h) + data.rows() - n_tilde - 1;
  if (start < 0)
    throw std::invalid_argument("block window reaches before the first row");
  return detail::moments_of_block(data.values.middleRows(start, h));
}

/// Clips the covariance spectrum from below by diagonal loading: if the
/// smallest eigenvalue is under pd_floor, adds (pd_floor - lambda_min) * I.
/// Already well-conditioned inputs pass through unchanged.
inline GaussianMoments ensure_positive_definite(GaussianMoments m, double pd_floor) {
  if (!(pd_floor > 0.0))
    throw std::invalid_argument("pd_floor must be positive");
  if (m.cov.rows() != m.mean.size() || m.cov.cols() != m.mean.size())
    throw std::invalid_argument("covariance shape does not match mean");
  if (!is_symmetric(m.cov))
    throw std::invalid_argument("covariance is not symmetric");
  const double lambda_min = min_eigenvalue(m.cov);
  if (lambda_min < pd_floor) {
    m.cov.diagonal().array() += pd_floor - lambda_min;
  }
  return m;
}

/// Absolute eigenvalue floor used by the solvers: a relative coefficient
/// scaled by the average variance, so repair strength tracks the data scale.
inline double absolute_pd_floor(const GaussianMoments& m, double relative_floor) {
  if (!(relative_floor > 0.0))
    throw std::invalid_argument("relative pd floor must be positive");
  const double trace = m.cov.trace();
  if (!(trace > 0.0)) return relative_floor;
  return relative_floor * trace / static_cast<double>(m.dim());
}

}  // namespace tlpo
