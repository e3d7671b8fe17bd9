#include <gtest/gtest.h>

#include "tlpo/moments.hpp"

namespace {

using tlpo::Index;

tlpo::ReturnMatrix column(std::initializer_list<double> xs) {
  tlpo::ReturnMatrix rm;
  rm.label = "col";
  rm.values.resize(static_cast<Index>(xs.size()), 1);
  Index i = 0;
  for (double x : xs) rm.values(i++, 0) = x;
  return rm;
}

TEST(ExpandingMoments, UsesAllRowsBeforeTheSharedTime) {
  const tlpo::ReturnMatrix rm = column({1, 2, 3, 4});
  // Shared window of 2: time t = 2 sees the three rows {1, 2, 3}.
  const tlpo::GaussianMoments m = tlpo::expanding_moments(rm, 2, 2);
  EXPECT_EQ(m.n_obs, 3);
  EXPECT_DOUBLE_EQ(m.mean(0), 2.0);
  EXPECT_DOUBLE_EQ(m.cov(0, 0), 1.0);
}

TEST(ExpandingMoments, FullSampleAtOnePastTheWindow) {
  const tlpo::ReturnMatrix rm = column({1, 2, 3, 4});
  const tlpo::GaussianMoments m = tlpo::expanding_moments(rm, 4, 5);
  EXPECT_EQ(m.n_obs, 4);
  EXPECT_DOUBLE_EQ(m.mean(0), 2.5);
  EXPECT_NEAR(m.cov(0, 0), 5.0 / 3.0, 1e-15);
}

TEST(ExpandingMoments, CovarianceUsesTheUnbiasedDivisor) {
  tlpo::ReturnMatrix rm;
  rm.values.resize(5, 2);
  rm.values << 1, 2, 2, 1, 3, 5, 0, -1, 4, 4;
  const tlpo::GaussianMoments m = tlpo::expanding_moments(rm, 5, 6);
  Eigen::MatrixXd centered = rm.values.rowwise() - rm.values.colwise().mean();
  const Eigen::MatrixXd expected = centered.transpose() * centered / 4.0;
  EXPECT_TRUE(m.cov.isApprox(expected, 1e-14));
  EXPECT_TRUE(tlpo::is_symmetric(m.cov));
}

TEST(ExpandingMoments, RejectsTimesOutsideTheValidRange) {
  const tlpo::ReturnMatrix rm = column({1, 2, 3, 4});
  EXPECT_THROW(tlpo::expanding_moments(rm, 4, 1), std::invalid_argument);
  EXPECT_THROW(tlpo::expanding_moments(rm, 4, 6), std::invalid_argument);
}

TEST(ExpandingMoments, RejectsWindowsWithOneRow) {
  const tlpo::ReturnMatrix rm = column({1, 2, 3, 4});
  // With the full dataset inside the shared window, t = 2 sees one row.
  EXPECT_THROW(tlpo::expanding_moments(rm, 4, 2), std::invalid_argument);
}

TEST(BlockMoments, CoversTheBlockEndingJustBeforeTheTime) {
  const tlpo::ReturnMatrix rm = column({1, 2, 3, 4});
  const tlpo::GaussianMoments m = tlpo::block_moments(rm, 4, 5, 2);
  EXPECT_EQ(m.n_obs, 2);
  EXPECT_DOUBLE_EQ(m.mean(0), 3.5);
  EXPECT_DOUBLE_EQ(m.cov(0, 0), 0.5);
}

TEST(BlockMoments, ReachesIntoThePreWindowHistory) {
  const tlpo::ReturnMatrix rm = column({10, 20, 30, 40, 50, 60});
  // Shared window of 4: time 2 with h = 3 covers times -1, 0, 1 = rows 0..2.
  const tlpo::GaussianMoments m = tlpo::block_moments(rm, 4, 2, 3);
  EXPECT_DOUBLE_EQ(m.mean(0), 20.0);
}

TEST(BlockMoments, RejectsBlocksBeforeTheFirstRow) {
  const tlpo::ReturnMatrix rm = column({1, 2, 3, 4});
  EXPECT_THROW(tlpo::block_moments(rm, 4, 3, 3), std::invalid_argument);
}

TEST(BlockMoments, RejectsDegenerateBlockLength) {
  const tlpo::ReturnMatrix rm = column({1, 2, 3, 4});
  EXPECT_THROW(tlpo::block_moments(rm, 4, 4, 1), std::invalid_argument);
}

TEST(EnsurePositiveDefinite, LoadsTheDiagonalByTheEigenvalueGap) {
  tlpo::GaussianMoments m;
  m.mean = Eigen::VectorXd::Zero(2);
  m.cov.resize(2, 2);
  m.cov << 1, 1, 1, 1;
  const tlpo::GaussianMoments repaired = tlpo::ensure_positive_definite(m, 1e-6);
  EXPECT_DOUBLE_EQ(repaired.cov(0, 0), 1.0 + 1e-6);
  EXPECT_DOUBLE_EQ(repaired.cov(1, 1), 1.0 + 1e-6);
  EXPECT_DOUBLE_EQ(repaired.cov(0, 1), 1.0);
  EXPECT_GE(tlpo::min_eigenvalue(repaired.cov), 1e-6 - 1e-12);
}

TEST(EnsurePositiveDefinite, LeavesWellConditionedInputAlone) {
  tlpo::GaussianMoments m;
  m.mean = Eigen::VectorXd::Zero(3);
  m.cov = Eigen::MatrixXd::Identity(3, 3);
  const tlpo::GaussianMoments repaired = tlpo::ensure_positive_definite(m, 1e-8);
  EXPECT_TRUE(repaired.cov.isApprox(Eigen::MatrixXd::Identity(3, 3)));
}

TEST(EnsurePositiveDefinite, RejectsAsymmetricInput) {
  tlpo::GaussianMoments m;
  m.mean = Eigen::VectorXd::Zero(2);
  m.cov.resize(2, 2);
  m.cov << 1, 0.5, 0.2, 1;
  EXPECT_THROW(tlpo::ensure_positive_definite(m, 1e-8), std::invalid_argument);
}

TEST(EnsurePositiveDefinite, RepairsIndefiniteInputToTheFloor) {
  tlpo::GaussianMoments m;
  m.mean = Eigen::VectorXd::Zero(2);
  m.cov.resize(2, 2);
  m.cov << 1, 2, 2, 1;  // eigenvalues 3 and -1
  const tlpo::GaussianMoments repaired = tlpo::ensure_positive_definite(m, 1e-6);
  EXPECT_NEAR(tlpo::min_eigenvalue(repaired.cov), 1e-6, 1e-12);
}

TEST(MinEigenvalue, MatchesTheDiagonalCase) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(2, 2);
  m(0, 0) = 1.0;
  m(1, 1) = 2.0;
  EXPECT_NEAR(tlpo::min_eigenvalue(m), 1.0, 1e-14);
}

TEST(AbsolutePdFloor, ScalesWithTheAverageVariance) {
  tlpo::GaussianMoments m;
  m.mean = Eigen::VectorXd::Zero(2);
  m.cov = 4.0 * Eigen::MatrixXd::Identity(2, 2);
  EXPECT_DOUBLE_EQ(tlpo::absolute_pd_floor(m, 1e-8), 4e-8);
}

TEST(AbsolutePdFloor, FallsBackWhenTheTraceVanishes) {
  tlpo::GaussianMoments m;
  m.mean = Eigen::VectorXd::Zero(2);
  m.cov = Eigen::MatrixXd::Zero(2, 2);
  EXPECT_DOUBLE_EQ(tlpo::absolute_pd_floor(m, 1e-8), 1e-8);
}

}  // namespace
