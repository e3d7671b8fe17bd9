#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "tlpo/panel.hpp"

namespace {

using tlpo::Index;

std::filesystem::path write_file(const std::string& name, const std::string& content) {
  const std::filesystem::path path =
      std::filesystem::path(testing::TempDir()) / name;
  std::ofstream out(path);
  out << content;
  return path;
}

tlpo::ReturnMatrix constant_matrix(Index rows, Index cols, double value,
                                   const std::string& label = "x") {
  tlpo::ReturnMatrix rm;
  rm.label = label;
  rm.values = Eigen::MatrixXd::Constant(rows, cols, value);
  return rm;
}

TEST(LoadReturnsCsv, ParsesHeaderlessSingleColumn) {
  const auto path = write_file("plain.csv", "1\n3\n");
  const tlpo::ReturnMatrix rm = tlpo::load_returns_csv(path, false);
  ASSERT_EQ(rm.rows(), 2);
  ASSERT_EQ(rm.cols(), 1);
  EXPECT_DOUBLE_EQ(rm.values(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(rm.values(1, 0), 3.0);
  EXPECT_TRUE(rm.timestamps.empty());
}

TEST(LoadReturnsCsv, KeepsDateColumnAsTimestamps) {
  const auto path = write_file(
      "dated.csv", "date,a,b\n2001-01,0.5,1.5\n2001-02,-0.25,2.0\n2001-03,0,0\n");
  const tlpo::ReturnMatrix rm = tlpo::load_returns_csv(path, true);
  ASSERT_EQ(rm.rows(), 3);
  ASSERT_EQ(rm.cols(), 2);
  ASSERT_EQ(rm.timestamps.size(), 3u);
  EXPECT_EQ(rm.timestamps[1], "2001-02");
  EXPECT_DOUBLE_EQ(rm.values(1, 0), -0.25);
  EXPECT_DOUBLE_EQ(rm.values(2, 1), 0.0);
  EXPECT_EQ(rm.label, "dated");
}

TEST(LoadReturnsCsv, HeaderWithoutDateColumnIsAllNumeric) {
  const auto path = write_file("nodate.csv", "a,b\n1,2\n3,4\n");
  const tlpo::ReturnMatrix rm = tlpo::load_returns_csv(path, true);
  ASSERT_EQ(rm.cols(), 2);
  EXPECT_TRUE(rm.timestamps.empty());
  EXPECT_DOUBLE_EQ(rm.values(1, 1), 4.0);
}

TEST(LoadReturnsCsv, SkipsBlankLinesAndCarriageReturns) {
  const auto path = write_file("crlf.csv", "a\r\n1\r\n\r\n2\r\n");
  const tlpo::ReturnMatrix rm = tlpo::load_returns_csv(path, true);
  ASSERT_EQ(rm.rows(), 2);
  EXPECT_DOUBLE_EQ(rm.values(1, 0), 2.0);
}

TEST(LoadReturnsCsv, RejectsNonNumericCell) {
  const auto path = write_file("bad.csv", "1,2\n1,x\n");
  EXPECT_THROW(tlpo::load_returns_csv(path, false), tlpo::io_error);
}

TEST(LoadReturnsCsv, RejectsRaggedRow) {
  const auto path = write_file("ragged.csv", "a,b\n1,2\n3\n");
  EXPECT_THROW(tlpo::load_returns_csv(path, true), tlpo::io_error);
}

TEST(LoadReturnsCsv, RejectsSingleDataRow) {
  const auto path = write_file("short.csv", "a\n1\n");
  EXPECT_THROW(tlpo::load_returns_csv(path, true), tlpo::io_error);
}

TEST(LoadReturnsCsv, RejectsMissingFile) {
  EXPECT_THROW(tlpo::load_returns_csv("/nonexistent/returns.csv", true),
               tlpo::io_error);
}

TEST(LoadReturnsCsv, RejectsDateOnlyFile) {
  const auto path = write_file("dateonly.csv", "date\n2001-01\n2001-02\n");
  EXPECT_THROW(tlpo::load_returns_csv(path, true), tlpo::io_error);
}

TEST(ToExcess, SubtractsRatePerPeriod) {
  tlpo::ReturnMatrix rm;
  rm.values.resize(2, 2);
  rm.values << 1.0, 2.0, 3.0, 4.0;
  tlpo::RiskFreeSeries rf{(Eigen::VectorXd(2) << 0.5, 1.0).finished()};
  const tlpo::ReturnMatrix excess = tlpo::to_excess(rm, rf);
  EXPECT_DOUBLE_EQ(excess.values(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(excess.values(0, 1), 1.5);
  EXPECT_DOUBLE_EQ(excess.values(1, 0), 2.0);
  EXPECT_DOUBLE_EQ(excess.values(1, 1), 3.0);
}

TEST(ToExcess, RejectsLengthMismatch) {
  tlpo::ReturnMatrix rm = constant_matrix(3, 1, 0.0);
  tlpo::RiskFreeSeries rf{Eigen::VectorXd::Zero(2)};
  EXPECT_THROW(tlpo::to_excess(rm, rf), std::invalid_argument);
}

TEST(ValidateReturnMatrix, RejectsNonFiniteEntries) {
  tlpo::ReturnMatrix rm = constant_matrix(3, 2, 1.0);
  rm.values(1, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(tlpo::validate_return_matrix(rm), std::invalid_argument);
}

TEST(AlignPanel, SharedWindowIsTheMinimumRowCount) {
  const tlpo::AlignedPanel panel = tlpo::align_panel(
      constant_matrix(300, 2, 0.1, "target"),
      {constant_matrix(400, 2, 0.2, "s1"), constant_matrix(500, 2, 0.3, "s2"),
       constant_matrix(600, 2, 0.4, "s3")});
  EXPECT_EQ(panel.n_tilde, 300);
  EXPECT_EQ(panel.dim, 2);
  EXPECT_EQ(panel.num_sources(), 3);
  EXPECT_EQ(panel.num_datasets(), 4);
  EXPECT_EQ(panel.dataset(0).label, "target");
  EXPECT_EQ(panel.dataset(3).label, "s3");
}

TEST(AlignPanel, AligningTwiceChangesNothing) {
  const tlpo::AlignedPanel once = tlpo::align_panel(
      constant_matrix(5, 1, 1.0), {constant_matrix(9, 1, 2.0)});
  const tlpo::AlignedPanel twice = tlpo::align_panel(once.target, once.sources);
  EXPECT_EQ(twice.n_tilde, once.n_tilde);
  EXPECT_EQ(twice.dim, once.dim);
  EXPECT_TRUE(twice.target.values.isApprox(once.target.values));
  EXPECT_TRUE(twice.sources[0].values.isApprox(once.sources[0].values));
}

TEST(AlignPanel, RejectsDimensionMismatch) {
  EXPECT_THROW(
      tlpo::align_panel(constant_matrix(5, 2, 0.0), {constant_matrix(5, 3, 0.0)}),
      std::invalid_argument);
}

TEST(AlignPanel, TargetMayBeTheLongestDataset) {
  const tlpo::AlignedPanel panel = tlpo::align_panel(
      constant_matrix(10, 1, 0.0), {constant_matrix(4, 1, 0.0)});
  EXPECT_EQ(panel.n_tilde, 4);
}

TEST(TimeMapping, MatchesTheSharedWindowConvention) {
  // 600 rows sharing a 300-period window: shared time 1 is row 300 and the
  // earliest row sits at time -(600 - 300 - 1).
  EXPECT_EQ(tlpo::time_to_row(600, 300, 1), 300);
  EXPECT_EQ(tlpo::time_to_row(600, 300, 300), 599);
  EXPECT_EQ(tlpo::time_to_row(600, 300, -299), 0);
  EXPECT_EQ(tlpo::row_to_time(600, 300, 0), -299);
  EXPECT_EQ(tlpo::row_to_time(600, 300, 599), 300);
}

TEST(TimeMapping, RoundTripsOverEveryRow) {
  const Index n = 37;
  const Index n_tilde = 11;
  for (Index row = 0; row < n; ++row) {
    const Index t = tlpo::row_to_time(n, n_tilde, row);
    EXPECT_EQ(tlpo::time_to_row(n, n_tilde, t), row);
  }
}

TEST(TimeMapping, RejectsTimesOutsideTheDataset) {
  EXPECT_THROW(tlpo::time_to_row(10, 5, 6), std::invalid_argument);
  EXPECT_THROW(tlpo::time_to_row(10, 5, -5), std::invalid_argument);
  EXPECT_THROW(tlpo::row_to_time(10, 5, 10), std::invalid_argument);
}

TEST(TruncateBefore, KeepsExactlyTheRowsBeforeTheCut) {
  tlpo::ReturnMatrix target;
  target.label = "target";
  target.values.resize(6, 1);
  target.values << 1, 2, 3, 4, 5, 6;
  target.timestamps = {"a", "b", "c", "d", "e", "f"};
  tlpo::ReturnMatrix source;
  source.label = "src";
  source.values.resize(8, 1);
  source.values << 10, 20, 30, 40, 50, 60, 70, 80;
  const tlpo::AlignedPanel panel = tlpo::align_panel(target, {source});
  ASSERT_EQ(panel.n_tilde, 6);

  const tlpo::AlignedPanel cut = tlpo::truncate_before(panel, 5);
  EXPECT_EQ(cut.n_tilde, 4);
  ASSERT_EQ(cut.target.rows(), 4);
  EXPECT_DOUBLE_EQ(cut.target.values(3, 0), 4.0);
  ASSERT_EQ(cut.target.timestamps.size(), 4u);
  EXPECT_EQ(cut.target.timestamps.back(), "d");
  ASSERT_EQ(cut.sources[0].rows(), 6);
  EXPECT_DOUBLE_EQ(cut.sources[0].values(5, 0), 60.0);
}

TEST(TruncateBefore, FullWindowCutKeepsEverything) {
  const tlpo::AlignedPanel panel = tlpo::align_panel(
      constant_matrix(6, 1, 1.0), {constant_matrix(8, 1, 2.0)});
  const tlpo::AlignedPanel cut = tlpo::truncate_before(panel, panel.n_tilde + 1);
  EXPECT_EQ(cut.n_tilde, panel.n_tilde);
  EXPECT_EQ(cut.target.rows(), 6);
  EXPECT_EQ(cut.sources[0].rows(), 8);
}

TEST(TruncateBefore, RejectsCutsThatLeaveTooLittle) {
  const tlpo::AlignedPanel panel = tlpo::align_panel(
      constant_matrix(6, 1, 1.0), {constant_matrix(8, 1, 2.0)});
  EXPECT_THROW(tlpo::truncate_before(panel, 2), std::invalid_argument);
  EXPECT_THROW(tlpo::truncate_before(panel, panel.n_tilde + 2), std::invalid_argument);
}

}  // namespace
