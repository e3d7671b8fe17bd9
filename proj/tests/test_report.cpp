#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include "tlpo/errors.hpp"
#include "tlpo/report.hpp"

namespace {

namespace fs = std::filesystem;

tlpo::MetricStats stats(double mean, double se, int count) {
  tlpo::MetricStats s;
  s.mean = mean;
  s.se = se;
  s.count = count;
  return s;
}

tlpo::MonteCarloSummary sim_summary(double gamma_mean) {
  tlpo::MonteCarloSummary s;
  s.experiment = "sim1";
  s.master_seed = 17;
  s.replications = 4;
  s.gamma = stats(gamma_mean, 0.02, 4);
  s.strategies.push_back({"tl", "ssr", stats(0.31, 0.01, 4)});
  s.strategies.push_back({"pool", "ssr", stats(0.25, 0.015, 4)});
  for (int j = 0; j < 4; ++j) {
    s.records.push_back({"tl", j, "ssr", 0.25 * j});
    s.records.push_back({"pool", j, "ssr", 1.5 + 0.25 * j});
  }
  return s;
}

tlpo::ExperimentReport sweep_report() {
  tlpo::ExperimentReport report;
  report.experiment = "sim1";
  report.master_seed = 17;
  report.replications = 4;
  report.config = {{"reps", 4}, {"rho", {1.0, 5.0}}};
  report.sweep_name = "rho";
  report.points.push_back({1.0, sim_summary(0.8)});
  report.points.push_back({5.0, sim_summary(0.9)});
  return report;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

TEST(ReportJson, RoundTripsEveryField) {
  const tlpo::ExperimentReport report = sweep_report();
  const tlpo::ordered_json j = tlpo::report_to_json(report);
  const tlpo::ExperimentReport back = tlpo::report_from_json(j);
  EXPECT_EQ(back.experiment, "sim1");
  EXPECT_EQ(back.master_seed, 17u);
  EXPECT_EQ(back.replications, 4);
  EXPECT_EQ(back.sweep_name, "rho");
  EXPECT_EQ(back.config.at("reps").get<int>(), 4);
  ASSERT_EQ(back.points.size(), 2u);
  EXPECT_DOUBLE_EQ(back.points[0].value, 1.0);
  EXPECT_DOUBLE_EQ(back.points[1].value, 5.0);
  ASSERT_TRUE(back.points[1].summary.gamma.has_value());
  EXPECT_DOUBLE_EQ(back.points[1].summary.gamma->mean, 0.9);
  ASSERT_EQ(back.points[0].summary.strategies.size(), 2u);
  EXPECT_EQ(back.points[0].summary.strategies[1].label, "pool");
  EXPECT_DOUBLE_EQ(back.points[0].summary.strategies[1].stats.mean, 0.25);
  EXPECT_DOUBLE_EQ(back.points[0].summary.strategies[1].stats.se, 0.015);
}

TEST(ReportJson, Example1BlockSurvivesTheRoundTrip) {
  tlpo::MonteCarloSummary s;
  s.experiment = "example1";
  s.master_seed = 3;
  s.replications = 10;
  tlpo::Example1Stats ex;
  ex.esr = 2.7;
  ex.vsr = 0.18;
  ex.esr_equal = 2.85;
  ex.vsr_equal = 0.005;
  ex.esr_pool = 2.86;
  ex.vsr_pool = 0.004;
  ex.vsr_ratio = 0.005 / 0.18;
  s.example1 = ex;
  const auto report = tlpo::single_point_report(s);
  const auto back = tlpo::report_from_json(tlpo::report_to_json(report));
  ASSERT_EQ(back.points.size(), 1u);
  ASSERT_TRUE(back.points[0].summary.example1.has_value());
  EXPECT_DOUBLE_EQ(back.points[0].summary.example1->esr, 2.7);
  EXPECT_DOUBLE_EQ(back.points[0].summary.example1->vsr_ratio, 0.005 / 0.18);
  EXPECT_TRUE(back.sweep_name.empty());
}

TEST(SummaryCsv, OneRowPerStrategyPerSweepPoint) {
  const std::string csv = tlpo::summary_csv(sweep_report());
  std::istringstream is(csv);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(is, line)) lines.push_back(line);
  ASSERT_EQ(lines.size(), 5u);  // header + 2 strategies x 2 points
  EXPECT_EQ(lines[0], "experiment,sweep,sweep_value,strategy,metric,mean,se");
  EXPECT_EQ(lines[1], "sim1,rho,1.0,tl,ssr,0.31,0.01");
  EXPECT_EQ(lines[4], "sim1,rho,5.0,pool,ssr,0.25,0.015");
}

TEST(SummaryCsv, EmptyStrategyListYieldsHeaderOnly) {
  tlpo::MonteCarloSummary s;
  s.experiment = "example1";
  s.replications = 2;
  const std::string csv = tlpo::summary_csv(tlpo::single_point_report(s));
  EXPECT_EQ(csv, "experiment,sweep,sweep_value,strategy,metric,mean,se\n");
}

TEST(ReplicationCsv, EmitsOneRowPerRecord) {
  const std::string csv = tlpo::replication_csv(sweep_report());
  std::istringstream is(csv);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(is, line)) lines.push_back(line);
  ASSERT_EQ(lines.size(), 17u);  // header + 8 records x 2 points
  EXPECT_EQ(lines[0], "experiment,sweep,sweep_value,strategy,replication,metric,value");
  EXPECT_EQ(lines[1], "sim1,rho,1.0,tl,0,ssr,0.0");
  EXPECT_EQ(lines[16], "sim1,rho,5.0,pool,3,ssr,2.25");
}

TEST(ReportNumbers, NanBecomesNullInJsonAndEmptyInCsv) {
  tlpo::MonteCarloSummary s;
  s.experiment = "sim1";
  s.replications = 1;
  s.gamma = stats(0.5, std::numeric_limits<double>::quiet_NaN(), 1);
  s.strategies.push_back(
      {"tl", "ssr", stats(0.4, std::numeric_limits<double>::quiet_NaN(), 1)});
  const auto report = tlpo::single_point_report(s);
  const tlpo::ordered_json j = tlpo::report_to_json(report);
  EXPECT_TRUE(j.at("points").at(0).at("gamma").at("se").is_null());

  const std::string csv = tlpo::summary_csv(report);
  EXPECT_NE(csv.find("tl,ssr,0.4,\n"), std::string::npos);

  const auto back = tlpo::report_from_json(j);
  ASSERT_TRUE(back.points[0].summary.gamma.has_value());
  EXPECT_TRUE(std::isnan(back.points[0].summary.gamma->se));
  EXPECT_DOUBLE_EQ(back.points[0].summary.gamma->mean, 0.5);
}

TEST(ReportNumbers, CsvUsesShortestRoundTrippableForm) {
  EXPECT_EQ(tlpo::detail::csv_number(0.1), "0.1");
  EXPECT_EQ(tlpo::detail::csv_number(2.0), "2.0");
  EXPECT_EQ(tlpo::detail::csv_number(1.0 / 3.0), "0.3333333333333333");
  EXPECT_EQ(tlpo::detail::csv_number(std::numeric_limits<double>::quiet_NaN()), "");
}

TEST(SummaryTable, MentionsTheHeadlineNumbers) {
  const std::string table = tlpo::summarize(sweep_report(), tlpo::ReportFormat::Table);
  EXPECT_NE(table.find("experiment: sim1"), std::string::npos);
  EXPECT_NE(table.find("[rho = 1.0]"), std::string::npos);
  EXPECT_NE(table.find("informative weight mass: 0.800000"), std::string::npos);
  EXPECT_NE(table.find("tl"), std::string::npos);
}

TEST(WriteReportFiles, ProducesByteIdenticalRuns) {
  const auto base = fs::temp_directory_path() / "tlpo_test_report";
  const auto dir_a = base / "a";
  const auto dir_b = base / "b";
  fs::remove_all(base);
  const tlpo::ExperimentReport report = sweep_report();
  tlpo::write_report_files(report, dir_a);
  tlpo::write_report_files(report, dir_b);
  for (const char* name : {"summary.json", "summary.csv", "replications.csv"}) {
    const std::string a = slurp(dir_a / name);
    const std::string b = slurp(dir_b / name);
    EXPECT_FALSE(a.empty()) << name;
    EXPECT_EQ(a, b) << name;
  }
  const tlpo::ExperimentReport loaded = tlpo::load_report(dir_a / "summary.json");
  EXPECT_EQ(loaded.experiment, report.experiment);
  EXPECT_EQ(loaded.points.size(), report.points.size());
}

TEST(LoadReport, RejectsMissingAndMalformedFiles) {
  const auto base = fs::temp_directory_path() / "tlpo_test_report_bad";
  fs::create_directories(base);
  EXPECT_THROW(tlpo::load_report(base / "absent.json"), tlpo::io_error);

  const auto garbled = base / "garbled.json";
  std::ofstream(garbled) << "{not json";
  EXPECT_THROW(tlpo::load_report(garbled), tlpo::io_error);

  const auto missing_key = base / "missing.json";
  std::ofstream(missing_key) << R"({"experiment":"sim1"})";
  EXPECT_THROW(tlpo::load_report(missing_key), tlpo::io_error);
}

TEST(Summarize, RejectsNothing) {
  const auto report = sweep_report();
  EXPECT_FALSE(tlpo::summarize(report, tlpo::ReportFormat::Json).empty());
  EXPECT_FALSE(tlpo::summarize(report, tlpo::ReportFormat::Csv).empty());
  EXPECT_FALSE(tlpo::summarize(report, tlpo::ReportFormat::Table).empty());
}

}  // namespace
