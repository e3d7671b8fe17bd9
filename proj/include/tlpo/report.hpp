#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "tlpo/errors.hpp"
#include "tlpo/evaluate.hpp"

namespace tlpo {

using ordered_json = nlohmann::ordered_json;

/// One experiment summary per sweep point; a single point with no sweep name
/// represents a plain run.
struct SweepPoint {
  double value = std::numeric_limits<double>::quiet_NaN();
  MonteCarloSummary summary;
};

struct ExperimentReport {
  std::string experiment;
  std::uint64_t master_seed = 0;
  int replications = 0;
  ordered_json config;     // verbatim echo of the resolved run configuration
  std::string sweep_name;  // empty when the run has a single point
  std::vector<SweepPoint> points;
};

enum class ReportFormat { Json, Csv, Table };

inline ExperimentReport single_point_report(MonteCarloSummary summary,
                                            ordered_json config = ordered_json::object()) {
  ExperimentReport report;
  report.experiment = summary.experiment;
  report.master_seed = summary.master_seed;
  report.replications = summary.replications;
  report.config = std::move(config);
  report.points.push_back(SweepPoint{std::numeric_limits<double>::quiet_NaN(),
                                     std::move(summary)});
  return report;
}

namespace detail {

inline std::string csv_number(double x) {
  if (std::isnan(x)) return "";
  return ordered_json(x).dump();
}

inline ordered_json json_value(double x) {
  if (std::isnan(x)) return nullptr;
  return x;
}

inline double json_number(const ordered_json& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (!j.is_number()) throw io_error("report field is not numeric");
  return j.get<double>();
}

inline std::string fixed6(double x) {
  if (std::isnan(x)) return "-";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", x);
  return buf;
}

}  // namespace detail

inline ordered_json report_to_json(const ExperimentReport& report) {
  ordered_json j;
  j["experiment"] = report.experiment;
  j["master_seed"] = report.master_seed;
  j["replications"] = report.replications;
  if (!report.config.is_null() && !report.config.empty()) j["config"] = report.config;
  if (!report.sweep_name.empty()) {
    ordered_json sweep;
    sweep["name"] = report.sweep_name;
    std::vector<double> values;
    for (const auto& p : report.points) values.push_back(p.value);
    sweep["values"] = values;
    j["sweep"] = sweep;
  }
  j["points"] = ordered_json::array();
  for (const auto& p : report.points) {
    ordered_json pj;
    if (!report.sweep_name.empty()) pj["sweep_value"] = detail::json_value(p.value);
    if (p.summary.gamma) {
      pj["gamma"] = {{"mean", detail::json_value(p.summary.gamma->mean)},
                     {"se", detail::json_value(p.summary.gamma->se)}};
    }
    if (p.summary.example1) {
      const auto& ex = *p.summary.example1;
      pj["example1"] = {{"esr", detail::json_value(ex.esr)},
                        {"vsr", detail::json_value(ex.vsr)},
                        {"esr_equal", detail::json_value(ex.esr_equal)},
                        {"vsr_equal", detail::json_value(ex.vsr_equal)},
                        {"esr_pool", detail::json_value(ex.esr_pool)},
                        {"vsr_pool", detail::json_value(ex.vsr_pool)},
                        {"vsr_ratio", detail::json_value(ex.vsr_ratio)}};
    }
    pj["strategies"] = ordered_json::array();
    for (const auto& s : p.summary.strategies) {
      pj["strategies"].push_back({{"name", s.label},
                                  {"metric", s.metric},
                                  {"mean", detail::json_value(s.stats.mean)},
                                  {"se", detail::json_value(s.stats.se)}});
    }
    j["points"].push_back(std::move(pj));
  }
  return j;
}

/// Rebuilds a report from its JSON rendering. Per-replication records are
/// not part of the summary document, so they come back empty.
inline ExperimentReport report_from_json(const ordered_json& j) {
  for (const char* key : {"experiment", "master_seed", "replications", "points"})
    if (!j.contains(key)) throw io_error(std::string("report is missing '") + key + "'");
  ExperimentReport report;
  report.experiment = j.at("experiment").get<std::string>();
  report.master_seed = j.at("master_seed").get<std::uint64_t>();
  report.replications = j.at("replications").get<int>();
  if (j.contains("config")) report.config = j.at("config");
  if (j.contains("sweep")) report.sweep_name = j.at("sweep").at("name").get<std::string>();
  for (const auto& pj : j.at("points")) {
    SweepPoint point;
    if (pj.contains("sweep_value")) point.value = detail::json_number(pj.at("sweep_value"));
    point.summary.experiment = report.experiment;
    point.summary.master_seed = report.master_seed;
    point.summary.replications = report.replications;
    if (pj.contains("gamma")) {
      MetricStats g;
      g.mean = detail::json_number(pj.at("gamma").at("mean"));
      g.se = detail::json_number(pj.at("gamma").at("se"));
      g.count = report.replications;
      point.summary.gamma = g;
    }
    if (pj.contains("example1")) {
      Example1Stats ex;
      const auto& e = pj.at("example1");
      ex.esr = detail::json_number(e.at("esr"));
      ex.vsr = detail::json_number(e.at("vsr"));
      ex.esr_equal = detail::json_number(e.at("esr_equal"));
      ex.vsr_equal = detail::json_number(e.at("vsr_equal"));
      ex.esr_pool = detail::json_number(e.at("esr_pool"));
      ex.vsr_pool = detail::json_number(e.at("vsr_pool"));
      ex.vsr_ratio = detail::json_number(e.at("vsr_ratio"));
      point.summary.example1 = ex;
    }
    if (pj.contains("strategies")) {
      for (const auto& sj : pj.at("strategies")) {
        StrategySummary s;
        s.label = sj.at("name").get<std::string>();
        s.metric = sj.at("metric").get<std::string>();
        s.stats.mean = detail::json_number(sj.at("mean"));
        s.stats.se = detail::json_number(sj.at("se"));
        s.stats.count = report.replications;
        point.summary.strategies.push_back(std::move(s));
      }
    }
    report.points.push_back(std::move(point));
  }
  return report;
}

/// Flat per-strategy table: one row per strategy per sweep point.
inline std::string summary_csv(const ExperimentReport& report) {
  std::ostringstream os;
  os << "experiment,sweep,sweep_value,strategy,metric,mean,se\n";
  for (const auto& p : report.points) {
    const std::string sweep_value =
        report.sweep_name.empty() ? "" : detail::csv_number(p.value);
    for (const auto& s : p.summary.strategies) {
      os << report.experiment << ',' << report.sweep_name << ',' << sweep_value << ','
         << s.label << ',' << s.metric << ',' << detail::csv_number(s.stats.mean) << ','
         << detail::csv_number(s.stats.se) << '\n';
    }
  }
  return os.str();
}

/// Long-form per-replication values across all sweep points.
inline std::string replication_csv(const ExperimentReport& report) {
  std::ostringstream os;
  os << "experiment,sweep,sweep_value,strategy,replication,metric,value\n";
  for (const auto& p : report.points) {
    const std::string sweep_value =
        report.sweep_name.empty() ? "" : detail::csv_number(p.value);
    for (const auto& r : p.summary.records) {
      os << report.experiment << ',' << report.sweep_name << ',' << sweep_value << ','
         << r.strategy << ',' << r.replication << ',' << r.metric << ','
         << detail::csv_number(r.value) << '\n';
    }
  }
  return os.str();
}

inline std::string summary_table(const ExperimentReport& report) {
  std::ostringstream os;
  os << "experiment: " << report.experiment << "  seed: " << report.master_seed
     << "  replications: " << report.replications << '\n';
  for (const auto& p : report.points) {
    if (!report.sweep_name.empty())
      os << "[" << report.sweep_name << " = " << detail::csv_number(p.value) << "]\n";
    if (p.summary.gamma)
      os << "  informative weight mass: " << detail::fixed6(p.summary.gamma->mean)
         << " (se " << detail::fixed6(p.summary.gamma->se) << ")\n";
    if (p.summary.example1) {
      const auto& ex = *p.summary.example1;
      os << "  non_transfer  esr " << detail::fixed6(ex.esr) << "  vsr "
         << detail::fixed6(ex.vsr) << '\n';
      os << "  tl_equal      esr " << detail::fixed6(ex.esr_equal) << "  vsr "
         << detail::fixed6(ex.vsr_equal) << '\n';
      os << "  pool          esr " << detail::fixed6(ex.esr_pool) << "  vsr "
         << detail::fixed6(ex.vsr_pool) << '\n';
      os << "  vsr_equal / vsr: " << detail::fixed6(ex.vsr_ratio) << '\n';
    }
    if (!p.summary.strategies.empty()) {
      os << "  strategy        metric  mean        se\n";
      for (const auto& s : p.summary.strategies) {
        os << "  ";
        os << s.label;
        for (std::size_t pad = s.label.size(); pad < 16; ++pad) os << ' ';
        os << s.metric;
        for (std::size_t pad = s.metric.size(); pad < 8; ++pad) os << ' ';
        os << detail::fixed6(s.stats.mean) << "  " << detail::fixed6(s.stats.se) << '\n';
      }
    }
  }
  return os.str();
}

inline std::string summarize(const ExperimentReport& report, ReportFormat format) {
  switch (format) {
    case ReportFormat::Json: return report_to_json(report).dump(2) + "\n";
    case ReportFormat::Csv: return summary_csv(report);
    case ReportFormat::Table: return summary_table(report);
  }
  throw std::invalid_argument("unknown report format");
}

/// Writes summary.json, summary.csv, and replications.csv under out_dir,
/// creating the directory if needed. Output depends only on the report
/// contents, so identical runs produce identical bytes.
inline void write_report_files(const ExperimentReport& report,
                               const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw io_error("cannot create output directory: " + out_dir.string());
  auto write = [&](const std::string& name, const std::string& content) {
    const std::filesystem::path path = out_dir / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write " + path.string());
    out << content;
    if (!out) throw io_error("failed while writing " + path.string());
  };
  write("summary.json", summarize(report, ReportFormat::Json));
  write("summary.csv", summarize(report, ReportFormat::Csv));
  write("replications.csv", replication_csv(report));
}

inline ExperimentReport load_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open report: " + path.string());
  ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw io_error("malformed report JSON in " + path.string() + ": " + e.what());
  }
  return report_from_json(j);
}

}  // namespace tlpo
