#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "qrl/experiments.hpp"

namespace fs = std::filesystem;

namespace {

qrl::SimParams small(std::size_t n = 3000) {
  qrl::SimParams p;
  p.n_traces = n;
  p.workers = 1;
  p.jumps.n_records = 20;
  p.jumps.duration_us = 50.0;
  p.sweep.nbar = {1.0, 14.6};
  p.analysis.filter_grid_points = 8;
  return p;
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    std::vector<std::string> cols;
    std::string c;
    std::istringstream ls(line);
    while (std::getline(ls, c, ',')) cols.push_back(c);
    if (!line.empty() && line.back() == ',') cols.emplace_back();
    rows.push_back(cols);
  }
  return rows;
}

const qrl::Artifact& artifact(const qrl::ExperimentReport& r, const std::string& file) {
  for (const auto& a : r.artifacts) {
    if (a.file == file) return a;
  }
  throw std::runtime_error("missing artifact " + file);
}

// Every floating-point statistic outside "settings" sits in a value/sigma/n triplet.
void expect_triplets(const qrl::Json& j, const std::string& path) {
  if (j.is_object()) {
    if (j.contains("value")) {
      EXPECT_TRUE(j.contains("sigma") && j.contains("n")) << path;
      return;
    }
    for (const auto& [k, v] : j.items()) {
      if (k == "settings") continue;
      expect_triplets(v, path + "." + k);
    }
  } else if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i) expect_triplets(j[i], path + "[" + std::to_string(i) + "]");
  } else if (j.is_number_float()) {
    ADD_FAILURE() << "bare number at " << path;
  }
}

}  // namespace

TEST(Experiments, UnknownNameListsAvailable) {
  try {
    qrl::run_experiment("histogram", small());
    FAIL();
  } catch (const qrl::UnknownExperiment& e) {
    const std::string msg = e.what();
    for (const auto& n : qrl::experiment_names()) EXPECT_NE(msg.find(n), std::string::npos) << n;
  }
}

TEST(Experiments, DeterministicAndWorkerIndependent) {
  for (const char* name : {"hist", "purify", "jumps"}) {
    auto p = small(1500);
    const auto a = qrl::run_experiment(name, p);
    const auto b = qrl::run_experiment(name, p);
    p.workers = 3;
    const auto c = qrl::run_experiment(name, p);
    EXPECT_EQ(a.to_json().dump(), b.to_json().dump()) << name;
    p.workers = 1;
    auto a_json = a.to_json();
    auto c_json = c.to_json();
    a_json["params"].erase("run.workers");
    c_json["params"].erase("run.workers");
    EXPECT_EQ(a_json.dump(), c_json.dump()) << name;
    ASSERT_EQ(a.artifacts.size(), c.artifacts.size());
    for (std::size_t i = 0; i < a.artifacts.size(); ++i) {
      EXPECT_EQ(a.artifacts[i].content, b.artifacts[i].content) << name << " " << a.artifacts[i].file;
      EXPECT_EQ(a.artifacts[i].content, c.artifacts[i].content) << name << " " << a.artifacts[i].file;
    }
  }
}

TEST(Experiments, SeedChangesResults) {
  auto p = small(1500);
  const auto a = qrl::run_experiment("hist", p);
  p.master_seed += 1;
  const auto b = qrl::run_experiment("hist", p);
  EXPECT_NE(a.summary.dump(), b.summary.dump());
}

TEST(Experiments, EveryStatisticCarriesUncertaintyAndCount) {
  const auto p = small(1500);
  for (const auto& name : qrl::experiment_names()) {
    const auto rep = qrl::run_experiment(name, p);
    EXPECT_EQ(rep.experiment, name);
    expect_triplets(rep.summary, name);
    EXPECT_EQ(rep.params["readout.nbar"], "14.6") << name;
    EXPECT_FALSE(rep.artifacts.empty()) << name;
  }
}

TEST(Experiments, HistSummaryRecomputableFromArtifacts) {
  const auto rep = qrl::run_experiment("hist", small());
  const double thr = rep.summary["raw"]["discriminator"]["threshold"]["value"];
  ASSERT_EQ(rep.summary["raw"]["discriminator"]["polarity"], "excited_above");
  std::size_t ng = 0, ne = 0, eg = 0, ee = 0;
  for (const auto& row : csv_rows(artifact(rep, "marker_values.csv").content)) {
    const double vd = std::stod(row.at(4));
    if (row[0] == "0") {
      ++ng;
      eg += vd >= thr;
    } else {
      ++ne;
      ee += vd < thr;
    }
  }
  EXPECT_EQ(ng, rep.summary["raw"]["p0"]["n"].get<std::size_t>());
  EXPECT_DOUBLE_EQ(static_cast<double>(eg) / ng, rep.summary["raw"]["p0"]["value"].get<double>());
  EXPECT_DOUBLE_EQ(static_cast<double>(ee) / ne, rep.summary["raw"]["p1"]["value"].get<double>());

  // Minor-peak masses read off the two-column histograms sit close to P0 and P1.
  auto far_side = [&](const std::string& file, bool excited_side) {
    std::uint64_t far = 0, total = 0;
    for (const auto& row : csv_rows(artifact(rep, file).content)) {
      const double v = std::stod(row[0]);
      const auto c = std::stoull(row[1]);
      total += c;
      if ((v >= thr) == excited_side) far += c;
    }
    return static_cast<double>(far) / static_cast<double>(total);
  };
  const double bin_slop = 0.01;
  EXPECT_NEAR(far_side("hist_tD_ground.csv", true), rep.summary["raw"]["p0"]["value"].get<double>(), bin_slop);
  EXPECT_NEAR(far_side("hist_tD_excited.csv", false), rep.summary["raw"]["p1"]["value"].get<double>(), bin_slop);
}

TEST(Experiments, SweepTableMatchesSummary) {
  const auto rep = qrl::run_experiment("power-sweep", small(1500));
  const auto rows = csv_rows(artifact(rep, "sweep.csv").content);
  ASSERT_EQ(rows.size(), 2u);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& pt = rep.summary["points"][i];
    EXPECT_EQ(std::stod(rows[i][0]), pt["settings"]["nbar"].get<double>());
    EXPECT_EQ(std::stod(rows[i][2]), pt["f_10ns"]["value"].get<double>());
    EXPECT_EQ(std::stod(rows[i][6]), pt["f_integrated"]["value"].get<double>());
  }
}

TEST(Experiments, BudgetClosesAndTableMatches) {
  const auto rep = qrl::run_experiment("budget", small());
  double sum = 0.0;
  for (const auto& [k, v] : rep.summary["entries"].items()) sum += v["value"].get<double>();
  EXPECT_NEAR(sum, rep.summary["total_loss"]["value"].get<double>(), 1e-12);
  EXPECT_EQ(rep.summary["entries"].size(), 6u);
  const auto rows = csv_rows(artifact(rep, "budget.csv").content);
  ASSERT_EQ(rows.size(), 7u);
  EXPECT_EQ(rows[0][0], "t1_decay");
  EXPECT_EQ(std::stod(rows[5][1]), rep.summary["entries"]["remaining"]["value"].get<double>());
}

TEST(Experiments, AnalyzeImportedMatchesSimulated) {
  const auto p = small(2000);
  std::vector<qrl::ExperimentRecord> captured;
  const auto sim = qrl::run_experiment("purify", p, [&](const auto& recs) { captured = recs; });
  ASSERT_EQ(captured.size(), 4000u);
  const fs::path f = fs::temp_directory_path() / "qrl_analyze_roundtrip.bin";
  qrl::export_traces(captured, f, qrl::TraceFormat::kPackedBinary);
  const auto ana = qrl::analyze_records("purify", qrl::import_traces(f), p);
  fs::remove(f);
  // Imported records carry no truth, so the truth audit is absent; the rest agrees.
  auto s = sim.summary;
  s.erase("discarded_with_true_jump");
  EXPECT_EQ(s.dump(), ana.summary.dump());
}

TEST(Experiments, AnalyzeRejectsSimulationOnlyExperiments) {
  EXPECT_THROW(qrl::analyze_records("budget", {}, small()), qrl::UnknownExperiment);
  EXPECT_THROW(qrl::analyze_records("nope", {}, small()), qrl::UnknownExperiment);
}

TEST(Experiments, WriteReportCreatesFiles) {
  const fs::path dir = fs::temp_directory_path() / "qrl_write_report";
  fs::remove_all(dir);
  const auto rep = qrl::run_experiment("reset", small(1000));
  qrl::write_report(rep, dir);
  EXPECT_TRUE(fs::exists(dir / "report.json"));
  EXPECT_TRUE(fs::exists(dir / "reset.csv"));
  std::ifstream in(dir / "report.json");
  const auto j = qrl::Json::parse(in);
  EXPECT_EQ(j["experiment"], "reset");
  fs::remove_all(dir);
}
