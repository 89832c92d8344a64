// qrl: run named readout experiments and analyse exported traces.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "qrl/qrl.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kConfigError = 2;
constexpr int kIoError = 3;

const char* const kCsvHelp = R"(
Artifacts written to --out (report.json lists the ones produced by a run):
  hist_tD_{ground,excited}.csv          voltage,count      single-bin t_D histogram
  raw_tD_*.csv, heralded_tD_*.csv       voltage,count      herald: before/after selection
  pure_tD_{ground,excited}.csv          voltage,count      purify: survivors by agreed state
  marker_values.csv                     label,v_S,v_A,v_B,v_D
                                        label 0=ground 1=excited prep; v_S empty without herald
  example_traces.csv                    time_ns,ground,excited[,excited_jump]
  sweep.csv                             nbar,snr,f_10ns,sigma_f_10ns,p0,p1,f_int,sigma_f_int,
                                        tau_f_ns,t1_readout_us,n_per_label
  budget.csv                            entry,loss,sigma   (last row total_loss)
  reset.csv                             quantity,value,sigma,n
  dwells.csv                            state,duration_ns  complete dwells, state 0/1
  jump_trace.csv                        time_ns,voltage,detected_state
Trace export (--export-traces): traces.bin (packed binary) or traces.csv
  (# sample_dt_ns=<dt> line, then label,t_S,t_A,t_B,t_D,s0,s1,...).
  --export-truth adds <traces>.truth.csv: index,initial,duration,transitions
  with transitions as space-separated time_ns:state pairs.
Exit codes: 0 ok, 2 config error, 3 IO error, 1 other failure.
)";

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw qrl::IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw qrl::IoError("read failed: " + path);
  return ss.str();
}

qrl::SimParams load_params(const std::optional<std::string>& path) {
  if (!path) return qrl::SimParams{};
  const std::string text = read_text(*path);
  try {
    return qrl::parse_config(text);
  } catch (const qrl::ConfigError& e) {
    std::cerr << *path << ": ";
    throw;
  }
}

void print_summary(const qrl::ExperimentReport& rep, const std::filesystem::path& out) {
  std::cout << rep.summary.dump(2) << '\n';
  std::cerr << "wrote " << (out / "report.json").string() << " and " << rep.artifacts.size() << " artifact(s)\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Single-shot dispersive readout simulator and analysis"};
  app.footer(kCsvHelp);
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "simulate and analyse a named experiment");
  std::string experiment;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::string out_dir;
  bool export_truth = false;
  bool export_traces = false;
  std::string trace_format = "bin";
  run->add_option("experiment", experiment, qrl::names_list())->required();
  run->add_option("--config", config_path, "config file (key = value lines; see `qrl config`)")->required();
  run->add_option("--seed", seed, "override run.master_seed");
  run->add_option("--workers", workers, "override run.workers (0 = all cores)");
  run->add_option("--out", out_dir, "output directory (default: qrl-out/<experiment>)");
  run->add_flag("--export-traces", export_traces, "also write the simulated traces");
  run->add_flag("--export-truth", export_truth, "write traces plus the hidden-truth sidecar");
  run->add_option("--trace-format", trace_format, "bin or csv")->check(CLI::IsMember({"bin", "csv"}));

  auto* analyze = app.add_subcommand("analyze", "analyse previously exported traces");
  std::string traces_path;
  std::string analyze_experiment;
  std::optional<std::string> analyze_config;
  std::string analyze_out;
  analyze->add_option("--traces", traces_path, "trace file (.bin packed binary, .csv text)")->required();
  analyze->add_option("--experiment", analyze_experiment, "hist, herald, purify or jumps")->required();
  analyze->add_option("--config", analyze_config, "analysis options and readout parameters");
  analyze->add_option("--out", analyze_out, "output directory (default: qrl-out/analyze-<experiment>)");

  app.add_subcommand("config", "print every config key with its default");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (app.got_subcommand("config")) {
      std::cout << qrl::config_reference();
      return kOk;
    }
    if (run->parsed()) {
      qrl::SimParams p = load_params(config_path);
      if (seed) p.master_seed = *seed;
      if (workers) p.workers = *workers;
      const std::filesystem::path out = out_dir.empty() ? std::filesystem::path("qrl-out") / experiment : std::filesystem::path(out_dir);
      qrl::RecordSink sink;
      if (export_traces || export_truth) {
        sink = [&](const std::vector<qrl::ExperimentRecord>& records) {
          std::filesystem::create_directories(out);
          const bool csv = trace_format == "csv";
          qrl::export_traces(records, out / (csv ? "traces.csv" : "traces.bin"),
                             csv ? qrl::TraceFormat::kCsv : qrl::TraceFormat::kPackedBinary, export_truth);
        };
      }
      const qrl::ExperimentReport rep = qrl::run_experiment(experiment, p, sink);
      qrl::write_report(rep, out);
      print_summary(rep, out);
      return kOk;
    }
    const qrl::SimParams p = load_params(analyze_config);
    auto records = qrl::import_traces(traces_path);
    const std::filesystem::path out =
        analyze_out.empty() ? std::filesystem::path("qrl-out") / ("analyze-" + analyze_experiment) : std::filesystem::path(analyze_out);
    const qrl::ExperimentReport rep = qrl::analyze_records(analyze_experiment, std::move(records), p);
    qrl::write_report(rep, out);
    print_summary(rep, out);
    return kOk;
  } catch (const qrl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const qrl::UnknownExperiment& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const qrl::IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return kIoError;
  } catch (const qrl::FormatError& e) {
    std::cerr << "format error: " << e.what() << '\n';
    return kIoError;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return kIoError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
}
