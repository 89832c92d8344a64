#ifndef QRL_CONFIG_HPP
#define QRL_CONFIG_HPP

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "qrl/model.hpp"
#include "qrl/trajectory.hpp"

namespace qrl {

/// Analysis knobs shared by the named experiments.
struct AnalysisOptions {
  std::size_t threshold_bins = 1000;
  std::size_t hist_bins = 120;
  // Total Schmitt-trigger width in units of the single-bin noise sigma.
  double hysteresis_sigma = 6.0;
  // Dwells shorter than this are dropped before the KS test (ns).
  double ks_dead_time = 200.0;
  std::size_t filter_grid_points = 24;

  bool operator==(const AnalysisOptions&) const = default;
};

struct SweepOptions {
  std::vector<double> nbar = {1.0, 3.7, 10.0, 14.6, 37.8, 100.0, 400.0};
  bool operator==(const SweepOptions&) const = default;
};

/// Long continuously-driven records for jump statistics.
struct JumpOptions {
  std::size_t n_records = 200;
  double duration_us = 200.0;
  bool operator==(const JumpOptions&) const = default;
};

struct SimParams {
  QubitParams qubit;
  ReadoutParams readout;
  SequenceConfig sequence;
  std::size_t n_traces = 100000;
  std::uint64_t master_seed = 20120501;
  std::size_t workers = 0;
  AnalysisOptions analysis;
  SweepOptions sweep;
  JumpOptions jumps;

  PulseSequence pulse_sequence() const { return make_sequence(sequence, readout.sample_dt); }

  void validate() const {
    qubit.validate();
    readout.validate();
    (void)pulse_sequence();
    if (n_traces < 1) throw std::invalid_argument("run.n_traces must be >= 1");
  }

  bool operator==(const SimParams&) const = default;
};

/// Config problem anchored to a line of the input (0 when not line-specific).
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::size_t line, std::string key, const std::string& message)
      : std::runtime_error(format(line, key, message)), line_(line), key_(std::move(key)) {}

  std::size_t line() const { return line_; }
  const std::string& key() const { return key_; }

 private:
  static std::string format(std::size_t line, const std::string& key, const std::string& message) {
    std::string out = "config";
    if (line > 0) out += " line " + std::to_string(line);
    if (!key.empty()) out += " [" + key + "]";
    return out + ": " + message;
  }

  std::size_t line_;
  std::string key_;
};

namespace config_detail {

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_double(std::string_view text) {
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw std::invalid_argument("malformed number '" + std::string(text) + "'");
  }
  return v;
}

inline std::uint64_t parse_u64(std::string_view text) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw std::invalid_argument("malformed non-negative integer '" + std::string(text) + "'");
  }
  return v;
}

inline bool parse_bool(std::string_view text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw std::invalid_argument("malformed boolean '" + std::string(text) + "'");
}

struct Key {
  std::string name;
  std::string doc;
  std::function<void(SimParams&, std::string_view)> set;
  std::function<std::string(const SimParams&)> get;
  bool required = false;
};

template <typename Member>
Key number(std::string name, std::string doc, Member member) {
  return {std::move(name), std::move(doc),
          [member](SimParams& p, std::string_view v) { member(p) = parse_double(v); },
          [member](const SimParams& p) { return format_double(member(p)); }};
}

template <typename Member>
Key count(std::string name, std::string doc, Member member) {
  return {std::move(name), std::move(doc),
          [member](SimParams& p, std::string_view v) { member(p) = parse_u64(v); },
          [member](const SimParams& p) { return std::to_string(member(p)); }};
}

template <typename Member>
Key flag(std::string name, std::string doc, Member member) {
  return {std::move(name), std::move(doc),
          [member](SimParams& p, std::string_view v) { member(p) = parse_bool(v); },
          [member](const SimParams& p) { return member(p) ? "true" : "false"; }};
}

inline const std::vector<Key>& keys() {
  static const std::vector<Key> table = [] {
    std::vector<Key> k;
    k.push_back(number("qubit.t1_idle", "intrinsic relaxation time T1 (us)", [](auto& p) -> auto& { return p.qubit.t1_idle; }));
    k.push_back(number("qubit.f01", "qubit transition frequency (GHz)", [](auto& p) -> auto& { return p.qubit.f01; }));
    k.push_back(number("qubit.t_eff", "effective bath temperature (mK)", [](auto& p) -> auto& { return p.qubit.t_eff; }));
    k.push_back(number("qubit.gamma_up_readout", "readout-induced upward rate (1/us)", [](auto& p) -> auto& { return p.qubit.gamma_up_readout; }));
    k.push_back(number("qubit.pi_pulse_error", "probability a pi pulse fails to invert", [](auto& p) -> auto& { return p.qubit.pi_pulse_error; }));

    Key nbar = number("readout.nbar", "mean cavity photon number (required)", [](auto& p) -> auto& { return p.readout.nbar; });
    nbar.required = true;
    k.push_back(std::move(nbar));
    k.push_back(number("readout.sample_dt", "digitizer bin (ns)", [](auto& p) -> auto& { return p.readout.sample_dt; }));
    k.push_back(number("readout.system_bandwidth", "single-pole bandwidth of the readout chain (MHz)", [](auto& p) -> auto& { return p.readout.system_bandwidth; }));
    k.push_back(number("readout.pointer_separation", "distance between pointer levels", [](auto& p) -> auto& { return p.readout.pointer_separation; }));
    k.push_back(number("readout.snr_calibration", "a in SNR = a*sqrt(nbar)", [](auto& p) -> auto& { return p.readout.snr_calibration; }));
    k.push_back(number("readout.ringup_start", "pointer response delay after drive turn-on (ns)", [](auto& p) -> auto& { return p.readout.ringup_start; }));
    k.push_back(number("readout.equilibration_time", "settling time skipped before jump detection (ns)", [](auto& p) -> auto& { return p.readout.equilibration_time; }));
    k.push_back(number("readout.backaction_knee", "photon number above which T1 degrades", [](auto& p) -> auto& { return p.readout.backaction_knee; }));
    k.push_back(number("readout.backaction_exponent", "power of the backaction law", [](auto& p) -> auto& { return p.readout.backaction_exponent; }));
    k.push_back(flag("readout.noiseless", "disable amplifier noise", [](auto& p) -> auto& { return p.readout.noiseless; }));

    k.push_back(flag("sequence.herald_enabled", "insert a herald readout before preparation", [](auto& p) -> auto& { return p.sequence.herald_enabled; }));
    k.push_back(number("sequence.herald_length", "herald pulse length (ns)", [](auto& p) -> auto& { return p.sequence.herald_length; }));
    k.push_back(number("sequence.herald_sample_offset", "t_S after herald turn-on (ns)", [](auto& p) -> auto& { return p.sequence.herald_sample_offset; }));
    k.push_back(number("sequence.prep_gap", "herald end to readout start; pi pulse at its end (ns)", [](auto& p) -> auto& { return p.sequence.prep_gap; }));
    k.push_back(number("sequence.readout_length", "main readout length (ns)", [](auto& p) -> auto& { return p.sequence.readout_length; }));
    k.push_back(number("sequence.t_D_offset", "t_D after readout start (ns)", [](auto& p) -> auto& { return p.sequence.t_D_offset; }));
    k.push_back(number("sequence.t_A_offset", "t_A after readout start (ns)", [](auto& p) -> auto& { return p.sequence.t_A_offset; }));
    k.push_back(number("sequence.ab_spacing", "t_B - t_A (ns)", [](auto& p) -> auto& { return p.sequence.ab_spacing; }));

    k.push_back(count("run.n_traces", "records per prepared label", [](auto& p) -> auto& { return p.n_traces; }));
    k.push_back(count("run.master_seed", "64-bit master seed", [](auto& p) -> auto& { return p.master_seed; }));
    k.push_back(count("run.workers", "worker threads, 0 = all cores", [](auto& p) -> auto& { return p.workers; }));

    k.push_back(count("analysis.threshold_bins", "histogram bins for threshold optimisation", [](auto& p) -> auto& { return p.analysis.threshold_bins; }));
    k.push_back(count("analysis.hist_bins", "histogram bins for exported distributions", [](auto& p) -> auto& { return p.analysis.hist_bins; }));
    k.push_back(number("analysis.hysteresis_sigma", "jump detector width in noise sigmas", [](auto& p) -> auto& { return p.analysis.hysteresis_sigma; }));
    k.push_back(number("analysis.ks_dead_time", "dwells shorter than this are left out of the KS test (ns)", [](auto& p) -> auto& { return p.analysis.ks_dead_time; }));
    k.push_back(count("analysis.filter_grid_points", "grid points of the filter time-constant search", [](auto& p) -> auto& { return p.analysis.filter_grid_points; }));

    k.push_back(Key{"sweep.nbar", "comma-separated photon numbers for power-sweep",
                    [](SimParams& p, std::string_view v) {
                      std::vector<double> out;
                      std::size_t pos = 0;
                      while (pos <= v.size()) {
                        const auto comma = v.find(',', pos);
                        const auto item = trim(v.substr(pos, comma == std::string_view::npos ? v.npos : comma - pos));
                        if (item.empty()) throw std::invalid_argument("empty list item");
                        out.push_back(parse_double(item));
                        if (comma == std::string_view::npos) break;
                        pos = comma + 1;
                      }
                      p.sweep.nbar = std::move(out);
                    },
                    [](const SimParams& p) {
                      std::string s;
                      for (std::size_t i = 0; i < p.sweep.nbar.size(); ++i) {
                        if (i) s += ", ";
                        s += format_double(p.sweep.nbar[i]);
                      }
                      return s;
                    }});
    k.push_back(count("jumps.n_records", "long records for jump statistics", [](auto& p) -> auto& { return p.jumps.n_records; }));
    k.push_back(number("jumps.duration_us", "length of each long record (us)", [](auto& p) -> auto& { return p.jumps.duration_us; }));
    return k;
  }();
  return table;
}

}  // namespace config_detail

/// Documentation of every accepted key with its default, one per line.
inline std::string config_reference() {
  const SimParams defaults;
  std::ostringstream out;
  for (const auto& k : config_detail::keys()) {
    out << k.name << " = " << k.get(defaults) << "    # " << k.doc << '\n';
  }
  return out.str();
}

/// Parses `key = value` lines; '#' starts a comment. Unknown keys, repeated
/// keys, malformed values and inconsistent sequence timing are rejected.
inline SimParams parse_config(std::string_view text) {
  using namespace config_detail;
  SimParams p;
  std::map<std::string, std::size_t, std::less<>> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto eol = text.find('\n', pos);
    std::string_view line = text.substr(pos, eol == std::string_view::npos ? text.npos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(line_no, "", "expected 'key = value'");
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));
    const Key* match = nullptr;
    for (const auto& k : keys()) {
      if (k.name == key) match = &k;
    }
    if (!match) throw ConfigError(line_no, key, "unknown key");
    if (seen.count(key)) throw ConfigError(line_no, key, "key given twice");
    if (value.empty()) throw ConfigError(line_no, key, "missing value");
    try {
      match->set(p, value);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(line_no, key, e.what());
    }
    seen.emplace(key, line_no);
  }
  for (const auto& k : keys()) {
    if (k.required && !seen.count(k.name)) throw ConfigError(0, k.name, "missing required key");
  }
  auto line_of = [&](std::string_view prefix) -> std::size_t {
    for (const auto& [k, l] : seen) {
      if (std::string_view(k).starts_with(prefix)) return l;
    }
    return 0;
  };
  try {
    p.qubit.validate();
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    const std::string key = msg.substr(0, msg.find(' '));
    throw ConfigError(seen.count(key) ? seen.find(key)->second : 0, key, msg);
  }
  try {
    p.readout.validate();
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    const std::string key = msg.substr(0, msg.find(' '));
    throw ConfigError(seen.count(key) ? seen.find(key)->second : 0, key, msg);
  }
  try {
    (void)p.pulse_sequence();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(line_of("sequence."), "sequence", e.what());
  }
  if (p.n_traces < 1) throw ConfigError(line_of("run.n_traces"), "run.n_traces", "must be >= 1");
  if (p.analysis.threshold_bins < 2 || p.analysis.hist_bins < 2) {
    throw ConfigError(line_of("analysis."), "analysis", "histograms need at least 2 bins");
  }
  if (p.sweep.nbar.empty()) throw ConfigError(line_of("sweep.nbar"), "sweep.nbar", "empty sweep");
  for (double n : p.sweep.nbar) {
    if (!(n > 0.0)) throw ConfigError(line_of("sweep.nbar"), "sweep.nbar", "photon numbers must be > 0");
  }
  if (!(p.jumps.duration_us > 0.0) || p.jumps.n_records < 1) {
    throw ConfigError(line_of("jumps."), "jumps", "need at least one record of positive duration");
  }
  return p;
}

/// Every key, in table order, so that parse_config(serialize_config(p)) == p.
inline std::string serialize_config(const SimParams& p) {
  std::string out;
  for (const auto& k : config_detail::keys()) out += k.name + " = " + k.get(p) + '\n';
  return out;
}

}  // namespace qrl

#endif  // QRL_CONFIG_HPP
