#ifndef QRL_EXPERIMENTS_HPP
#define QRL_EXPERIMENTS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "qrl/budget.hpp"
#include "qrl/config.hpp"
#include "qrl/discrimination.hpp"
#include "qrl/filter.hpp"
#include "qrl/jumps.hpp"
#include "qrl/reset.hpp"
#include "qrl/selection.hpp"
#include "qrl/trace_io.hpp"
#include "qrl/trajectory.hpp"

namespace qrl {

using Json = nlohmann::ordered_json;

/// A reported number: estimate, one-sigma uncertainty and the sample count
/// behind it. Exact quantities carry sigma 0.
struct Stat {
  double value = 0.0;
  double sigma = 0.0;
  std::size_t n = 0;
};

inline Json to_json(const Stat& s) { return Json{{"value", s.value}, {"sigma", s.sigma}, {"n", s.n}}; }

inline Stat binomial(std::size_t hits, std::size_t n) {
  if (n == 0) return {};
  const double p = static_cast<double>(hits) / static_cast<double>(n);
  return {p, std::sqrt(p * (1.0 - p) / static_cast<double>(n)), n};
}

struct Artifact {
  std::string file;
  std::string columns;
  std::string content;
};

struct ExperimentReport {
  std::string experiment;
  Json params = Json::object();
  Json summary = Json::object();
  std::vector<Artifact> artifacts;

  Json to_json() const {
    Json files = Json::array();
    for (const auto& a : artifacts) files.push_back({{"file", a.file}, {"columns", a.columns}});
    return Json{{"experiment", experiment}, {"params", params}, {"summary", summary}, {"artifacts", files}};
  }
};

class UnknownExperiment : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Prepared-label ensembles sharing one pulse sequence.
struct LabelledRecords {
  std::vector<ExperimentRecord> ground;
  std::vector<ExperimentRecord> excited;
};

inline LabelledRecords split_by_label(std::vector<ExperimentRecord> records) {
  LabelledRecords out;
  for (auto& r : records) {
    (r.prepared_label == QubitState::kGround ? out.ground : out.excited).push_back(std::move(r));
  }
  return out;
}

namespace exp_detail {

template <typename T>
std::string num(T v) {
  return io_detail::shortest(v);
}

// Seeds of the independent ensembles an experiment may draw. The labelled
// ensembles reuse the same seeds at every sweep point.
enum class EnsembleTag : std::uint64_t { kGround = 1, kExcited = 2, kReset = 3, kJumps = 4 };

inline std::uint64_t ensemble_seed(std::uint64_t master, EnsembleTag tag) {
  return splitmix64(master ^ (static_cast<std::uint64_t>(tag) * 0xa0761d6478bd642fULL));
}

inline Json params_json(const SimParams& p) {
  Json out = Json::object();
  const std::string text = serialize_config(p);
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto eol = text.find('\n', pos);
    const std::string line = text.substr(pos, eol - pos);
    pos = eol + 1;
    const auto eq = line.find(" = ");
    out[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return out;
}

inline LabelledRecords simulate_labelled(const SimParams& p, const PulseSequence& seq) {
  LabelledRecords out;
  EnsembleSpec spec{p.qubit, p.readout, seq, QubitState::kGround, PrepPolicy::kByLabel, {}};
  out.ground = simulate_ensemble(spec, p.n_traces, ensemble_seed(p.master_seed, EnsembleTag::kGround), p.workers);
  spec.label = QubitState::kExcited;
  out.excited = simulate_ensemble(spec, p.n_traces, ensemble_seed(p.master_seed, EnsembleTag::kExcited), p.workers);
  return out;
}

inline PulseSequence jump_sequence(const SimParams& p) {
  SequenceConfig cfg = p.sequence;
  cfg.herald_enabled = false;
  cfg.readout_length = std::round(p.jumps.duration_us * 1e3 / p.readout.sample_dt) * p.readout.sample_dt;
  return make_sequence(cfg, p.readout.sample_dt);
}

/// Two-column histogram over a shared range.
inline std::string histogram_csv(const Histogram& h) {
  std::string out = "voltage,count\n";
  for (std::size_t k = 0; k < h.bin_count(); ++k) {
    out += num(0.5 * (h.bin_edges[k] + h.bin_edges[k + 1])) + ',' + std::to_string(h.counts[k]) + '\n';
  }
  return out;
}

inline std::pair<double, double> pooled_range(const std::vector<double>& a, const std::vector<double>& b) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto* vs : {&a, &b}) {
    for (double v : *vs) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (!(lo < hi)) return {lo - 0.5, lo + 0.5};
  // Nudge the top edge so the maximum lands inside the last bin.
  return {lo, std::nextafter(hi, std::numeric_limits<double>::infinity())};
}

inline void add_histograms(ExperimentReport& rep, const std::string& stem, const std::vector<double>& g,
                           const std::vector<double>& e, std::size_t bins) {
  const auto [lo, hi] = pooled_range(g, e);
  rep.artifacts.push_back({stem + "_ground.csv", "voltage,count",
                           histogram_csv(build_histogram(g, bins, lo, hi))});
  rep.artifacts.push_back({stem + "_excited.csv", "voltage,count",
                           histogram_csv(build_histogram(e, bins, lo, hi))});
}

inline double bin_width(const std::vector<double>& g, const std::vector<double>& e, std::size_t bins) {
  const auto [lo, hi] = pooled_range(g, e);
  return (hi - lo) / static_cast<double>(bins);
}

inline Json fidelity_json(const FidelityResult& f) {
  return Json{{"fidelity", to_json({f.fidelity, f.sigma_fidelity, f.n_ground + f.n_excited})},
              {"p0", to_json({f.p0, f.sigma_p0, f.n_ground})},
              {"p1", to_json({f.p1, f.sigma_p1, f.n_excited})}};
}

inline Json discriminator_json(const Discriminator& d, double resolution, std::size_t n) {
  return Json{{"threshold", to_json({d.threshold, resolution, n})},
              {"polarity", d.polarity == Polarity::kExcitedAbove ? "excited_above" : "excited_below"}};
}

/// Per-record single-bin values at the markers; the fidelity summaries are
/// recomputable from this table and the reported thresholds.
inline Artifact marker_table(const LabelledRecords& ens, const std::string& file) {
  std::string out = "label,v_S,v_A,v_B,v_D\n";
  for (const auto* set : {&ens.ground, &ens.excited}) {
    for (const auto& r : *set) {
      out += std::to_string(static_cast<int>(r.prepared_label)) + ',';
      if (r.sequence.has_herald()) out += num(static_cast<float>(extract_value(r, r.sequence.t_S)));
      for (double t : {r.sequence.t_A, r.sequence.t_B, r.sequence.t_D}) out += ',' + num(static_cast<float>(extract_value(r, t)));
      out += '\n';
    }
  }
  return {file, "label,v_S,v_A,v_B,v_D", std::move(out)};
}

struct RawReadout {
  LabelledValues at_d;
  ScoredDiscrimination raw;
  double resolution = 0.0;
};

inline RawReadout raw_readout(const LabelledRecords& ens, const SimParams& p) {
  RawReadout out;
  out.at_d.ground = values_at(ens.ground, Marker::kD).ground;
  out.at_d.excited = values_at(ens.excited, Marker::kD).excited;
  out.raw = best_fidelity(out.at_d.ground, out.at_d.excited, p.analysis.threshold_bins);
  out.resolution = bin_width(out.at_d.ground, out.at_d.excited, p.analysis.threshold_bins);
  return out;
}

}  // namespace exp_detail

// ---------------------------------------------------------------------------
// Analyses. Each works on simulated or imported records alike; anything that
// needs hidden truth is reported only when truth is present.
// ---------------------------------------------------------------------------

inline ExperimentReport analyze_hist(const LabelledRecords& ens, const SimParams& p) {
  using namespace exp_detail;
  ExperimentReport rep;
  rep.experiment = "hist";
  const RawReadout rr = raw_readout(ens, p);
  const std::size_t n = rr.at_d.ground.size() + rr.at_d.excited.size();
  rep.summary["raw"] = fidelity_json(rr.raw.result);
  rep.summary["raw"]["discriminator"] = discriminator_json(rr.raw.discriminator, rr.resolution, n);

  // Mass of each histogram on the far side of the threshold.
  const auto [lo, hi] = pooled_range(rr.at_d.ground, rr.at_d.excited);
  const Histogram hg = build_histogram(rr.at_d.ground, p.analysis.hist_bins, lo, hi);
  const Histogram he = build_histogram(rr.at_d.excited, p.analysis.hist_bins, lo, hi);
  std::size_t minor_g = 0;
  std::size_t minor_e = 0;
  for (std::size_t k = 0; k < hg.bin_count(); ++k) {
    const double centre = 0.5 * (hg.bin_edges[k] + hg.bin_edges[k + 1]);
    const bool excited_side = rr.raw.discriminator.classify(centre) == QubitState::kExcited;
    (excited_side ? minor_g : minor_e) += excited_side ? hg.counts[k] : he.counts[k];
  }
  rep.summary["minor_peak_mass"] = {{"ground", to_json(binomial(minor_g, hg.total))},
                                    {"excited", to_json(binomial(minor_e, he.total))}};
  add_histograms(rep, "hist_tD", rr.at_d.ground, rr.at_d.excited, p.analysis.hist_bins);
  rep.artifacts.push_back(marker_table(ens, "marker_values.csv"));

  // Example traces: a ground shot, an excited shot, and an excited shot that
  // decays mid-readout (the latter only when truth is known).
  if (!ens.ground.empty() && !ens.excited.empty()) {
    const ExperimentRecord* g = &ens.ground.front();
    const ExperimentRecord* e = &ens.excited.front();
    const ExperimentRecord* jump = nullptr;
    bool have_clean = false;
    for (const auto& r : ens.excited) {
      if (!r.truth) break;
      const Window w = r.trace.readout_window;
      if (r.truth->state_at(w.start) != QubitState::kExcited) continue;
      if (!have_clean && !r.truth->has_transition_in(w.start, w.end)) {
        e = &r;
        have_clean = true;
      }
      if (!jump && r.truth->has_transition_in(w.start + 200.0, w.end - 200.0)) jump = &r;
      if (have_clean && jump) break;
    }
    std::string out = jump ? "time_ns,ground,excited,excited_jump\n" : "time_ns,ground,excited\n";
    for (std::size_t i = 0; i < g->trace.samples.size(); ++i) {
      out += num(g->trace.time_of(i)) + ',' + num(g->trace.samples[i]) + ',' + num(e->trace.samples[i]);
      if (jump) out += ',' + num(jump->trace.samples[i]);
      out += '\n';
    }
    rep.artifacts.push_back({"example_traces.csv", jump ? "time_ns,ground,excited,excited_jump"
                                                        : "time_ns,ground,excited",
                             std::move(out)});
  }
  return rep;
}

inline ExperimentReport analyze_herald(const LabelledRecords& ens, const SimParams& p) {
  using namespace exp_detail;
  ExperimentReport rep;
  rep.experiment = "herald";
  const RawReadout rr = raw_readout(ens, p);
  const Discriminator& disc = rr.raw.discriminator;
  const auto kept_g = herald_select(ens.ground, disc);
  const auto kept_e = herald_select(ens.excited, disc);
  if (kept_g.empty() || kept_e.empty()) throw std::runtime_error("herald: no record survived the herald");
  const auto sel_g = values_at(ens.ground, Marker::kD, &kept_g).ground;
  const auto sel_e = values_at(ens.excited, Marker::kD, &kept_e).excited;
  const ScoredDiscrimination heralded = best_fidelity(sel_g, sel_e, p.analysis.threshold_bins);

  const std::size_t n = rr.at_d.ground.size() + rr.at_d.excited.size();
  rep.summary["raw"] = fidelity_json(rr.raw.result);
  rep.summary["raw"]["discriminator"] = discriminator_json(disc, rr.resolution, n);
  rep.summary["heralded"] = fidelity_json(heralded.result);
  rep.summary["heralded"]["discriminator"] =
      discriminator_json(heralded.discriminator, bin_width(sel_g, sel_e, p.analysis.threshold_bins),
                         sel_g.size() + sel_e.size());
  // The heralded set is a subset of the raw one; adding the errors in
  // quadrature overstates the uncertainty of the difference.
  rep.summary["improvement"] = to_json({heralded.result.fidelity - rr.raw.result.fidelity,
                                        std::hypot(heralded.result.sigma_fidelity, rr.raw.result.sigma_fidelity),
                                        n});
  rep.summary["retained_fraction"] = {{"ground", to_json(binomial(kept_g.size(), ens.ground.size()))},
                                      {"excited", to_json(binomial(kept_e.size(), ens.excited.size()))}};
  add_histograms(rep, "raw_tD", rr.at_d.ground, rr.at_d.excited, p.analysis.hist_bins);
  add_histograms(rep, "heralded_tD", sel_g, sel_e, p.analysis.hist_bins);
  rep.artifacts.push_back(marker_table(ens, "marker_values.csv"));
  return rep;
}

inline ExperimentReport analyze_purify(const LabelledRecords& ens, const SimParams& p) {
  using namespace exp_detail;
  ExperimentReport rep;
  rep.experiment = "purify";
  const RawReadout rr = raw_readout(ens, p);
  const Discriminator& disc = rr.raw.discriminator;
  const PurifyResult pg = two_point_purify(ens.ground, disc);
  const PurifyResult pe = two_point_purify(ens.excited, disc);

  std::vector<double> pure_g = pg.pure_ground;
  pure_g.insert(pure_g.end(), pe.pure_ground.begin(), pe.pure_ground.end());
  std::vector<double> pure_e = pg.pure_excited;
  pure_e.insert(pure_e.end(), pe.pure_excited.begin(), pe.pure_excited.end());
  const std::size_t survivors = pg.survivors.size() + pe.survivors.size();
  if (pure_g.empty() || pure_e.empty()) throw std::runtime_error("purify: a pure distribution is empty");

  // Survivors are scored against their agreed reading with a threshold
  // re-optimized on the pure distributions.
  const ScoredDiscrimination pure = best_fidelity(pure_g, pure_e, p.analysis.threshold_bins);
  const std::size_t false_counts = pure.result.errors_ground + pure.result.errors_excited;

  const std::size_t n = ens.ground.size() + ens.excited.size();
  rep.summary["raw"] = fidelity_json(rr.raw.result);
  rep.summary["raw"]["discriminator"] = discriminator_json(disc, rr.resolution, n);
  rep.summary["retained_fraction"] = {{"ground", to_json(binomial(pg.survivors.size(), pg.examined))},
                                      {"excited", to_json(binomial(pe.survivors.size(), pe.examined))},
                                      {"all", to_json(binomial(survivors, n))}};
  rep.summary["pure"] = fidelity_json(pure.result);
  rep.summary["pure"]["discriminator"] = discriminator_json(
      pure.discriminator, bin_width(pure_g, pure_e, p.analysis.threshold_bins), survivors);
  rep.summary["false_counts"] = to_json({static_cast<double>(false_counts),
                                         std::sqrt(static_cast<double>(false_counts)), survivors});
  rep.summary["misclassification_rate"] = to_json(binomial(false_counts, survivors));
  rep.summary["misclassification_rate_raw_threshold"] =
      to_json(binomial(pg.misclassified + pe.misclassified, survivors));

  // Hidden-truth audit of the discarded records.
  std::size_t discarded = 0;
  std::size_t discarded_with_jump = 0;
  bool have_truth = true;
  for (const auto* set : {&ens.ground, &ens.excited}) {
    const PurifyResult& pr = set == &ens.ground ? pg : pe;
    std::vector<char> kept(set->size(), 0);
    for (const auto& s : pr.survivors) kept[s.index] = 1;
    for (std::size_t i = 0; i < set->size(); ++i) {
      const auto& r = (*set)[i];
      if (!r.truth) {
        have_truth = false;
        continue;
      }
      if (kept[i]) continue;
      ++discarded;
      discarded_with_jump += r.truth->has_transition_in(r.sequence.t_A, r.sequence.t_B);
    }
  }
  if (have_truth) rep.summary["discarded_with_true_jump"] = to_json(binomial(discarded_with_jump, discarded));

  add_histograms(rep, "pure_tD", pure_g, pure_e, p.analysis.hist_bins);
  rep.artifacts.push_back(marker_table(ens, "marker_values.csv"));
  return rep;
}

inline ExperimentReport analyze_jumps(const std::vector<ExperimentRecord>& records, const SimParams& p) {
  using namespace exp_detail;
  ExperimentReport rep;
  rep.experiment = "jumps";
  if (records.empty()) throw std::invalid_argument("jumps: no records");
  const Discriminator disc{0.0, Polarity::kExcitedAbove};
  const double sigma_bin = noise_sigma(p.readout);
  const double hysteresis = p.analysis.hysteresis_sigma * sigma_bin;
  const double settle = p.readout.equilibration_time;
  const RateEstimate est = extract_rates(records, disc, hysteresis, settle);
  const double dt = records.front().trace.sample_dt;

  auto channel = [](const RateChannel& c) {
    Json j = {{"exits", c.exits}, {"dwells", c.dwells}, {"exposure_us", to_json({c.exposure_us, 0.0, c.dwells})}};
    if (c.rate) {
      j["rate_per_us"] = to_json({*c.rate, c.sigma, c.dwells});
    } else {
      j["rate_per_us"] = nullptr;
    }
    j["upper_95_per_us"] = to_json({c.upper_95, 0.0, c.dwells});
    return j;
  };
  rep.summary["settings"] = {{"threshold", disc.threshold},
                             {"hysteresis", hysteresis},
                             {"settle_ns", settle},
                             {"ks_dead_time_ns", p.analysis.ks_dead_time},
                             {"records", records.size()}};
  rep.summary["gamma_up"] = channel(est.up);
  rep.summary["gamma_down"] = channel(est.down);
  if (est.t1_fit_us) {
    rep.summary["t1_fit_us"] = to_json({*est.t1_fit_us, est.sigma_t1_us, est.down.dwells});
  } else {
    rep.summary["t1_fit_us"] = nullptr;
  }
  const KsResult ks = ks_exponential(est.excited_dwells_ns, p.analysis.ks_dead_time, 0.0, dt);
  const double ks_rate = ks.rate_per_ns * 1e3;
  rep.summary["ks_excited_dwells"] = {
      {"statistic", to_json({ks.statistic, 0.0, ks.n})},
      {"p_value", to_json({ks.p_value, 0.0, ks.n})},
      {"rate_per_us", to_json({ks_rate, ks.n ? ks_rate / std::sqrt(static_cast<double>(ks.n)) : 0.0, ks.n})}};

  const bool have_truth = std::all_of(records.begin(), records.end(), [](const auto& r) { return r.truth.has_value(); });
  if (have_truth) {
    // Same estimator on the hidden paths, over the identical windows.
    RateEstimate truth;
    detail::DwellAccumulator acc;
    for (const auto& r : records) {
      const Window w{r.trace.readout_window.start + settle, r.trace.readout_window.end};
      if (w.empty()) continue;
      JumpTrack track{r.truth->state_at(w.start), {}};
      for (const Transition& tr : r.truth->transitions) {
        if (tr.time <= w.start || tr.time >= w.end) continue;
        track.events.push_back({tr.time, tr.state == QubitState::kExcited ? JumpDirection::kUp : JumpDirection::kDown});
      }
      acc.add(track, w, truth);
    }
    acc.finish(truth);
    rep.summary["truth"] = {{"gamma_up", channel(truth.up)}, {"gamma_down", channel(truth.down)}};
    const RatePair injected = effective_rates(p.qubit, p.readout, true);
    rep.summary["settings"]["injected"] = {{"gamma_up_per_us", injected.gamma_up},
                               {"gamma_down_per_us", injected.gamma_down},
                               {"t1_us", 1.0 / injected.gamma_down}};
  }

  std::string dw = "state,duration_ns\n";
  for (double d : est.ground_dwells_ns) dw += "0," + num(d) + '\n';
  for (double d : est.excited_dwells_ns) dw += "1," + num(d) + '\n';
  rep.artifacts.push_back({"dwells.csv", "state,duration_ns", std::move(dw)});

  // First 20 us of the first record with the detector's state assignment.
  const ExperimentRecord& r0 = records.front();
  const Window w0{r0.trace.readout_window.start + settle,
                  std::min(r0.trace.readout_window.end, r0.trace.readout_window.start + settle + 20000.0)};
  if (!w0.empty()) {
    const JumpTrack track = track_jumps(r0.trace, disc, hysteresis, w0);
    std::string tr = "time_ns,voltage,detected_state\n";
    QubitState s = track.initial;
    std::size_t next = 0;
    const BinRange bins = bins_in(r0.trace, w0);
    for (std::size_t k = 0; k < bins.count; ++k) {
      const std::size_t i = bins.first + k;
      const double t = r0.trace.time_of(i);
      while (next < track.events.size() && track.events[next].time <= t) {
        s = track.events[next].direction == JumpDirection::kUp ? QubitState::kExcited : QubitState::kGround;
        ++next;
      }
      tr += num(t) + ',' + num(r0.trace.samples[i]) + ',' + std::to_string(static_cast<int>(s)) + '\n';
    }
    rep.artifacts.push_back({"jump_trace.csv", "time_ns,voltage,detected_state", std::move(tr)});
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Simulation-only experiments
// ---------------------------------------------------------------------------

/// Integration window for the filtered readout: from t_D, once the cavity has
/// equilibrated, to the end of the readout.
inline Window integration_window(const PulseSequence& seq) { return {seq.t_D, seq.readout_window.end}; }

inline ExperimentReport run_power_sweep(const SimParams& p) {
  using namespace exp_detail;
  ExperimentReport rep;
  rep.experiment = "power-sweep";
  const PulseSequence seq = p.pulse_sequence();
  std::string csv =
      "nbar,snr,f_10ns,sigma_f_10ns,p0,p1,f_int,sigma_f_int,tau_f_ns,t1_readout_us,n_per_label\n";
  Json points = Json::array();
  for (double nbar : p.sweep.nbar) {
    SimParams q = p;
    q.readout.nbar = nbar;
    const LabelledRecords ens = simulate_labelled(q, seq);
    const RawReadout rr = raw_readout(ens, q);
    const double t1_readout_us = 1.0 / effective_rates(q.qubit, q.readout, true).gamma_down;
    FilterOptions fo;
    fo.grid_points = q.analysis.filter_grid_points;
    fo.threshold_bins = q.analysis.threshold_bins;
    fo.workers = q.workers;
    const FilterOptimum integ =
        optimize_filter_constant(ens.ground, ens.excited, integration_window(seq), t1_readout_us * 1e3, fo);
    const FidelityResult& f = rr.raw.result;
    const std::size_t n = f.n_ground + f.n_excited;
    points.push_back({{"settings", {{"nbar", nbar}, {"snr", pointer_snr(q.readout)}, {"t1_readout_us", t1_readout_us}}},
                      {"f_10ns", to_json({f.fidelity, f.sigma_fidelity, n})},
                      {"p0", to_json({f.p0, f.sigma_p0, f.n_ground})},
                      {"p1", to_json({f.p1, f.sigma_p1, f.n_excited})},
                      {"f_integrated", to_json({integ.result.fidelity, integ.result.sigma_fidelity, n})},
                      {"tau_f_ns", to_json({integ.tau_f, 0.0, n})}});
    csv += num(nbar) + ',' + num(pointer_snr(q.readout)) + ',' + num(f.fidelity) + ',' + num(f.sigma_fidelity) +
           ',' + num(f.p0) + ',' + num(f.p1) + ',' + num(integ.result.fidelity) + ',' +
           num(integ.result.sigma_fidelity) + ',' + num(integ.tau_f) + ',' + num(t1_readout_us) + ',' +
           std::to_string(p.n_traces) + '\n';
  }
  rep.summary["settings"] = {{"integration_window", {{"from", "t_D"}, {"to", "readout_end"}}}};
  rep.summary["points"] = std::move(points);
  rep.artifacts.push_back({"sweep.csv",
                           "nbar,snr,f_10ns,sigma_f_10ns,p0,p1,f_int,sigma_f_int,tau_f_ns,t1_readout_us,n_per_label",
                           std::move(csv)});
  return rep;
}

/// Decision window for the budget's rate entries: a transition later than
/// t_D - tau_sys ln 2 cannot move the single-bin t_D sample past the
/// midpoint between the pointer levels.
inline double budget_window_ns(const SimParams& p) {
  return p.sequence.t_D_offset - p.readout.tau_sys() * std::log(2.0);
}

inline std::vector<ExperimentRecord> simulate_jump_records(const SimParams& p) {
  EnsembleSpec spec{p.qubit, p.readout, exp_detail::jump_sequence(p), QubitState::kGround, PrepPolicy::kByLabel, {}};
  return simulate_ensemble(spec, p.jumps.n_records,
                           exp_detail::ensemble_seed(p.master_seed, exp_detail::EnsembleTag::kJumps), p.workers);
}

inline ExperimentReport run_budget(const SimParams& p) {
  using namespace exp_detail;
  ExperimentReport rep;
  rep.experiment = "budget";
  const LabelledRecords ens = simulate_labelled(p, p.pulse_sequence());
  const ExperimentReport herald = analyze_herald(ens, p);
  const ExperimentReport purify = analyze_purify(ens, p);
  const ExperimentReport jumps = analyze_jumps(simulate_jump_records(p), p);

  auto measured = [](const Json& stat) { return Measured{stat["value"].get<double>(), stat["sigma"].get<double>()}; };
  auto rate = [&](const Json& ch, const char* name) {
    if (ch["rate_per_us"].is_null()) {
      throw std::runtime_error(std::string("budget: too few dwells to estimate ") + name);
    }
    return measured(ch["rate_per_us"]);
  };
  BudgetInputs in;
  in.raw_fidelity = measured(herald.summary["raw"]["fidelity"]);
  in.heralded_fidelity = measured(herald.summary["heralded"]["fidelity"]);
  in.gamma_up = rate(jumps.summary["gamma_up"], "gamma_up");
  in.gamma_down = rate(jumps.summary["gamma_down"], "gamma_down");
  in.purified_misclassification = measured(purify.summary["misclassification_rate"]);
  in.t_window_ns = budget_window_ns(p);
  in.t1_us = {p.qubit.t1_idle, 0.0};
  const FidelityBudget b = fidelity_budget(in);

  const std::size_t n = 2 * p.n_traces;
  Json entries = Json::object();
  std::string csv = "entry,loss,sigma\n";
  for (const auto& e : b.entries) {
    entries[std::string(e.name)] = to_json({e.loss, e.sigma, n});
    csv += std::string(e.name) + ',' + num(e.loss) + ',' + num(e.sigma) + '\n';
  }
  csv += "total_loss," + num(b.total_loss) + ',' + num(b.sigma_total) + '\n';
  rep.summary["entries"] = std::move(entries);
  rep.summary["total_loss"] = to_json({b.total_loss, b.sigma_total, n});
  rep.summary["settings"] = {
      {"t_window_ns", in.t_window_ns}, {"t1_us", p.qubit.t1_idle}, {"pi_pulse_error", p.qubit.pi_pulse_error}};
  rep.summary["inputs"] = {{"raw", herald.summary["raw"]},
                           {"heralded", herald.summary["heralded"]},
                           {"purified_misclassification", purify.summary["misclassification_rate"]},
                           {"gamma_up", jumps.summary["gamma_up"]},
                           {"gamma_down", jumps.summary["gamma_down"]}};
  rep.artifacts.push_back({"budget.csv", "entry,loss,sigma", std::move(csv)});
  return rep;
}

inline ExperimentReport run_reset(const SimParams& p) {
  using namespace exp_detail;
  ExperimentReport rep;
  rep.experiment = "reset";
  const PulseSequence seq = p.pulse_sequence();
  if (!seq.has_herald()) throw std::invalid_argument("reset: sequence.herald_enabled must be true");
  // Pointer levels sit symmetrically about zero, so the midpoint threshold
  // serves both the herald decision and the verification.
  const Discriminator disc{0.0, Polarity::kExcitedAbove};
  const ResetResult r =
      evaluate_reset(p.qubit, p.readout, seq, disc, p.n_traces, ensemble_seed(p.master_seed, EnsembleTag::kReset),
                     p.workers);
  const LabelledRecords ens = simulate_labelled(p, seq);
  const FidelityResult raw = fidelity(values_at(ens.ground, Marker::kD).ground,
                                      values_at(ens.excited, Marker::kD).excited, disc);
  rep.summary["reset_fidelity"] = to_json({r.fidelity, r.sigma, r.n_shots});
  rep.summary["pi_fired_fraction"] = to_json(binomial(
      static_cast<std::size_t>(std::llround(r.herald_excited_fraction * static_cast<double>(r.n_shots))), r.n_shots));
  rep.summary["true_ground_at_readout_start"] = to_json(binomial(
      static_cast<std::size_t>(std::llround(r.true_ground_fraction * static_cast<double>(r.n_shots))), r.n_shots));
  rep.summary["raw"] = fidelity_json(raw);
  rep.summary["settings"] = {{"threshold", 0.0}};
  rep.artifacts.push_back({"reset.csv", "quantity,value,sigma,n",
                           "quantity,value,sigma,n\nreset_fidelity," + num(r.fidelity) + ',' + num(r.sigma) + ',' +
                               std::to_string(r.n_shots) + "\nraw_fidelity," + num(raw.fidelity) + ',' +
                               num(raw.sigma_fidelity) + ',' + std::to_string(raw.n_ground + raw.n_excited) +
                               '\n'});
  return rep;
}

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names = {"hist", "power-sweep", "purify", "herald", "budget", "reset", "jumps"};
  return names;
}

/// Experiments that can run on imported records.
inline bool analyzable(std::string_view name) {
  return name == "hist" || name == "purify" || name == "herald" || name == "jumps";
}

inline std::string names_list() {
  std::string s;
  for (const auto& n : experiment_names()) s += (s.empty() ? "" : ", ") + n;
  return s;
}

/// Records produced by a run, handed to the caller for optional export.
using RecordSink = std::function<void(const std::vector<ExperimentRecord>&)>;

inline ExperimentReport run_experiment(std::string_view name, const SimParams& p, const RecordSink& sink = {}) {
  using namespace exp_detail;
  p.validate();
  ExperimentReport rep;
  auto labelled = [&] {
    LabelledRecords ens = simulate_labelled(p, p.pulse_sequence());
    if (sink) {
      std::vector<ExperimentRecord> all = ens.ground;
      all.insert(all.end(), ens.excited.begin(), ens.excited.end());
      sink(all);
    }
    return ens;
  };
  if (name == "hist") {
    rep = analyze_hist(labelled(), p);
  } else if (name == "herald") {
    rep = analyze_herald(labelled(), p);
  } else if (name == "purify") {
    rep = analyze_purify(labelled(), p);
  } else if (name == "jumps") {
    const auto records = simulate_jump_records(p);
    if (sink) sink(records);
    rep = analyze_jumps(records, p);
  } else if (name == "power-sweep") {
    rep = run_power_sweep(p);
  } else if (name == "budget") {
    rep = run_budget(p);
  } else if (name == "reset") {
    rep = run_reset(p);
  } else {
    throw UnknownExperiment("unknown experiment '" + std::string(name) + "'; available: " + names_list());
  }
  rep.params = params_json(p);
  return rep;
}

/// Analysis of imported records under the analysis options in `p`.
inline ExperimentReport analyze_records(std::string_view name, std::vector<ExperimentRecord> records,
                                        const SimParams& p) {
  ExperimentReport rep;
  if (name == "jumps") {
    rep = analyze_jumps(records, p);
  } else if (analyzable(name)) {
    const LabelledRecords ens = split_by_label(std::move(records));
    if (ens.ground.empty() || ens.excited.empty()) {
      throw std::invalid_argument(std::string(name) + ": traces must contain both prepared labels");
    }
    if (name == "hist") rep = analyze_hist(ens, p);
    if (name == "herald") rep = analyze_herald(ens, p);
    if (name == "purify") rep = analyze_purify(ens, p);
  } else if (std::find(experiment_names().begin(), experiment_names().end(), name) != experiment_names().end()) {
    throw UnknownExperiment("experiment '" + std::string(name) +
                            "' needs simulation; analyze supports hist, herald, purify, jumps");
  } else {
    throw UnknownExperiment("unknown experiment '" + std::string(name) + "'; available: " + names_list());
  }
  rep.params = exp_detail::params_json(p);
  return rep;
}

/// Writes report.json and the CSV artifacts into `dir` (created if needed).
inline void write_report(const ExperimentReport& rep, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  for (const auto& a : rep.artifacts) io_detail::write_atomically(dir / a.file, a.content);
  io_detail::write_atomically(dir / "report.json", rep.to_json().dump(2) + '\n');
}

}  // namespace qrl

#endif  // QRL_EXPERIMENTS_HPP
