#ifndef QRL_TRAJECTORY_HPP
#define QRL_TRAJECTORY_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <new>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "qrl/model.hpp"
#include "qrl/parallel.hpp"
#include "qrl/random.hpp"

namespace qrl {

enum class QubitState : std::uint8_t { kGround = 0, kExcited = 1 };

inline constexpr QubitState flipped(QubitState s) {
  return s == QubitState::kGround ? QubitState::kExcited : QubitState::kGround;
}

inline const char* to_string(QubitState s) {
  return s == QubitState::kGround ? "ground" : "excited";
}

/// Half-open time interval [start, end) in ns.
struct Window {
  double start = 0.0;
  double end = 0.0;

  double length() const { return end - start; }
  bool contains(double t) const { return t >= start && t < end; }
  bool empty() const { return !(end > start); }
  bool operator==(const Window&) const = default;
};

inline bool on_grid(double t, double dt) {
  const double k = t / dt;
  return std::abs(k - std::round(k)) < 1e-9 * std::max(1.0, std::abs(k));
}

inline std::size_t grid_index(double t, double dt) {
  return static_cast<std::size_t>(std::llround(t / dt));
}

// ---------------------------------------------------------------------------
// Hidden state path
// ---------------------------------------------------------------------------

struct Transition {
  double time = 0.0;  // ns
  QubitState state = QubitState::kGround;
  bool operator==(const Transition&) const = default;
};

/// Ground-truth telegraph trajectory on [0, duration].
struct StatePath {
  QubitState initial = QubitState::kGround;
  std::vector<Transition> transitions;
  double duration = 0.0;

  QubitState final_state() const {
    return transitions.empty() ? initial : transitions.back().state;
  }

  /// State at time t; a transition at exactly t has already happened.
  QubitState state_at(double t) const {
    auto it = std::upper_bound(transitions.begin(), transitions.end(), t,
                               [](double v, const Transition& tr) { return v < tr.time; });
    return it == transitions.begin() ? initial : std::prev(it)->state;
  }

  bool has_transition_in(double t0, double t1) const {
    return std::any_of(transitions.begin(), transitions.end(),
                       [&](const Transition& tr) { return tr.time > t0 && tr.time <= t1; });
  }

  /// Throws std::logic_error if times are not strictly increasing inside
  /// [0, duration] or states do not alternate.
  void validate() const {
    QubitState prev = initial;
    double prev_t = -std::numeric_limits<double>::infinity();
    for (const auto& tr : transitions) {
      if (!(tr.time > prev_t) || tr.time < 0.0 || tr.time > duration) {
        throw std::logic_error("state path: transition times out of order or range");
      }
      if (tr.state == prev) throw std::logic_error("state path: transitions must alternate");
      prev = tr.state;
      prev_t = tr.time;
    }
  }

  bool operator==(const StatePath&) const = default;
};

/// Piece of a rate schedule: constant rates on [start, end).
struct RateSegment {
  Window span;
  RatePair rates;
};

/// Excited with probability p_exc.
template <typename Rng>
QubitState sample_initial_state(double p_exc, Rng& rng) {
  if (!(p_exc >= 0.0 && p_exc <= 1.0)) {
    throw std::invalid_argument("sample_initial_state: p_exc must be in [0, 1]");
  }
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return u(rng) < p_exc ? QubitState::kExcited : QubitState::kGround;
}

/// Extends `path` over one constant-rate segment with exact exponential
/// waiting times. Rates are per us, times in ns. The waiting time is redrawn
/// at the segment boundary, which is exact for a memoryless process.
template <typename Rng>
void extend_state_path(StatePath& path, const RateSegment& segment, Rng& rng) {
  double t = segment.span.start;
  QubitState state = path.final_state();
  for (;;) {
    const double rate_per_us =
        state == QubitState::kExcited ? segment.rates.gamma_down : segment.rates.gamma_up;
    if (!(rate_per_us > 0.0)) break;
    std::exponential_distribution<double> wait(rate_per_us * 1e-3);
    const double next = t + wait(rng);
    if (next >= segment.span.end) break;
    t = next;
    state = flipped(state);
    path.transitions.push_back({t, state});
  }
  path.duration = std::max(path.duration, segment.span.end);
}

/// Continuous-time Markov sampling of a two-state path over a piecewise
/// constant schedule. Segments must be contiguous and start at 0.
template <typename Rng>
StatePath simulate_state_path(QubitState initial, const std::vector<RateSegment>& schedule,
                              double duration, Rng& rng) {
  if (!(duration > 0.0)) throw std::invalid_argument("simulate_state_path: duration must be > 0");
  StatePath path{initial, {}, 0.0};
  double covered = 0.0;
  for (const auto& seg : schedule) {
    if (seg.span.start != covered) {
      throw std::invalid_argument("simulate_state_path: schedule must be contiguous from 0");
    }
    const Window clipped{seg.span.start, std::min(seg.span.end, duration)};
    if (clipped.empty()) break;
    extend_state_path(path, {clipped, seg.rates}, rng);
    covered = seg.span.end;
  }
  if (covered < duration) throw std::invalid_argument("simulate_state_path: schedule too short");
  path.duration = duration;
  return path;
}

/// Instantaneous π pulse that fails (leaves the state alone) with error_prob.
template <typename Rng>
QubitState apply_pi_pulse(QubitState state, double error_prob, Rng& rng) {
  if (!(error_prob >= 0.0 && error_prob < 1.0)) {
    throw std::invalid_argument("apply_pi_pulse: error_prob must be in [0, 1)");
  }
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return u(rng) < error_prob ? state : flipped(state);
}

// ---------------------------------------------------------------------------
// Pulse sequence
// ---------------------------------------------------------------------------

/// Absolute timing of one shot, all in ns on the sample grid. The
/// preparation π pulse (if any) fires at readout_window.start.
struct PulseSequence {
  double sample_dt = 10.0;
  std::optional<Window> herald_window;
  double t_S = std::numeric_limits<double>::quiet_NaN();
  bool prep_pi_pulse = false;
  Window readout_window;
  double t_A = 0.0;
  double t_B = 0.0;
  double t_D = 0.0;

  double duration() const { return readout_window.end; }
  std::size_t n_samples() const { return grid_index(duration(), sample_dt); }
  bool has_herald() const { return herald_window.has_value(); }

  void validate() const {
    if (!(sample_dt > 0.0)) throw std::invalid_argument("sequence: sample_dt must be > 0");
    auto grid = [&](double t, const char* name) {
      if (!std::isfinite(t) || !on_grid(t, sample_dt)) {
        throw std::invalid_argument(std::string("sequence: ") + name + " is not on the sample grid");
      }
    };
    grid(readout_window.start, "readout start");
    grid(readout_window.end, "readout end");
    if (readout_window.empty()) throw std::invalid_argument("sequence: empty readout window");
    if (readout_window.start < 0.0) throw std::invalid_argument("sequence: negative readout start");
    grid(t_A, "t_A");
    grid(t_B, "t_B");
    grid(t_D, "t_D");
    if (!(t_A < t_B)) throw std::invalid_argument("sequence: t_A must precede t_B");
    if (!readout_window.contains(t_A) || !readout_window.contains(t_B) ||
        !readout_window.contains(t_D)) {
      throw std::invalid_argument("sequence: t_A, t_B and t_D must lie inside the readout window");
    }
    if (herald_window) {
      grid(herald_window->start, "herald start");
      grid(herald_window->end, "herald end");
      grid(t_S, "t_S");
      if (herald_window->empty() || herald_window->start < 0.0) {
        throw std::invalid_argument("sequence: invalid herald window");
      }
      if (!herald_window->contains(t_S)) {
        throw std::invalid_argument("sequence: t_S must lie inside the herald window");
      }
      if (herald_window->end > readout_window.start) {
        throw std::invalid_argument("sequence: herald window must end before the readout starts");
      }
    }
  }

  bool operator==(const PulseSequence& o) const {
    auto same = [](double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); };
    return sample_dt == o.sample_dt && herald_window == o.herald_window && same(t_S, o.t_S) &&
           prep_pi_pulse == o.prep_pi_pulse && readout_window == o.readout_window &&
           t_A == o.t_A && t_B == o.t_B && t_D == o.t_D;
  }
};

/// Relative timing knobs from which a PulseSequence is laid out. All in ns.
struct SequenceConfig {
  bool herald_enabled = true;
  double herald_length = 200.0;
  // t_S measured from the herald turn-on.
  double herald_sample_offset = 190.0;
  // Herald end to readout start; the preparation π pulse sits at the end of
  // this gap. Roughly 3 tau_sys at the default bandwidth.
  double prep_gap = 70.0;
  double readout_length = 1000.0;
  // Marker offsets from readout start. t_D sits between t_A and t_B.
  double t_D_offset = 90.0;
  double t_A_offset = 50.0;
  double ab_spacing = 160.0;

  bool operator==(const SequenceConfig&) const = default;
};

inline PulseSequence make_sequence(const SequenceConfig& cfg, double sample_dt) {
  PulseSequence seq;
  seq.sample_dt = sample_dt;
  double readout_start = 0.0;
  if (cfg.herald_enabled) {
    seq.herald_window = Window{0.0, cfg.herald_length};
    seq.t_S = cfg.herald_sample_offset;
    readout_start = cfg.herald_length + cfg.prep_gap;
  }
  seq.readout_window = Window{readout_start, readout_start + cfg.readout_length};
  seq.t_D = readout_start + cfg.t_D_offset;
  seq.t_A = readout_start + cfg.t_A_offset;
  seq.t_B = seq.t_A + cfg.ab_spacing;
  seq.validate();
  return seq;
}

/// Readout-on / readout-off rate schedule covering the whole sequence.
inline std::vector<RateSegment> rate_schedule(const QubitParams& qubit, const ReadoutParams& readout,
                                              const PulseSequence& seq) {
  const RatePair idle = effective_rates(qubit, readout, false);
  const RatePair driven = effective_rates(qubit, readout, true);
  std::vector<RateSegment> out;
  double t = 0.0;
  auto push = [&](double end, const RatePair& r) {
    if (end > t) out.push_back({{t, end}, r});
    t = std::max(t, end);
  };
  if (seq.herald_window) {
    push(seq.herald_window->start, idle);
    push(seq.herald_window->end, driven);
  }
  push(seq.readout_window.start, idle);
  push(seq.readout_window.end, driven);
  return out;
}

// ---------------------------------------------------------------------------
// Homodyne rendering
// ---------------------------------------------------------------------------

struct HomodyneTrace {
  double sample_dt = 10.0;
  std::vector<float> samples;
  Window readout_window;

  double time_of(std::size_t i) const { return static_cast<double>(i) * sample_dt; }
  double duration() const { return static_cast<double>(samples.size()) * sample_dt; }
  bool operator==(const HomodyneTrace&) const = default;
};

inline double pointer_level(QubitState s, const ReadoutParams& readout) {
  return s == QubitState::kExcited ? 0.5 * readout.pointer_separation
                                   : -0.5 * readout.pointer_separation;
}

/// Noise-free detector output per bin. While a drive window is on, the
/// pointer level of the hidden state is passed through a single pole that
/// starts from zero at turn-on; outside drive windows the output is zero.
inline std::vector<double> render_signal(const StatePath& truth, const ReadoutParams& readout,
                                         const PulseSequence& seq) {
  const std::size_t n = seq.n_samples();
  const double dt = seq.sample_dt;
  const double tau = readout.tau_sys();
  std::vector<double> out(n, 0.0);

  std::vector<Window> drives;
  if (seq.herald_window) drives.push_back(*seq.herald_window);
  drives.push_back(seq.readout_window);

  for (const Window& drive : drives) {
    const double on = drive.start + readout.ringup_start;
    double y = 0.0;
    double t = on;
    auto it = std::upper_bound(truth.transitions.begin(), truth.transitions.end(), on,
                               [](double v, const Transition& tr) { return v < tr.time; });
    QubitState state = truth.state_at(on);
    auto relax = [&](double until) {
      const double level = pointer_level(state, readout);
      y = level + (y - level) * std::exp(-(until - t) / tau);
      t = until;
    };
    for (std::size_t i = grid_index(drive.start, dt); i < n; ++i) {
      const double ti = static_cast<double>(i) * dt;
      if (ti >= drive.end) break;
      if (ti < on) continue;
      while (it != truth.transitions.end() && it->time <= ti) {
        relax(it->time);
        state = it->state;
        ++it;
      }
      relax(ti);
      out[i] = y;
    }
  }
  return out;
}

/// Stationary Gaussian noise with standard deviation sigma per bin and
/// lag-k autocorrelation exp(-k dt / tau): white noise through the same
/// single pole as the signal, rescaled to keep sigma.
template <typename Rng>
std::vector<double> render_noise(std::size_t n, double sigma, double dt, double tau, Rng& rng) {
  std::vector<double> out(n, 0.0);
  if (n == 0 || sigma == 0.0) return out;
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double rho = std::exp(-dt / tau);
  const double innov = sigma * std::sqrt(1.0 - rho * rho);
  double x = sigma * gauss(rng);
  out[0] = x;
  for (std::size_t i = 1; i < n; ++i) {
    x = rho * x + innov * gauss(rng);
    out[i] = x;
  }
  return out;
}

template <typename Rng>
HomodyneTrace render_homodyne(const StatePath& truth, const ReadoutParams& readout,
                              const PulseSequence& seq, Rng& rng) {
  if (truth.duration < seq.duration()) {
    throw std::invalid_argument("render_homodyne: state path shorter than the sequence");
  }
  const double snr = pointer_snr(readout);
  if (!seq.readout_window.empty() && !(snr > 0.0)) {
    throw std::invalid_argument("render_homodyne: pointer SNR must be > 0");
  }
  const std::vector<double> signal = render_signal(truth, readout, seq);
  HomodyneTrace trace{seq.sample_dt, std::vector<float>(signal.size()), seq.readout_window};
  if (readout.noiseless) {
    for (std::size_t i = 0; i < signal.size(); ++i) trace.samples[i] = static_cast<float>(signal[i]);
    return trace;
  }
  const std::vector<double> noise =
      render_noise(signal.size(), readout.pointer_separation / snr, seq.sample_dt, readout.tau_sys(), rng);
  for (std::size_t i = 0; i < signal.size(); ++i) {
    trace.samples[i] = static_cast<float>(signal[i] + noise[i]);
  }
  return trace;
}

// ---------------------------------------------------------------------------
// Records and ensembles
// ---------------------------------------------------------------------------

struct ExperimentRecord {
  PulseSequence sequence;
  HomodyneTrace trace;
  std::optional<StatePath> truth;  // absent for imported lab data
  QubitState prepared_label = QubitState::kGround;

  bool operator==(const ExperimentRecord&) const = default;
};

/// How the preparation π pulse is decided.
enum class PrepPolicy {
  kByLabel,        // π iff the prepared label is Excited
  kHeraldFeedback  // π iff the herald sample at t_S reads Excited
};

/// Herald feedback rule: a sample at or above `threshold` reads Excited.
struct FeedbackRule {
  double threshold = 0.0;
};

namespace detail {

inline ExperimentRecord simulate_shot(const QubitParams& qubit, const ReadoutParams& readout,
                                      PulseSequence seq, QubitState label, PrepPolicy policy,
                                      FeedbackRule feedback, RecordStreams& streams) {
  const std::vector<RateSegment> schedule = rate_schedule(qubit, readout, seq);
  const double prep_time = seq.readout_window.start;

  StatePath path{sample_initial_state(thermal_population(qubit), streams.initial()), {}, 0.0};
  for (const auto& seg : schedule) {
    if (seg.span.end <= prep_time) extend_state_path(path, seg, streams.path());
  }
  path.duration = prep_time;

  // Noise does not depend on the path, so it can be drawn up front; this also
  // lets the herald decision see exactly the samples that end up in the trace.
  std::vector<double> noise;
  if (!readout.noiseless) {
    noise = render_noise(seq.n_samples(), noise_sigma(readout), seq.sample_dt, readout.tau_sys(),
                         streams.noise());
  } else {
    noise.assign(seq.n_samples(), 0.0);
  }

  bool fire = false;
  if (policy == PrepPolicy::kByLabel) {
    fire = label == QubitState::kExcited;
  } else {
    if (!seq.herald_window) throw std::invalid_argument("herald feedback needs a herald window");
    const std::vector<double> signal = render_signal(path, readout, seq);
    const std::size_t is = grid_index(seq.t_S, seq.sample_dt);
    const float herald_value = static_cast<float>(signal[is] + noise[is]);
    fire = herald_value >= feedback.threshold;
  }
  seq.prep_pi_pulse = fire;
  if (fire) {
    const QubitState before = path.final_state();
    const QubitState after = apply_pi_pulse(before, qubit.pi_pulse_error, streams.pi());
    if (after != before) path.transitions.push_back({prep_time, after});
  }
  for (const auto& seg : schedule) {
    if (seg.span.start >= prep_time) extend_state_path(path, seg, streams.path());
  }
  path.duration = seq.duration();

  const std::vector<double> signal = render_signal(path, readout, seq);
  HomodyneTrace trace{seq.sample_dt, std::vector<float>(signal.size()), seq.readout_window};
  for (std::size_t i = 0; i < signal.size(); ++i) {
    trace.samples[i] = static_cast<float>(signal[i] + noise[i]);
  }
  return ExperimentRecord{std::move(seq), std::move(trace), std::move(path), label};
}

}  // namespace detail

/// One shot: thermal initial state, optional herald readout, preparation π
/// pulse for an Excited label, main readout, rendering.
inline ExperimentRecord run_sequence(const QubitParams& qubit, const ReadoutParams& readout,
                                     const PulseSequence& sequence, QubitState prepared_label,
                                     RecordStreams& streams) {
  return detail::simulate_shot(qubit, readout, sequence, prepared_label, PrepPolicy::kByLabel, {},
                               streams);
}

/// One reset shot: the π pulse fires only when the herald reads Excited.
inline ExperimentRecord run_reset_sequence(const QubitParams& qubit, const ReadoutParams& readout,
                                           const PulseSequence& sequence, FeedbackRule feedback,
                                           RecordStreams& streams) {
  return detail::simulate_shot(qubit, readout, sequence, QubitState::kGround,
                               PrepPolicy::kHeraldFeedback, feedback, streams);
}

struct EnsembleSpec {
  QubitParams qubit;
  ReadoutParams readout;
  PulseSequence sequence;
  QubitState label = QubitState::kGround;
  PrepPolicy policy = PrepPolicy::kByLabel;
  FeedbackRule feedback;
};

/// Independent records; record i depends only on (master_seed, i).
inline std::vector<ExperimentRecord> simulate_ensemble(const EnsembleSpec& spec, std::size_t n_traces,
                                                       std::uint64_t master_seed,
                                                       std::size_t workers = 0) {
  if (n_traces < 1) throw std::invalid_argument("simulate_ensemble: n_traces must be >= 1");
  spec.qubit.validate();
  spec.readout.validate();
  spec.sequence.validate();
  std::vector<ExperimentRecord> records;
  try {
    records.resize(n_traces);
    parallel_for(n_traces, workers, [&](std::size_t i) {
      RecordStreams streams(master_seed, i);
      records[i] = detail::simulate_shot(spec.qubit, spec.readout, spec.sequence, spec.label,
                                         spec.policy, spec.feedback, streams);
    });
  } catch (const std::bad_alloc&) {
    throw std::runtime_error("simulate_ensemble: out of memory while generating " +
                             std::to_string(n_traces) + " records");
  }
  return records;
}

}  // namespace qrl

#endif  // QRL_TRAJECTORY_HPP
