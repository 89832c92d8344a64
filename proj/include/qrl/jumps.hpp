#ifndef QRL_JUMPS_HPP
#define QRL_JUMPS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <vector>

#include "qrl/discrimination.hpp"
#include "qrl/trajectory.hpp"

namespace qrl {

enum class JumpDirection : std::uint8_t { kUp = 0, kDown = 1 };

struct JumpEvent {
  double time = 0.0;  // ns, time of the sample that crossed the far threshold
  JumpDirection direction = JumpDirection::kUp;
  bool operator==(const JumpEvent&) const = default;
};

/// Schmitt-trigger state assignment over the bins of `window`. The state
/// switches to Excited only when the trace crosses threshold + hysteresis/2
/// on the Excited side, and back to Ground only past threshold -
/// hysteresis/2 on the Ground side. The starting state is the plain threshold
/// reading of the first bin and is not itself an event.
struct JumpTrack {
  QubitState initial = QubitState::kGround;
  std::vector<JumpEvent> events;
};

inline JumpTrack track_jumps(const HomodyneTrace& trace, const Discriminator& disc, double hysteresis,
                             const Window& window) {
  if (!(hysteresis >= 0.0)) throw std::invalid_argument("detect_jumps: hysteresis must be >= 0");
  JumpTrack out;
  const double dt = trace.sample_dt;
  std::size_t i = static_cast<std::size_t>(std::max(0.0, std::ceil(window.start / dt - 1e-9)));
  if (i >= trace.samples.size() || static_cast<double>(i) * dt >= window.end) return out;
  // Work in a frame where Excited is the high side.
  const double sign = disc.polarity == Polarity::kExcitedAbove ? 1.0 : -1.0;
  const double high = sign * disc.threshold + 0.5 * hysteresis;
  const double low = sign * disc.threshold - 0.5 * hysteresis;
  QubitState state = disc.classify(trace.samples[i]);
  out.initial = state;
  for (++i; i < trace.samples.size(); ++i) {
    const double t = static_cast<double>(i) * dt;
    if (t >= window.end) break;
    const double v = sign * static_cast<double>(trace.samples[i]);
    if (state == QubitState::kGround && v >= high) {
      state = QubitState::kExcited;
      out.events.push_back({t, JumpDirection::kUp});
    } else if (state == QubitState::kExcited && v <= low) {
      state = QubitState::kGround;
      out.events.push_back({t, JumpDirection::kDown});
    }
  }
  return out;
}

inline std::vector<JumpEvent> detect_jumps(const HomodyneTrace& trace, const Discriminator& disc,
                                           double hysteresis, const Window& window) {
  return track_jumps(trace, disc, hysteresis, window).events;
}

inline std::vector<JumpEvent> detect_jumps(const HomodyneTrace& trace, const Discriminator& disc,
                                           double hysteresis) {
  return detect_jumps(trace, disc, hysteresis, trace.readout_window);
}

struct Dwell {
  QubitState state = QubitState::kGround;
  double start = 0.0;
  double end = 0.0;
  bool left_censored = false;   // began before the analysis window
  bool right_censored = false;  // still running when the window closed

  double duration() const { return end - start; }
  bool complete() const { return !left_censored && !right_censored; }
};

inline std::vector<Dwell> dwells_from_track(const JumpTrack& track, const Window& window) {
  std::vector<Dwell> out;
  QubitState state = track.initial;
  double start = window.start;
  bool left = true;
  for (const JumpEvent& e : track.events) {
    out.push_back({state, start, e.time, left, false});
    state = e.direction == JumpDirection::kUp ? QubitState::kExcited : QubitState::kGround;
    start = e.time;
    left = false;
  }
  out.push_back({state, start, window.end, left, true});
  return out;
}

/// Censored-exponential MLE for one exit channel: rate = exits / exposure.
struct RateChannel {
  std::optional<double> rate;  // 1/us; absent with fewer than 10 dwells
  double sigma = 0.0;
  double upper_95 = 0.0;
  std::size_t exits = 0;
  std::size_t dwells = 0;
  double exposure_us = 0.0;
};

inline constexpr std::size_t kMinDwellsForRate = 10;

inline RateChannel estimate_channel(std::size_t exits, std::size_t dwells, double exposure_us) {
  RateChannel c;
  c.exits = exits;
  c.dwells = dwells;
  c.exposure_us = exposure_us;
  if (dwells < kMinDwellsForRate || !(exposure_us > 0.0)) return c;
  const double rate = static_cast<double>(exits) / exposure_us;
  c.rate = rate;
  c.sigma = exits > 0 ? rate / std::sqrt(static_cast<double>(exits)) : 0.0;
  // Zero exits: exact Poisson bound -ln(0.05)/T.
  c.upper_95 = exits > 0 ? rate + 1.6448536269514722 * c.sigma : 2.995732273553991 / exposure_us;
  return c;
}

struct RateEstimate {
  RateChannel up;    // from ground dwells
  RateChannel down;  // from excited dwells
  std::optional<double> t1_fit_us;
  double sigma_t1_us = 0.0;
  std::vector<double> excited_dwells_ns;  // complete dwells only
  std::vector<double> ground_dwells_ns;
  std::size_t up_events = 0;
  std::size_t down_events = 0;

  RatePair rates() const { return {up.rate.value_or(0.0), down.rate.value_or(0.0)}; }
};

namespace detail {

class DwellAccumulator {
 public:
  void add(const JumpTrack& track, const Window& window, RateEstimate& est) {
    for (const JumpEvent& e : track.events) {
      (e.direction == JumpDirection::kUp ? est.up_events : est.down_events) += 1;
    }
    for (const Dwell& d : dwells_from_track(track, window)) {
      const int s = d.state == QubitState::kExcited ? 1 : 0;
      ++dwells_[s];
      exposure_ns_[s] += d.duration();
      if (!d.right_censored) ++exits_[s];
      if (d.complete()) (s ? est.excited_dwells_ns : est.ground_dwells_ns).push_back(d.duration());
    }
  }

  void finish(RateEstimate& est) const {
    est.up = estimate_channel(exits_[0], dwells_[0], exposure_ns_[0] * 1e-3);
    est.down = estimate_channel(exits_[1], dwells_[1], exposure_ns_[1] * 1e-3);
    if (est.down.rate && *est.down.rate > 0.0) {
      est.t1_fit_us = 1.0 / *est.down.rate;
      est.sigma_t1_us = *est.t1_fit_us * est.down.sigma / *est.down.rate;
    }
  }

 private:
  std::size_t exits_[2] = {0, 0};
  std::size_t dwells_[2] = {0, 0};
  double exposure_ns_[2] = {0.0, 0.0};
};

}  // namespace detail

/// Rates from dwell statistics of long records. Each record is analysed
/// from readout start + settle_ns to the end of its readout window.
inline RateEstimate extract_rates(const std::vector<ExperimentRecord>& records, const Discriminator& disc,
                                  double hysteresis, double settle_ns = 0.0) {
  RateEstimate est;
  detail::DwellAccumulator acc;
  for (const ExperimentRecord& r : records) {
    const Window w{r.trace.readout_window.start + settle_ns, r.trace.readout_window.end};
    if (w.empty()) continue;
    acc.add(track_jumps(r.trace, disc, hysteresis, w), w, est);
  }
  acc.finish(est);
  return est;
}

/// Same estimator applied to hidden-truth paths (no detection involved).
inline RateEstimate rates_from_truth(const std::vector<StatePath>& paths, const Window& window) {
  RateEstimate est;
  detail::DwellAccumulator acc;
  for (const StatePath& p : paths) {
    JumpTrack track{p.state_at(window.start), {}};
    for (const Transition& tr : p.transitions) {
      if (tr.time <= window.start || tr.time >= window.end) continue;
      track.events.push_back(
          {tr.time, tr.state == QubitState::kExcited ? JumpDirection::kUp : JumpDirection::kDown});
    }
    acc.add(track, window, est);
  }
  acc.finish(est);
  return est;
}

// ---------------------------------------------------------------------------
// Kolmogorov-Smirnov test against an exponential law
// ---------------------------------------------------------------------------

/// Asymptotic Kolmogorov survival function Q(lambda).
inline double kolmogorov_q(double lambda) {
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  double sign = 1.0;
  for (int j = 1; j <= 100; ++j) {
    const double term = sign * std::exp(-2.0 * j * j * lambda * lambda);
    sum += term;
    if (std::abs(term) < 1e-16 * std::abs(sum)) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
  double rate_per_ns = 0.0;
};

/// One-sample KS test of dwell times against an exponential. Dwells shorter
/// than `dead_time` are dropped and the rest shifted by it, which leaves an
/// exponential law unchanged (memorylessness) and removes the detector's
/// blindness to very short dwells. If rate_per_ns <= 0 the rate is fitted.
/// Durations on a sample grid are compared with the law of the rounded value.
inline KsResult ks_exponential(std::vector<double> durations, double dead_time, double rate_per_ns = 0.0,
                               double grid = 0.0) {
  std::vector<double> x;
  x.reserve(durations.size());
  for (double d : durations) {
    if (d >= dead_time) x.push_back(d - dead_time);
  }
  KsResult r;
  r.n = x.size();
  if (x.empty()) return r;
  std::sort(x.begin(), x.end());
  if (!(rate_per_ns > 0.0)) {
    double sum = 0.0;
    for (double v : x) sum += v;
    rate_per_ns = sum > 0.0 ? static_cast<double>(x.size()) / sum : 0.0;
  }
  r.rate_per_ns = rate_per_ns;
  const double n = static_cast<double>(x.size());
  auto cdf = [&](double v) { return 1.0 - std::exp(-rate_per_ns * (v + 0.5 * grid)); };
  double d = 0.0;
  for (std::size_t i = 0; i < x.size();) {
    std::size_t j = i;
    while (j < x.size() && x[j] == x[i]) ++j;
    const double f = cdf(x[i]);
    const double f_lo = grid > 0.0 ? 1.0 - std::exp(-rate_per_ns * std::max(0.0, x[i] - 0.5 * grid)) : f;
    d = std::max({d, std::abs(static_cast<double>(j) / n - f), std::abs(f_lo - static_cast<double>(i) / n)});
    i = j;
  }
  r.statistic = d;
  const double sn = std::sqrt(n);
  r.p_value = kolmogorov_q((sn + 0.12 + 0.11 / sn) * d);
  return r;
}

}  // namespace qrl

#endif  // QRL_JUMPS_HPP
