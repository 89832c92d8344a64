#ifndef QRL_FILTER_HPP
#define QRL_FILTER_HPP

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "qrl/discrimination.hpp"
#include "qrl/parallel.hpp"
#include "qrl/trajectory.hpp"

namespace qrl {

/// Bins of `trace` whose sample time lies in `window`, as [first, first+count).
struct BinRange {
  std::size_t first = 0;
  std::size_t count = 0;
};

inline BinRange bins_in(const HomodyneTrace& trace, const Window& window) {
  const double dt = trace.sample_dt;
  const auto first = static_cast<std::size_t>(std::max(0.0, std::ceil(window.start / dt - 1e-9)));
  std::size_t last = first;
  while (last < trace.samples.size() && static_cast<double>(last) * dt < window.end) ++last;
  return {first, last > first ? last - first : 0};
}

/// Exponentially decaying weights e^{-k dt / tau_f}, k = 0..count-1.
inline std::vector<double> exp_filter_weights(std::size_t count, double dt, double tau_f) {
  std::vector<double> w(count);
  for (std::size_t k = 0; k < count; ++k) w[k] = std::exp(-static_cast<double>(k) * dt / tau_f);
  return w;
}

inline double apply_weights(const HomodyneTrace& trace, BinRange range, const std::vector<double>& w) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t k = 0; k < range.count; ++k) {
    num += w[k] * static_cast<double>(trace.samples[range.first + k]);
    den += w[k];
  }
  return num / den;
}

/// Weighted mean of the window with weights decaying from the window start.
inline double exp_filter_integrate(const HomodyneTrace& trace, double tau_f, const Window& window) {
  if (!(tau_f > 0.0)) throw std::invalid_argument("exp_filter_integrate: tau_f must be > 0");
  if (window.start < trace.readout_window.start || window.end > trace.readout_window.end) {
    throw std::invalid_argument("exp_filter_integrate: window must lie inside the readout window");
  }
  const BinRange range = bins_in(trace, window);
  if (range.count == 0) throw std::invalid_argument("exp_filter_integrate: empty window");
  const double t0 = static_cast<double>(range.first) * trace.sample_dt - window.start;
  std::vector<double> w = exp_filter_weights(range.count, trace.sample_dt, tau_f);
  // Weights are measured from window.start, not from the first bin time.
  const double shift = std::exp(-t0 / tau_f);
  for (double& x : w) x *= shift;
  return apply_weights(trace, range, w);
}

struct FilterOptions {
  std::size_t grid_points = 24;
  std::size_t refine_iterations = 12;
  std::size_t threshold_bins = 1000;
  std::size_t workers = 0;
};

struct FilterOptimum {
  double tau_f = 0.0;
  Discriminator discriminator;
  FidelityResult result;
};

/// Filtered value of every record for one tau_f.
inline std::vector<double> filtered_values(const std::vector<ExperimentRecord>& records, double tau_f,
                                           const Window& window, std::size_t workers = 0) {
  std::vector<double> out(records.size());
  if (records.empty()) return out;
  const HomodyneTrace& first = records.front().trace;
  if (!(tau_f > 0.0)) throw std::invalid_argument("filtered_values: tau_f must be > 0");
  const BinRange range = bins_in(first, window);
  if (range.count == 0) throw std::invalid_argument("filtered_values: empty window");
  std::vector<double> w = exp_filter_weights(range.count, first.sample_dt, tau_f);
  parallel_for(records.size(), workers, [&](std::size_t i) {
    const HomodyneTrace& tr = records[i].trace;
    if (tr.samples.size() < range.first + range.count) {
      throw std::invalid_argument("filtered_values: trace shorter than the window");
    }
    out[i] = apply_weights(tr, range, w);
  });
  return out;
}

/// Fidelity of exponentially filtered ensembles for one tau_f, with the
/// threshold re-optimized.
inline FilterOptimum score_filter(const std::vector<ExperimentRecord>& records_g,
                                  const std::vector<ExperimentRecord>& records_e, const Window& window,
                                  double tau_f, const FilterOptions& opt) {
  const auto vg = filtered_values(records_g, tau_f, window, opt.workers);
  const auto ve = filtered_values(records_e, tau_f, window, opt.workers);
  const ScoredDiscrimination s = best_fidelity(vg, ve, opt.threshold_bins);
  return {tau_f, s.discriminator, s.result};
}

/// Log-spaced grid search over tau_f in [sample_dt, 10 T1] followed by a
/// golden-section refinement around the best grid point.
inline FilterOptimum optimize_filter_constant(const std::vector<ExperimentRecord>& records_g,
                                              const std::vector<ExperimentRecord>& records_e,
                                              const Window& window, double t1_ns,
                                              const FilterOptions& opt = {}) {
  if (records_g.empty() || records_e.empty()) {
    throw std::invalid_argument("optimize_filter_constant: ensembles must be non-empty");
  }
  const double lo = records_g.front().trace.sample_dt;
  const double hi = std::max(lo * 1.0001, 10.0 * t1_ns);
  const double log_lo = std::log(lo);
  const double log_hi = std::log(hi);
  const std::size_t n = std::max<std::size_t>(opt.grid_points, 3);
  auto at = [&](std::size_t k) {
    return std::exp(log_lo + (log_hi - log_lo) * static_cast<double>(k) / static_cast<double>(n - 1));
  };

  FilterOptimum best;
  best.result.fidelity = -1.0;
  std::size_t best_k = 0;
  for (std::size_t k = 0; k < n; ++k) {
    FilterOptimum cand = score_filter(records_g, records_e, window, at(k), opt);
    if (cand.result.fidelity > best.result.fidelity) {
      best = cand;
      best_k = k;
    }
  }

  double a = std::log(at(best_k == 0 ? 0 : best_k - 1));
  double b = std::log(at(std::min(best_k + 1, n - 1)));
  constexpr double kInvPhi = 0.6180339887498949;
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  FilterOptimum fc = score_filter(records_g, records_e, window, std::exp(c), opt);
  FilterOptimum fd = score_filter(records_g, records_e, window, std::exp(d), opt);
  for (std::size_t it = 0; it < opt.refine_iterations; ++it) {
    if (fc.result.fidelity >= fd.result.fidelity) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = score_filter(records_g, records_e, window, std::exp(c), opt);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = score_filter(records_g, records_e, window, std::exp(d), opt);
    }
  }
  for (const FilterOptimum* f : {&fc, &fd}) {
    if (f->result.fidelity > best.result.fidelity) best = *f;
  }
  return best;
}

}  // namespace qrl

#endif  // QRL_FILTER_HPP
