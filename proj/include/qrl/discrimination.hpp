#ifndef QRL_DISCRIMINATION_HPP
#define QRL_DISCRIMINATION_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "qrl/trajectory.hpp"

namespace qrl {

/// Fixed-width histogram on [lo, hi) with explicit under/overflow.
struct Histogram {
  std::vector<double> bin_edges;  // bin_count + 1 strictly increasing edges
  std::vector<std::uint64_t> counts;
  std::uint64_t underflow = 0;
  std::uint64_t overflow = 0;
  std::uint64_t total = 0;

  std::size_t bin_count() const { return counts.size(); }

  /// -1 for underflow, bin_count() for overflow. Uses the stored edges so
  /// that "v >= edge" comparisons elsewhere agree exactly with the binning.
  std::ptrdiff_t locate(double v) const {
    if (!(v >= bin_edges.front())) return std::isnan(v) ? static_cast<std::ptrdiff_t>(counts.size()) : -1;
    const auto it = std::upper_bound(bin_edges.begin(), bin_edges.end(), v);
    return std::min<std::ptrdiff_t>(it - bin_edges.begin() - 1, static_cast<std::ptrdiff_t>(counts.size()));
  }

  void add(double v) {
    const std::ptrdiff_t k = locate(v);
    if (k < 0) {
      ++underflow;
    } else if (k >= static_cast<std::ptrdiff_t>(counts.size())) {
      ++overflow;
    } else {
      ++counts[static_cast<std::size_t>(k)];
    }
    ++total;
  }

  /// Mean using bin centres; out-of-range entries sit on the outer edges.
  double mean() const {
    if (total == 0) return std::numeric_limits<double>::quiet_NaN();
    double sum = static_cast<double>(underflow) * bin_edges.front() +
                 static_cast<double>(overflow) * bin_edges.back();
    for (std::size_t k = 0; k < counts.size(); ++k) {
      sum += static_cast<double>(counts[k]) * 0.5 * (bin_edges[k] + bin_edges[k + 1]);
    }
    return sum / static_cast<double>(total);
  }
};

inline Histogram make_histogram(std::size_t bin_count, double lo, double hi) {
  if (bin_count < 2) throw std::invalid_argument("histogram: bin_count must be >= 2");
  if (!(hi > lo) || !std::isfinite(lo) || !std::isfinite(hi)) {
    throw std::invalid_argument("histogram: range must be finite and non-degenerate");
  }
  Histogram h;
  h.bin_edges.resize(bin_count + 1);
  const double width = (hi - lo) / static_cast<double>(bin_count);
  for (std::size_t k = 0; k < bin_count; ++k) h.bin_edges[k] = lo + static_cast<double>(k) * width;
  h.bin_edges[bin_count] = hi;
  h.counts.assign(bin_count, 0);
  return h;
}

template <typename T>
Histogram build_histogram(std::span<const T> values, std::size_t bin_count, double lo, double hi) {
  Histogram h = make_histogram(bin_count, lo, hi);
  for (const T& v : values) h.add(static_cast<double>(v));
  return h;
}

inline Histogram build_histogram(const std::vector<double>& values, std::size_t bin_count, double lo,
                                 double hi) {
  return build_histogram(std::span<const double>(values), bin_count, lo, hi);
}

// ---------------------------------------------------------------------------

enum class Polarity : std::uint8_t { kExcitedAbove = 0, kExcitedBelow = 1 };

struct Discriminator {
  double threshold = 0.0;
  Polarity polarity = Polarity::kExcitedAbove;

  /// Values on the threshold belong to the upper side.
  QubitState classify(double v) const {
    const bool above = v >= threshold;
    return (above == (polarity == Polarity::kExcitedAbove)) ? QubitState::kExcited
                                                            : QubitState::kGround;
  }

  bool operator==(const Discriminator&) const = default;
};

/// Chosen threshold plus the counts that produced it.
struct ThresholdChoice {
  Discriminator discriminator;
  std::size_t edge_index = 0;
  std::uint64_t errors_ground = 0;   // ground-labelled entries read Excited
  std::uint64_t errors_excited = 0;  // excited-labelled entries read Ground
  double error_sum = 0.0;            // P0 + P1
};

/// Exhaustive scan over every bin edge and both polarities for the minimum
/// of P0 + P1. Ties go to the edge closest to the midpoint of the two
/// histogram means, then to the lower edge, then to kExcitedAbove.
inline ThresholdChoice optimal_threshold(const Histogram& hist_g, const Histogram& hist_e) {
  if (hist_g.bin_edges != hist_e.bin_edges) {
    throw std::invalid_argument("optimal_threshold: histograms must share binning");
  }
  if (hist_g.total == 0 && hist_e.total == 0) {
    throw std::invalid_argument("optimal_threshold: both histograms are empty");
  }
  const std::size_t n_edges = hist_g.bin_edges.size();
  // Counts at or above edge k.
  auto upper_counts = [](const Histogram& h) {
    std::vector<std::uint64_t> above(h.bin_edges.size());
    std::uint64_t run = h.overflow;
    for (std::size_t k = h.counts.size() + 1; k-- > 0;) {
      if (k < h.counts.size()) run += h.counts[k];
      above[k] = run;
    }
    return above;
  };
  const auto g_above = upper_counts(hist_g);
  const auto e_above = upper_counts(hist_e);
  const std::uint64_t ng = std::max<std::uint64_t>(hist_g.total, 1);
  const std::uint64_t ne = std::max<std::uint64_t>(hist_e.total, 1);

  double midpoint = 0.0;
  if (hist_g.total > 0 && hist_e.total > 0) {
    midpoint = 0.5 * (hist_g.mean() + hist_e.mean());
  } else {
    midpoint = hist_g.total > 0 ? hist_g.mean() : hist_e.mean();
  }

  ThresholdChoice best;
  // Errors as an exact integer numerator over ng * ne so ties are exact.
  unsigned __int128 best_num = ~static_cast<unsigned __int128>(0);
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < n_edges; ++k) {
    const double edge = hist_g.bin_edges[k];
    const double dist = std::abs(edge - midpoint);
    for (Polarity pol : {Polarity::kExcitedAbove, Polarity::kExcitedBelow}) {
      std::uint64_t err_g = 0;
      std::uint64_t err_e = 0;
      if (pol == Polarity::kExcitedAbove) {
        err_g = g_above[k];
        err_e = hist_e.total - e_above[k];
      } else {
        err_g = hist_g.total - g_above[k];
        err_e = e_above[k];
      }
      const unsigned __int128 num =
          static_cast<unsigned __int128>(err_g) * ne + static_cast<unsigned __int128>(err_e) * ng;
      if (num < best_num || (num == best_num && dist < best_dist)) {
        best_num = num;
        best_dist = dist;
        best.discriminator = {edge, pol};
        best.edge_index = k;
        best.errors_ground = err_g;
        best.errors_excited = err_e;
      }
    }
  }
  best.error_sum = static_cast<double>(best.errors_ground) / static_cast<double>(ng) +
                   static_cast<double>(best.errors_excited) / static_cast<double>(ne);
  return best;
}

struct FidelityResult {
  double fidelity = 0.0;
  double p0 = 0.0;  // ground-labelled read Excited
  double p1 = 0.0;  // excited-labelled read Ground
  double sigma_p0 = 0.0;
  double sigma_p1 = 0.0;
  double sigma_fidelity = 0.0;
  std::size_t n_ground = 0;
  std::size_t n_excited = 0;
  std::size_t errors_ground = 0;
  std::size_t errors_excited = 0;
};

/// F = 1 - P0 - P1 with binomial standard errors.
template <typename T>
FidelityResult fidelity(std::span<const T> values_g, std::span<const T> values_e,
                        const Discriminator& disc) {
  if (values_g.empty() || values_e.empty()) {
    throw std::invalid_argument("fidelity: both ensembles must be non-empty");
  }
  FidelityResult r;
  r.n_ground = values_g.size();
  r.n_excited = values_e.size();
  for (const T& v : values_g) r.errors_ground += disc.classify(v) == QubitState::kExcited;
  for (const T& v : values_e) r.errors_excited += disc.classify(v) == QubitState::kGround;
  r.p0 = static_cast<double>(r.errors_ground) / static_cast<double>(r.n_ground);
  r.p1 = static_cast<double>(r.errors_excited) / static_cast<double>(r.n_excited);
  // Exact numerator so that F is exactly 0 when P0 + P1 = 1.
  const auto ng = static_cast<__int128>(r.n_ground);
  const auto ne = static_cast<__int128>(r.n_excited);
  const __int128 num = ng * ne - static_cast<__int128>(r.errors_ground) * ne - static_cast<__int128>(r.errors_excited) * ng;
  r.fidelity = static_cast<double>(num) / (static_cast<double>(r.n_ground) * static_cast<double>(r.n_excited));
  r.sigma_p0 = std::sqrt(r.p0 * (1.0 - r.p0) / static_cast<double>(r.n_ground));
  r.sigma_p1 = std::sqrt(r.p1 * (1.0 - r.p1) / static_cast<double>(r.n_excited));
  r.sigma_fidelity = std::hypot(r.sigma_p0, r.sigma_p1);
  return r;
}

inline FidelityResult fidelity(const std::vector<double>& values_g, const std::vector<double>& values_e,
                               const Discriminator& disc) {
  return fidelity(std::span<const double>(values_g), std::span<const double>(values_e), disc);
}

/// Common-range histograms over the pooled data, then the optimal threshold.
inline ThresholdChoice fit_discriminator(const std::vector<double>& values_g,
                                         const std::vector<double>& values_e, std::size_t bins) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto* vs : {&values_g, &values_e}) {
    for (double v : *vs) {
      if (!std::isfinite(v)) continue;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (!(lo < hi)) {
    // Degenerate data: any threshold separates nothing; widen around it.
    const double c = std::isfinite(lo) ? lo : 0.0;
    lo = c - 0.5;
    hi = c + 0.5;
  }
  const Histogram hg = build_histogram(values_g, bins, lo, hi);
  const Histogram he = build_histogram(values_e, bins, lo, hi);
  return optimal_threshold(hg, he);
}

struct ScoredDiscrimination {
  Discriminator discriminator;
  FidelityResult result;
};

inline ScoredDiscrimination best_fidelity(const std::vector<double>& values_g,
                                          const std::vector<double>& values_e, std::size_t bins) {
  const ThresholdChoice choice = fit_discriminator(values_g, values_e, bins);
  return {choice.discriminator, fidelity(values_g, values_e, choice.discriminator)};
}

}  // namespace qrl

#endif  // QRL_DISCRIMINATION_HPP
