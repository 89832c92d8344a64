#ifndef QRL_SELECTION_HPP
#define QRL_SELECTION_HPP

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "qrl/discrimination.hpp"
#include "qrl/trajectory.hpp"

namespace qrl {

/// Single-bin sample at time t. t must be on the grid and inside a window in
/// which the readout drive is on (the main readout or the herald).
inline double extract_value(const ExperimentRecord& record, double t) {
  const HomodyneTrace& tr = record.trace;
  if (!std::isfinite(t) || !on_grid(t, tr.sample_dt)) {
    throw std::invalid_argument("extract_value: t=" + std::to_string(t) + " ns is not on the sample grid");
  }
  const bool in_readout = tr.readout_window.contains(t);
  const bool in_herald = record.sequence.herald_window && record.sequence.herald_window->contains(t);
  if (!in_readout && !in_herald) {
    throw std::invalid_argument("extract_value: t=" + std::to_string(t) + " ns is outside the readout window");
  }
  const std::size_t i = grid_index(t, tr.sample_dt);
  if (i >= tr.samples.size()) throw std::invalid_argument("extract_value: t beyond the trace");
  return static_cast<double>(tr.samples[i]);
}

enum class Marker { kS, kA, kB, kD };

inline double marker_time(const PulseSequence& seq, Marker m) {
  switch (m) {
    case Marker::kS: return seq.t_S;
    case Marker::kA: return seq.t_A;
    case Marker::kB: return seq.t_B;
    case Marker::kD: return seq.t_D;
  }
  return seq.t_D;
}

/// Values at a marker, split by prepared label. An optional index list picks
/// a subset of the records.
struct LabelledValues {
  std::vector<double> ground;
  std::vector<double> excited;
};

inline LabelledValues values_at(const std::vector<ExperimentRecord>& records, Marker m,
                                const std::vector<std::size_t>* subset = nullptr) {
  LabelledValues out;
  auto take = [&](const ExperimentRecord& r) {
    const double v = extract_value(r, marker_time(r.sequence, m));
    (r.prepared_label == QubitState::kGround ? out.ground : out.excited).push_back(v);
  };
  if (subset) {
    for (std::size_t i : *subset) take(records.at(i));
  } else {
    for (const auto& r : records) take(r);
  }
  return out;
}

struct PurifiedRecord {
  std::size_t index = 0;
  QubitState agreed = QubitState::kGround;  // reading shared by t_A and t_B
  double value_d = 0.0;                     // sample at t_D
};

struct PurifyResult {
  std::vector<PurifiedRecord> survivors;
  std::size_t examined = 0;
  // t_D values of survivors grouped by the agreed reading: the "pure" pointer
  // state distributions.
  std::vector<double> pure_ground;
  std::vector<double> pure_excited;
  // Survivors whose t_D reading disagrees with the agreed state.
  std::size_t misclassified = 0;

  double retained_fraction() const {
    return examined ? static_cast<double>(survivors.size()) / static_cast<double>(examined) : 0.0;
  }
  double misclassification_rate() const {
    return survivors.empty() ? 0.0
                             : static_cast<double>(misclassified) / static_cast<double>(survivors.size());
  }
  std::vector<std::size_t> retained_indices() const {
    std::vector<std::size_t> idx;
    idx.reserve(survivors.size());
    for (const auto& s : survivors) idx.push_back(s.index);
    return idx;
  }
};

/// Keeps a record iff the single-bin readings at t_A and t_B agree.
inline PurifyResult two_point_purify(const std::vector<ExperimentRecord>& records,
                                     const Discriminator& disc) {
  PurifyResult out;
  out.examined = records.size();
  for (std::size_t i = 0; i < records.size(); ++i) {
    const ExperimentRecord& r = records[i];
    const QubitState a = disc.classify(extract_value(r, r.sequence.t_A));
    const QubitState b = disc.classify(extract_value(r, r.sequence.t_B));
    if (a != b) continue;
    const double vd = extract_value(r, r.sequence.t_D);
    out.survivors.push_back({i, a, vd});
    (a == QubitState::kGround ? out.pure_ground : out.pure_excited).push_back(vd);
    if (disc.classify(vd) != a) ++out.misclassified;
  }
  return out;
}

/// Keeps a record iff the herald sample at t_S reads Ground.
inline std::vector<std::size_t> herald_select(const std::vector<ExperimentRecord>& records,
                                              const Discriminator& disc) {
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const ExperimentRecord& r = records[i];
    if (!r.sequence.herald_window || !std::isfinite(r.sequence.t_S)) {
      throw std::invalid_argument("herald_select: record " + std::to_string(i) + " has no herald segment");
    }
    if (disc.classify(extract_value(r, r.sequence.t_S)) == QubitState::kGround) kept.push_back(i);
  }
  return kept;
}

}  // namespace qrl

#endif  // QRL_SELECTION_HPP
