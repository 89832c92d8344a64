#ifndef QRL_RESET_HPP
#define QRL_RESET_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>

#include "qrl/discrimination.hpp"
#include "qrl/selection.hpp"
#include "qrl/trajectory.hpp"

namespace qrl {

struct ResetResult {
  double fidelity = 0.0;  // fraction verified Ground at t_D
  double sigma = 0.0;
  std::size_t n_shots = 0;
  double herald_excited_fraction = 0.0;  // shots where the π pulse fired
  double true_ground_fraction = 0.0;     // hidden truth at readout start
};

/// Single-iteration conditional reset: herald at t_S, π pulse if the herald
/// reads Excited, verification readout at t_D. Herald and verification both
/// use `disc`.
inline ResetResult evaluate_reset(const QubitParams& qubit, const ReadoutParams& readout,
                                  const PulseSequence& sequence, const Discriminator& disc,
                                  std::size_t n_shots, std::uint64_t master_seed, std::size_t workers = 0) {
  if (!sequence.has_herald()) throw std::invalid_argument("evaluate_reset: sequence needs a herald window");
  if (disc.polarity != Polarity::kExcitedAbove) {
    throw std::invalid_argument("evaluate_reset: feedback expects Excited above the threshold");
  }
  EnsembleSpec spec{qubit, readout, sequence, QubitState::kGround, PrepPolicy::kHeraldFeedback,
                    FeedbackRule{disc.threshold}};
  const auto records = simulate_ensemble(spec, n_shots, master_seed, workers);
  ResetResult r;
  r.n_shots = records.size();
  std::size_t ok = 0;
  std::size_t fired = 0;
  std::size_t truly_ground = 0;
  for (const auto& rec : records) {
    ok += disc.classify(extract_value(rec, rec.sequence.t_D)) == QubitState::kGround;
    fired += rec.sequence.prep_pi_pulse;
    truly_ground += rec.truth->state_at(rec.sequence.readout_window.start) == QubitState::kGround;
  }
  const double n = static_cast<double>(r.n_shots);
  r.fidelity = static_cast<double>(ok) / n;
  r.sigma = std::sqrt(r.fidelity * (1.0 - r.fidelity) / n);
  r.herald_excited_fraction = static_cast<double>(fired) / n;
  r.true_ground_fraction = static_cast<double>(truly_ground) / n;
  return r;
}

}  // namespace qrl

#endif  // QRL_RESET_HPP
