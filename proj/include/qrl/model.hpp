#ifndef QRL_MODEL_HPP
#define QRL_MODEL_HPP

#include <cmath>
#include <stdexcept>
#include <string>

namespace qrl {

// Planck over Boltzmann, K per GHz.
inline constexpr double kPlanckOverBoltzmannKPerGHz = 6.62607015e-34 / 1.380649e-23 * 1e9;
inline constexpr double kPi = 3.14159265358979323846;

/// Qubit parameters. Times in microseconds, rates in 1/us, f01 in GHz,
/// t_eff in millikelvin.
struct QubitParams {
  double t1_idle = 1.8;
  double f01 = 7.80;
  double t_eff = 88.0;
  // Readout-induced upward rate, on top of the thermal channel. The default
  // makes the total upward rate during readout about 0.0222/us, which is a
  // 0.2% loss over a 90 ns discrimination window.
  double gamma_up_readout = 0.0144;
  double pi_pulse_error = 0.015;

  void validate() const {
    if (!(t1_idle > 0.0)) throw std::invalid_argument("qubit.t1_idle must be > 0");
    if (!(f01 > 0.0)) throw std::invalid_argument("qubit.f01 must be > 0");
    if (!(t_eff >= 0.0)) throw std::invalid_argument("qubit.t_eff must be >= 0");
    if (!(gamma_up_readout >= 0.0)) {
      throw std::invalid_argument("qubit.gamma_up_readout must be >= 0");
    }
    if (!(pi_pulse_error >= 0.0 && pi_pulse_error < 1.0)) {
      throw std::invalid_argument("qubit.pi_pulse_error must be in [0, 1)");
    }
  }

  bool operator==(const QubitParams&) const = default;
};

/// Readout chain parameters. Times in ns, bandwidth in MHz, voltages in
/// units of the pointer separation.
struct ReadoutParams {
  double nbar = 14.6;
  double sample_dt = 10.0;
  double system_bandwidth = 7.0;
  double pointer_separation = 1.0;
  // Chosen so that pointer_snr(14.6) = 6.5.
  double snr_calibration = 1.7011277484181946;
  double ringup_start = 0.0;
  double equilibration_time = 90.0;
  double backaction_knee = 100.0;
  double backaction_exponent = 1.0;
  // Disables the additive amplifier noise entirely (zero-noise limit).
  bool noiseless = false;

  void validate() const {
    if (!(nbar >= 0.0)) throw std::invalid_argument("readout.nbar must be >= 0");
    if (!(sample_dt > 0.0)) throw std::invalid_argument("readout.sample_dt must be > 0");
    if (!(system_bandwidth > 0.0)) {
      throw std::invalid_argument("readout.system_bandwidth must be > 0");
    }
    if (!(pointer_separation > 0.0)) {
      throw std::invalid_argument("readout.pointer_separation must be > 0");
    }
    if (!(snr_calibration > 0.0)) {
      throw std::invalid_argument("readout.snr_calibration must be > 0");
    }
    if (!(backaction_knee > 0.0)) {
      throw std::invalid_argument("readout.backaction_knee must be > 0");
    }
    if (!(backaction_exponent >= 0.0)) {
      throw std::invalid_argument("readout.backaction_exponent must be >= 0");
    }
  }

  /// Single-pole time constant of the cavity + amplifier chain, in ns.
  double tau_sys() const { return 1.0e3 / (2.0 * kPi * system_bandwidth); }

  bool operator==(const ReadoutParams&) const = default;
};

/// Upward and downward transition rates, 1/us.
struct RatePair {
  double gamma_up = 0.0;
  double gamma_down = 0.0;

  double total() const { return gamma_up + gamma_down; }
  bool operator==(const RatePair&) const = default;
};

/// Equilibrium excited-state population of a two-level system at t_eff.
inline double thermal_population(const QubitParams& qubit) {
  if (!(qubit.f01 > 0.0)) throw std::invalid_argument("f01 must be > 0");
  if (qubit.t_eff <= 0.0) return 0.0;
  const double x = kPlanckOverBoltzmannKPerGHz * qubit.f01 / (qubit.t_eff * 1e-3);
  const double boltz = std::exp(-x);
  return boltz / (1.0 + boltz);
}

/// Transition rates with the readout drive off or on.
///
/// With the drive off the rates obey detailed balance at t_eff and sum to
/// 1/t1_idle. With the drive on, gamma_up_readout is added to the upward
/// channel and the downward channel picks up a backaction term that is zero
/// up to the knee photon number and grows as (nbar/knee - 1)^exponent past it.
inline RatePair effective_rates(const QubitParams& qubit, const ReadoutParams& readout,
                                bool readout_on) {
  if (readout.nbar < 0.0) throw std::invalid_argument("readout.nbar must be >= 0");
  const double p_th = thermal_population(qubit);
  const double gamma_1 = 1.0 / qubit.t1_idle;
  RatePair rates{p_th * gamma_1, (1.0 - p_th) * gamma_1};
  if (readout_on) {
    rates.gamma_up += qubit.gamma_up_readout;
    const double excess = readout.nbar / readout.backaction_knee - 1.0;
    if (excess > 0.0) {
      rates.gamma_down += gamma_1 * std::pow(excess, readout.backaction_exponent);
    }
  }
  return rates;
}

/// Per-bin pointer SNR: separation over single-bin noise standard deviation.
inline double pointer_snr(const ReadoutParams& readout) {
  if (readout.nbar < 0.0) throw std::invalid_argument("readout.nbar must be >= 0");
  return readout.snr_calibration * std::sqrt(readout.nbar);
}

/// Single-bin noise standard deviation implied by the SNR law.
inline double noise_sigma(const ReadoutParams& readout) {
  const double snr = pointer_snr(readout);
  if (!(snr > 0.0)) throw std::invalid_argument("pointer SNR must be > 0");
  return readout.pointer_separation / snr;
}

}  // namespace qrl

#endif  // QRL_MODEL_HPP
