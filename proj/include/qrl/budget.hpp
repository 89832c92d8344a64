#ifndef QRL_BUDGET_HPP
#define QRL_BUDGET_HPP

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

#include "qrl/model.hpp"

namespace qrl {

struct BudgetEntry {
  std::string_view name;
  double loss = 0.0;
  double sigma = 0.0;
};

/// Fidelity loss split into named contributions. `remaining` is defined as
/// the residual, so the entries always sum to total_loss.
struct FidelityBudget {
  static constexpr std::array<std::string_view, 6> kNames = {
      "t1_decay", "thermal_population", "gamma_up", "gamma_down", "snr", "remaining"};

  std::array<BudgetEntry, 6> entries{};
  double total_loss = 0.0;
  double sigma_total = 0.0;

  const BudgetEntry& at(std::string_view name) const {
    for (const auto& e : entries) {
      if (e.name == name) return e;
    }
    throw std::out_of_range("no budget entry named " + std::string(name));
  }
  double sum() const {
    double s = 0.0;
    for (const auto& e : entries) s += e.loss;
    return s;
  }
};

struct Measured {
  double value = 0.0;
  double sigma = 0.0;
};

struct BudgetInputs {
  Measured raw_fidelity;
  Measured heralded_fidelity;
  Measured gamma_up;    // 1/us, from jump statistics
  Measured gamma_down;  // 1/us, from jump statistics
  Measured purified_misclassification;
  double t_window_ns = 90.0;
  Measured t1_us;  // ensemble T1
};

inline FidelityBudget fidelity_budget(const BudgetInputs& in) {
  if (!(in.t1_us.value > 0.0)) throw std::invalid_argument("fidelity_budget: t1 must be > 0");
  const double t = in.t_window_ns * 1e-3;
  FidelityBudget b;
  auto rate_loss = [&](Measured rate) {
    const double survive = std::exp(-rate.value * t);
    return BudgetEntry{{}, 1.0 - survive, survive * t * rate.sigma};
  };

  const Measured t1_rate{1.0 / in.t1_us.value, in.t1_us.sigma / (in.t1_us.value * in.t1_us.value)};
  BudgetEntry t1 = rate_loss(t1_rate);
  BudgetEntry thermal{{}, in.heralded_fidelity.value - in.raw_fidelity.value,
                      std::hypot(in.heralded_fidelity.sigma, in.raw_fidelity.sigma)};
  BudgetEntry up = rate_loss(in.gamma_up);
  // Downward rate in excess of what T1 already accounts for; may be negative.
  BudgetEntry down = rate_loss({in.gamma_down.value - t1_rate.value, std::hypot(in.gamma_down.sigma, t1_rate.sigma)});
  BudgetEntry snr{{}, in.purified_misclassification.value, in.purified_misclassification.sigma};

  b.total_loss = 1.0 - in.raw_fidelity.value;
  b.sigma_total = in.raw_fidelity.sigma;
  const double named = t1.loss + thermal.loss + up.loss + down.loss + snr.loss;
  BudgetEntry remaining{{}, b.total_loss - named,
                        std::sqrt(b.sigma_total * b.sigma_total + t1.sigma * t1.sigma +
                                  thermal.sigma * thermal.sigma + up.sigma * up.sigma +
                                  down.sigma * down.sigma + snr.sigma * snr.sigma)};
  const std::array<BudgetEntry, 6> values = {t1, thermal, up, down, snr, remaining};
  for (std::size_t i = 0; i < values.size(); ++i) {
    b.entries[i] = values[i];
    b.entries[i].name = FidelityBudget::kNames[i];
  }
  return b;
}

}  // namespace qrl

#endif  // QRL_BUDGET_HPP
