#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "qrl/budget.hpp"
#include "qrl/discrimination.hpp"
#include "qrl/reset.hpp"

namespace {

qrl::BudgetInputs typical() {
  qrl::BudgetInputs in;
  in.raw_fidelity = {0.910, 0.001};
  in.heralded_fidelity = {0.939, 0.001};
  in.gamma_up = {0.0222, 0.001};
  in.gamma_down = {0.56, 0.01};
  in.purified_misclassification = {0.0007, 0.0001};
  in.t_window_ns = 90.0;
  in.t1_us = {1.8, 0.0};
  return in;
}

}  // namespace

TEST(Budget, EntriesSumToTotalLoss) {
  const auto b = qrl::fidelity_budget(typical());
  EXPECT_NEAR(b.sum(), b.total_loss, 1e-15);
  EXPECT_DOUBLE_EQ(b.total_loss, 0.09);
  for (std::size_t i = 0; i < b.entries.size(); ++i) EXPECT_EQ(b.entries[i].name, qrl::FidelityBudget::kNames[i]);
}

TEST(Budget, AnalyticT1EntryAtNominalWindow) {
  const auto b = qrl::fidelity_budget(typical());
  EXPECT_NEAR(b.at("t1_decay").loss, -std::expm1(-0.090 / 1.8), 1e-15);
  EXPECT_NEAR(b.at("t1_decay").loss, 0.049, 0.001);
}

TEST(Budget, EntryDefinitions) {
  const auto in = typical();
  const auto b = qrl::fidelity_budget(in);
  const double t = in.t_window_ns * 1e-3;
  EXPECT_NEAR(b.at("thermal_population").loss, 0.029, 1e-12);
  EXPECT_NEAR(b.at("gamma_up").loss, -std::expm1(-in.gamma_up.value * t), 1e-15);
  EXPECT_NEAR(b.at("gamma_up").loss, 0.002, 0.0001);
  EXPECT_NEAR(b.at("gamma_down").loss, -std::expm1(-(in.gamma_down.value - 1.0 / 1.8) * t), 1e-15);
  EXPECT_EQ(b.at("snr").loss, 0.0007);
  EXPECT_THROW(b.at("nonsense"), std::out_of_range);
}

TEST(Budget, GammaDownBelowT1RateIsNegative) {
  auto in = typical();
  in.gamma_down = {0.5, 0.01};
  EXPECT_LT(qrl::fidelity_budget(in).at("gamma_down").loss, 0.0);
}

TEST(Budget, PerfectSystemHasNoLoss) {
  qrl::BudgetInputs in;
  in.raw_fidelity = {1.0, 0.0};
  in.heralded_fidelity = {1.0, 0.0};
  in.t1_us = {std::numeric_limits<double>::infinity(), 0.0};
  const auto b = qrl::fidelity_budget(in);
  EXPECT_EQ(b.total_loss, 0.0);
  for (const auto& e : b.entries) EXPECT_EQ(e.loss, 0.0) << e.name;
}

TEST(Budget, UncertaintiesPropagate) {
  auto in = typical();
  in.t1_us = {1.8, 0.09};
  const auto b = qrl::fidelity_budget(in);
  const double t = 0.09;
  const double rate = 1.0 / 1.8;
  EXPECT_NEAR(b.at("t1_decay").sigma, std::exp(-rate * t) * t * 0.09 / (1.8 * 1.8), 1e-12);
  EXPECT_NEAR(b.at("thermal_population").sigma, std::hypot(0.001, 0.001), 1e-15);
  EXPECT_GT(b.at("remaining").sigma, b.sigma_total);
}

TEST(Budget, RejectsNonPositiveT1) {
  auto in = typical();
  in.t1_us = {0.0, 0.0};
  EXPECT_THROW(qrl::fidelity_budget(in), std::invalid_argument);
}

TEST(Reset, IdealSystemResetsPerfectly) {
  qrl::QubitParams q;
  q.t_eff = 0.0;
  q.pi_pulse_error = 0.0;
  q.gamma_up_readout = 0.0;
  qrl::ReadoutParams r;
  r.noiseless = true;
  const auto seq = qrl::make_sequence(qrl::SequenceConfig{}, 10.0);
  const auto res = qrl::evaluate_reset(q, r, seq, {0.0, qrl::Polarity::kExcitedAbove}, 2000, 3);
  EXPECT_EQ(res.fidelity, 1.0);
  EXPECT_EQ(res.herald_excited_fraction, 0.0);
}

TEST(Reset, DefaultsApproximateMisassignmentPlusDecay) {
  const auto seq = qrl::make_sequence(qrl::SequenceConfig{}, 10.0);
  const auto res = qrl::evaluate_reset({}, {}, seq, {0.0, qrl::Polarity::kExcitedAbove}, 20000, 5);
  EXPECT_GT(res.fidelity, 0.97);
  EXPECT_LT(res.fidelity, 1.0);
  EXPECT_NEAR(res.sigma, std::sqrt(res.fidelity * (1 - res.fidelity) / 20000.0), 1e-15);
  // The π pulse fires on roughly the thermal population.
  EXPECT_NEAR(res.herald_excited_fraction, 0.014, 0.005);
}

TEST(Reset, NeedsHerald) {
  qrl::SequenceConfig cfg;
  cfg.herald_enabled = false;
  EXPECT_THROW(qrl::evaluate_reset({}, {}, qrl::make_sequence(cfg, 10.0), {}, 10, 1), std::invalid_argument);
}
