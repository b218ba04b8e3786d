#include <catch2/catch_amalgamated.hpp>

#include "qsm/fitkit.hpp"
#include "qsm/knoise.hpp"
#include "qsm/rng.hpp"

using namespace qsm;

namespace {

FidelitySeries plateau_series(double gamma, double f0, int n, int t_max) {
  const double floor = std::pow(0.5, n);
  FidelitySeries s;
  for (int t = 0; t <= t_max; ++t) {
    s.times.push_back(t);
    s.values.push_back(std::exp(-gamma * t) * (f0 - floor) + floor);
    s.stderrs.push_back(0.0);
  }
  return s;
}

// measured fidelity: binomial shot noise per initial condition
double shot_noise(double f, long shots_per_ic, int ic_count, Rng& rng) {
  double acc = 0.0;
  for (int ic = 0; ic < ic_count; ++ic)
    acc += double(rng.next_binomial(shots_per_ic, f)) / double(shots_per_ic);
  return acc / ic_count;
}

FidelitySeries gate_based_series(const NoiseRates& rates, Regime regime, int n, int m, int t_max) {
  FidelitySeries s;
  for (int t = 0; t <= t_max; ++t) {
    s.times.push_back(t);
    s.values.push_back(f_gate_based(2.0 * t, n, m, rates, regime, GateLayout::serial()));
    s.stderrs.push_back(0.0);
  }
  return s;
}

}  // namespace

TEST_CASE("fit_exp_plateau recovers exact synthetic parameters") {
  const auto s = plateau_series(0.4, 0.95, 3, 10);
  const auto fit = fit_exp_plateau(s, 3);
  CHECK_THAT(fit.params.at("gamma"), Catch::Matchers::WithinAbs(0.4, 1e-8));
  CHECK_THAT(fit.params.at("f0"), Catch::Matchers::WithinAbs(0.95, 1e-8));
  CHECK(fit.residual_rms <= 1e-10);
  CHECK(fit.converged);
}

TEST_CASE("fit_exp_plateau under shot noise recovers gamma within 5 percent (median)") {
  Rng rng(stream_key(404));
  std::vector<double> errs;
  for (int trial = 0; trial < 100; ++trial) {
    FidelitySeries s = plateau_series(0.4, 0.95, 3, 6);
    for (std::size_t i = 0; i < s.values.size(); ++i)
      s.values[i] = shot_noise(s.values[i], 8192, 8, rng);
    const auto fit = fit_exp_plateau(s, 3);
    errs.push_back(std::abs(fit.params.at("gamma") - 0.4) / 0.4);
  }
  std::nth_element(errs.begin(), errs.begin() + errs.size() / 2, errs.end());
  CHECK(errs[errs.size() / 2] <= 0.05);
}

TEST_CASE("fit_exp_plateau rejects a series stuck at the floor") {
  FidelitySeries s;
  for (int t = 0; t <= 5; ++t) {
    s.times.push_back(t);
    s.values.push_back(0.125);
    s.stderrs.push_back(0.0);
  }
  CHECK_THROWS_AS(fit_exp_plateau(s, 3), NumericalError);
  FidelitySeries two = plateau_series(0.4, 0.95, 3, 1);
  CHECK_THROWS_AS(fit_exp_plateau(two, 3), std::invalid_argument);
}

TEST_CASE("extract_cnot_error reproduces the reference arithmetic") {
  CHECK_THAT(extract_cnot_error(1.0, 0.7215, 3, 66), Catch::Matchers::WithinRel(5.79e-3, 5e-3));
  CHECK_THAT(extract_cnot_error(1.0, 0.3960, 3, 66), Catch::Matchers::WithinRel(1.76e-2, 5e-3));
  CHECK(extract_cnot_error(1.0, 1.0, 3, 66) == 0.0);
  CHECK_THROWS_AS(extract_cnot_error(0.7, 0.9, 3, 66), std::domain_error);
  CHECK_THROWS_AS(extract_cnot_error(1.0, 0.10, 3, 66), std::domain_error);  // below 1/8
}

TEST_CASE("extract_cnot_error inverts the forward model exactly") {
  const int n = 3, m = 66;
  const double floor = std::pow(0.5, n);
  for (double eps : {1e-4, 1e-3, 5.79e-3, 1.76e-2, 2.59e-2})
    for (double f0 : {1.0, 0.95, 0.8}) {
      const double f1 = (f0 - floor) * std::pow(1.0 - eps, m) + floor;
      REQUIRE_THAT(extract_cnot_error(f0, f1, n, m), Catch::Matchers::WithinAbs(eps, 1e-12));
    }
}

TEST_CASE("rates_to_physical matches the reference conversions") {
  auto close3 = [](double value, double want) {
    // agreement after rounding to three significant figures
    return std::abs(value - want) <= std::abs(want) * 5.1e-3;
  };
  const double t_step = 11.55e-6;
  auto [t1a, t2a] = rates_to_physical(0.334, 1.271, t_step);
  CHECK(close3(t1a, 34.6e-6));
  CHECK(close3(t2a, 14.4e-6));
  auto [t1b, t2b] = rates_to_physical(0.128, 1.486, t_step);
  CHECK(close3(t1b, 90.2e-6));
  CHECK(close3(t2b, 14.3e-6));
  auto [t1c, t2c] = rates_to_physical(1.0, 1.0, 1.0);
  CHECK(t1c == 1.0);
  CHECK(t2c == 1.0);
  CHECK_THROWS_AS(rates_to_physical(0.0, 0.0, 1.0), std::domain_error);
}

TEST_CASE("fit_rates recovers the generator exactly on noiseless data") {
  RatesFitContext ctx;
  ctx.n = 3;
  ctx.gates_per_step = 33;
  const NoiseRates truth(0.334, 1.271);
  const auto loc = gate_based_series(truth, Regime::semi_localized, 3, 33, 5);
  const auto dif = gate_based_series(truth, Regime::diffusive, 3, 33, 5);
  const auto fit = fit_rates(loc, dif, RatesModel::gate_based_serial, ctx);
  CHECK_THAT(fit.params.at("nu1"), Catch::Matchers::WithinAbs(0.334, 1e-6));
  CHECK_THAT(fit.params.at("nu2"), Catch::Matchers::WithinAbs(1.271, 1e-6));
  CHECK(fit.residual_rms <= 1e-8);
}

TEST_CASE("swapping the regime series degrades the fit") {
  RatesFitContext ctx;
  const NoiseRates truth(0.334, 1.271);
  const auto loc = gate_based_series(truth, Regime::semi_localized, 3, 33, 5);
  const auto dif = gate_based_series(truth, Regime::diffusive, 3, 33, 5);
  const auto good = fit_rates(loc, dif, RatesModel::gate_based_serial, ctx);
  const auto swapped = fit_rates(dif, loc, RatesModel::gate_based_serial, ctx);
  CHECK(swapped.residual_rms > 100.0 * std::max(good.residual_rms, 1e-12));
}

TEST_CASE("fit_rates smoke test with shot noise") {
  RatesFitContext ctx;
  Rng rng(stream_key(777));
  const NoiseRates truth(0.334, 1.271);
  for (int trial = 0; trial < 2; ++trial) {
    auto loc = gate_based_series(truth, Regime::semi_localized, 3, 33, 5);
    auto dif = gate_based_series(truth, Regime::diffusive, 3, 33, 5);
    for (std::size_t i = 0; i < loc.values.size(); ++i) {
      loc.values[i] = shot_noise(loc.values[i], 8192, 8, rng);
      dif.values[i] = shot_noise(dif.values[i], 8192, 8, rng);
    }
    const auto fit = fit_rates(loc, dif, RatesModel::gate_based_serial, ctx);
    CHECK(std::abs(fit.params.at("nu2") - truth.nu2) / truth.nu2 <= 0.10);
  }
}

TEST_CASE("simulator-backed fit models run and land near the generator") {
  // keep the grids tiny: these forward models run the actual engines
  RatesFitContext ctx;
  ctx.n = 3;
  ctx.params_localized = QsmParams(3, 1, 0.1);
  ctx.params_diffusive = QsmParams(3, 1, 10.0);
  ctx.mode = LindbladMode::alternating_pairs;
  ctx.start_grid = 1;  // single start at the grid center
  const NoiseRates truth(0.1, 0.2);
  EchoOptions opts;
  const auto loc = echo_lindblad(ctx.params_localized, truth, 3, ctx.mode, all_momenta(3), opts);
  const auto dif = echo_lindblad(ctx.params_diffusive, truth, 3, ctx.mode, all_momenta(3), opts);
  const auto fit = fit_rates(loc, dif, RatesModel::lindblad_sim, ctx);
  CHECK_THAT(fit.params.at("nu1"), Catch::Matchers::WithinAbs(0.1, 5e-3));
  CHECK_THAT(fit.params.at("nu2"), Catch::Matchers::WithinAbs(0.2, 5e-3));
  CHECK(fit.residual_rms <= 1e-6);
}

TEST_CASE("fitters are scale consistent") {
  const auto s = plateau_series(0.4, 0.95, 3, 8);
  FidelitySeries scaled = s;
  const double c = 2.5;
  for (auto& t : scaled.times) t *= c;
  const auto fit = fit_exp_plateau(s, 3);
  const auto fit_scaled = fit_exp_plateau(scaled, 3);
  CHECK_THAT(fit_scaled.params.at("gamma"),
             Catch::Matchers::WithinAbs(fit.params.at("gamma") / c, 1e-10));

  CHECK_THAT(fgr_rate(scaled, 0.0, 8.0 * c, 30),
             Catch::Matchers::WithinAbs(fgr_rate(s, 0.0, 8.0, 30) / c, 1e-10));

  // joint rate fit: the reported per-step decay rates divide by c
  RatesFitContext ctx;
  const NoiseRates truth(0.334, 1.271);
  const auto loc = gate_based_series(truth, Regime::semi_localized, 3, 33, 5);
  const auto dif = gate_based_series(truth, Regime::diffusive, 3, 33, 5);
  FidelitySeries loc_s = loc, dif_s = dif;
  for (auto& t : loc_s.times) t *= c;
  for (auto& t : dif_s.times) t *= c;
  const auto base = fit_rates(loc, dif, RatesModel::gate_based_serial, ctx);
  const auto scaled_fit = fit_rates(loc_s, dif_s, RatesModel::gate_based_serial, ctx);
  CHECK_THAT(scaled_fit.params.at("gamma_localized"),
             Catch::Matchers::WithinAbs(base.params.at("gamma_localized") / c, 1e-10));
  CHECK_THAT(scaled_fit.params.at("gamma_diffusive"),
             Catch::Matchers::WithinAbs(base.params.at("gamma_diffusive") / c, 1e-10));
}

TEST_CASE("fit uncertainty shrinks like one over root shots") {
  Rng rng(stream_key(31337));
  std::vector<double> log_shots, log_se;
  for (int e = 10; e <= 16; ++e) {
    const long shots = 1L << e;
    double se_acc = 0.0;
    const int trials = 6;
    for (int trial = 0; trial < trials; ++trial) {
      FidelitySeries s = plateau_series(0.4, 0.95, 3, 6);
      for (std::size_t i = 0; i < s.values.size(); ++i)
        s.values[i] = shot_noise(s.values[i], shots, 8, rng);
      se_acc += fit_exp_plateau(s, 3).stderrs.at("gamma");
    }
    log_shots.push_back(std::log(double(shots)));
    log_se.push_back(std::log(se_acc / trials));
  }
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < log_shots.size(); ++i) {
    mx += log_shots[i];
    my += log_se[i];
  }
  mx /= double(log_shots.size());
  my /= double(log_se.size());
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < log_shots.size(); ++i) {
    sxx += (log_shots[i] - mx) * (log_shots[i] - mx);
    sxy += (log_shots[i] - mx) * (log_se[i] - my);
  }
  const double slope = sxy / sxx;
  CHECK_THAT(slope, Catch::Matchers::WithinAbs(-0.5, 0.1));  // 20 percent of 0.5
}

TEST_CASE("fit_algebraic recovers power laws and flags exponentials") {
  FidelitySeries alg;
  for (int t = 1; t <= 20; ++t) {
    alg.times.push_back(t);
    alg.values.push_back(0.8 / t);
    alg.stderrs.push_back(0.0);
  }
  // n large enough that the mixed floor is negligible against f(20) = 0.04
  const auto fit = fit_algebraic(alg, 1.0, 20.0, 40);
  CHECK_THAT(fit.params.at("exponent"), Catch::Matchers::WithinAbs(-1.0, 1e-8));
  CHECK_THAT(fit.params.at("prefactor"), Catch::Matchers::WithinAbs(0.8, 1e-7));
  CHECK(std::abs(fit.params.at("curvature")) <= 1e-8);

  FidelitySeries expo;
  for (int t = 1; t <= 20; ++t) {
    expo.times.push_back(t);
    expo.values.push_back(std::exp(-t / 3.0));
    expo.stderrs.push_back(0.0);
  }
  const auto bad = fit_algebraic(expo, 1.0, 20.0, 40);
  CHECK(std::abs(bad.params.at("curvature")) > 0.1);  // strongly time-dependent exponent

  CHECK_THROWS_AS(fit_algebraic(alg, -1.0, 5.0, 40), std::invalid_argument);
}
