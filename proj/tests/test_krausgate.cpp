#include <catch2/catch_amalgamated.hpp>
#include <random>

#include "qsm/krausgate.hpp"
#include "testutil.hpp"

using namespace qsm;

TEST_CASE("thermal channel construction and completeness") {
  CHECK(thermal_kraus(100e-6, 50e-6, 0.0).is_identity());
  CHECK_THROWS_AS(thermal_kraus(100e-6, 250e-6, 1e-6), std::domain_error);
  CHECK_THROWS_AS(GateNoiseConfig(100e-6, 250e-6), std::domain_error);
  CHECK_THROWS_AS(thermal_kraus(100e-6, 50e-6, -1.0), std::invalid_argument);

  for (double t1 : {20e-6, 100e-6, 250e-6})
    for (double ratio : {0.1, 0.5, 1.0, 2.0})  // T2 up to the 2*T1 boundary
      for (double d : {35e-9, 350e-9, 5e-6}) {
        const auto ch = thermal_kraus(t1, ratio * t1, d);
        CMat sum = CMat::Zero(2, 2);
        for (const auto& k : ch.ops) sum += (k.adjoint() * k).eval();
        REQUIRE(max_abs(CMat(sum - CMat::Identity(2, 2))) <= 1e-12);
      }
}

TEST_CASE("thermal channel matches the master-equation decay") {
  const double t1 = 80e-6, t2 = 30e-6, d = 2e-6;
  const auto ch = thermal_kraus(t1, t2, d);
  std::mt19937_64 gen(13);
  for (int trial = 0; trial < 5; ++trial) {
    const auto dm = testutil::random_density(1, gen);
    CMat got = dm.elements;
    detail::apply_channel_1q(got, ch, 0);
    // dimensionless rates reproducing the same physical channel over unit time
    const double nu1 = d / t1;
    const double nu2 = 2.0 * d / t2 - d / t1;
    DecaySchedule decay{{SegmentOp::none(), 1.0, {0}}};
    const auto want = evolve_master(DensityMatrix{1, dm.elements}, decay, NoiseRates(nu1, nu2));
    REQUIRE(max_abs(CMat(got - want.elements)) <= 1e-10);
  }
  // population of |1><1| decays by exactly e^{-d/T1}
  CMat excited = projector(basis_state(1, 0)).elements;
  detail::apply_channel_1q(excited, ch, 0);
  CHECK_THAT(excited(1, 1).real(), Catch::Matchers::WithinAbs(std::exp(-d / t1), 1e-14));
}

TEST_CASE("noiseless configuration reproduces the exact circuit") {
  const QsmParams p(2, 1, 1.7);
  const Circuit native = lower_native(qsm_circuit(p));
  const GateNoiseConfig cfg(1.0, 1.0);  // seconds; gate durations are ~1e-7
  std::mt19937_64 gen(3);
  const auto dm = testutil::random_density(2, gen);
  const auto noisy = run_noisy_circuit(native, cfg, dm);
  const CMat u = to_unitary(native);
  // decay over ~1 us of gates at T1 = 1 s is ~1e-6; compare against that scale
  CHECK(max_abs(CMat(noisy.elements - u * dm.elements * u.adjoint())) <= 1e-5);

  GateNoiseConfig off(1.0, 1.0);
  for (auto& [kind, d] : off.durations) d = 0.0;
  const auto exact = run_noisy_circuit(native, off, dm);
  CHECK(max_abs(CMat(exact.elements - u * dm.elements * u.adjoint())) <= 1e-13);
}

TEST_CASE("single CNOT on |11> leaks population by the relaxation factors") {
  Circuit c;
  c.n = 2;
  c.add(Gate(GateKind::CNOT, 0, 1));
  const GateNoiseConfig cfg(100e-6, 120e-6);
  const double a = std::exp(-cfg.duration_of(GateKind::CNOT) / cfg.t1);
  // |11> = index 3 -> CNOT(control 0) flips qubit 1 -> index 1
  DensityMatrix dm0{2, CMat::Zero(4, 4)};
  dm0.elements(3, 3) = 1.0;
  const auto out = run_noisy_circuit(c, cfg, dm0);
  CHECK_THAT(out.elements(1, 1).real(), Catch::Matchers::WithinAbs(a, 1e-12));
  CHECK_THAT(out.elements(0, 0).real(), Catch::Matchers::WithinAbs(1.0 - a, 1e-12));
  CHECK(validate_density(out).ok());
}

TEST_CASE("RZ-only circuits conjugate with zero decay") {
  Circuit c;
  c.n = 2;
  c.add(Gate(GateKind::RZ, 0, 0.71));
  c.add(Gate(GateKind::RZ, 1, -1.13));
  const GateNoiseConfig cfg(50e-6, 60e-6);
  std::mt19937_64 gen(9);
  const auto dm = testutil::random_density(2, gen);
  const auto out = run_noisy_circuit(c, cfg, dm);
  const CMat u = to_unitary(c);
  CHECK(max_abs(CMat(out.elements - u * dm.elements * u.adjoint())) <= 1e-14);
}

TEST_CASE("gate echo: noiseless flat, dynamics-ordered decay") {
  const GateNoiseConfig quiet(1.0, 1.0);
  const QsmParams loc(3, 1, 0.1);
  const auto flat = echo_kraus(loc, quiet, 2, all_momenta(3));
  for (double v : flat.values) REQUIRE_THAT(v, Catch::Matchers::WithinAbs(1.0, 1e-4));

  const GateNoiseConfig cfg(250e-6, 13.4e-6);  // fitted Aer-style parameters
  const QsmParams dif(3, 1, 4.55);
  const auto f_loc = echo_kraus(loc, cfg, 5, all_momenta(3));
  const auto f_dif = echo_kraus(dif, cfg, 5, all_momenta(3));
  for (int t = 1; t <= 5; ++t) REQUIRE(f_dif.values[t] < f_loc.values[t]);
  // density-matrix invariants hold along the run (spot check via one IC)
  DensityMatrix dm = projector(basis_state(3, -2));
  const Circuit fwd = lower_native(route(qsm_circuit(dif), Topology::linear));
  dm = run_noisy_circuit(fwd, cfg, dm);
  CHECK(validate_density(dm).ok());
}

TEST_CASE("gate echo regression fixture at the fitted Aer parameters") {
  const GateNoiseConfig cfg(250e-6, 13.4e-6);
  const QsmParams p(3, 1, 4.55);
  const auto s = echo_kraus(p, cfg, 3, all_momenta(3));
  // frozen from the first verified run of this engine (regression guard)
  CHECK_THAT(s.values[1], Catch::Matchers::WithinAbs(0.23615698839626581, 1e-9));
  CHECK_THAT(s.values[2], Catch::Matchers::WithinAbs(0.13465371378081906, 1e-9));
}

TEST_CASE("k=0 gate echo follows the localized closed-form shape") {
  // pure relaxation (T2 = 2*T1): the echo should track f_localized with one
  // calibrated effective rate set by the accumulated gate durations
  const double t1 = 40e-6;
  const GateNoiseConfig cfg(t1, 2.0 * t1);
  const QsmParams p(3, 1, 0.0);
  const int t_max = 6;
  const auto s = echo_kraus(p, cfg, t_max, all_momenta(3));
  const double nu_eff = -0.5 * std::log(2.0 * std::pow(s.values[1], 1.0 / 3.0) - 1.0);
  for (int t = 2; t <= t_max; ++t)
    REQUIRE_THAT(s.values[t], Catch::Matchers::WithinAbs(f_localized(3, nu_eff, 2.0 * t), 0.02));
  // the calibrated rate is set by the total targeted gate time per step
  const Circuit fwd = lower_native(route(qsm_circuit(p), Topology::linear));
  double qubit_seconds = 0.0;
  for (const auto& g : fwd.gates)
    qubit_seconds += cfg.duration_of(g.kind) * (g.q1 >= 0 ? 2.0 : 1.0);
  const double nominal = qubit_seconds / (3.0 * t1);  // per qubit per direction
  CHECK(nu_eff > 0.4 * nominal);
  CHECK(nu_eff < 1.1 * nominal);
}
