#include <catch2/catch_amalgamated.hpp>

#include "qsm/qstate.hpp"
#include "testutil.hpp"

using namespace qsm;

TEST_CASE("basis_state maps signed momentum to little-endian index") {
  const auto s = basis_state(3, -2);
  REQUIRE(s.amplitudes.size() == 8);
  CHECK(std::abs(s.amplitudes[2] - 1.0) == 0.0);
  CHECK(s.amplitudes.cwiseAbs().sum() == 1.0);

  const auto edge = basis_state(3, -4);
  CHECK(std::abs(edge.amplitudes[0] - 1.0) == 0.0);

  CHECK_THROWS_AS(basis_state(3, 4), std::out_of_range);
  CHECK_THROWS_WITH(basis_state(3, 4), Catch::Matchers::ContainsSubstring("[-4, 4)"));
}

TEST_CASE("basis_state index round trip is the identity for n <= 7") {
  for (int n = 1; n <= 7; ++n) {
    const int half = (1 << n) / 2;
    for (int p = -half; p < half; ++p) {
      const auto s = basis_state(n, p);
      int idx = -1;
      for (int i = 0; i < s.amplitudes.size(); ++i)
        if (std::abs(s.amplitudes[i]) > 0.5) idx = i;
      REQUIRE(idx == p + half);
      REQUIRE(momentum_of_index(n, idx) == p);
    }
  }
}

TEST_CASE("fidelity_pure basics") {
  std::mt19937_64 gen(7);
  const auto psi = testutil::random_pure_state(3, gen);
  CHECK_THAT(fidelity_pure(psi, projector(psi)), Catch::Matchers::WithinAbs(1.0, 1e-12));

  DensityMatrix mixed{3, CMat::Identity(8, 8) / 8.0};
  CHECK_THAT(fidelity_pure(psi, mixed), Catch::Matchers::WithinAbs(1.0 / 8.0, 1e-12));

  const auto zero = basis_state(1, -1);  // index 0
  DensityMatrix diag{1, CMat::Zero(2, 2)};
  diag.elements(0, 0) = 0.7;
  diag.elements(1, 1) = 0.3;
  CHECK_THAT(fidelity_pure(zero, diag), Catch::Matchers::WithinAbs(0.7, 1e-15));

  DensityMatrix small{2, CMat::Identity(4, 4) / 4.0};
  CHECK_THROWS_AS(fidelity_pure(psi, small), std::invalid_argument);
}

TEST_CASE("fidelity_pure equals 1 on projectors of 100 random states") {
  std::mt19937_64 gen(11);
  for (int trial = 0; trial < 100; ++trial) {
    const auto psi = testutil::random_pure_state(3, gen);
    REQUIRE_THAT(fidelity_pure(psi, projector(psi)), Catch::Matchers::WithinAbs(1.0, 1e-12));
  }
}

TEST_CASE("fidelity_uhlmann limits and symmetry") {
  std::mt19937_64 gen(3);
  const auto rho = testutil::random_density(2, gen);
  CHECK_THAT(fidelity_uhlmann(rho, rho), Catch::Matchers::WithinAbs(1.0, 1e-10));

  DensityMatrix p0 = projector(basis_state(1, -1));
  DensityMatrix p1 = projector(basis_state(1, 0));
  CHECK_THAT(fidelity_uhlmann(p0, p1), Catch::Matchers::WithinAbs(0.0, 1e-12));

  // |+><+| against the fully mixed state: rank-one rho reduces the Uhlmann
  // form to <psi|sigma|psi> = 1/2
  StateVector plus{1, CVec(2)};
  plus.amplitudes << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);
  DensityMatrix mixed{1, CMat::Identity(2, 2) / 2.0};
  CHECK_THAT(fidelity_uhlmann(projector(plus), mixed), Catch::Matchers::WithinAbs(0.5, 1e-12));
  CHECK_THAT(fidelity_uhlmann(projector(plus), mixed),
             Catch::Matchers::WithinAbs(fidelity_pure(plus, mixed), 1e-12));

  const auto sigma = testutil::random_density(2, gen);
  CHECK_THAT(fidelity_uhlmann(rho, sigma),
             Catch::Matchers::WithinAbs(fidelity_uhlmann(sigma, rho), 1e-10));
}

TEST_CASE("fidelity_uhlmann agrees with fidelity_pure on projectors") {
  std::mt19937_64 gen(5);
  for (int n = 1; n <= 4; ++n) {
    for (int trial = 0; trial < 10; ++trial) {
      const auto psi = testutil::random_pure_state(n, gen);
      const auto sigma = testutil::random_density(n, gen);
      REQUIRE_THAT(fidelity_uhlmann(projector(psi), sigma),
                   Catch::Matchers::WithinAbs(fidelity_pure(psi, sigma), 1e-8));
    }
  }
}

TEST_CASE("fidelity_uhlmann rejects badly non-PSD input") {
  DensityMatrix bad{1, CMat(2, 2)};
  bad.elements << 1.5, 0.0, 0.0, -0.5;
  DensityMatrix ok{1, CMat::Identity(2, 2) / 2.0};
  CHECK_THROWS_AS(fidelity_uhlmann(bad, ok), std::domain_error);
}

TEST_CASE("validate_density reports the three invariants") {
  DensityMatrix mixed{2, CMat::Identity(4, 4) / 4.0};
  CHECK(validate_density(mixed).ok());

  DensityMatrix off_trace = mixed;
  off_trace.elements(0, 0) += 0.01;
  const auto r1 = validate_density(off_trace);
  CHECK_FALSE(r1.trace_ok);
  CHECK_THAT(r1.trace_deviation, Catch::Matchers::WithinAbs(0.01, 1e-12));

  DensityMatrix negative{1, CMat(2, 2)};
  negative.elements << 1.001, 0.0, 0.0, -1e-3;
  const auto r2 = validate_density(negative);
  CHECK(r2.hermitian_ok);
  CHECK_FALSE(r2.positive_ok);
  CHECK_THAT(r2.min_eigenvalue, Catch::Matchers::WithinAbs(-1e-3, 1e-12));

  DensityMatrix skew{1, CMat(2, 2)};
  skew.elements << 0.5, Complex(0.0, 0.1), Complex(0.0, 0.1), 0.5;
  CHECK_FALSE(validate_density(skew).hermitian_ok);
}
