#pragma once

#include <cmath>
#include <stdexcept>

#include "qsm/linalg.hpp"
#include "qsm/qstate.hpp"
#include "qsm/rng.hpp"

namespace qsm {

// Per-map-step relaxation (nu1) and pure-dephasing (nu2) rates. Physical
// times follow 1/T1 = nu1 and 1/T2 = nu1/2 + nu2/2.
struct NoiseRates {
  double nu1 = 0.0;
  double nu2 = 0.0;

  NoiseRates() = default;
  NoiseRates(double n1, double n2) : nu1(n1), nu2(n2) {
    if (nu1 < 0.0 || nu2 < 0.0) throw std::invalid_argument("NoiseRates must be nonnegative");
  }
};

enum class Regime { localized, superposition, diffusive, semi_localized };

inline const char* regime_name(Regime r) {
  switch (r) {
    case Regime::localized: return "localized";
    case Regime::superposition: return "superposition";
    case Regime::diffusive: return "diffusive";
    case Regime::semi_localized: return "semi-localized";
  }
  return "?";
}

// Per-qubit initial fidelity-decay rate nu_single for each dynamical regime.
inline double rate_single(Regime regime, const NoiseRates& rates) {
  switch (regime) {
    case Regime::localized: return rates.nu1 / 2.0;
    case Regime::superposition: return (rates.nu1 + rates.nu2) / 4.0;
    case Regime::diffusive: return rates.nu1 / 2.0 + rates.nu2 / 4.0;
    case Regime::semi_localized: return rates.nu1 / 2.0 + rates.nu2 / 8.0;
  }
  throw std::logic_error("rate_single: bad regime");
}

// Basis-state initial conditions averaged over all of them: only on-diagonal
// relaxation contributes, ((1 + e^{-nu1 t}) / 2)^n.
inline double f_localized(int n, double nu1, double t) {
  if (t < 0.0) throw std::invalid_argument("f_localized: t must be >= 0");
  return std::pow((1.0 + std::exp(-nu1 * t)) / 2.0, n);
}

// Product of |+> qubits: same form with nu1 -> (nu1 + nu2)/2.
inline double f_superposition(int n, const NoiseRates& rates, double t) {
  if (t < 0.0) throw std::invalid_argument("f_superposition: t must be >= 0");
  return std::pow((1.0 + std::exp(-(rates.nu1 + rates.nu2) * t / 2.0)) / 2.0, n);
}

// Random-phase entangled state, phase-averaged. Closed form of the
// combinatorial sum below.
inline double f_diffusive(int n, const NoiseRates& rates, double t) {
  if (t < 0.0) throw std::invalid_argument("f_diffusive: t must be >= 0");
  const double a = std::exp(-rates.nu1 * t);
  const double x = std::exp(-(rates.nu1 + rates.nu2) * t / 2.0);
  const double quarter_n = std::pow(0.25, n);
  return quarter_n * std::pow(1.0 + a + 2.0 * x, n) - quarter_n * std::pow(1.0 + a, n) +
         std::pow(0.5, n);
}

// Reference form of the diffusive fidelity: explicit double sum over k
// superposed qubits (dephasing at k(nu1+nu2)/2) and l jointly excited qubits
// (relaxation at l*nu1), with binomial multiplicities. Kept as a cross-check
// of the closed form.
inline double f_diffusive_sum(int n, const NoiseRates& rates, double t) {
  if (n > 40) throw std::invalid_argument("f_diffusive_sum: n too large for exact binomials");
  const double a = std::exp(-rates.nu1 * t);
  const double x = std::exp(-(rates.nu1 + rates.nu2) * t / 2.0);
  auto binom = [](int nn, int kk) {
    double b = 1.0;
    for (int i = 1; i <= kk; ++i) b = b * (nn - kk + i) / i;
    return b;
  };
  double sum = 0.0;
  for (int k = 1; k <= n; ++k) {
    double inner = 0.0;
    for (int l = 0; l <= n - k; ++l) inner += binom(n - k, l) * std::pow(a, l);
    sum += binom(n, k) * std::pow(2.0 * x, k) * inner;
  }
  return std::pow(0.5, n) + std::pow(0.25, n) * sum;
}

// Two-qubit Hadamard product sigma o rho* for the random-phase state with
// phases (phi1, phi2, phi3) on |01>, |10>, |11>. Off-diagonal entries decay
// by (nu1+nu2)/2 per superposed qubit and nu1 per jointly excited qubit;
// entries whose pair has a jointly ground qubit pick up the phase-bearing
// gain terms. The element sum is the two-qubit fidelity.
inline Eigen::Matrix4cd fid_matrix_2q(double phi1, double phi2, double phi3,
                                      const NoiseRates& rates, double t) {
  if (t < 0.0) throw std::invalid_argument("fid_matrix_2q: t must be >= 0");
  const double a = std::exp(-rates.nu1 * t);
  const double x = std::exp(-(rates.nu1 + rates.nu2) * t / 2.0);
  const Complex ph = std::polar(1.0, phi1 + phi2 - phi3);
  Eigen::Matrix4cd m;
  m(0, 0) = 4.0 - 4.0 * a + a * a;
  m(1, 1) = 2.0 * a - a * a;
  m(2, 2) = 2.0 * a - a * a;
  m(3, 3) = a * a;
  m(0, 1) = (1.0 + ph) * x - ph * a * x;
  m(0, 2) = (1.0 + ph) * x - ph * a * x;
  m(0, 3) = x * x;
  m(1, 2) = x * x;
  m(1, 3) = a * x;
  m(2, 3) = a * x;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < i; ++j) m(i, j) = std::conj(m(j, i));
  return m / 16.0;
}

inline double fid_matrix_2q_sum(const Eigen::Matrix4cd& m) { return m.sum().real(); }

// Uniform-magnitude state with i.i.d. uniform phases, phase of |0...0> fixed
// to zero.
inline StateVector random_phase_state(int n, Rng& rng) {
  const int dim = 1 << n;
  StateVector s{n, CVec(dim)};
  const double mag = 1.0 / std::sqrt(double(dim));
  s.amplitudes[0] = mag;
  for (int i = 1; i < dim; ++i) s.amplitudes[i] = std::polar(mag, 2.0 * kPi * rng.next_double());
  return s;
}

struct GateLayout {
  enum class Kind { serial, parallel };
  Kind kind = Kind::serial;
  int n_eff = 2;

  static GateLayout serial() { return GateLayout{Kind::serial, 2}; }
  static GateLayout parallel(int n_eff) { return GateLayout{Kind::parallel, n_eff}; }
};

// Regime fidelity on n_sub qubits at time t_sub; the semi-localized case is
// the geometric mean of the localized and diffusive forms.
inline double regime_fidelity(Regime regime, int n_sub, const NoiseRates& rates, double t_sub) {
  switch (regime) {
    case Regime::localized: return f_localized(n_sub, rates.nu1, t_sub);
    case Regime::superposition: return f_superposition(n_sub, rates, t_sub);
    case Regime::diffusive: return f_diffusive(n_sub, rates, t_sub);
    case Regime::semi_localized:
      return std::sqrt(f_localized(n_sub, rates.nu1, t_sub) * f_diffusive(n_sub, rates, t_sub));
  }
  throw std::logic_error("regime_fidelity: bad regime");
}

// Gate-based fidelity. Serial: two qubits decay during each of the M gates
// per map step, f = f_regime(1/M, 2)^{M t} (1 - 1/2^n) + 1/2^n. Parallel:
// n_eff qubits decay per layer over depth D = 2M/n_eff.
inline double f_gate_based(double t, int n, int gates_per_step, const NoiseRates& rates,
                           Regime regime, const GateLayout& layout) {
  if (gates_per_step < 1) throw std::invalid_argument("f_gate_based: need M >= 1");
  const double floor = std::pow(0.5, n);
  if (layout.kind == GateLayout::Kind::serial) {
    const double per_gate = regime_fidelity(regime, 2, rates, 1.0 / gates_per_step);
    return std::pow(per_gate, double(gates_per_step) * t) * (1.0 - floor) + floor;
  }
  if (layout.n_eff < 2 || layout.n_eff > n)
    throw std::invalid_argument("f_gate_based: need 2 <= n_eff <= n");
  const double depth = 2.0 * gates_per_step / layout.n_eff;
  const double per_layer = regime_fidelity(regime, layout.n_eff, rates, 1.0 / depth);
  return std::pow(per_layer, depth * t) * (1.0 - floor) + floor;
}

}  // namespace qsm
