#pragma once

#include <cmath>
#include <stdexcept>

#include "qsm/linalg.hpp"
#include "qsm/qstate.hpp"

namespace qsm {

enum class Direction { forward, backward };

// Map constants. n qubits give N = 2^n momentum states; periodicity matching
// fixes hbar = 2*pi*L/N with L odd; k is the quantum kicking parameter and
// K = hbar*k the classical kicking strength; beta = 2*pi/N.
struct QsmParams {
  int n;
  int L;
  double k;

  QsmParams(int n_, int L_, double k_) : n(n_), L(L_), k(k_) {
    if (n < 1) throw std::invalid_argument("QsmParams: need n >= 1");
    if (L < 1 || L % 2 == 0) throw std::invalid_argument("QsmParams: L must be a positive odd integer");
    if (!std::isfinite(k)) throw std::invalid_argument("QsmParams: k must be finite");
  }

  int dim() const { return 1 << n; }
  double hbar() const { return 2.0 * kPi * L / dim(); }
  double beta() const { return 2.0 * kPi / dim(); }
  double big_k() const { return hbar() * k; }
};

struct TimeScales {
  double tau_ehrenfest;
  double tau_heisenberg;
  double lambda_in;
};

// Diagonal of U_kin in the momentum basis: exp(-i hbar (p'-N/2)^2 / 2)
inline CVec kinetic_phases(const QsmParams& params, Direction dir = Direction::forward) {
  const int n = params.dim();
  const double sign = dir == Direction::forward ? 1.0 : -1.0;
  CVec d(n);
  for (int i = 0; i < n; ++i) {
    const double p = i - n / 2;
    d[i] = std::polar(1.0, -sign * params.hbar() * p * p / 2.0);
  }
  return d;
}

// Diagonal of U_pot in the position basis: exp(+i k beta^2 (q'-N/2)^2 / 2).
// k_eff is the per-step kick, possibly perturbed by parameter noise.
inline CVec potential_phases(const QsmParams& params, double k_eff,
                             Direction dir = Direction::forward) {
  const int n = params.dim();
  const double sign = dir == Direction::forward ? 1.0 : -1.0;
  const double b2 = params.beta() * params.beta();
  CVec d(n);
  for (int i = 0; i < n; ++i) {
    const double q = i - n / 2;
    d[i] = std::polar(1.0, sign * k_eff * b2 * q * q / 2.0);
  }
  return d;
}

// Dense one-period propagator U = D_kin F^{-1} D_pot F (backward: adjoint).
// At k = 0 the potential is the identity and the transform pair collapses,
// leaving the kinetic diagonal with exact zeros off the diagonal.
inline CMat build_step_operator(const QsmParams& params, Direction dir = Direction::forward) {
  CMat u;
  if (params.k == 0.0) {
    u = CMat(kinetic_phases(params).asDiagonal());
  } else {
    const CMat f = dense_dft(params.n);
    u = kinetic_phases(params).asDiagonal() * f.adjoint() *
        CMat(potential_phases(params, params.k).asDiagonal()) * f;
  }
  return dir == Direction::forward ? u : CMat(u.adjoint());
}

// One map step applied through the transform plan; matches the dense operator
// to round-off and costs O(N log N).
inline void apply_step(CVec& psi, const QsmParams& params, double k_eff, Direction dir,
                       const DftPlan& plan) {
  if (dir == Direction::forward) {
    plan.transform(psi, +1);
    psi.array() *= potential_phases(params, k_eff).array();
    plan.transform(psi, -1);
    psi.array() *= kinetic_phases(params).array();
  } else {
    psi.array() *= kinetic_phases(params, Direction::backward).array();
    plan.transform(psi, +1);
    psi.array() *= potential_phases(params, k_eff, Direction::backward).array();
    plan.transform(psi, -1);
  }
}

inline StateVector evolve(const StateVector& state, const QsmParams& params, int steps,
                          Direction dir = Direction::forward) {
  if (steps < 0) throw std::invalid_argument("evolve: steps must be >= 0");
  if (state.n != params.n) throw std::invalid_argument("evolve: state/params dimension mismatch");
  StateVector out = state;
  const DftPlan plan(params.n);
  for (int s = 0; s < steps; ++s) apply_step(out.amplitudes, params, params.k, dir, plan);
  return out;
}

// Classical diffusion coefficient; broken cantori slow diffusion below K = 1.
inline double diffusion_coefficient(double big_k) {
  if (big_k <= 0.0) throw std::domain_error("diffusion_coefficient: K must be positive");
  if (big_k > 1.0) return (kPi * kPi / 3.0) * big_k * big_k;
  return 3.3 * std::pow(big_k, 2.5);
}

// Localization length ell ~ D_K / hbar^2
inline double localization_length(const QsmParams& params) {
  if (params.k <= 0.0) throw std::domain_error("localization_length: k must be positive");
  const double h = params.hbar();
  return diffusion_coefficient(params.big_k()) / (h * h);
}

// Threshold kick below which the localized peak stays the global maximum
inline double k_loc(int dim, int L) {
  if (dim < 2 || L < 1) throw std::invalid_argument("k_loc: need N >= 2 and L >= 1");
  const double large_k_branch = 0.66 * std::sqrt(double(dim));
  const double small_k_branch = 0.50 * std::pow(double(dim), 0.6) * std::pow(double(L), -0.2);
  return std::max(large_k_branch, small_k_branch);
}

// tau_E ~ ln(N)/lambda and tau_H ~ ell; the Lyapunov exponent is an input
inline TimeScales time_scales(const QsmParams& params, double lambda_in) {
  if (lambda_in <= 0.0) throw std::domain_error("time_scales: lambda must be positive");
  return TimeScales{std::log(double(params.dim())) / lambda_in, localization_length(params),
                    lambda_in};
}

inline double inverse_participation_ratio(const StateVector& psi) {
  double s = 0.0;
  for (int i = 0; i < psi.amplitudes.size(); ++i) {
    const double p = std::norm(psi.amplitudes[i]);
    s += p * p;
  }
  return s;
}

}  // namespace qsm
