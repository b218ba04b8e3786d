#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "qsm/linalg.hpp"

namespace qsm {

// Pure state over N = 2^n momentum basis states, indexed by p' in [0, N).
// Qubit j holds bit 2^j of the index (little-endian).
struct StateVector {
  int n = 0;
  CVec amplitudes;

  int dim() const { return 1 << n; }
};

struct DensityMatrix {
  int n = 0;
  CMat elements;

  int dim() const { return 1 << n; }
};

// Mean fidelity vs forward-and-back map-step count, with per-time standard
// error and free-form provenance (engine, parameters, seed, initial conditions).
struct FidelitySeries {
  std::vector<double> times;
  std::vector<double> values;
  std::vector<double> stderrs;
  std::map<std::string, std::string> meta;
};

inline DensityMatrix projector(const StateVector& psi) {
  return DensityMatrix{psi.n, psi.amplitudes * psi.amplitudes.adjoint()};
}

// Signed momentum p in [-N/2, N/2) maps to basis index p' = p + N/2.
inline StateVector basis_state(int n, int p) {
  const int half = (1 << n) / 2;
  if (p < -half || p >= half)
    throw std::out_of_range("basis_state: p=" + std::to_string(p) + " outside [" +
                            std::to_string(-half) + ", " + std::to_string(half) + ")");
  StateVector s{n, CVec::Zero(1 << n)};
  s.amplitudes[p + half] = 1.0;
  return s;
}

inline int momentum_of_index(int n, int index) { return index - (1 << n) / 2; }

// f = <psi| sigma |psi>, the pure-state special case of the Uhlmann fidelity
inline double fidelity_pure(const StateVector& psi, const DensityMatrix& sigma) {
  if (psi.n != sigma.n || psi.amplitudes.size() != sigma.elements.rows())
    throw std::invalid_argument("fidelity_pure: dimension mismatch");
  const Complex v = psi.amplitudes.adjoint() * sigma.elements * psi.amplitudes;
  return v.real();
}

// (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2. Since sqrt(rho) sigma sqrt(rho) =
// A^dagger A with A = sqrt(sigma) sqrt(rho), the trace equals the nuclear
// norm of A; singular values keep full precision where eigenvalues of the
// squared product would lose half the digits.
inline double fidelity_uhlmann(const DensityMatrix& rho, const DensityMatrix& sigma) {
  if (rho.n != sigma.n) throw std::invalid_argument("fidelity_uhlmann: dimension mismatch");
  constexpr double kPsdTol = 1e-8;
  for (const auto* m : {&rho, &sigma}) {
    Eigen::SelfAdjointEigenSolver<CMat> es(m->elements, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -kPsdTol)
      throw std::domain_error("fidelity_uhlmann: input not positive semidefinite");
  }
  const CMat a = hermitian_sqrt(sigma.elements) * hermitian_sqrt(rho.elements);
  Eigen::JacobiSVD<CMat> svd(a);
  const double tr = svd.singularValues().sum();
  return tr * tr;
}

struct DensityReport {
  double trace_deviation = 0.0;
  double hermiticity_deviation = 0.0;
  double min_eigenvalue = 0.0;
  bool trace_ok = false;
  bool hermitian_ok = false;
  bool positive_ok = false;

  bool ok() const { return trace_ok && hermitian_ok && positive_ok; }
};

inline DensityReport validate_density(const DensityMatrix& sigma) {
  constexpr double kTol = 1e-9;
  DensityReport r;
  r.trace_deviation = std::abs(sigma.elements.trace() - Complex(1.0));
  r.hermiticity_deviation = max_abs(CMat(sigma.elements - sigma.elements.adjoint()));
  Eigen::SelfAdjointEigenSolver<CMat> es(sigma.elements, Eigen::EigenvaluesOnly);
  r.min_eigenvalue = es.eigenvalues().minCoeff();
  r.trace_ok = r.trace_deviation <= kTol;
  r.hermitian_ok = r.hermiticity_deviation <= kTol;
  r.positive_ok = r.min_eigenvalue >= -kTol;
  return r;
}

inline double norm_error(const StateVector& psi) {
  return std::abs(psi.amplitudes.squaredNorm() - 1.0);
}

}  // namespace qsm
