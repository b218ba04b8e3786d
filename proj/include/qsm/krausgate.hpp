#pragma once

#include <cmath>
#include <map>
#include <vector>

#include "qsm/circuit.hpp"
#include "qsm/lindblad.hpp"
#include "qsm/parallel.hpp"
#include "qsm/qsm_circuit.hpp"
#include "qsm/qstate.hpp"
#include "qsm/transpile.hpp"

namespace qsm {

// Thermal-relaxation noise attached to gates: each qubit targeted by a gate
// receives a channel determined by the gate duration and physical T1/T2.
// RZ is virtual and takes zero time.
struct GateNoiseConfig {
  double t1;       // seconds
  double t2;       // seconds
  std::map<GateKind, double> durations = default_durations();

  GateNoiseConfig(double t1_, double t2_) : t1(t1_), t2(t2_) {
    if (!(t1 > 0.0)) throw std::domain_error("GateNoiseConfig: T1 must be positive");
    if (!(t2 > 0.0) || t2 > 2.0 * t1)
      throw std::domain_error("GateNoiseConfig: need 0 < T2 <= 2*T1 for a physical channel");
  }

  static std::map<GateKind, double> default_durations() {
    return {{GateKind::CNOT, 350e-9}, {GateKind::SWAP, 350e-9}, {GateKind::CP, 350e-9},
            {GateKind::SX, 35e-9},    {GateKind::X, 35e-9},     {GateKind::H, 35e-9},
            {GateKind::RZ, 0.0},      {GateKind::P, 0.0}};
  }

  double duration_of(GateKind k) const {
    auto it = durations.find(k);
    return it == durations.end() ? 0.0 : it->second;
  }
};

using Matrix2c = Eigen::Matrix2cd;

struct KrausChannel {
  std::vector<Matrix2c> ops;

  bool is_identity() const { return ops.empty(); }
};

// Zero-temperature thermal relaxation over duration d: excited population
// scales by e^{-d/T1} and coherences by e^{-d/T2}. Valid for T2 <= 2*T1.
inline KrausChannel thermal_kraus(double t1, double t2, double d) {
  if (!(t1 > 0.0) || !(t2 > 0.0)) throw std::domain_error("thermal_kraus: T1, T2 must be positive");
  if (t2 > 2.0 * t1)
    throw std::domain_error("thermal_kraus: T2 > 2*T1 is not completely positive");
  if (d < 0.0) throw std::invalid_argument("thermal_kraus: negative duration");
  if (d == 0.0) return {};
  const double gamma = -std::expm1(-d / t1);                  // relaxation probability
  const double lambda = -std::expm1(-d * (2.0 / t2 - 1.0 / t1));  // residual dephasing
  KrausChannel ch;
  Matrix2c k0 = Matrix2c::Zero(), k1 = Matrix2c::Zero(), k2 = Matrix2c::Zero();
  k0(0, 0) = 1.0;
  k0(1, 1) = std::sqrt((1.0 - gamma) * (1.0 - lambda));
  ch.ops.push_back(k0);
  if (gamma > 0.0) {
    k1(0, 1) = std::sqrt(gamma);
    ch.ops.push_back(k1);
  }
  if (lambda > 0.0) {
    k2(1, 1) = std::sqrt(lambda * (1.0 - gamma));
    ch.ops.push_back(k2);
  }
  return ch;
}

namespace detail {

// sigma <- sum_i K_i sigma K_i^dagger on one qubit, via 2x2 blocks over the
// index pairs that differ only in that qubit's bit.
inline void apply_channel_1q(CMat& sigma, const KrausChannel& ch, int qubit) {
  if (ch.is_identity()) return;
  const int dim = int(sigma.rows());
  const int bit = 1 << qubit;
  for (int j = 0; j < dim; ++j) {
    if (j & bit) continue;
    for (int i = 0; i < dim; ++i) {
      if (i & bit) continue;
      const Complex s00 = sigma(i, j), s01 = sigma(i, j | bit);
      const Complex s10 = sigma(i | bit, j), s11 = sigma(i | bit, j | bit);
      Complex r00 = 0, r01 = 0, r10 = 0, r11 = 0;
      for (const auto& k : ch.ops) {
        const Complex a00 = k(0, 0) * s00 + k(0, 1) * s10;
        const Complex a01 = k(0, 0) * s01 + k(0, 1) * s11;
        const Complex a10 = k(1, 0) * s00 + k(1, 1) * s10;
        const Complex a11 = k(1, 0) * s01 + k(1, 1) * s11;
        r00 += a00 * std::conj(k(0, 0)) + a01 * std::conj(k(0, 1));
        r01 += a00 * std::conj(k(1, 0)) + a01 * std::conj(k(1, 1));
        r10 += a10 * std::conj(k(0, 0)) + a11 * std::conj(k(0, 1));
        r11 += a10 * std::conj(k(1, 0)) + a11 * std::conj(k(1, 1));
      }
      sigma(i, j) = r00;
      sigma(i, j | bit) = r01;
      sigma(i | bit, j) = r10;
      sigma(i | bit, j | bit) = r11;
    }
  }
}

inline void apply_gate_to_dm(CMat& sigma, int n, const Gate& g) {
  const int dim = int(sigma.rows());
  for (int c = 0; c < dim; ++c) apply_gate_to_state(sigma.col(c).data(), n, g);
  sigma.adjointInPlace();
  for (int c = 0; c < dim; ++c) apply_gate_to_state(sigma.col(c).data(), n, g);
  sigma.adjointInPlace();
}

}  // namespace detail

// Runs a native circuit with thermal-relaxation noise after each gate on the
// targeted qubits; idle qubits receive no channel.
inline DensityMatrix run_noisy_circuit(const Circuit& circuit, const GateNoiseConfig& cfg,
                                       const DensityMatrix& dm0) {
  if (circuit.n != dm0.n) throw std::invalid_argument("run_noisy_circuit: dimension mismatch");
  DensityMatrix out = dm0;
  std::map<GateKind, KrausChannel> channels;
  for (const auto& g : circuit.gates) {
    detail::apply_gate_to_dm(out.elements, circuit.n, g);
    auto it = channels.find(g.kind);
    if (it == channels.end())
      it = channels.emplace(g.kind, thermal_kraus(cfg.t1, cfg.t2, cfg.duration_of(g.kind))).first;
    const KrausChannel& ch = it->second;
    if (ch.is_identity()) continue;
    detail::apply_channel_1q(out.elements, ch, g.q0);
    if (g.q1 >= 0) detail::apply_channel_1q(out.elements, ch, g.q1);
  }
  return out;
}

// Gate-level Loschmidt echo: per step the routed and lowered forward or
// backward map circuit runs under gate-attached thermal relaxation. Fidelity
// is taken against the initial basis state and averaged over ic_set.
inline FidelitySeries echo_kraus(const QsmParams& params, const GateNoiseConfig& cfg, int t_max,
                                 const std::vector<int>& ic_set,
                                 Topology topology = Topology::linear, int threads = 1) {
  if (t_max < 1) throw std::invalid_argument("echo_kraus: t_max must be >= 1");
  if (ic_set.empty()) throw std::invalid_argument("echo_kraus: empty initial-condition set");
  const Circuit fwd = lower_native(route(qsm_circuit(params, Direction::forward), topology));
  const Circuit bwd = lower_native(route(qsm_circuit(params, Direction::backward), topology));
  const std::size_t n_ic = ic_set.size();
  std::vector<std::vector<double>> fid(n_ic, std::vector<double>(t_max + 1, 1.0));
  parallel_for(n_ic, threads, [&](std::size_t i) {
    const StateVector psi0 = basis_state(params.n, ic_set[i]);
    const int idx = ic_set[i] + params.dim() / 2;
    DensityMatrix fwd_dm = projector(psi0);
    for (int t = 1; t <= t_max; ++t) {
      fwd_dm = run_noisy_circuit(fwd, cfg, fwd_dm);
      DensityMatrix back = fwd_dm;
      for (int s = 0; s < t; ++s) back = run_noisy_circuit(bwd, cfg, back);
      fid[i][t] = back.elements(idx, idx).real();
    }
  });
  FidelitySeries out;
  for (int t = 0; t <= t_max; ++t) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n_ic; ++i) mean += fid[i][t];
    mean /= double(n_ic);
    double var = 0.0;
    for (std::size_t i = 0; i < n_ic; ++i) var += (fid[i][t] - mean) * (fid[i][t] - mean);
    out.times.push_back(t);
    out.values.push_back(mean);
    out.stderrs.push_back(n_ic > 1 ? std::sqrt(var / (double(n_ic) * (double(n_ic) - 1.0))) : 0.0);
  }
  out.meta["engine"] = "echo-kraus";
  out.meta["n"] = std::to_string(params.n);
  out.meta["L"] = std::to_string(params.L);
  out.meta["k"] = std::to_string(params.k);
  out.meta["T1_seconds"] = std::to_string(cfg.t1);
  out.meta["T2_seconds"] = std::to_string(cfg.t2);
  out.meta["topology"] = topology_name(topology);
  out.meta["ic_count"] = std::to_string(n_ic);
  return out;
}

}  // namespace qsm
