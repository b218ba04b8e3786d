#pragma once

#include <vector>

#include "qsm/circuit.hpp"
#include "qsm/sawtooth.hpp"

namespace qsm {

namespace detail {

// Swapless transform block C: the full transform is F = S*C with S the
// bit-reversal SWAP layer. Processing qubits top-down leaves the output in
// bit-reversed positions.
inline void emit_qft_swapless(Circuit& c) {
  for (int h = c.n - 1; h >= 0; --h) {
    c.add(Gate(GateKind::H, h));
    for (int l = h - 1; l >= 0; --l)
      c.add(Gate(GateKind::CP, l, h, kPi / double(1 << (h - l))));
  }
}

inline void emit_qft_swapless_adjoint(Circuit& c) {
  for (int h = 0; h < c.n; ++h) {
    for (int l = 0; l < h; ++l)
      c.add(Gate(GateKind::CP, l, h, -kPi / double(1 << (h - l))));
    c.add(Gate(GateKind::H, h));
  }
}

// Diagonal phase block exp(i c2 (x - N/2)^2 / 2) as P and CP gates, up to a
// global phase: CP(c2 * 2^{j1+j2}) on every pair plus
// P(c2 * 2^{2j-1} - c2 * N * 2^{j-1}) on every qubit.
// relabel=true emits indices bit-reversed, which absorbs the transform SWAPs.
inline void emit_quadratic_phase(Circuit& c, double c2, bool relabel) {
  const int n = c.n;
  const double dimd = double(1 << n);
  auto q = [&](int j) { return relabel ? n - 1 - j : j; };
  for (int j1 = 0; j1 < n; ++j1)
    for (int j2 = j1 + 1; j2 < n; ++j2)
      c.add(Gate(GateKind::CP, q(j1), q(j2), c2 * std::ldexp(1.0, j1 + j2)));
  for (int j = 0; j < n; ++j)
    c.add(Gate(GateKind::P, q(j), c2 * std::ldexp(1.0, 2 * j - 1) - c2 * dimd * std::ldexp(1.0, j - 1)));
}

}  // namespace detail

// One map step as gates: C, U_pot with bit-reversed indices, C^dagger, U_kin.
// Equals build_step_operator up to global phase. The backward circuit is the
// adjoint gate list reversed.
inline Circuit qsm_circuit(const QsmParams& params, Direction dir = Direction::forward) {
  Circuit c;
  c.n = params.n;
  c.topology = Topology::all_to_all;
  const double pot_c2 = params.k * params.beta() * params.beta();
  const double kin_c2 = -params.hbar();
  detail::emit_qft_swapless(c);
  detail::emit_quadratic_phase(c, pot_c2, true);
  detail::emit_qft_swapless_adjoint(c);
  detail::emit_quadratic_phase(c, kin_c2, false);
  if (dir == Direction::backward) {
    std::reverse(c.gates.begin(), c.gates.end());
    for (auto& g : c.gates) g = adjoint(g);
  }
  return c;
}

// Forward-and-back echo circuit over t map steps, barriers between steps.
inline Circuit qsm_echo_circuit(const QsmParams& params, int steps) {
  const Circuit fwd = qsm_circuit(params, Direction::forward);
  const Circuit bwd = qsm_circuit(params, Direction::backward);
  Circuit c;
  c.n = params.n;
  for (int s = 0; s < steps; ++s) append(c, fwd);
  for (int s = 0; s < steps; ++s) append(c, bwd);
  return c;
}

}  // namespace qsm
