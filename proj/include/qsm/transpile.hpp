#pragma once

#include <cstdlib>
#include <optional>
#include <vector>

#include "qsm/circuit.hpp"

namespace qsm {

namespace detail {

// Rebuilds barrier offsets after a pass that expanded gate i into counts[i] gates.
inline std::vector<std::size_t> remap_barriers(const std::vector<std::size_t>& barriers,
                                               const std::vector<std::size_t>& counts) {
  std::vector<std::size_t> prefix(counts.size() + 1, 0);
  for (std::size_t i = 0; i < counts.size(); ++i) prefix[i + 1] = prefix[i] + counts[i];
  std::vector<std::size_t> out;
  out.reserve(barriers.size());
  for (auto b : barriers) out.push_back(prefix[b]);
  return out;
}

}  // namespace detail

// Rewrites to the native set {CNOT, RZ, SX, X}:
//   P(phi)   -> RZ(phi)
//   H        -> RZ(pi/2) SX RZ(pi/2)
//   SWAP     -> CNOT CNOT CNOT
//   CP(phi)  -> RZ(q0, phi/2) CNOT RZ(q1, -phi/2) CNOT RZ(q1, phi/2)
// each up to a global phase.
inline Circuit lower_native(const Circuit& c) {
  Circuit out;
  out.n = c.n;
  out.topology = c.topology;
  std::vector<std::size_t> counts(c.gates.size(), 1);
  for (std::size_t i = 0; i < c.gates.size(); ++i) {
    const Gate& g = c.gates[i];
    const std::size_t before = out.gates.size();
    switch (g.kind) {
      case GateKind::P:
        out.add(Gate(GateKind::RZ, g.q0, g.phase));
        break;
      case GateKind::H:
        out.add(Gate(GateKind::RZ, g.q0, kPi / 2.0));
        out.add(Gate(GateKind::SX, g.q0));
        out.add(Gate(GateKind::RZ, g.q0, kPi / 2.0));
        break;
      case GateKind::SWAP:
        out.add(Gate(GateKind::CNOT, g.q0, g.q1));
        out.add(Gate(GateKind::CNOT, g.q1, g.q0));
        out.add(Gate(GateKind::CNOT, g.q0, g.q1));
        break;
      case GateKind::CP:
        out.add(Gate(GateKind::RZ, g.q0, g.phase / 2.0));
        out.add(Gate(GateKind::CNOT, g.q0, g.q1));
        out.add(Gate(GateKind::RZ, g.q1, -g.phase / 2.0));
        out.add(Gate(GateKind::CNOT, g.q0, g.q1));
        out.add(Gate(GateKind::RZ, g.q1, g.phase / 2.0));
        break;
      default:
        out.add(g);
    }
    counts[i] = out.gates.size() - before;
  }
  out.barriers = detail::remap_barriers(c.barriers, counts);
  return out;
}

// Maps a logical circuit onto a linear chain (identity embedding). A
// non-adjacent two-qubit gate is wrapped in SWAP chains that are unwound
// immediately, so qubit identities are unpermuted at the end of the circuit.
// Run before lower_native so each non-adjacent CP costs one SWAP pair.
inline Circuit route(const Circuit& c, Topology topology) {
  if (topology == Topology::all_to_all) {
    Circuit out = c;
    out.topology = Topology::all_to_all;
    return out;
  }
  Circuit out;
  out.n = c.n;
  out.topology = Topology::linear;
  std::vector<std::size_t> counts(c.gates.size(), 1);
  for (std::size_t i = 0; i < c.gates.size(); ++i) {
    const Gate& g = c.gates[i];
    const std::size_t before = out.gates.size();
    if (!is_two_qubit(g.kind) || std::abs(g.q0 - g.q1) == 1) {
      out.add(g);
    } else {
      const int lo = std::min(g.q0, g.q1);
      const int hi = std::max(g.q0, g.q1);
      for (int q = lo; q < hi - 1; ++q) out.add(Gate(GateKind::SWAP, q, q + 1));
      // the walked qubit now sits at hi-1
      const int a = g.q0 == lo ? hi - 1 : hi;
      const int b = g.q1 == lo ? hi - 1 : hi;
      out.add(Gate(g.kind, a, b, g.phase));
      for (int q = hi - 2; q >= lo; --q) out.add(Gate(GateKind::SWAP, q, q + 1));
    }
    counts[i] = out.gates.size() - before;
  }
  out.barriers = detail::remap_barriers(c.barriers, counts);
  return out;
}

namespace detail {

inline bool is_diagonal_kind(GateKind k) {
  return k == GateKind::P || k == GateKind::RZ || k == GateKind::CP;
}

// Conservative commutation test used when scanning for merge partners.
inline bool gates_commute(const Gate& a, const Gate& b) {
  const bool share0 = b.touches(a.q0);
  const bool share1 = a.q1 >= 0 && b.touches(a.q1);
  if (!share0 && !share1) return true;
  if (is_diagonal_kind(a.kind) && is_diagonal_kind(b.kind)) return true;
  auto shares_target_only_on_control = [](const Gate& cnot, const Gate& diag) {
    // diagonal gate touching only the CNOT control commutes with it
    return is_diagonal_kind(diag.kind) && !diag.touches(cnot.q1) && diag.touches(cnot.q0);
  };
  if (a.kind == GateKind::CNOT && shares_target_only_on_control(a, b)) return true;
  if (b.kind == GateKind::CNOT && shares_target_only_on_control(b, a)) return true;
  if (a.kind == GateKind::CNOT && b.kind == GateKind::CNOT) {
    if (a.q0 == b.q0 && a.q1 != b.q1) return true;  // shared control
    if (a.q1 == b.q1 && a.q0 != b.q0) return true;  // shared target
    return false;
  }
  if (a.kind == GateKind::X && b.kind == GateKind::CNOT) return a.q0 == b.q1;
  if (b.kind == GateKind::X && a.kind == GateKind::CNOT) return b.q0 == a.q1;
  return false;
}

inline bool same_pair(const Gate& a, const Gate& b) {
  return (a.q0 == b.q0 && a.q1 == b.q1) || (a.q0 == b.q1 && a.q1 == b.q0);
}

// One cancellation/merge sweep over a barrier-free segment; true if changed.
// The partner scan walks past gates that provably commute with the candidate.
inline bool peephole_segment(std::vector<Gate>& gates) {
  for (std::size_t i = 0; i < gates.size(); ++i) {
    const Gate& a = gates[i];
    for (std::size_t j = i + 1; j < gates.size(); ++j) {
      const Gate& b = gates[j];
      const bool overlap = b.touches(a.q0) || (a.q1 >= 0 && b.touches(a.q1));
      if (!overlap) continue;
      if (a.kind == b.kind) {
        switch (a.kind) {
          case GateKind::CNOT:
            if (a.q0 == b.q0 && a.q1 == b.q1) {
              gates.erase(gates.begin() + j);
              gates.erase(gates.begin() + i);
              return true;
            }
            break;
          case GateKind::SWAP:
          case GateKind::H:
          case GateKind::X:
            if (a.kind != GateKind::SWAP ? a.q0 == b.q0 : same_pair(a, b)) {
              gates.erase(gates.begin() + j);
              gates.erase(gates.begin() + i);
              return true;
            }
            break;
          case GateKind::SX:
            if (a.q0 == b.q0) {
              gates.erase(gates.begin() + j);
              gates[i] = Gate(GateKind::X, a.q0);
              return true;
            }
            break;
          case GateKind::RZ:
          case GateKind::P:
            if (a.q0 == b.q0) {
              const double merged = canonical_phase(a.phase + b.phase);
              gates.erase(gates.begin() + j);
              gates[i] = Gate(a.kind, a.q0, merged);
              return true;
            }
            break;
          case GateKind::CP:
            if (same_pair(a, b)) {
              const double merged = canonical_phase(a.phase + b.phase);
              gates.erase(gates.begin() + j);
              gates[i] = Gate(GateKind::CP, gates[i].q0, gates[i].q1, merged);
              return true;
            }
            break;
        }
      }
      if (!gates_commute(a, b)) break;  // a cannot migrate past b
    }
  }
  // drop gates that reduced to the identity; nonzero small angles are kept
  for (std::size_t i = 0; i < gates.size(); ++i) {
    if (has_phase(gates[i].kind) && gates[i].phase == 0.0) {
      gates.erase(gates.begin() + i);
      return true;
    }
  }
  return false;
}

}  // namespace detail

// Fixpoint cancellation pass: involution pairs cancel, same-qubit phase gates
// merge, exact-zero phases are dropped. Barriers fence the rewrites. Unitary
// is preserved up to global phase and the two-qubit count never increases.
inline Circuit peephole(const Circuit& c) {
  Circuit out;
  out.n = c.n;
  out.topology = c.topology;
  std::vector<std::size_t> cuts{0};
  for (auto b : c.barriers) cuts.push_back(b);
  cuts.push_back(c.gates.size());
  for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
    std::vector<Gate> seg(c.gates.begin() + cuts[s], c.gates.begin() + cuts[s + 1]);
    while (detail::peephole_segment(seg)) {
    }
    if (s > 0) out.barriers.push_back(out.gates.size());
    for (const auto& g : seg) out.gates.push_back(g);
  }
  return out;
}

}  // namespace qsm
