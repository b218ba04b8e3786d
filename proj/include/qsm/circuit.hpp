#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "qsm/linalg.hpp"

namespace qsm {

enum class GateKind { H, P, CP, SWAP, CNOT, RZ, SX, X };

inline bool is_two_qubit(GateKind k) {
  return k == GateKind::CP || k == GateKind::SWAP || k == GateKind::CNOT;
}
inline bool has_phase(GateKind k) {
  return k == GateKind::P || k == GateKind::CP || k == GateKind::RZ;
}

inline const char* kind_name(GateKind k) {
  switch (k) {
    case GateKind::H: return "H";
    case GateKind::P: return "P";
    case GateKind::CP: return "CP";
    case GateKind::SWAP: return "SWAP";
    case GateKind::CNOT: return "CNOT";
    case GateKind::RZ: return "RZ";
    case GateKind::SX: return "SX";
    case GateKind::X: return "X";
  }
  return "?";
}

// Phases live in (-pi, pi], with the tie at -pi folded to +pi and -0 to +0.
inline double canonical_phase(double phi) {
  if (!std::isfinite(phi)) throw std::invalid_argument("gate phase must be finite");
  double r = std::remainder(phi, 2.0 * kPi);
  if (r <= -kPi) r = kPi;
  if (r == 0.0) r = 0.0;
  return r;
}

// For CNOT q0 is the control and q1 the target; CP and SWAP are symmetric.
struct Gate {
  GateKind kind;
  int q0;
  int q1;
  double phase;

  Gate(GateKind k, int a, double ph = 0.0) : kind(k), q0(a), q1(-1), phase(canonical_phase(ph)) {
    if (is_two_qubit(k)) throw std::invalid_argument("two-qubit kind needs two indices");
  }
  Gate(GateKind k, int a, int b, double ph = 0.0)
      : kind(k), q0(a), q1(b), phase(canonical_phase(ph)) {
    if (!is_two_qubit(k)) throw std::invalid_argument("one-qubit kind takes one index");
    if (a == b) throw std::invalid_argument("two-qubit gate needs distinct qubits");
  }

  bool operator==(const Gate& o) const {
    return kind == o.kind && q0 == o.q0 && q1 == o.q1 && phase == o.phase;
  }
  bool touches(int q) const { return q0 == q || q1 == q; }
};

inline Gate adjoint(const Gate& g) {
  Gate a = g;
  if (has_phase(g.kind)) a.phase = canonical_phase(-g.phase);
  if (g.kind == GateKind::SX)
    throw std::invalid_argument("SX has no adjoint in the gate set; take adjoints before lowering");
  return a;
}

enum class Topology { all_to_all, linear };

inline const char* topology_name(Topology t) {
  return t == Topology::linear ? "linear" : "all-to-all";
}

struct Circuit {
  int n = 0;
  Topology topology = Topology::all_to_all;
  std::vector<Gate> gates;
  std::vector<std::size_t> barriers;  // gate-list offsets; a marker sits before gates[b]

  void add(const Gate& g) {
    if (g.q0 < 0 || g.q0 >= n || (g.q1 >= 0 && g.q1 >= n))
      throw std::invalid_argument("gate qubit index out of range");
    gates.push_back(g);
  }
  void add_barrier() { barriers.push_back(gates.size()); }

  bool operator==(const Circuit& o) const {
    return n == o.n && topology == o.topology && gates == o.gates && barriers == o.barriers;
  }
};

// Appends src to dst, optionally with a barrier at the seam.
inline void append(Circuit& dst, const Circuit& src, bool barrier_between = true) {
  if (dst.n != src.n) throw std::invalid_argument("append: qubit count mismatch");
  if (barrier_between && !dst.gates.empty()) dst.add_barrier();
  const std::size_t off = dst.gates.size();
  for (const auto& g : src.gates) dst.gates.push_back(g);
  for (auto b : src.barriers) dst.barriers.push_back(b + off);
  std::sort(dst.barriers.begin(), dst.barriers.end());
}

struct GateCensus {
  std::map<std::string, int> counts;
  int two_qubit_total = 0;
  int two_qubit_depth = 0;

  int at(const std::string& name) const {
    auto it = counts.find(name);
    return it == counts.end() ? 0 : it->second;
  }
};

inline GateCensus gate_counts(const Circuit& c) {
  GateCensus census;
  std::vector<int> layer(c.n, 0);
  for (const auto& g : c.gates) {
    ++census.counts[kind_name(g.kind)];
    if (is_two_qubit(g.kind)) {
      ++census.two_qubit_total;
      const int l = std::max(layer[g.q0], layer[g.q1]) + 1;
      layer[g.q0] = layer[g.q1] = l;
      census.two_qubit_depth = std::max(census.two_qubit_depth, l);
    }
  }
  return census;
}

namespace detail {

inline std::array<Complex, 4> gate_matrix_1q(const Gate& g) {
  switch (g.kind) {
    case GateKind::H: {
      const double s = 1.0 / std::sqrt(2.0);
      return {s, s, s, -s};
    }
    case GateKind::P:
      return {1.0, 0.0, 0.0, std::polar(1.0, g.phase)};
    case GateKind::RZ:
      return {std::polar(1.0, -g.phase / 2.0), 0.0, 0.0, std::polar(1.0, g.phase / 2.0)};
    case GateKind::SX:
      return {Complex(0.5, 0.5), Complex(0.5, -0.5), Complex(0.5, -0.5), Complex(0.5, 0.5)};
    case GateKind::X:
      return {0.0, 1.0, 1.0, 0.0};
    default:
      throw std::logic_error("not a one-qubit gate");
  }
}

// Applies g to a state vector laid out with qubit j on bit 2^j.
inline void apply_gate_to_state(Complex* v, int n, const Gate& g) {
  const int dim = 1 << n;
  if (!is_two_qubit(g.kind)) {
    const auto m = gate_matrix_1q(g);
    const int bit = 1 << g.q0;
    for (int i = 0; i < dim; ++i) {
      if (i & bit) continue;
      const Complex a = v[i], b = v[i | bit];
      v[i] = m[0] * a + m[1] * b;
      v[i | bit] = m[2] * a + m[3] * b;
    }
    return;
  }
  const int b0 = 1 << g.q0, b1 = 1 << g.q1;
  switch (g.kind) {
    case GateKind::CP: {
      const Complex ph = std::polar(1.0, g.phase);
      for (int i = 0; i < dim; ++i)
        if ((i & b0) && (i & b1)) v[i] *= ph;
      break;
    }
    case GateKind::CNOT:
      for (int i = 0; i < dim; ++i)
        if ((i & b0) && !(i & b1)) std::swap(v[i], v[i | b1]);
      break;
    case GateKind::SWAP:
      for (int i = 0; i < dim; ++i)
        if ((i & b0) && !(i & b1)) std::swap(v[i], v[(i & ~b0) | b1]);
      break;
    default:
      throw std::logic_error("not a two-qubit gate");
  }
}

}  // namespace detail

// Dense unitary of the whole gate list, gates applied in list order.
inline CMat to_unitary(const Circuit& c) {
  if (c.n > 10) throw std::invalid_argument("to_unitary: dense construction limited to n <= 10");
  const int dim = 1 << c.n;
  CMat u = CMat::Identity(dim, dim);
  for (const auto& g : c.gates)
    for (int col = 0; col < dim; ++col) detail::apply_gate_to_state(u.col(col).data(), c.n, g);
  return u;
}

// True iff U = alpha V for some unit phase alpha, within tol in max norm.
// alpha is read off the largest-magnitude element of V.
inline bool equiv_global_phase(const CMat& u, const CMat& v, double tol) {
  if (u.rows() != v.rows() || u.cols() != v.cols())
    throw std::invalid_argument("equiv_global_phase: dimension mismatch");
  Eigen::Index r = 0, c = 0;
  const double vmax = v.cwiseAbs().maxCoeff(&r, &c);
  if (vmax == 0.0) return max_abs(u) <= tol;
  Complex alpha = u(r, c) / v(r, c);
  const double mag = std::abs(alpha);
  if (mag == 0.0) return false;
  alpha /= mag;
  return max_abs(CMat(u - alpha * v)) <= tol;
}

inline std::string serialize(const Circuit& c) {
  std::string out = "n=" + std::to_string(c.n) + " topology=" + topology_name(c.topology) + "\n";
  char buf[64];
  std::size_t next_barrier = 0;
  for (std::size_t i = 0; i <= c.gates.size(); ++i) {
    while (next_barrier < c.barriers.size() && c.barriers[next_barrier] == i) {
      out += "BARRIER\n";
      ++next_barrier;
    }
    if (i == c.gates.size()) break;
    const Gate& g = c.gates[i];
    out += kind_name(g.kind);
    out += ' ';
    out += std::to_string(g.q0);
    if (g.q1 >= 0) out += "," + std::to_string(g.q1);
    if (has_phase(g.kind)) {
      std::snprintf(buf, sizeof buf, ",%.17g", g.phase);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

inline Circuit parse_circuit(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  auto fail = [&](const std::string& what) {
    throw std::invalid_argument("circuit parse error at line " + std::to_string(lineno) + ": " +
                                what);
  };
  Circuit c;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (!header_seen) {
      int n = 0;
      char topo[32] = {0};
      if (std::sscanf(line.c_str(), "n=%d topology=%31s", &n, topo) != 2) fail("bad header");
      c.n = n;
      if (std::string(topo) == "linear")
        c.topology = Topology::linear;
      else if (std::string(topo) == "all-to-all")
        c.topology = Topology::all_to_all;
      else
        fail("unknown topology tag");
      header_seen = true;
      continue;
    }
    if (line == "BARRIER") {
      c.add_barrier();
      continue;
    }
    const auto sp = line.find(' ');
    if (sp == std::string::npos) fail("missing operands");
    const std::string name = line.substr(0, sp);
    GateKind kind;
    if (name == "H") kind = GateKind::H;
    else if (name == "P") kind = GateKind::P;
    else if (name == "CP") kind = GateKind::CP;
    else if (name == "SWAP") kind = GateKind::SWAP;
    else if (name == "CNOT") kind = GateKind::CNOT;
    else if (name == "RZ") kind = GateKind::RZ;
    else if (name == "SX") kind = GateKind::SX;
    else if (name == "X") kind = GateKind::X;
    else { fail("unknown gate kind '" + name + "'"); return c; }
    std::vector<std::string> fields;
    std::string rest = line.substr(sp + 1);
    std::size_t pos = 0;
    while (pos != std::string::npos) {
      const auto comma = rest.find(',', pos);
      fields.push_back(rest.substr(pos, comma == std::string::npos ? comma : comma - pos));
      pos = comma == std::string::npos ? comma : comma + 1;
    }
    const std::size_t want = std::size_t(1) + (is_two_qubit(kind) ? 1 : 0) + (has_phase(kind) ? 1 : 0);
    if (fields.size() != want) fail("expected " + std::to_string(want) + " operands");
    try {
      std::size_t idx = 0;
      const int q0 = std::stoi(fields[idx++]);
      const int q1 = is_two_qubit(kind) ? std::stoi(fields[idx++]) : -1;
      const double ph = has_phase(kind) ? std::stod(fields[idx++]) : 0.0;
      c.add(is_two_qubit(kind) ? Gate(kind, q0, q1, ph) : Gate(kind, q0, ph));
    } catch (const std::invalid_argument& e) {
      fail(e.what());
    }
  }
  if (!header_seen) {
    lineno = 0;
    fail("empty input");
  }
  return c;
}

}  // namespace qsm
