#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "qsm/closedform.hpp"
#include "qsm/linalg.hpp"
#include "qsm/parallel.hpp"
#include "qsm/qstate.hpp"
#include "qsm/sawtooth.hpp"

namespace qsm {

// Collapse operators: sqrt(nu1) |0><1| and sqrt(nu2) |1><1| on each active
// qubit, embedded by identities elsewhere. Zero-rate operators are omitted.
inline std::vector<CMat> collapse_ops(int n, const NoiseRates& rates,
                                      const std::vector<int>& active_qubits) {
  const int dim = 1 << n;
  std::vector<CMat> ops;
  for (int q : active_qubits) {
    if (q < 0 || q >= n) throw std::invalid_argument("collapse_ops: qubit index out of range");
    const int bit = 1 << q;
    if (rates.nu1 > 0.0) {
      CMat l = CMat::Zero(dim, dim);
      for (int i = 0; i < dim; ++i)
        if (i & bit) l(i & ~bit, i) = std::sqrt(rates.nu1);
      ops.push_back(l);
    }
    if (rates.nu2 > 0.0) {
      CMat l = CMat::Zero(dim, dim);
      for (int i = 0; i < dim; ++i)
        if (i & bit) l(i, i) = std::sqrt(rates.nu2);
      ops.push_back(l);
    }
  }
  return ops;
}

namespace detail {

// Elementwise form of the dissipator for single-qubit relaxation/dephasing:
// d sigma_ij = -rate_ij sigma_ij + nu1 * sum over jointly-ground active
// qubits of sigma_{i+2^m, j+2^m}, with
// rate_ij = nu1 #{m: bit set in i and j} + (nu1+nu2)/2 #{m: bits differ}.
struct DecayGenerator {
  double nu1 = 0.0;
  bool trivial = true;
  Eigen::ArrayXXd rate;
  std::vector<int> gain_bits;

  DecayGenerator() = default;
  DecayGenerator(int n, const NoiseRates& rates, const std::vector<int>& active) {
    const int dim = 1 << n;
    nu1 = rates.nu1;
    trivial = (rates.nu1 == 0.0 && rates.nu2 == 0.0) || active.empty();
    rate = Eigen::ArrayXXd::Zero(dim, dim);
    for (int q : active) {
      if (q < 0 || q >= n) throw std::invalid_argument("decay: qubit index out of range");
      const int bit = 1 << q;
      for (int j = 0; j < dim; ++j)
        for (int i = 0; i < dim; ++i) {
          const bool bi = i & bit, bj = j & bit;
          if (bi && bj)
            rate(i, j) += rates.nu1;
          else if (bi != bj)
            rate(i, j) += (rates.nu1 + rates.nu2) / 2.0;
        }
      if (rates.nu1 > 0.0) gain_bits.push_back(bit);
    }
  }

  void rhs(const CMat& s, CMat& out) const {
    out = (-rate * s.array()).matrix();
    const int dim = int(s.rows());
    for (int bit : gain_bits)
      for (int j = 0; j < dim; ++j) {
        if (j & bit) continue;
        for (int i = 0; i < dim; ++i) {
          if (i & bit) continue;
          out(i, j) += nu1 * s(i | bit, j | bit);
        }
      }
  }
};

struct RkWorkspace {
  CMat k1, k2, k3, k4, tmp;

  void resize(int dim) {
    if (k1.rows() != dim) {
      k1.resize(dim, dim);
      k2.resize(dim, dim);
      k3.resize(dim, dim);
      k4.resize(dim, dim);
      tmp.resize(dim, dim);
    }
  }
};

// Classic fixed-step RK4; the dissipator is linear and far from stiff at the
// rates of interest, so a step of 1/64 map step holds errors near round-off.
inline void integrate_decay(CMat& sigma, const DecayGenerator& gen, double duration,
                            double max_step, RkWorkspace& w) {
  if (duration <= 0.0 || gen.trivial) return;
  const int steps = std::max(1, int(std::ceil(duration / max_step - 1e-12)));
  const double h = duration / steps;
  w.resize(int(sigma.rows()));
  for (int s = 0; s < steps; ++s) {
    gen.rhs(sigma, w.k1);
    w.tmp = sigma + (h / 2.0) * w.k1;
    gen.rhs(w.tmp, w.k2);
    w.tmp = sigma + (h / 2.0) * w.k2;
    gen.rhs(w.tmp, w.k3);
    w.tmp = sigma + h * w.k3;
    gen.rhs(w.tmp, w.k4);
    sigma += (h / 6.0) * (w.k1 + 2.0 * w.k2 + 2.0 * w.k3 + w.k4);
  }
}

}  // namespace detail

struct SegmentOp {
  enum class Kind { none, dense, transform, inverse_transform, diagonal };
  Kind kind = Kind::none;
  CMat dense;
  CVec diagonal;

  static SegmentOp none() { return {}; }
  static SegmentOp from_dense(CMat u) { return SegmentOp{Kind::dense, std::move(u), {}}; }
  static SegmentOp fourier() { return SegmentOp{Kind::transform, {}, {}}; }
  static SegmentOp inverse_fourier() { return SegmentOp{Kind::inverse_transform, {}, {}}; }
  static SegmentOp from_diagonal(CVec d) { return SegmentOp{Kind::diagonal, {}, std::move(d)}; }
};

// One decay schedule segment: an instantaneous unitary followed by a
// decay-only interval on the listed qubits.
struct DecaySegment {
  SegmentOp op;
  double duration = 0.0;
  std::vector<int> active_qubits;
};

using DecaySchedule = std::vector<DecaySegment>;

struct IntegratorOptions {
  double max_step = 1.0 / 64.0;
  bool self_check = true;      // re-integrate at half step, Richardson estimate
  double check_tol = 1e-8;
};

namespace detail {

inline void apply_segment_op(CMat& sigma, const SegmentOp& op, const DftPlan& plan) {
  switch (op.kind) {
    case SegmentOp::Kind::none:
      break;
    case SegmentOp::Kind::dense:
      sigma = op.dense * sigma * op.dense.adjoint();
      break;
    case SegmentOp::Kind::transform:
      plan.conjugate_dm(sigma, +1);
      break;
    case SegmentOp::Kind::inverse_transform:
      plan.conjugate_dm(sigma, -1);
      break;
    case SegmentOp::Kind::diagonal:
      sigma = op.diagonal.asDiagonal() * sigma * op.diagonal.conjugate().asDiagonal();
      break;
  }
}

}  // namespace detail

// Applies each segment of the schedule: unitary, then the Lindblad dissipator
// integrated over the segment duration (the Hamiltonian commutator term is
// carried entirely by the instantaneous unitaries).
inline DensityMatrix evolve_master(const DensityMatrix& dm, const DecaySchedule& schedule,
                                   const NoiseRates& rates,
                                   const IntegratorOptions& opts = IntegratorOptions{}) {
  DensityMatrix out = dm;
  const DftPlan plan(dm.n);
  detail::RkWorkspace w;
  for (const auto& seg : schedule) {
    if (seg.duration < 0.0) throw std::invalid_argument("evolve_master: negative duration");
    detail::apply_segment_op(out.elements, seg.op, plan);
    const detail::DecayGenerator gen(dm.n, rates, seg.active_qubits);
    if (opts.self_check && !gen.trivial && seg.duration > 0.0) {
      CMat coarse = out.elements;
      detail::integrate_decay(coarse, gen, seg.duration, opts.max_step, w);
      detail::integrate_decay(out.elements, gen, seg.duration, opts.max_step / 2.0, w);
      const double est = max_abs(CMat(coarse - out.elements)) / 15.0;
      if (est > opts.check_tol)
        throw NumericalError("evolve_master: integrator self-check failed, estimated error " +
                             std::to_string(est) + " exceeds tolerance " +
                             std::to_string(opts.check_tol));
      out.elements = std::move(coarse);  // keep the fixed-step result
    } else {
      detail::integrate_decay(out.elements, gen, seg.duration, opts.max_step, w);
    }
  }
  return out;
}

enum class LindbladMode { continuous_all_qubits, alternating_pairs };

inline const char* mode_name(LindbladMode m) {
  return m == LindbladMode::continuous_all_qubits ? "all-qubits" : "alternating-pairs";
}

// Unitary substeps of one map step with decay intervals between them.
// Exposed for engines that perturb the kick per step; plain runs use
// k_eff = params.k. At k = 0 the transform pair around the (identity)
// potential collapses, leaving the diagonal kinetic evolution of the
// analytic localized limit.
inline DecaySchedule qsm_decay_schedule(const QsmParams& params, double k_eff, Direction dir,
                                        LindbladMode mode) {
  if (mode == LindbladMode::alternating_pairs && params.n != 3)
    throw std::invalid_argument("alternating-pairs mode is defined for n = 3");
  std::vector<std::vector<int>> act;
  auto all = [&] {
    std::vector<int> a(params.n);
    for (int i = 0; i < params.n; ++i) a[i] = i;
    return a;
  };
  const bool alternating = mode == LindbladMode::alternating_pairs;
  DecaySchedule sched;
  if (params.k == 0.0) {
    const CVec kin = kinetic_phases(params, dir);
    if (alternating) {
      sched.push_back({SegmentOp::from_diagonal(kin), 0.5, {0, 1}});
      sched.push_back({SegmentOp::none(), 0.5, {1, 2}});
    } else {
      sched.push_back({SegmentOp::from_diagonal(kin), 1.0, all()});
    }
    return sched;
  }
  for (int s = 0; s < 4; ++s)
    act.push_back(alternating ? (s % 2 == 0 ? std::vector<int>{0, 1} : std::vector<int>{1, 2})
                              : all());
  const double q = 0.25;
  if (dir == Direction::forward) {
    sched.push_back({SegmentOp::fourier(), q, act[0]});
    sched.push_back({SegmentOp::from_diagonal(potential_phases(params, k_eff)), q, act[1]});
    sched.push_back({SegmentOp::inverse_fourier(), q, act[2]});
    sched.push_back({SegmentOp::from_diagonal(kinetic_phases(params)), q, act[3]});
  } else {
    sched.push_back(
        {SegmentOp::from_diagonal(kinetic_phases(params, Direction::backward)), q, act[0]});
    sched.push_back({SegmentOp::fourier(), q, act[1]});
    sched.push_back({SegmentOp::from_diagonal(potential_phases(params, k_eff, Direction::backward)),
                     q, act[2]});
    sched.push_back({SegmentOp::inverse_fourier(), q, act[3]});
  }
  return sched;
}

// Reusable per-thread stepper: precomputed transform plan, decay generators
// per distinct active set, and integrator workspace.
class MasterStepper {
 public:
  MasterStepper(const QsmParams& params, const NoiseRates& rates, LindbladMode mode,
                double max_step = 1.0 / 64.0)
      : params_(params), rates_(rates), mode_(mode), plan_(params.n), max_step_(max_step) {}

  void map_step(CMat& sigma, double k_eff, Direction dir) {
    const DecaySchedule sched = qsm_decay_schedule(params_, k_eff, dir, mode_);
    for (const auto& seg : sched) {
      detail::apply_segment_op(sigma, seg.op, plan_);
      detail::integrate_decay(sigma, generator(seg.active_qubits), seg.duration, max_step_, w_);
    }
  }

  // Richardson error estimate over one full map step at the engine step size.
  double step_error_estimate(CMat sigma, double k_eff, Direction dir) {
    CMat fine = sigma;
    map_step(sigma, k_eff, dir);
    const double saved = max_step_;
    max_step_ = saved / 2.0;
    map_step(fine, k_eff, dir);
    max_step_ = saved;
    return max_abs(CMat(sigma - fine)) / 15.0;
  }

 private:
  const detail::DecayGenerator& generator(const std::vector<int>& active) {
    for (std::size_t i = 0; i < keys_.size(); ++i)
      if (keys_[i] == active) return gens_[i];
    keys_.push_back(active);
    gens_.emplace_back(params_.n, rates_, active);
    return gens_.back();
  }

  QsmParams params_;
  NoiseRates rates_;
  LindbladMode mode_;
  DftPlan plan_;
  double max_step_;
  std::vector<std::vector<int>> keys_;
  std::vector<detail::DecayGenerator> gens_;
  detail::RkWorkspace w_;
};

inline std::vector<int> all_momenta(int n) {
  const int half = (1 << n) / 2;
  std::vector<int> ics;
  for (int p = -half; p < half; ++p) ics.push_back(p);
  return ics;
}

struct EchoOptions {
  int threads = 1;
  double max_step = 1.0 / 64.0;
  bool self_check = true;  // Richardson estimate on the first map step
  double check_tol = 1e-6;
};

// Loschmidt echo under continuous Lindblad decay: forward t map steps, then
// t backward steps with decay still active, fidelity against the initial
// basis state, averaged over ic_set. The decohering duration per reported
// t_fb unit is two map steps.
inline FidelitySeries echo_lindblad(const QsmParams& params, const NoiseRates& rates, int t_max,
                                    LindbladMode mode, const std::vector<int>& ic_set,
                                    const EchoOptions& opts = EchoOptions{}) {
  if (t_max < 1) throw std::invalid_argument("echo_lindblad: t_max must be >= 1");
  if (ic_set.empty()) throw std::invalid_argument("echo_lindblad: empty initial-condition set");
  const std::size_t n_ic = ic_set.size();
  std::vector<std::vector<double>> fid(n_ic, std::vector<double>(t_max + 1, 1.0));
  double err_estimate = 0.0;
  {
    MasterStepper probe(params, rates, mode, opts.max_step);
    CMat sigma = projector(basis_state(params.n, ic_set[0])).elements;
    err_estimate = probe.step_error_estimate(std::move(sigma), params.k, Direction::forward);
    if (opts.self_check && err_estimate > opts.check_tol)
      throw NumericalError("echo_lindblad: integrator self-check failed, estimated error " +
                           std::to_string(err_estimate));
  }
  parallel_for(n_ic, opts.threads, [&](std::size_t i) {
    MasterStepper stepper(params, rates, mode, opts.max_step);
    const StateVector psi0 = basis_state(params.n, ic_set[i]);
    const int idx = ic_set[i] + params.dim() / 2;
    CMat fwd = projector(psi0).elements;
    for (int t = 1; t <= t_max; ++t) {
      stepper.map_step(fwd, params.k, Direction::forward);
      CMat back = fwd;
      for (int s = 0; s < t; ++s) stepper.map_step(back, params.k, Direction::backward);
      fid[i][t] = back(idx, idx).real();
    }
  });
  FidelitySeries out;
  for (int t = 0; t <= t_max; ++t) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n_ic; ++i) mean += fid[i][t];
    mean /= double(n_ic);
    double var = 0.0;
    for (std::size_t i = 0; i < n_ic; ++i) var += (fid[i][t] - mean) * (fid[i][t] - mean);
    const double se = n_ic > 1 ? std::sqrt(var / (double(n_ic) * (double(n_ic) - 1.0))) : 0.0;
    out.times.push_back(t);
    out.values.push_back(mean);
    out.stderrs.push_back(se);
  }
  out.meta["engine"] = "echo-lindblad";
  out.meta["n"] = std::to_string(params.n);
  out.meta["L"] = std::to_string(params.L);
  out.meta["k"] = std::to_string(params.k);
  out.meta["nu1"] = std::to_string(rates.nu1);
  out.meta["nu2"] = std::to_string(rates.nu2);
  out.meta["mode"] = mode_name(mode);
  out.meta["ic_count"] = std::to_string(n_ic);
  out.meta["integrator_error_estimate"] = std::to_string(err_estimate);
  return out;
}

}  // namespace qsm
