#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "qsm/lindblad.hpp"
#include "qsm/parallel.hpp"
#include "qsm/qstate.hpp"
#include "qsm/rng.hpp"
#include "qsm/sawtooth.hpp"

namespace qsm {

// Stochastic kick noise: k -> k + dk per map step with dk ~ N(0, sigma^2),
// drawn independently for every (realization, direction, step).
struct ParamNoiseConfig {
  double sigma = 0.0;
  int realizations = 1;
  std::uint64_t seed = 1;
  bool exclude_symmetric_ics = true;  // drop p = 0 and p = -N/2

  ParamNoiseConfig() = default;
  ParamNoiseConfig(double sigma_, int realizations_, std::uint64_t seed_,
                   bool exclude_symmetric = true)
      : sigma(sigma_), realizations(realizations_), seed(seed_),
        exclude_symmetric_ics(exclude_symmetric) {
    if (sigma < 0.0) throw std::invalid_argument("ParamNoiseConfig: sigma must be >= 0");
    if (realizations < 1) throw std::invalid_argument("ParamNoiseConfig: need realizations >= 1");
  }
};

inline double sample_kick(double k, double sigma, Rng& rng) {
  return k + sigma * rng.next_gaussian();
}

namespace detail {

// Counter-based stream per (seed, realization, direction, step): draws do not
// depend on evaluation order, so ensembles are schedule invariant.
inline double kick_for(const ParamNoiseConfig& cfg, double k, std::uint64_t realization,
                       int direction, std::uint64_t step) {
  Rng rng(stream_key(cfg.seed, realization, std::uint64_t(direction), step));
  return sample_kick(k, cfg.sigma, rng);
}

}  // namespace detail

inline std::vector<int> param_noise_ics(int n, bool exclude_symmetric) {
  const int half = (1 << n) / 2;
  std::vector<int> ics;
  for (int p = -half; p < half; ++p) {
    if (exclude_symmetric && (p == 0 || p == -half)) continue;
    ics.push_back(p);
  }
  return ics;
}

namespace detail {

struct McReduction {
  std::vector<double> mean;
  std::vector<double> se;
};

// Mean and standard error over realizations of per-realization IC averages.
inline McReduction reduce_realizations(const std::vector<std::vector<double>>& per_r, int t_max) {
  const std::size_t r_count = per_r.size();
  McReduction red;
  red.mean.assign(t_max + 1, 0.0);
  red.se.assign(t_max + 1, 0.0);
  for (int t = 0; t <= t_max; ++t) {
    double m = 0.0;
    for (std::size_t r = 0; r < r_count; ++r) m += per_r[r][t];
    m /= double(r_count);
    double var = 0.0;
    for (std::size_t r = 0; r < r_count; ++r) var += (per_r[r][t] - m) * (per_r[r][t] - m);
    red.mean[t] = m;
    red.se[t] = r_count > 1 ? std::sqrt(var / (double(r_count) * (double(r_count) - 1.0))) : 0.0;
  }
  return red;
}

}  // namespace detail

// Pure-state echo under kick noise: forward t steps with per-step sampled k,
// backward t steps with independent samples, squared overlap with the
// initial state. Averaged over realizations and initial conditions; the
// symmetric initial conditions p = 0 and p = -N/2 are excluded by default.
inline FidelitySeries echo_param_noise(const QsmParams& params, const ParamNoiseConfig& cfg,
                                       int t_max, const std::vector<int>& ics, int threads = 1) {
  if (t_max < 1) throw std::invalid_argument("echo_param_noise: t_max must be >= 1");
  if (ics.empty()) throw std::invalid_argument("echo_param_noise: empty initial-condition set");
  const std::size_t n_ic = ics.size();
  const std::size_t r_count = std::size_t(cfg.realizations);
  std::vector<std::vector<double>> per_r(r_count, std::vector<double>(t_max + 1, 1.0));
  std::vector<double> neg_fraction(r_count, 0.0);
  parallel_for(r_count, threads, [&](std::size_t r) {
    const DftPlan plan(params.n);
    std::vector<double> k_fwd(t_max + 1), k_bwd(t_max + 1);
    int neg = 0;
    for (int s = 1; s <= t_max; ++s) {
      k_fwd[s] = detail::kick_for(cfg, params.k, r, 0, std::uint64_t(s));
      k_bwd[s] = detail::kick_for(cfg, params.k, r, 1, std::uint64_t(s));
      neg += (k_fwd[s] < 0.0) + (k_bwd[s] < 0.0);
    }
    neg_fraction[r] = double(neg) / double(2 * t_max);
    std::vector<CVec> fwd(n_ic);
    for (std::size_t i = 0; i < n_ic; ++i) fwd[i] = basis_state(params.n, ics[i]).amplitudes;
    for (int t = 1; t <= t_max; ++t) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n_ic; ++i) {
        apply_step(fwd[i], params, k_fwd[t], Direction::forward, plan);
        CVec back = fwd[i];
        for (int s = 1; s <= t; ++s)
          apply_step(back, params, k_bwd[s], Direction::backward, plan);
        acc += std::norm(back[ics[i] + params.dim() / 2]);
      }
      per_r[r][t] = acc / double(n_ic);
    }
  });
  const auto red = detail::reduce_realizations(per_r, t_max);
  FidelitySeries out;
  for (int t = 0; t <= t_max; ++t) {
    out.times.push_back(t);
    out.values.push_back(red.mean[t]);
    out.stderrs.push_back(red.se[t]);
  }
  double neg_mean = 0.0;
  for (double f : neg_fraction) neg_mean += f;
  neg_mean /= double(r_count);
  out.meta["engine"] = "echo-param";
  out.meta["n"] = std::to_string(params.n);
  out.meta["L"] = std::to_string(params.L);
  out.meta["k"] = std::to_string(params.k);
  out.meta["sigma"] = std::to_string(cfg.sigma);
  out.meta["realizations"] = std::to_string(cfg.realizations);
  out.meta["seed"] = std::to_string(cfg.seed);
  out.meta["ic_count"] = std::to_string(n_ic);
  out.meta["exclude_symmetric_ics"] = cfg.exclude_symmetric_ics ? "true" : "false";
  out.meta["negative_kick_fraction"] = std::to_string(neg_mean);
  return out;
}

inline FidelitySeries echo_param_noise(const QsmParams& params, const ParamNoiseConfig& cfg,
                                       int t_max, int threads = 1) {
  return echo_param_noise(params, cfg, t_max,
                          param_noise_ics(params.n, cfg.exclude_symmetric_ics), threads);
}

// Kick noise combined with continuous Lindblad decay: density-matrix echo
// where each map step uses the per-step sampled k in its substep unitaries.
// Same RNG keying as echo_param_noise, so sigma = 0 reduces to the pure
// Lindblad echo and zero rates to the pure parameter-noise echo.
inline FidelitySeries echo_combined(const QsmParams& params, const ParamNoiseConfig& cfg,
                                    const NoiseRates& rates, int t_max,
                                    LindbladMode mode = LindbladMode::continuous_all_qubits,
                                    int threads = 1) {
  if (t_max < 1) throw std::invalid_argument("echo_combined: t_max must be >= 1");
  const std::vector<int> ics = param_noise_ics(params.n, cfg.exclude_symmetric_ics);
  const std::size_t n_ic = ics.size();
  const std::size_t r_count = std::size_t(cfg.realizations);
  std::vector<std::vector<double>> fid(r_count * n_ic, std::vector<double>(t_max + 1, 1.0));
  parallel_for(r_count * n_ic, threads, [&](std::size_t slot) {
    const std::size_t r = slot / n_ic;
    const std::size_t i = slot % n_ic;
    std::vector<double> k_fwd(t_max + 1), k_bwd(t_max + 1);
    for (int s = 1; s <= t_max; ++s) {
      k_fwd[s] = detail::kick_for(cfg, params.k, r, 0, std::uint64_t(s));
      k_bwd[s] = detail::kick_for(cfg, params.k, r, 1, std::uint64_t(s));
    }
    MasterStepper stepper(params, rates, mode);
    const int idx = ics[i] + params.dim() / 2;
    CMat fwd = projector(basis_state(params.n, ics[i])).elements;
    for (int t = 1; t <= t_max; ++t) {
      stepper.map_step(fwd, k_fwd[t], Direction::forward);
      CMat back = fwd;
      for (int s = 1; s <= t; ++s) stepper.map_step(back, k_bwd[s], Direction::backward);
      fid[slot][t] = back(idx, idx).real();
    }
  });
  // per-realization IC means, then the usual over-realization reduction
  std::vector<std::vector<double>> per_r(r_count, std::vector<double>(t_max + 1, 0.0));
  for (std::size_t r = 0; r < r_count; ++r)
    for (int t = 0; t <= t_max; ++t) {
      double m = 0.0;
      for (std::size_t i = 0; i < n_ic; ++i) m += fid[r * n_ic + i][t];
      per_r[r][t] = m / double(n_ic);
    }
  const auto red = detail::reduce_realizations(per_r, t_max);
  FidelitySeries out;
  for (int t = 0; t <= t_max; ++t) {
    out.times.push_back(t);
    out.values.push_back(red.mean[t]);
    out.stderrs.push_back(red.se[t]);
  }
  int neg = 0;
  for (std::size_t r = 0; r < r_count; ++r)
    for (int s = 1; s <= t_max; ++s)
      neg += (detail::kick_for(cfg, params.k, r, 0, std::uint64_t(s)) < 0.0) +
             (detail::kick_for(cfg, params.k, r, 1, std::uint64_t(s)) < 0.0);
  out.meta["negative_kick_fraction"] =
      std::to_string(double(neg) / double(2 * t_max * r_count));
  out.meta["engine"] = "echo-combined";
  out.meta["n"] = std::to_string(params.n);
  out.meta["L"] = std::to_string(params.L);
  out.meta["k"] = std::to_string(params.k);
  out.meta["sigma"] = std::to_string(cfg.sigma);
  out.meta["nu1"] = std::to_string(rates.nu1);
  out.meta["nu2"] = std::to_string(rates.nu2);
  out.meta["mode"] = mode_name(mode);
  out.meta["realizations"] = std::to_string(cfg.realizations);
  out.meta["seed"] = std::to_string(cfg.seed);
  out.meta["ic_count"] = std::to_string(n_ic);
  return out;
}

// Least-squares slope of ln(f - 1/2^n) over the window, sign-flipped so an
// exponential decay e^{-gamma t} reports gamma.
inline double fgr_rate(const FidelitySeries& series, double t_lo, double t_hi, int n) {
  const double floor = std::pow(0.5, n);
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < series.times.size(); ++i) {
    const double t = series.times[i];
    if (t < t_lo || t > t_hi) continue;
    const double above = series.values[i] - floor;
    if (above <= 0.0)
      throw std::domain_error("fgr_rate: fidelity at or below the mixed floor in window");
    xs.push_back(t);
    ys.push_back(std::log(above));
  }
  if (xs.size() < 2) throw std::invalid_argument("fgr_rate: window must contain >= 2 points");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= double(xs.size());
  my /= double(xs.size());
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("fgr_rate: degenerate window");
  return -sxy / sxx;
}

}  // namespace qsm
