#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "qsm/closedform.hpp"
#include "qsm/krausgate.hpp"
#include "qsm/lindblad.hpp"
#include "qsm/linalg.hpp"
#include "qsm/qstate.hpp"

namespace qsm {

struct FitResult {
  std::string model;
  std::map<std::string, double> params;
  std::map<std::string, double> stderrs;
  double residual_rms = 0.0;
  double window_lo = 0.0;
  double window_hi = 0.0;
  bool converged = true;
};

namespace detail {

using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct LmOutcome {
  Eigen::VectorXd x;
  Eigen::VectorXd stderr_;
  double rms = 0.0;
  double ssr = 0.0;
  bool converged = false;
};

// Damped least squares with a numerical Jacobian and lower bounds kept by
// clamping. Parameter count is tiny here, so the normal equations are fine.
inline LmOutcome levenberg_marquardt(const ResidualFn& fn, Eigen::VectorXd x,
                                     const Eigen::VectorXd& lower, int max_iter = 200) {
  const int p = int(x.size());
  auto clamp = [&](Eigen::VectorXd& v) {
    for (int i = 0; i < p; ++i) v[i] = std::max(v[i], lower[i]);
  };
  clamp(x);
  Eigen::VectorXd r = fn(x);
  double ssr = r.squaredNorm();
  double mu = 1e-3;
  bool converged = false;
  for (int iter = 0; iter < max_iter; ++iter) {
    Eigen::MatrixXd jac(r.size(), p);
    for (int i = 0; i < p; ++i) {
      const double h = 1e-6 * std::max(1.0, std::abs(x[i]));
      Eigen::VectorXd xp = x, xm = x;
      xp[i] += h;
      xm[i] = std::max(xm[i] - h, lower[i]);
      const Eigen::VectorXd rp = fn(xp);
      const Eigen::VectorXd rm = fn(xm);
      jac.col(i) = (rp - rm) / (xp[i] - xm[i]);
    }
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd jtr = jac.transpose() * r;
    if (jtr.lpNorm<Eigen::Infinity>() < 1e-14) {
      converged = true;
      break;
    }
    bool stepped = false;
    for (int tries = 0; tries < 30; ++tries) {
      Eigen::MatrixXd damped = jtj;
      damped.diagonal().array() += mu * jtj.diagonal().array().max(1e-12);
      Eigen::VectorXd xn = x - damped.ldlt().solve(jtr);
      clamp(xn);
      const Eigen::VectorXd rn = fn(xn);
      const double ssr_n = rn.squaredNorm();
      if (ssr_n < ssr) {
        const double dx = (xn - x).lpNorm<Eigen::Infinity>();
        const double df = ssr - ssr_n;
        x = xn;
        r = rn;
        ssr = ssr_n;
        mu = std::max(mu / 4.0, 1e-12);
        stepped = true;
        if (dx < 1e-12 || df < 1e-16 * std::max(1.0, ssr)) converged = true;
        break;
      }
      mu *= 4.0;
    }
    if (!stepped || converged) {
      converged = converged || !stepped;
      if (!stepped && ssr > 1e-20) converged = true;  // stalled at a flat spot
      break;
    }
  }
  LmOutcome out;
  out.x = x;
  out.ssr = ssr;
  out.rms = std::sqrt(ssr / double(std::max<Eigen::Index>(1, r.size())));
  out.converged = converged;
  // covariance from the residual scale; dof-corrected when possible
  Eigen::MatrixXd jac(r.size(), p);
  for (int i = 0; i < p; ++i) {
    const double h = 1e-6 * std::max(1.0, std::abs(x[i]));
    Eigen::VectorXd xp = x, xm = x;
    xp[i] += h;
    xm[i] = std::max(xm[i] - h, lower[i]);
    jac.col(i) = (fn(xp) - fn(xm)) / (xp[i] - xm[i]);
  }
  const int dof = std::max<int>(1, int(r.size()) - p);
  const double s2 = ssr / dof;
  const Eigen::MatrixXd cov = s2 * (jac.transpose() * jac)
                                       .ldlt()
                                       .solve(Eigen::MatrixXd::Identity(p, p));
  out.stderr_ = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  return out;
}

inline void check_series(const FidelitySeries& s) {
  if (s.times.size() != s.values.size())
    throw std::invalid_argument("fit: series times/values length mismatch");
}

}  // namespace detail

// f(t) = e^{-gamma t} (f0 - 1/2^n) + 1/2^n, fit over (gamma >= 0, f0).
inline FitResult fit_exp_plateau(const FidelitySeries& series, int n) {
  detail::check_series(series);
  if (series.times.size() < 3) throw std::invalid_argument("fit_exp_plateau: need >= 3 points");
  const double floor = std::pow(0.5, n);
  double span = 0.0;
  for (double v : series.values) span = std::max(span, std::abs(v - floor));
  if (span < 1e-12)
    throw NumericalError("fit_exp_plateau: series is constant at the mixed floor");
  // log-linear initial guess from the points above the floor
  double gamma0 = 0.1, logf0 = 0.0;
  {
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < series.times.size(); ++i)
      if (series.values[i] > floor + 1e-12) {
        xs.push_back(series.times[i]);
        ys.push_back(std::log(series.values[i] - floor));
      }
    if (xs.size() >= 2) {
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
      if (sxx > 0) {
        gamma0 = std::max(0.0, -sxy / sxx);
        logf0 = my + gamma0 * mx;
      }
    }
  }
  auto fn = [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd r(series.times.size());
    for (std::size_t i = 0; i < series.times.size(); ++i)
      r[i] = std::exp(-x[0] * series.times[i]) * (x[1] - floor) + floor - series.values[i];
    return r;
  };
  Eigen::VectorXd x0(2), lb(2);
  x0 << gamma0, std::exp(logf0) + floor;
  lb << 0.0, -std::numeric_limits<double>::infinity();
  const auto lm = detail::levenberg_marquardt(fn, x0, lb);
  FitResult res;
  res.model = "exp-plateau";
  res.params["gamma"] = lm.x[0];
  res.params["f0"] = lm.x[1];
  res.stderrs["gamma"] = lm.stderr_[0];
  res.stderrs["f0"] = lm.stderr_[1];
  res.residual_rms = lm.rms;
  res.window_lo = series.times.front();
  res.window_hi = series.times.back();
  res.converged = lm.converged;
  return res;
}

// Inverts f(1) = (f(0) - 1/2^n)(1 - eps)^M + 1/2^n for the per-CNOT error.
inline double extract_cnot_error(double f0, double f1, int n, int m_cnot) {
  const double floor = std::pow(0.5, n);
  if (!(floor < f1 && f1 <= f0 && f0 <= 1.0))
    throw std::domain_error("extract_cnot_error: need 1/2^n < f1 <= f0 <= 1");
  if (m_cnot < 1) throw std::invalid_argument("extract_cnot_error: need M >= 1");
  return 1.0 - std::pow((f1 - floor) / (f0 - floor), 1.0 / double(m_cnot));
}

// T1_phys = T_step / nu1 and T2_phys = 2 T_step / (nu1 + nu2).
inline std::pair<double, double> rates_to_physical(double nu1, double nu2, double t_step) {
  if (!(nu1 + nu2 > 0.0)) throw std::domain_error("rates_to_physical: zero denominator");
  if (!(t_step > 0.0)) throw std::invalid_argument("rates_to_physical: T_step must be positive");
  return {t_step / nu1, 2.0 * t_step / (nu1 + nu2)};
}

enum class RatesModel { gate_based_serial, lindblad_sim, kraus_sim };

inline const char* rates_model_name(RatesModel m) {
  switch (m) {
    case RatesModel::gate_based_serial: return "gate-based-serial";
    case RatesModel::lindblad_sim: return "lindblad-sim";
    case RatesModel::kraus_sim: return "kraus-sim";
  }
  return "?";
}

// Forward-model context for the joint two-regime rate fit. The series time
// axis is forward-and-back steps; closed forms are evaluated at 2t.
struct RatesFitContext {
  int n = 3;
  int gates_per_step = 33;  // per single direction
  // simulator-backed models
  QsmParams params_localized{3, 1, 0.1};
  QsmParams params_diffusive{3, 1, 4.55};
  LindbladMode mode = LindbladMode::alternating_pairs;
  Topology topology = Topology::linear;
  double t_step_seconds = 11.55e-6;
  int threads = 1;
  int start_grid = 5;  // multi-start grid edge; 5 spans [1e-3, 10] per decade
};

namespace detail {

inline std::vector<double> model_curve(RatesModel model, const RatesFitContext& ctx,
                                       const NoiseRates& rates, Regime regime, bool diffusive_leg,
                                       const std::vector<double>& times) {
  std::vector<double> out(times.size());
  switch (model) {
    case RatesModel::gate_based_serial: {
      for (std::size_t i = 0; i < times.size(); ++i)
        out[i] = f_gate_based(2.0 * times[i], ctx.n, ctx.gates_per_step, rates, regime,
                              GateLayout::serial());
      break;
    }
    case RatesModel::lindblad_sim: {
      const QsmParams& p = diffusive_leg ? ctx.params_diffusive : ctx.params_localized;
      int t_max = 1;
      for (double t : times) t_max = std::max(t_max, int(std::lround(t)));
      EchoOptions opts;
      opts.threads = ctx.threads;
      opts.self_check = false;
      const FidelitySeries sim =
          echo_lindblad(p, rates, t_max, ctx.mode, all_momenta(p.n), opts);
      for (std::size_t i = 0; i < times.size(); ++i)
        out[i] = sim.values[std::size_t(std::lround(times[i]))];
      break;
    }
    case RatesModel::kraus_sim: {
      const QsmParams& p = diffusive_leg ? ctx.params_diffusive : ctx.params_localized;
      int t_max = 1;
      for (double t : times) t_max = std::max(t_max, int(std::lround(t)));
      const auto phys = rates_to_physical(std::max(rates.nu1, 1e-9), rates.nu2,
                                          ctx.t_step_seconds);
      const GateNoiseConfig cfg(phys.first, std::min(phys.second, 2.0 * phys.first));
      const FidelitySeries sim =
          echo_kraus(p, cfg, t_max, all_momenta(p.n), ctx.topology, ctx.threads);
      for (std::size_t i = 0; i < times.size(); ++i)
        out[i] = sim.values[std::size_t(std::lround(times[i]))];
      break;
    }
  }
  return out;
}

}  // namespace detail

// Joint damped least squares over shared (nu1, nu2): the localized-regime
// series is modeled with the semi-localized rate and the diffusive series
// with the diffusive rate. Multi-start from a 5x5 log grid over
// [1e-3, 10]^2 since nu1 is weakly identified.
inline FitResult fit_rates(const FidelitySeries& localized, const FidelitySeries& diffusive,
                           RatesModel model, const RatesFitContext& ctx) {
  detail::check_series(localized);
  detail::check_series(diffusive);
  if (localized.times != diffusive.times)
    throw std::invalid_argument("fit_rates: series must share a common time grid");
  auto fn = [&](const Eigen::VectorXd& x) {
    const NoiseRates rates(std::max(0.0, x[0]), std::max(0.0, x[1]));
    const auto loc = detail::model_curve(model, ctx, rates, Regime::semi_localized, false,
                                         localized.times);
    const auto dif =
        detail::model_curve(model, ctx, rates, Regime::diffusive, true, diffusive.times);
    Eigen::VectorXd r(loc.size() + dif.size());
    for (std::size_t i = 0; i < loc.size(); ++i) r[i] = loc[i] - localized.values[i];
    for (std::size_t i = 0; i < dif.size(); ++i) r[loc.size() + i] = dif[i] - diffusive.values[i];
    return r;
  };
  Eigen::VectorXd lb(2);
  lb << 0.0, 0.0;
  detail::LmOutcome best;
  best.ssr = std::numeric_limits<double>::infinity();
  bool any = false;
  const int grid = std::max(1, ctx.start_grid);
  for (int i = 0; i < grid; ++i)
    for (int j = 0; j < grid; ++j) {
      Eigen::VectorXd x0(2);
      if (grid == 1)
        x0 << 0.1, 0.1;
      else
        x0 << std::pow(10.0, -3.0 + 4.0 * i / (grid - 1)),
            std::pow(10.0, -3.0 + 4.0 * j / (grid - 1));
      const auto lm = detail::levenberg_marquardt(fn, x0, lb);
      if (!any || lm.ssr < best.ssr) {
        best = lm;
        any = true;
      }
    }
  if (!best.converged)
    throw NumericalError("fit_rates: no start converged; best rms " + std::to_string(best.rms));
  FitResult res;
  res.model = rates_model_name(model);
  res.params["nu1"] = best.x[0];
  res.params["nu2"] = best.x[1];
  res.stderrs["nu1"] = best.stderr_[0];
  res.stderrs["nu2"] = best.stderr_[1];
  // effective per-t_fb decay rates of the fitted model, for scale checks
  const NoiseRates fitted(best.x[0], best.x[1]);
  const double f_loc1 = f_gate_based(2.0, ctx.n, ctx.gates_per_step, fitted,
                                     Regime::semi_localized, GateLayout::serial());
  const double f_dif1 =
      f_gate_based(2.0, ctx.n, ctx.gates_per_step, fitted, Regime::diffusive, GateLayout::serial());
  const double floor = std::pow(0.5, ctx.n);
  res.params["gamma_localized"] = -std::log((f_loc1 - floor) / (1.0 - floor));
  res.params["gamma_diffusive"] = -std::log((f_dif1 - floor) / (1.0 - floor));
  res.residual_rms = best.rms;
  res.window_lo = localized.times.front();
  res.window_hi = localized.times.back();
  res.converged = best.converged;
  return res;
}

// Log-log slope of f - 1/2^n over the window, with a curvature diagnostic
// from the quadratic term of a second-order fit in ln t.
inline FitResult fit_algebraic(const FidelitySeries& series, double t_lo, double t_hi, int n) {
  detail::check_series(series);
  if (t_lo <= 0.0 || t_hi <= t_lo)
    throw std::invalid_argument("fit_algebraic: window times must be positive and ordered");
  const double floor = std::pow(0.5, n);
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < series.times.size(); ++i) {
    const double t = series.times[i];
    if (t < t_lo || t > t_hi) continue;
    if (t <= 0.0) throw std::invalid_argument("fit_algebraic: window times must be positive");
    const double above = series.values[i] - floor;
    if (above <= 0.0)
      throw std::domain_error("fit_algebraic: fidelity at or below the mixed floor in window");
    xs.push_back(std::log(t));
    ys.push_back(std::log(above));
  }
  if (xs.size() < 3) throw std::invalid_argument("fit_algebraic: window must contain >= 3 points");
  Eigen::MatrixXd a(xs.size(), 3);
  Eigen::VectorXd b(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    a(i, 0) = 1.0;
    a(i, 1) = xs[i];
    a(i, 2) = xs[i] * xs[i];
    b[i] = ys[i];
  }
  const Eigen::VectorXd quad = a.colPivHouseholderQr().solve(b);
  const Eigen::VectorXd lin =
      Eigen::MatrixXd(a.leftCols(2)).colPivHouseholderQr().solve(b);
  Eigen::VectorXd resid = a.leftCols(2) * lin - b;
  FitResult res;
  res.model = "algebraic";
  res.params["exponent"] = lin[1];
  res.params["prefactor"] = std::exp(lin[0]);
  res.params["curvature"] = quad[2];
  res.residual_rms = std::sqrt(resid.squaredNorm() / double(xs.size()));
  res.window_lo = t_lo;
  res.window_hi = t_hi;
  return res;
}

}  // namespace qsm
