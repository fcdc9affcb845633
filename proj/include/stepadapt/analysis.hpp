#pragma once

// Threshold classification, limit-set membership, geometric-rate fits and
// the parameter-sweep experiments (phase diagram, precision vs rate).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stepadapt/engine.hpp"
#include "stepadapt/errors.hpp"
#include "stepadapt/noise.hpp"
#include "stepadapt/problem.hpp"
#include "stepadapt/rate.hpp"
#include "stepadapt/stepsize.hpp"

namespace stepadapt {

enum class TheoreticalClass { Converge, Diverge, Indeterminate };

inline std::string to_string(TheoreticalClass c) {
  switch (c) {
    case TheoreticalClass::Converge:
      return "converge";
    case TheoreticalClass::Diverge:
      return "diverge";
    case TheoreticalClass::Indeterminate:
      return "indeterminate";
  }
  return "unknown";
}

/// Threshold comparisons closer than this are Indeterminate.
inline constexpr double kClassTolerance = 1e-12;

struct ThresholdReport {
  double kappa;
  double lambda;
  double k_plus_at_0;
  double inf_k_minus;
  double inf_k_minus_argmin;
  TheoreticalClass theoretical_class;
};

/// inf_z k_minus(z): grid of 1601 points over [-8s, 8s] (s the noise scale),
/// then golden-section refinement inside the bracketing grid cells. The
/// refinement only replaces the grid value when it improves on it by more
/// than rounding noise.
inline GridMinimum refined_inf_k_minus(const NoiseModel& noise) {
  const double s = noise.scale();
  const auto grid = linspace(-8.0 * s, 8.0 * s, 1601);
  GridMinimum best = inf_k_minus(noise, grid);
  const double h = grid[1] - grid[0];
  double lo = best.argmin - h;
  double hi = best.argmin + h;
  const auto f = [&](double z) { return k_minus(noise, z).value; };
  constexpr double inv_phi = 0.6180339887498949;
  double a = hi - inv_phi * (hi - lo);
  double b = lo + inv_phi * (hi - lo);
  double fa = f(a), fb = f(b);
  for (int i = 0; i < 80 && hi - lo > 1e-12 * s; ++i) {
    if (fa < fb) {
      hi = b;
      b = a;
      fb = fa;
      a = hi - inv_phi * (hi - lo);
      fa = f(a);
    } else {
      lo = a;
      a = b;
      fa = fb;
      b = lo + inv_phi * (hi - lo);
      fb = f(b);
    }
  }
  const double z = 0.5 * (lo + hi);
  const double v = f(z);
  if (v < best.value - kClassTolerance) best = {v, z};
  return best;
}

/// Applies both hypotheses: Converge iff kappa > k_plus(0), Diverge iff
/// kappa < inf_z k_minus(z), Indeterminate otherwise.
inline ThresholdReport theoretical_classification(double u, double d, const NoiseModel& noise) {
  ThresholdReport r{};
  r.kappa = kappa(u, d);
  r.lambda = lambda_of(u, d);
  r.k_plus_at_0 = k_plus(noise, 0.0).value;
  const GridMinimum m = refined_inf_k_minus(noise);
  r.inf_k_minus = m.value;
  r.inf_k_minus_argmin = m.argmin;
  if (r.kappa > r.k_plus_at_0 + kClassTolerance)
    r.theoretical_class = TheoreticalClass::Converge;
  else if (r.kappa < r.inf_k_minus - kClassTolerance)
    r.theoretical_class = TheoreticalClass::Diverge;
  else
    r.theoretical_class = TheoreticalClass::Indeterminate;
  return r;
}

struct Membership {
  bool member;
  /// k_minus(phi(x)).
  double k_value;
  /// kappa(u, d).
  double threshold;
  /// 1 / (1 + lambda(u, d)); equals threshold up to rounding.
  double threshold_via_lambda;
};

/// Whether x lies in {x : k_minus(phi(x)) <= kappa + tol}. The set is closed,
/// so the boundary counts as inside.
inline Membership limit_set_membership(double x, const TargetFunction& f, const NoiseModel& noise, double u,
                                       double d, double tol = 0.0) {
  Membership m{};
  m.threshold = kappa(u, d);
  m.threshold_via_lambda = 1.0 / (1.0 + lambda_of(u, d));
  m.k_value = k_minus(noise, f(x)).value;
  m.member = m.k_value <= m.threshold + tol;
  return m;
}

/// sup{|z| : k(z) <= threshold} for a sign-symmetric atom-free model, where
/// k is even and increasing in |z|. Empty when threshold < k(0); +inf when
/// threshold >= 1.
inline std::optional<double> boundary_abs_phi(const NoiseModel& noise, double threshold) {
  if (noise.has_atoms() || !noise.sign_symmetric())
    throw UnsupportedQuery("boundary inversion needs sign-symmetric atom-free noise");
  if (threshold < k_diag(noise, 0.0)) return std::nullopt;
  if (threshold >= 1.0) return std::numeric_limits<double>::infinity();
  const double s = noise.scale();
  double lo = 0.0;
  double hi = s;
  while (k_diag(noise, hi) <= threshold) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e6 * s) return std::numeric_limits<double>::infinity();
  }
  for (int i = 0; i < 200 && hi - lo > 1e-15 * s; ++i) {
    const double mid = 0.5 * (lo + hi);
    (k_diag(noise, mid) <= threshold ? lo : hi) = mid;
  }
  return lo;
}

/// Grid points x in [lo, hi] with k_minus(phi(x)) <= threshold.
inline std::vector<double> sample_limit_set(const TargetFunction& f, const NoiseModel& noise, double threshold,
                                            double lo, double hi, std::size_t n) {
  std::vector<double> out;
  for (double x : linspace(lo, hi, n))
    if (k_minus(noise, f(x)).value <= threshold) out.push_back(x);
  return out;
}

/// sup_{a in A} inf_{b in B} |a - b| over finite samples.
inline double hausdorff_upper(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw EmptySet("hausdorff_upper needs non-empty samples");
  double worst = 0.0;
  for (double x : a) {
    double nearest = std::numeric_limits<double>::infinity();
    for (double y : b) nearest = std::min(nearest, std::abs(x - y));
    worst = std::max(worst, nearest);
  }
  return worst;
}

struct TimeWindow {
  std::size_t t_lo;
  std::size_t t_hi;
};

/// Fit ln gamma_t against t over [t_lo, t_hi], using the unthinned tail when
/// it covers the window and the recorded series otherwise.
inline RateFit geometric_rate(const Trajectory& traj, TimeWindow window) {
  if (window.t_hi < window.t_lo) throw InsufficientData("empty window");
  std::vector<std::size_t> ts;
  std::vector<double> gs;
  const std::size_t tail_end = traj.tail_start + traj.tail_gammas.size();
  if (!traj.tail_gammas.empty() && window.t_lo >= traj.tail_start) {
    for (std::size_t t = window.t_lo; t <= window.t_hi && t < tail_end; ++t) {
      ts.push_back(t);
      gs.push_back(traj.tail_gammas[t - traj.tail_start]);
    }
  } else {
    for (std::size_t i = 0; i < traj.ts.size(); ++i) {
      if (traj.ts[i] < window.t_lo || traj.ts[i] > window.t_hi) continue;
      ts.push_back(traj.ts[i]);
      gs.push_back(traj.gammas[i]);
    }
  }
  return fit_log_linear(ts, gs);
}

/// Final `steps` steps of the run.
inline RateFit geometric_rate(const Trajectory& traj, std::size_t steps) {
  const std::size_t lo = traj.t_final + 1 > steps ? traj.t_final + 1 - steps : 0;
  return geometric_rate(traj, TimeWindow{lo, traj.t_final});
}

struct PhaseCell {
  double u;
  double d;
  double ud;
  double kappa;
  TheoreticalClass theoretical_class;
  double empirical_conv_fraction;
  double median_limit_error;
  double median_rate_slope;
  std::size_t n_seeds;
};

struct PhaseDiagram {
  std::vector<PhaseCell> cells;
};

/// Multiplicative rule with the given (u, d) and the base config's gbar.
inline SimConfig with_multiplicative(const SimConfig& base, double u, double d) {
  SimConfig c = base;
  c.rule = Multiplicative{u, d, max_step(base.rule)};
  return c;
}

/// One ensemble per (u, d) cell, u-major. Every cell reuses the base seed,
/// so cells share their noise streams.
inline PhaseDiagram phase_sweep(std::span<const double> u_grid, std::span<const double> d_grid,
                                const SimConfig& base, std::size_t n_seeds, unsigned threads = 1) {
  PhaseDiagram diagram;
  for (double u : u_grid) {
    for (double d : d_grid) {
      const SimConfig cfg = with_multiplicative(base, u, d);
      const ThresholdReport th = theoretical_classification(u, d, base.noise);
      const EnsembleResult ens = run_ensemble(cfg, n_seeds, threads);
      diagram.cells.push_back({u, d, u * d, th.kappa, th.theoretical_class, ens.conv_fraction,
                               ens.median_limit_error, ens.median_rate_slope, n_seeds});
    }
  }
  return diagram;
}

struct PrecisionRow {
  double d;
  double lambda;
  double kappa;
  /// Largest |phi| inside the limit set; empty for noise without a monotone k.
  std::optional<double> boundary_abs_phi;
  double median_limit_error;
  double median_steps;
  double conv_fraction;
};

/// Limit precision against time-to-small-step as d rises toward 1/u.
inline std::vector<PrecisionRow> precision_vs_rate(double u, std::span<const double> d_list, const SimConfig& base,
                                                   std::size_t n_seeds, unsigned threads = 1) {
  for (std::size_t i = 0; i < d_list.size(); ++i) {
    if (!(u * d_list[i] < 1)) throw InvalidConfig("precision sweep needs u*d < 1 for every d");
    if (i > 0 && !(d_list[i] > d_list[i - 1])) throw InvalidConfig("d_list must be strictly ascending");
  }
  std::vector<PrecisionRow> rows;
  for (double d : d_list) {
    const SimConfig cfg = with_multiplicative(base, u, d);
    const EnsembleResult ens = run_ensemble(cfg, n_seeds, threads);
    PrecisionRow row{};
    row.d = d;
    row.lambda = lambda_of(u, d);
    row.kappa = kappa(u, d);
    if (!base.noise.has_atoms() && base.noise.sign_symmetric()) row.boundary_abs_phi = boundary_abs_phi(base.noise, row.kappa);
    row.median_limit_error = ens.median_limit_error;
    row.median_steps = ens.median_steps_small_gamma;
    row.conv_fraction = ens.conv_fraction;
    rows.push_back(row);
  }
  return rows;
}

enum class Trend { NonIncreasing, NonDecreasing };

/// Adjacent pairs that break the trend. NaN entries count as breaks.
inline std::size_t adjacent_inversions(std::span<const double> values, Trend trend) {
  std::size_t count = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    const bool ok = trend == Trend::NonIncreasing ? values[i] <= values[i - 1] : values[i] >= values[i - 1];
    if (!ok) ++count;
  }
  return count;
}

}  // namespace stepadapt
