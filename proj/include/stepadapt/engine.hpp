#pragma once

// The recursion x_t = x_{t-1} - gamma_{t-1} y_t, y_t = phi(x_{t-1}) + xi_t,
// single seeded runs with a finite-horizon convergence classifier, and
// deterministic multi-seed ensembles.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <exception>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "stepadapt/errors.hpp"
#include "stepadapt/noise.hpp"
#include "stepadapt/problem.hpp"
#include "stepadapt/random.hpp"
#include "stepadapt/rate.hpp"
#include "stepadapt/stepsize.hpp"

namespace stepadapt {

/// Finite-horizon surrogate for almost-sure convergence.
struct StopCriteria {
  std::size_t conv_window = 200;
  /// Bound on max |x_i - x_j| over the trailing window.
  double conv_tol = 1e-6;
  /// Last gamma must be below this fraction of the largest gamma seen.
  double gamma_tail_tol = 1e-8;
  double blowup_bound = 1e6;
  /// End the run at the first step where the criteria hold.
  bool stop_on_convergence = true;
};

inline void validate(const StopCriteria& c) {
  if (c.conv_window < 2) throw InvalidConfig("stop.conv_window must be >= 2");
  if (!(c.conv_tol > 0)) throw InvalidConfig("stop.conv_tol must be > 0");
  if (!(c.gamma_tail_tol > 0)) throw InvalidConfig("stop.gamma_tail_tol must be > 0");
  if (!(c.blowup_bound > 0)) throw InvalidConfig("stop.blowup_bound must be > 0");
}

struct SimConfig {
  TargetFunction problem;
  NoiseModel noise;
  StepRuleConfig rule;
  double x0 = 0.0;
  double gamma0 = 0.0;
  /// Defaults to gamma0.
  std::optional<double> gamma1;
  std::size_t horizon = 20000;
  std::uint64_t seed = 1;
  std::size_t record_stride = 1;
  StopCriteria stop;
  /// Trailing steps kept for the geometric-rate fit.
  std::size_t rate_window = 2000;
  /// gamma below this fraction of max_step counts as "small" for timing.
  double small_gamma_fraction = 1e-4;
};

inline void validate(const SimConfig& c) {
  validate(c.rule);
  validate(c.stop);
  if (c.horizon < 2) throw InvalidConfig("run.horizon must be >= 2");
  if (c.record_stride < 1) throw InvalidConfig("run.record_stride must be >= 1");
  if (!std::isfinite(c.x0)) throw InvalidConfig("init.x0 must be finite");
  init_state(c.rule, c.gamma0, c.gamma1.value_or(c.gamma0));
}

enum class Outcome { Converged, NotConverged, Stopped };
enum class FailureReason { None, HorizonExhausted, Blowup };

struct Status {
  Outcome outcome = Outcome::NotConverged;
  FailureReason reason = FailureReason::HorizonExhausted;
  /// Mean of x over the trailing window (Converged only).
  double x_star = std::numeric_limits<double>::quiet_NaN();
  std::size_t t_stop = 0;

  bool converged() const noexcept { return outcome == Outcome::Converged; }
};

inline std::string to_string(const Status& s) {
  switch (s.outcome) {
    case Outcome::Converged:
      return "converged";
    case Outcome::Stopped:
      return "stopped";
    case Outcome::NotConverged:
      return s.reason == FailureReason::Blowup ? "blowup" : "horizon_exhausted";
  }
  return "unknown";
}

struct Trajectory {
  // Series recorded at t = 0, stride, 2*stride, ... and at t_final. y at t = 0
  // is NaN (no measurement yet).
  std::vector<std::size_t> ts;
  std::vector<double> xs;
  std::vector<double> ys;
  std::vector<double> gammas;

  // Unthinned trailing window ending at t_final.
  std::size_t tail_start = 0;
  std::vector<double> tail_xs;
  std::vector<double> tail_gammas;

  std::size_t t_final = 0;
  double x_final = 0.0;
  /// The gamma-smallness test is part of convergence (multiplicative rule
  /// only; schedule-driven rules are judged on x alone).
  bool gamma_tail_applies = true;
  double gamma_max = 0.0;
  std::optional<std::size_t> t_small_gamma;
  Status status;
};

struct StepResult {
  double x;
  double y;
  StepRuleState rule;
};

/// One iteration with an explicit noise value. `gamma_active` is gamma_{t-1};
/// the rule consumes sign(y_prev * y) when y_prev is present (t >= 2).
inline StepResult step(const TargetFunction& f, const StepRuleConfig& rule, double x_prev, double gamma_active,
                       const StepRuleState& rule_state, std::optional<double> y_prev, double xi) {
  const double y = f(x_prev) + xi;
  const double x = x_prev - gamma_active * y;
  if (!std::isfinite(x) || !std::isfinite(y)) throw NonFiniteState("iterate became non-finite");
  StepRuleState next = y_prev ? update(rule, rule_state, sign_product(*y_prev, y)) : rule_state;
  if (!std::isfinite(next.gamma) || !(next.gamma > 0)) throw NonFiniteState("step size became non-finite");
  return {x, y, next};
}

inline StepResult step(const TargetFunction& f, const NoiseModel& noise, const StepRuleConfig& rule, double x_prev,
                       double gamma_active, const StepRuleState& rule_state, std::optional<double> y_prev,
                       RandomState& rng) {
  return step(f, rule, x_prev, gamma_active, rule_state, y_prev, sample(noise, rng));
}

namespace detail {

inline bool window_converged(const std::deque<double>& xs, const std::deque<double>& gammas, double gamma_max,
                             const StopCriteria& c, bool gamma_tail_applies, double* x_star) {
  if (xs.size() < c.conv_window) return false;
  if (gamma_tail_applies && !(gammas.back() < c.gamma_tail_tol * gamma_max)) return false;
  const auto first = xs.end() - static_cast<std::ptrdiff_t>(c.conv_window);
  const auto [lo, hi] = std::minmax_element(first, xs.end());
  if (!(*hi - *lo < c.conv_tol)) return false;
  double sum = 0.0;
  for (auto it = first; it != xs.end(); ++it) sum += *it;
  *x_star = sum / static_cast<double>(c.conv_window);
  return true;
}

}  // namespace detail

/// Re-derive the status of a finished trajectory from its retained data.
inline Status classify(const Trajectory& traj, const StopCriteria& criteria) {
  Status s;
  s.t_stop = traj.t_final;
  const auto blown = [&](double x) { return !std::isfinite(x) || std::abs(x) > criteria.blowup_bound; };
  if (blown(traj.x_final) || std::any_of(traj.xs.begin(), traj.xs.end(), blown) ||
      std::any_of(traj.tail_xs.begin(), traj.tail_xs.end(), blown)) {
    s.reason = FailureReason::Blowup;
    return s;
  }
  std::deque<double> xs(traj.tail_xs.begin(), traj.tail_xs.end());
  std::deque<double> gs(traj.tail_gammas.begin(), traj.tail_gammas.end());
  double x_star = 0.0;
  if (!gs.empty() && detail::window_converged(xs, gs, traj.gamma_max, criteria, traj.gamma_tail_applies, &x_star)) {
    s.outcome = Outcome::Converged;
    s.reason = FailureReason::None;
    s.x_star = x_star;
    return s;
  }
  s.reason = FailureReason::HorizonExhausted;
  return s;
}

/// Called after every step with (t, x_t, y_t, gamma_t); returning false halts
/// the run with status Stopped.
using StepObserver = std::function<bool(std::size_t, double, double, double)>;

/// Deterministic in `config` (bit-identical across re-runs).
inline Trajectory run(const SimConfig& config, const StepObserver& observer = {}) {
  validate(config);
  const StopCriteria& crit = config.stop;
  const std::size_t tail_len = std::max(crit.conv_window, config.rate_window);
  const double small_gamma = config.small_gamma_fraction * max_step(config.rule);
  RandomState rng(config.seed);

  Trajectory traj;
  traj.gamma_tail_applies = std::holds_alternative<Multiplicative>(config.rule);
  std::deque<double> tail_x;
  std::deque<double> tail_g;

  double x = config.x0;
  const double gamma0 = first_step_size(config.rule, config.gamma0);
  StepRuleState state = init_state(config.rule, config.gamma0, config.gamma1.value_or(config.gamma0));
  traj.gamma_max = gamma0;

  const auto record = [&](std::size_t t, double xv, double yv, double gv, bool force) {
    if (force || t % config.record_stride == 0) {
      if (!traj.ts.empty() && traj.ts.back() == t) return;
      traj.ts.push_back(t);
      traj.xs.push_back(xv);
      traj.ys.push_back(yv);
      traj.gammas.push_back(gv);
    }
  };
  const auto push_tail = [&](double xv, double gv) {
    tail_x.push_back(xv);
    tail_g.push_back(gv);
    if (tail_x.size() > tail_len) {
      tail_x.pop_front();
      tail_g.pop_front();
    }
  };
  const auto finish = [&](std::size_t t, double y, Status status) {
    traj.t_final = t;
    traj.x_final = x;
    traj.status = status;
    traj.status.t_stop = t;
    record(t, x, y, tail_g.back(), true);
    traj.tail_start = t + 1 - tail_x.size();
    traj.tail_xs.assign(tail_x.begin(), tail_x.end());
    traj.tail_gammas.assign(tail_g.begin(), tail_g.end());
  };

  record(0, x, std::numeric_limits<double>::quiet_NaN(), gamma0, false);
  push_tail(x, gamma0);
  if (gamma0 < small_gamma) traj.t_small_gamma = 0;

  std::optional<double> y_prev;
  double gamma_active = gamma0;
  double y = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t t = 1; t <= config.horizon; ++t) {
    StepResult r{};
    try {
      r = step(config.problem, config.noise, config.rule, x, gamma_active, state, y_prev, rng);
    } catch (const NonFiniteState&) {
      Status s;
      s.reason = FailureReason::Blowup;
      finish(t - 1, y, s);
      return traj;
    }
    x = r.x;
    y = r.y;
    state = r.rule;
    y_prev = y;
    gamma_active = state.gamma;
    traj.gamma_max = std::max(traj.gamma_max, state.gamma);
    if (!traj.t_small_gamma && state.gamma < small_gamma) traj.t_small_gamma = t;
    push_tail(x, state.gamma);
    record(t, x, y, state.gamma, false);

    if (std::abs(x) > crit.blowup_bound) {
      Status s;
      s.reason = FailureReason::Blowup;
      finish(t, y, s);
      return traj;
    }
    if (observer && !observer(t, x, y, state.gamma)) {
      Status s;
      s.outcome = Outcome::Stopped;
      s.reason = FailureReason::None;
      finish(t, y, s);
      return traj;
    }
    double x_star = 0.0;
    if (crit.stop_on_convergence &&
        detail::window_converged(tail_x, tail_g, traj.gamma_max, crit, traj.gamma_tail_applies, &x_star)) {
      Status s;
      s.outcome = Outcome::Converged;
      s.reason = FailureReason::None;
      s.x_star = x_star;
      finish(t, y, s);
      return traj;
    }
  }
  finish(config.horizon, y, Status{});
  traj.status = classify(traj, crit);
  traj.status.t_stop = traj.t_final;
  return traj;
}

/// Trailing-window slope of ln gamma over the last `steps` unthinned steps.
inline std::optional<RateFit> tail_rate(const Trajectory& traj, std::size_t steps) {
  const std::size_t n = std::min(steps, traj.tail_gammas.size());
  if (n < kMinRatePoints) return std::nullopt;
  std::vector<std::size_t> ts(n);
  const std::size_t offset = traj.tail_gammas.size() - n;
  for (std::size_t i = 0; i < n; ++i) ts[i] = traj.tail_start + offset + i;
  try {
    return fit_log_linear(ts, std::span<const double>(traj.tail_gammas).subspan(offset));
  } catch (const InsufficientData&) {
    return std::nullopt;
  }
}

inline double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

struct SeedSummary {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  Status status;
  double x_final = 0.0;
  std::size_t t_final = 0;
  std::optional<double> rate_slope;
  /// Distance from x_star to the nearest declared zero (Converged only).
  std::optional<double> limit_error;
  std::optional<double> attractor;
  double tail_gamma_median = 0.0;
  double gamma_final = 0.0;
  std::optional<std::size_t> t_small_gamma;
};

struct EnsembleResult {
  std::vector<SeedSummary> seeds;
  double conv_fraction = 0.0;
  /// Over converged seeds; NaN when none converged.
  double median_limit_error = std::numeric_limits<double>::quiet_NaN();
  /// Over every seed with a fit.
  double median_rate_slope = std::numeric_limits<double>::quiet_NaN();
  /// Over converged seeds that reached a small step.
  double median_steps_small_gamma = std::numeric_limits<double>::quiet_NaN();
  /// Which declared zero attracted each converged seed.
  std::map<double, std::size_t> attractor_counts;
};

inline SeedSummary summarize(const SimConfig& config, const Trajectory& traj, std::size_t index) {
  SeedSummary s;
  s.index = index;
  s.seed = config.seed;
  s.status = traj.status;
  s.x_final = traj.x_final;
  s.t_final = traj.t_final;
  if (auto fit = tail_rate(traj, config.rate_window)) s.rate_slope = fit->slope;
  if (traj.status.converged()) {
    s.limit_error = config.problem.distance_to_zeros(traj.status.x_star);
    s.attractor = config.problem.nearest_zero(traj.status.x_star);
  }
  const std::size_t w = std::min(config.stop.conv_window, traj.tail_gammas.size());
  s.tail_gamma_median = median(std::vector<double>(traj.tail_gammas.end() - static_cast<std::ptrdiff_t>(w),
                                                   traj.tail_gammas.end()));
  s.gamma_final = traj.tail_gammas.empty() ? 0.0 : traj.tail_gammas.back();
  s.t_small_gamma = traj.t_small_gamma;
  return s;
}

/// Aggregates in seed-index order, so the result does not depend on which
/// thread ran which seed.
inline EnsembleResult aggregate(std::vector<SeedSummary> seeds) {
  EnsembleResult r;
  r.seeds = std::move(seeds);
  std::vector<double> errs, slopes, steps;
  std::size_t converged = 0;
  for (const auto& s : r.seeds) {
    if (s.rate_slope) slopes.push_back(*s.rate_slope);
    if (!s.status.converged()) continue;
    ++converged;
    errs.push_back(*s.limit_error);
    ++r.attractor_counts[*s.attractor];
    if (s.t_small_gamma) steps.push_back(static_cast<double>(*s.t_small_gamma));
  }
  if (!r.seeds.empty()) r.conv_fraction = static_cast<double>(converged) / static_cast<double>(r.seeds.size());
  r.median_limit_error = median(errs);
  r.median_rate_slope = median(slopes);
  r.median_steps_small_gamma = median(steps);
  return r;
}

/// Run `count` independent tasks on up to `threads` workers; results land at
/// their own index.
template <class Task>
void parallel_for(std::size_t count, unsigned threads, Task&& task) {
  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(threads, count));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = next++; i < count; i = next++) task(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// n_seeds trajectories with child seeds child_seed(config.seed, i).
inline EnsembleResult run_ensemble(const SimConfig& config, std::size_t n_seeds, unsigned threads = 1) {
  if (n_seeds < 1) throw InvalidConfig("n_seeds must be >= 1");
  validate(config);
  std::vector<SeedSummary> seeds(n_seeds);
  parallel_for(n_seeds, threads, [&](std::size_t i) {
    SimConfig child = config;
    child.seed = child_seed(config.seed, i);
    // Ensembles only need summaries; skip the thinned series.
    child.record_stride = config.horizon + 1;
    seeds[i] = summarize(child, run(child), i);
  });
  return aggregate(std::move(seeds));
}

}  // namespace stepadapt
