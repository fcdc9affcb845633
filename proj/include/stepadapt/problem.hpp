#pragma once

// Target functions phi : R -> R with declared metadata, the built-in test
// problems, and the assumption checker for a (phi, noise, gbar) triple.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "stepadapt/errors.hpp"
#include "stepadapt/noise.hpp"

namespace stepadapt {

/// phi with its derivative, declared Lipschitz bound M, tail radius R and the
/// known zero set. Immutable after construction.
class TargetFunction {
 public:
  using Fn = std::function<double(double)>;

  TargetFunction(std::string name, Fn eval, Fn deriv, double sup_deriv, double radius,
                 std::vector<double> zeros, bool monotone_tail)
      : name_(std::move(name)),
        eval_(std::move(eval)),
        deriv_(std::move(deriv)),
        sup_deriv_(sup_deriv),
        radius_(radius),
        zeros_(std::move(zeros)),
        monotone_tail_(monotone_tail) {
    if (!eval_ || !deriv_) throw InvalidConfig(name_ + ": function and derivative are required");
    if (!(sup_deriv_ > 0) || !std::isfinite(sup_deriv_)) throw InvalidConfig(name_ + ": M must be finite and > 0");
    if (!(radius_ > 0) || !std::isfinite(radius_)) throw InvalidConfig(name_ + ": R must be finite and > 0");
    if (zeros_.empty()) throw InvalidConfig(name_ + ": zero set must be non-empty");
    if (!std::is_sorted(zeros_.begin(), zeros_.end())) throw InvalidConfig(name_ + ": zeros must be sorted");
    for (double z : zeros_) {
      if (!(std::abs(z) < radius_)) throw InvalidConfig(name_ + ": zeros must lie in (-R, R)");
      if (!(std::abs(eval_(z)) <= 1e-12)) throw InvalidConfig(name_ + ": declared zero is not a zero");
    }
  }

  const std::string& name() const noexcept { return name_; }
  double operator()(double x) const { return eval_(x); }
  double derivative(double x) const { return deriv_(x); }
  /// Declared sup |phi'|.
  double sup_deriv() const noexcept { return sup_deriv_; }
  double radius() const noexcept { return radius_; }
  const std::vector<double>& zeros() const noexcept { return zeros_; }
  /// Family-level claim that |phi| is nondecreasing for |x| >= R.
  bool monotone_tail() const noexcept { return monotone_tail_; }

  /// Distance from x to the closest declared zero.
  double distance_to_zeros(double x) const {
    double best = std::numeric_limits<double>::infinity();
    for (double z : zeros_) best = std::min(best, std::abs(x - z));
    return best;
  }

  /// Declared zero closest to x (first one on ties).
  double nearest_zero(double x) const {
    double best = zeros_.front();
    for (double z : zeros_)
      if (std::abs(x - z) < std::abs(x - best)) best = z;
    return best;
  }

 private:
  std::string name_;
  Fn eval_;
  Fn deriv_;
  double sup_deriv_;
  double radius_;
  std::vector<double> zeros_;
  bool monotone_tail_;
};

inline double evaluate(const TargetFunction& f, double x) { return f(x); }
inline double derivative(const TargetFunction& f, double x) { return f.derivative(x); }

/// phi(x) = tanh(a x). M = a, Z = {0}, R = 1.
inline TargetFunction make_tanh(double a = 1.0) {
  if (!(a > 0)) throw InvalidConfig("tanh: a must be > 0");
  return TargetFunction(
      "tanh", [a](double x) { return std::tanh(a * x); },
      [a](double x) {
        const double t = std::tanh(a * x);
        return a * (1.0 - t * t);
      },
      a, 1.0, {0.0}, true);
}

/// phi(x) = c tanh(a x / c): slope a near the origin, saturating at +-c.
inline TargetFunction make_linear_sat(double a = 1.0, double c = 1.0) {
  if (!(a > 0) || !(c > 0)) throw InvalidConfig("linear_sat: a and c must be > 0");
  return TargetFunction(
      "linear_sat", [a, c](double x) { return c * std::tanh(a * x / c); },
      [a, c](double x) {
        const double t = std::tanh(a * x / c);
        return a * (1.0 - t * t);
      },
      a, 1.0, {0.0}, true);
}

/// phi(x) = alpha (x - beta sin x), 0 <= beta < 1. M = alpha (1 + beta).
inline TargetFunction make_sine_drift(double alpha = 1.0, double beta = 0.5) {
  if (!(alpha > 0)) throw InvalidConfig("sine_drift: alpha must be > 0");
  if (!(beta >= 0 && beta < 1)) throw InvalidConfig("sine_drift: beta must be in [0,1)");
  return TargetFunction(
      "sine_drift", [alpha, beta](double x) { return alpha * (x - beta * std::sin(x)); },
      [alpha, beta](double x) { return alpha * (1.0 - beta * std::cos(x)); }, alpha * (1.0 + beta), 1.0, {0.0},
      true);
}

namespace detail {

inline double three_zeros_value(double x) { return std::tanh(x - 1.0) * std::tanh(x) * std::tanh(x + 1.0); }

inline double three_zeros_deriv(double x) {
  const double a = std::tanh(x - 1.0);
  const double b = std::tanh(x);
  const double c = std::tanh(x + 1.0);
  return (1.0 - a * a) * b * c + a * (1.0 - b * b) * c + a * b * (1.0 - c * c);
}

}  // namespace detail

/// phi(x) = tanh(x-1) tanh(x) tanh(x+1). Z = {-1, 0, 1}, R = 2; M is the
/// dense-grid maximum of |phi'| (0.857086...) plus 10% headroom.
inline TargetFunction make_three_zeros() {
  constexpr double probed_sup = 0.8570864785345167;
  return TargetFunction("three_zeros", detail::three_zeros_value, detail::three_zeros_deriv, 1.1 * probed_sup,
                        2.0, {-1.0, 0.0, 1.0}, true);
}

/// Piecewise-linear interpolant of a sampled table, extended linearly past
/// both ends. The declared M must dominate every segment slope.
inline TargetFunction make_tabulated(std::vector<double> xs, std::vector<double> ys, double sup_deriv,
                                     double radius, std::vector<double> zeros) {
  if (xs.size() < 2 || xs.size() != ys.size()) throw InvalidConfig("tabulated: need >= 2 matching samples");
  for (std::size_t i = 1; i < xs.size(); ++i)
    if (!(xs[i] > xs[i - 1])) throw InvalidConfig("tabulated: xs must be strictly increasing");
  struct Table {
    std::vector<double> xs, ys;
    std::size_t segment(double x) const {
      const auto it = std::upper_bound(xs.begin(), xs.end(), x);
      std::size_t i = it == xs.begin() ? 0 : static_cast<std::size_t>(it - xs.begin()) - 1;
      return std::min(i, xs.size() - 2);
    }
    double slope(std::size_t i) const { return (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]); }
  };
  auto table = std::make_shared<const Table>(Table{std::move(xs), std::move(ys)});
  double max_slope = 0.0;
  for (std::size_t i = 0; i + 1 < table->xs.size(); ++i) max_slope = std::max(max_slope, std::abs(table->slope(i)));
  if (max_slope > sup_deriv + 1e-9) throw InvalidConfig("tabulated: declared M is below the steepest segment");
  const double first = table->slope(0);
  const double last = table->slope(table->xs.size() - 2);
  // Linear extension grows |phi| outward when the end segments point away from 0.
  const bool monotone = (last > 0 && table->ys.back() >= 0) && (first > 0 && table->ys.front() <= 0);
  return TargetFunction(
      "tabulated",
      [table](double x) {
        const std::size_t i = table->segment(x);
        return table->ys[i] + table->slope(i) * (x - table->xs[i]);
      },
      [table](double x) { return table->slope(table->segment(x)); }, sup_deriv, radius, std::move(zeros),
      monotone);
}

/// max |phi'| over n_grid evenly spaced points in [lo, hi].
inline double estimate_sup_deriv(const TargetFunction& f, double lo, double hi, std::size_t n_grid) {
  if (!(lo < hi) || n_grid < 2) throw InvalidConfig("estimate_sup_deriv needs lo < hi and n_grid >= 2");
  double best = 0.0;
  for (double x : linspace(lo, hi, n_grid)) best = std::max(best, std::abs(f.derivative(x)));
  return best;
}

struct AssumptionCheck {
  std::string assumption;
  bool pass;
  double lhs;
  double rhs;
  double margin;
  std::string note;
};

struct AssumptionReport {
  std::vector<AssumptionCheck> checks;

  const AssumptionCheck& at(const std::string& name) const {
    for (const auto& c : checks)
      if (c.assumption == name) return c;
    throw InvalidConfig("no assumption named " + name);
  }

  bool all_pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.pass; });
  }

  /// A5 or A6 failed. These block runs unless forced.
  bool blocking_failure() const {
    return std::any_of(checks.begin(), checks.end(), [](const auto& c) {
      return !c.pass && (c.assumption == "A5" || c.assumption.rfind("A6", 0) == 0);
    });
  }
};

struct AssumptionOptions {
  /// Width W of the probe window [R, R+W]; <= 0 selects 10 * gbar * M.
  double window = 0.0;
  std::size_t probe_points = 2001;
};

/// Verdicts for A1-A6 with both sides of each inequality. Pure; never throws
/// for a failed assumption (see enforce_assumptions).
inline AssumptionReport check_assumptions(const TargetFunction& f, const NoiseModel& noise, double gbar,
                                          const AssumptionOptions& options = {}) {
  if (!(gbar > 0)) throw InvalidConfig("gbar must be > 0");
  const double inf = std::numeric_limits<double>::infinity();
  const double m = f.sup_deriv();
  const double r = f.radius();
  const double s = noise.variance();
  const double window = options.window > 0 ? options.window : 10.0 * gbar * m;
  const std::string tail_note = f.monotone_tail() ? "window-verified; |phi| nondecreasing beyond window"
                                                  : "window-only; no tail monotonicity claim";
  AssumptionReport report;

  report.checks.push_back({"A1", true, 0.0, 0.0, 0.0, "independent draws by construction"});

  report.checks.push_back({"A2", std::isfinite(s), s, inf, inf, "mean 0 by construction; lhs is the variance S"});

  const auto l = noise.density_interval();
  report.checks.push_back({"A3(a)", l.has_value() && *l > 0, l.value_or(0.0), 0.0, l.value_or(0.0),
                           l ? "lhs is L" : "no interval with positive mass everywhere"});

  double zero_mass = 0.0;
  if (noise.has_cdf()) zero_mass = atom_mass(noise, 0.0);
  report.checks.push_back({"A3(b)", zero_mass == 0.0, zero_mass, 0.0, zero_mass == 0.0 ? 0.0 : -zero_mass,
                           noise.has_cdf() ? "lhs is P(xi = 0)" : "no CDF; atom at 0 not checked"});

  const double probed_m = estimate_sup_deriv(f, -r - window, r + window, 20001);
  report.checks.push_back(
      {"A4", probed_m <= m + 1e-9, probed_m, m, m - probed_m, "lhs is grid max |phi'|, rhs is declared M"});

  report.checks.push_back({"A5", gbar < 2.0 / m, gbar, 2.0 / m, 2.0 / m - gbar, "gbar < 2/M"});

  double min_sign = inf;
  double min_sq = inf;
  for (double t : linspace(r, r + window, options.probe_points)) {
    for (double x : {t, -t}) {
      const double v = f(x);
      min_sign = std::min(min_sign, x * v);
      min_sq = std::min(min_sq, v * v);
    }
  }
  report.checks.push_back({"A6(a)", min_sign > 0, min_sign, 0.0, min_sign, tail_note});

  const double gm = gbar * m;
  const double threshold = gm < 2.0 ? gm * s / (2.0 - gm) : inf;
  report.checks.push_back({"A6(b)", min_sq > threshold, min_sq, threshold, min_sq - threshold, tail_note});
  return report;
}

/// Throws InvalidConfig naming the first blocking (A5/A6) failure.
inline void enforce_assumptions(const AssumptionReport& report) {
  for (const auto& c : report.checks) {
    if (c.pass) continue;
    if (c.assumption == "A5")
      throw InvalidConfig("A5 violated: gbar = " + std::to_string(c.lhs) + " must be < 2/M = " +
                          std::to_string(c.rhs));
    if (c.assumption.rfind("A6", 0) == 0)
      throw InvalidConfig(c.assumption + " violated: lhs = " + std::to_string(c.lhs) +
                          ", rhs = " + std::to_string(c.rhs));
  }
}

}  // namespace stepadapt
