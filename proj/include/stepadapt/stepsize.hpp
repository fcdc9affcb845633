#pragma once

// Step-size rules as explicit state machines plus the threshold quantities
// kappa = ln(1/d) / ln(u/d), lambda = ln u / (-ln d) and the log-step drift.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <variant>

#include "stepadapt/errors.hpp"
#include "stepadapt/noise.hpp"

namespace stepadapt {

/// Step size indexed by a counter (sign-change count or time).
using Schedule = std::function<double(std::size_t)>;

/// c / (m + 1).
inline Schedule harmonic_schedule(double c) {
  return [c](std::size_t m) { return c / static_cast<double>(m + 1); };
}

/// gamma <- min(u gamma, gbar) on sign agreement, d gamma otherwise.
struct Multiplicative {
  double u;
  double d;
  double gbar;
};

/// gamma = schedule(s), s advancing by one on every sign change.
struct Kesten {
  Schedule schedule;
};

/// gamma = schedule(t) regardless of the measurements.
struct Deterministic {
  Schedule schedule;
};

struct Constant {
  double g;
};

using StepRuleConfig = std::variant<Multiplicative, Kesten, Deterministic, Constant>;

enum class SignProduct { Positive, NonPositive };

/// Sign of y_prev * y without forming the product (no underflow to 0).
/// Exact zeros count as NonPositive.
inline SignProduct sign_product(double y_prev, double y) {
  return (y_prev > 0 && y > 0) || (y_prev < 0 && y < 0) ? SignProduct::Positive : SignProduct::NonPositive;
}

struct StepRuleState {
  double gamma;   // active step size gamma_t
  std::size_t s;  // sign-change counter (Kesten)
  std::size_t t;  // step index

  friend bool operator==(const StepRuleState&, const StepRuleState&) = default;
};

namespace detail {

inline void check_ud(double u, double d) {
  if (!(d > 0 && d < 1)) throw InvalidConfig("d must be in (0,1)");
  if (!(u > 1) || !std::isfinite(u)) throw InvalidConfig("u must be > 1");
}

inline void check_schedule(const Schedule& schedule, const char* what) {
  if (!schedule) throw InvalidConfig(std::string(what) + ": schedule is required");
  double prev = schedule(0);
  if (!(prev > 0)) throw InvalidConfig(std::string(what) + ": schedule must be positive");
  // Finite probe of the positivity / monotonicity contract.
  for (std::size_t m = 1; m <= 1024; ++m) {
    const double v = schedule(m);
    if (!(v > 0)) throw InvalidConfig(std::string(what) + ": schedule must be positive");
    if (v > prev) throw InvalidConfig(std::string(what) + ": schedule must be nonincreasing");
    prev = v;
  }
}

}  // namespace detail

inline void validate(const StepRuleConfig& config) {
  std::visit(detail::overloaded{
                 [](const Multiplicative& m) {
                   detail::check_ud(m.u, m.d);
                   if (!(m.gbar > 0) || !std::isfinite(m.gbar)) throw InvalidConfig("gbar must be > 0");
                 },
                 [](const Kesten& k) { detail::check_schedule(k.schedule, "kesten"); },
                 [](const Deterministic& k) { detail::check_schedule(k.schedule, "deterministic"); },
                 [](const Constant& c) {
                   if (!(c.g > 0) || !std::isfinite(c.g)) throw InvalidConfig("constant step must be > 0");
                 },
             },
             config);
}

/// Largest step the rule can ever take (gbar for the multiplicative rule).
inline double max_step(const StepRuleConfig& config) {
  return std::visit(detail::overloaded{
                        [](const Multiplicative& m) { return m.gbar; },
                        [](const Kesten& k) { return k.schedule(0); },
                        [](const Deterministic& k) { return k.schedule(0); },
                        [](const Constant& c) { return c.g; },
                    },
                    config);
}

inline std::string variant_name(const StepRuleConfig& config) {
  return std::visit(detail::overloaded{
                        [](const Multiplicative&) { return std::string("multiplicative"); },
                        [](const Kesten&) { return std::string("kesten"); },
                        [](const Deterministic&) { return std::string("deterministic"); },
                        [](const Constant&) { return std::string("constant"); },
                    },
                    config);
}

/// gamma_0, the step used for x_1 = x_0 - gamma_0 y_1. Only the multiplicative
/// rule takes it from the caller; the others derive it from their schedule.
inline double first_step_size(const StepRuleConfig& config, double gamma0) {
  return std::visit(detail::overloaded{
                        [gamma0](const Multiplicative& m) {
                          if (!(gamma0 > 0 && gamma0 <= m.gbar))
                            throw InvalidConfig("gamma0 must be in (0, gbar]");
                          return gamma0;
                        },
                        [](const Kesten& k) { return k.schedule(0); },
                        [](const Deterministic& k) { return k.schedule(0); },
                        [](const Constant& c) { return c.g; },
                    },
                    config);
}

/// State at t = 1 with gamma_1 active.
inline StepRuleState init_state(const StepRuleConfig& config, double gamma0, double gamma1) {
  validate(config);
  return std::visit(detail::overloaded{
                        [&](const Multiplicative& m) {
                          if (!(gamma0 > 0 && gamma0 <= m.gbar))
                            throw InvalidConfig("gamma0 must be in (0, gbar]");
                          if (!(gamma1 > 0 && gamma1 <= m.gbar))
                            throw InvalidConfig("gamma1 must be in (0, gbar]");
                          return StepRuleState{gamma1, 0, 1};
                        },
                        // s_0 = 0, s_1 = 1.
                        [](const Kesten& k) { return StepRuleState{k.schedule(1), 1, 1}; },
                        [](const Deterministic& k) { return StepRuleState{k.schedule(1), 0, 1}; },
                        [](const Constant& c) { return StepRuleState{c.g, 0, 1}; },
                    },
                    config);
}

/// gamma_{t+1} from gamma_t and sign(y_t y_{t+1}).
inline StepRuleState update(const StepRuleConfig& config, const StepRuleState& state, SignProduct sign) {
  StepRuleState next = state;
  next.t = state.t + 1;
  std::visit(detail::overloaded{
                 [&](const Multiplicative& m) {
                   next.gamma = sign == SignProduct::Positive ? std::min(m.u * state.gamma, m.gbar)
                                                              : m.d * state.gamma;
                 },
                 [&](const Kesten& k) {
                   if (sign == SignProduct::NonPositive) ++next.s;
                   next.gamma = k.schedule(next.s);
                 },
                 [&](const Deterministic& k) { next.gamma = k.schedule(next.t); },
                 [&](const Constant& c) { next.gamma = c.g; },
             },
             config);
  return next;
}

/// Sign-agreement probability at which the expected log-step drift vanishes.
inline double kappa(double u, double d) {
  detail::check_ud(u, d);
  const double down = -std::log(d);
  return down / (down + std::log(u));
}

/// ln u / (-ln d); 1 / (1 + lambda) == kappa(u, d).
inline double lambda_of(double u, double d) {
  detail::check_ud(u, d);
  return std::log(u) / -std::log(d);
}

/// Expected change of ln gamma per step when signs agree with probability k.
inline double predicted_drift(double u, double d, double k) {
  if (!(k >= 0 && k <= 1)) throw InvalidConfig("k must be a probability");
  return k * std::log(u) + (1.0 - k) * std::log(d);
}

}  // namespace stepadapt
