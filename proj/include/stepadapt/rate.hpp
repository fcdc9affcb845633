#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>

#include "stepadapt/errors.hpp"

namespace stepadapt {

/// Least-squares line ln(gamma_t) ~ intercept + slope * t.
struct RateFit {
  double slope;
  double intercept;
  double r2;
  std::size_t t_lo;
  std::size_t t_hi;
};

inline constexpr std::size_t kMinRatePoints = 10;

/// Fit ln(values) against ts. Needs >= 10 points, all values > 0.
inline RateFit fit_log_linear(std::span<const std::size_t> ts, std::span<const double> values) {
  if (ts.size() != values.size()) throw InsufficientData("time and value series differ in length");
  if (ts.size() < kMinRatePoints) throw InsufficientData("rate fit needs at least 10 points");
  const double n = static_cast<double>(ts.size());
  // Centre t on the first index so long runs do not lose precision.
  const double t0 = static_cast<double>(ts.front());
  double mean_t = 0.0, mean_y = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (!(values[i] > 0)) throw InsufficientData("rate fit needs positive step sizes");
    mean_t += static_cast<double>(ts[i]) - t0;
    mean_y += std::log(values[i]);
  }
  mean_t /= n;
  mean_y /= n;
  double stt = 0.0, sty = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const double dt = static_cast<double>(ts[i]) - t0 - mean_t;
    const double dy = std::log(values[i]) - mean_y;
    stt += dt * dt;
    sty += dt * dy;
    syy += dy * dy;
  }
  if (!(stt > 0)) throw InsufficientData("rate fit needs distinct time points");
  const double slope = sty / stt;
  const double intercept = mean_y - slope * (mean_t + t0);
  double r2 = 1.0;
  if (syy > 0) {
    double sse = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
      const double resid = std::log(values[i]) - (intercept + slope * static_cast<double>(ts[i]));
      sse += resid * resid;
    }
    r2 = std::clamp(1.0 - sse / syy, 0.0, 1.0);
  }
  return {slope, intercept, r2, ts.front(), ts.back()};
}

}  // namespace stepadapt
