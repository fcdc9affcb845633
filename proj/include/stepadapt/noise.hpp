#pragma once

// Measurement-noise families and the sign-agreement ("crossing")
// probabilities k(z), k+(z), k-(z) computed from their distribution functions.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "stepadapt/errors.hpp"
#include "stepadapt/random.hpp"

namespace stepadapt {

struct Gaussian {
  double sigma;
};

struct Uniform {
  double halfwidth;
};

struct Laplace {
  double scale;
};

struct Atom {
  double location;
  double mass;
};

using ContinuousFamily = std::variant<Gaussian, Uniform, Laplace>;

/// Continuous part with weight 1 - sum(masses) plus point masses.
struct AtomMixture {
  ContinuousFamily continuous;
  std::vector<Atom> atoms;
};

/// xi == 0 identically. Testing hook for the noise-free recursion.
struct Degenerate {};

/// Sampler-only family: no distribution function, so every k-query raises
/// UnsupportedQuery. Mean zero is the caller's responsibility.
struct SampleOnly {
  std::string name;
  std::function<double(RandomState&)> sampler;
  double variance;
};

using NoiseFamily = std::variant<Gaussian, Uniform, Laplace, AtomMixture, Degenerate, SampleOnly>;

namespace detail {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

inline double uniform_open01(RandomState& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

inline void validate_continuous(const ContinuousFamily& family) {
  std::visit(overloaded{
                 [](const Gaussian& g) {
                   if (!(g.sigma > 0) || !std::isfinite(g.sigma))
                     throw InvalidConfig("gaussian sigma must be > 0");
                 },
                 [](const Uniform& u) {
                   if (!(u.halfwidth > 0) || !std::isfinite(u.halfwidth))
                     throw InvalidConfig("uniform halfwidth must be > 0");
                 },
                 [](const Laplace& l) {
                   if (!(l.scale > 0) || !std::isfinite(l.scale))
                     throw InvalidConfig("laplace scale must be > 0");
                 },
             },
             family);
}

inline double continuous_variance(const ContinuousFamily& family) {
  return std::visit(overloaded{
                        [](const Gaussian& g) { return g.sigma * g.sigma; },
                        [](const Uniform& u) { return u.halfwidth * u.halfwidth / 3.0; },
                        [](const Laplace& l) { return 2.0 * l.scale * l.scale; },
                    },
                    family);
}

inline double continuous_cdf(const ContinuousFamily& family, double x) {
  return std::visit(
      overloaded{
          [x](const Gaussian& g) { return 0.5 * std::erfc(-x / (g.sigma * std::numbers::sqrt2)); },
          [x](const Uniform& u) {
            if (x <= -u.halfwidth) return 0.0;
            if (x >= u.halfwidth) return 1.0;
            return (x + u.halfwidth) / (2.0 * u.halfwidth);
          },
          [x](const Laplace& l) {
            return x < 0 ? 0.5 * std::exp(x / l.scale) : 1.0 - 0.5 * std::exp(-x / l.scale);
          },
      },
      family);
}

inline double continuous_sample(const ContinuousFamily& family, RandomState& rng) {
  return std::visit(overloaded{
                        [&rng](const Gaussian& g) {
                          return std::normal_distribution<double>(0.0, g.sigma)(rng);
                        },
                        [&rng](const Uniform& u) {
                          return -u.halfwidth + 2.0 * u.halfwidth * rng.uniform01();
                        },
                        [&rng](const Laplace& l) {
                          const double v = uniform_open01(rng) - 0.5;
                          const double mag = -l.scale * std::log1p(-2.0 * std::abs(v));
                          return v < 0 ? -mag : mag;
                        },
                    },
                    family);
}

inline double continuous_density_interval(const ContinuousFamily& family) {
  return std::visit(overloaded{
                        [](const Gaussian&) { return std::numeric_limits<double>::infinity(); },
                        [](const Uniform& u) { return u.halfwidth; },
                        [](const Laplace&) { return std::numeric_limits<double>::infinity(); },
                    },
                    family);
}

inline const char* continuous_name(const ContinuousFamily& family) {
  return std::visit(overloaded{
                        [](const Gaussian&) { return "gaussian"; },
                        [](const Uniform&) { return "uniform"; },
                        [](const Laplace&) { return "laplace"; },
                    },
                    family);
}

}  // namespace detail

/// Distribution of the i.i.d. measurement errors. Immutable and validated at
/// construction; every family except SampleOnly has mean exactly zero.
class NoiseModel {
 public:
  explicit NoiseModel(NoiseFamily family) : family_(std::move(family)) { validate(); }

  static NoiseModel gaussian(double sigma) { return NoiseModel(Gaussian{sigma}); }
  static NoiseModel uniform(double halfwidth) { return NoiseModel(Uniform{halfwidth}); }
  static NoiseModel laplace(double scale) { return NoiseModel(Laplace{scale}); }
  static NoiseModel zero() { return NoiseModel(Degenerate{}); }
  static NoiseModel mixture(ContinuousFamily continuous, std::vector<Atom> atoms) {
    return NoiseModel(AtomMixture{continuous, std::move(atoms)});
  }

  const NoiseFamily& family() const noexcept { return family_; }

  std::string name() const {
    return std::visit(detail::overloaded{
                          [](const AtomMixture&) { return std::string("atom_mixture"); },
                          [](const Degenerate&) { return std::string("zero"); },
                          [](const SampleOnly& s) { return s.name; },
                          [](const auto& c) { return std::string(detail::continuous_name(ContinuousFamily(c))); },
                      },
                      family_);
  }

  /// Second moment S.
  double variance() const {
    return std::visit(detail::overloaded{
                          [](const AtomMixture& m) {
                            double atom_mass = 0.0;
                            double second = 0.0;
                            for (const Atom& a : m.atoms) {
                              atom_mass += a.mass;
                              second += a.mass * a.location * a.location;
                            }
                            return (1.0 - atom_mass) * detail::continuous_variance(m.continuous) + second;
                          },
                          [](const Degenerate&) { return 0.0; },
                          [](const SampleOnly& s) { return s.variance; },
                          [](const auto& c) { return detail::continuous_variance(ContinuousFamily(c)); },
                      },
                      family_);
  }

  /// Largest L with P(xi in I) > 0 for every interval I in [-L, L]; may be
  /// +inf. Empty when no such L exists (or is unknown).
  std::optional<double> density_interval() const {
    return std::visit(detail::overloaded{
                          [](const AtomMixture& m) -> std::optional<double> {
                            return detail::continuous_density_interval(m.continuous);
                          },
                          [](const Degenerate&) -> std::optional<double> { return std::nullopt; },
                          [](const SampleOnly&) -> std::optional<double> { return std::nullopt; },
                          [](const auto& c) -> std::optional<double> {
                            return detail::continuous_density_interval(ContinuousFamily(c));
                          },
                      },
                      family_);
  }

  /// Natural length scale: standard deviation, or 1 for the degenerate model.
  double scale() const {
    const double s = std::sqrt(variance());
    return s > 0 ? s : 1.0;
  }

  bool has_cdf() const noexcept { return !std::holds_alternative<SampleOnly>(family_); }

  bool has_atoms() const noexcept {
    return std::holds_alternative<AtomMixture>(family_) || std::holds_alternative<Degenerate>(family_);
  }

  /// P(xi > 0) == P(xi < 0) holds by construction for the symmetric families.
  bool sign_symmetric() const noexcept {
    return std::holds_alternative<Gaussian>(family_) || std::holds_alternative<Uniform>(family_) ||
           std::holds_alternative<Laplace>(family_) || std::holds_alternative<Degenerate>(family_);
  }

 private:
  void validate() const {
    std::visit(detail::overloaded{
                   [](const AtomMixture& m) {
                     detail::validate_continuous(m.continuous);
                     double total = 0.0;
                     double first = 0.0;
                     double scale = 1.0;
                     for (const Atom& a : m.atoms) {
                       if (!(a.mass > 0 && a.mass < 1))
                         throw InvalidConfig("atom masses must lie in (0,1)");
                       if (!std::isfinite(a.location)) throw InvalidConfig("atom location must be finite");
                       total += a.mass;
                       first += a.mass * a.location;
                       scale = std::max(scale, std::abs(a.location));
                     }
                     if (!(total < 1)) throw InvalidConfig("total atom mass must be < 1");
                     if (std::abs(first) > 1e-12 * scale)
                       throw InvalidConfig("atom mixture must have zero mean");
                   },
                   [](const Degenerate&) {},
                   [](const SampleOnly& s) {
                     if (!s.sampler) throw InvalidConfig("sample-only noise needs a sampler");
                     if (!(s.variance >= 0)) throw InvalidConfig("variance must be >= 0");
                   },
                   [](const auto& c) { detail::validate_continuous(ContinuousFamily(c)); },
               },
               family_);
  }

  NoiseFamily family_;
};

/// One draw of xi.
inline double sample(const NoiseModel& model, RandomState& rng) {
  return std::visit(detail::overloaded{
                        [&rng](const AtomMixture& m) {
                          double u = rng.uniform01();
                          for (const Atom& a : m.atoms) {
                            if (u < a.mass) return a.location;
                            u -= a.mass;
                          }
                          return detail::continuous_sample(m.continuous, rng);
                        },
                        [](const Degenerate&) { return 0.0; },
                        [&rng](const SampleOnly& s) { return s.sampler(rng); },
                        [&rng](const auto& c) { return detail::continuous_sample(ContinuousFamily(c), rng); },
                    },
                    model.family());
}

namespace detail {

template <bool Left>
double cdf_impl(const NoiseModel& model, double x) {
  return std::visit(overloaded{
                        [x](const AtomMixture& m) {
                          double atom_mass = 0.0;
                          double below = 0.0;
                          for (const Atom& a : m.atoms) {
                            atom_mass += a.mass;
                            if (Left ? a.location < x : a.location <= x) below += a.mass;
                          }
                          return (1.0 - atom_mass) * continuous_cdf(m.continuous, x) + below;
                        },
                        [x](const Degenerate&) { return (Left ? x > 0 : x >= 0) ? 1.0 : 0.0; },
                        [](const SampleOnly& s) -> double {
                          throw UnsupportedQuery("noise family '" + s.name + "' has no CDF");
                        },
                        [x](const auto& c) { return continuous_cdf(ContinuousFamily(c), x); },
                    },
                    model.family());
}

}  // namespace detail

/// F(x) = P(xi <= x).
inline double cdf(const NoiseModel& model, double x) { return detail::cdf_impl<false>(model, x); }

/// F(x-) = P(xi < x). Equals cdf for atom-free families.
inline double cdf_left(const NoiseModel& model, double x) { return detail::cdf_impl<true>(model, x); }

/// P(xi == x).
inline double atom_mass(const NoiseModel& model, double x) { return cdf(model, x) - cdf_left(model, x); }

/// P((z1 + xi1)(z2 + xi2) > 0) for independent xi1, xi2.
inline double k_pair(const NoiseModel& model, double z1, double z2) {
  const double pos1 = 1.0 - cdf(model, -z1);
  const double pos2 = 1.0 - cdf(model, -z2);
  return pos1 * pos2 + cdf_left(model, -z1) * cdf_left(model, -z2);
}

/// k(z) = P((z + xi1)(z + xi2) > 0).
inline double k_diag(const NoiseModel& model, double z) { return k_pair(model, z, z); }

/// Upper or lower limit of k over shrinking level neighbourhoods of z.
struct CrossingLimit {
  double value;
  /// (epsilon, extremum over the epsilon-neighbourhood probes) pairs in the
  /// order the epsilons were given.
  std::vector<std::pair<double, double>> trace;
};

/// {1e-1, 1e-2, 1e-3, 1e-4} times the model scale.
inline std::vector<double> default_epsilons(const NoiseModel& model) {
  const double s = model.scale();
  return {1e-1 * s, 1e-2 * s, 1e-3 * s, 1e-4 * s};
}

namespace detail {

// P(level + xi > 0) and P(level + xi < 0) as the level approaches z from
// below, sits at z, and approaches from above.
struct SideProbabilities {
  double positive;
  double negative;
};

inline std::array<SideProbabilities, 3> one_sided_levels(const NoiseModel& model, double z) {
  const double f = cdf(model, -z);
  const double f_left = cdf_left(model, -z);
  return {SideProbabilities{1.0 - f, f}, SideProbabilities{1.0 - f, f_left},
          SideProbabilities{1.0 - f_left, f_left}};
}

template <class Pick>
CrossingLimit crossing_limit(const NoiseModel& model, double z, std::span<const double> epsilons, Pick pick) {
  for (std::size_t i = 0; i < epsilons.size(); ++i) {
    if (!(epsilons[i] > 0)) throw InvalidConfig("epsilons must be positive");
    if (i > 0 && !(epsilons[i] < epsilons[i - 1])) throw InvalidConfig("epsilons must be strictly decreasing");
  }
  CrossingLimit out{};
  out.trace.reserve(epsilons.size());
  for (double eps : epsilons) {
    // Open ball: probe just inside both ends and the centre.
    const double inner = eps * (1.0 - 1e-9);
    const std::array<double, 3> levels{z - inner, z, z + inner};
    double best = k_pair(model, z, z);
    for (double a : levels)
      for (double b : levels) best = pick(best, k_pair(model, a, b));
    out.trace.emplace_back(eps, best);
  }
  // The epsilon -> 0 limit: the only discontinuity that survives is a jump of
  // F at -z, so the extremum is attained over the one-sided level limits.
  const auto sides = one_sided_levels(model, z);
  double limit = k_pair(model, z, z);
  for (const auto& s1 : sides)
    for (const auto& s2 : sides) limit = pick(limit, s1.positive * s2.positive + s1.negative * s2.negative);
  out.value = limit;
  return out;
}

}  // namespace detail

inline CrossingLimit k_plus(const NoiseModel& model, double z, std::span<const double> epsilons) {
  return detail::crossing_limit(model, z, epsilons, [](double a, double b) { return std::max(a, b); });
}

inline CrossingLimit k_plus(const NoiseModel& model, double z) {
  const auto eps = default_epsilons(model);
  return k_plus(model, z, eps);
}

inline CrossingLimit k_minus(const NoiseModel& model, double z, std::span<const double> epsilons) {
  return detail::crossing_limit(model, z, epsilons, [](double a, double b) { return std::min(a, b); });
}

inline CrossingLimit k_minus(const NoiseModel& model, double z) {
  const auto eps = default_epsilons(model);
  return k_minus(model, z, eps);
}

/// Brute-force estimate of k_pair from n independent pairs.
inline double k_mc_oracle(const NoiseModel& model, double z1, double z2, std::size_t n, RandomState& rng) {
  if (n == 0) throw InvalidConfig("k_mc_oracle needs n >= 1");
  std::size_t agree = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = z1 + sample(model, rng);
    const double b = z2 + sample(model, rng);
    if (a * b > 0) ++agree;
  }
  return static_cast<double>(agree) / static_cast<double>(n);
}

struct GridMinimum {
  double value;
  double argmin;
};

/// Minimum of k_minus over the grid. Ties resolve to the smallest |z|.
inline GridMinimum inf_k_minus(const NoiseModel& model, std::span<const double> z_grid) {
  if (z_grid.empty()) throw InvalidConfig("inf_k_minus needs a non-empty grid");
  GridMinimum best{std::numeric_limits<double>::infinity(), 0.0};
  for (double z : z_grid) {
    const double v = k_minus(model, z).value;
    if (v < best.value || (v == best.value && std::abs(z) < std::abs(best.argmin))) best = {v, z};
  }
  return best;
}

/// `n` evenly spaced points from lo to hi inclusive.
inline std::vector<double> linspace(double lo, double hi, std::size_t n) {
  std::vector<double> out;
  if (n == 0) return out;
  if (n == 1) return {lo};
  out.reserve(n);
  const double span = hi - lo;
  const double last = static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) out.push_back(lo + span * static_cast<double>(i) / last);
  return out;
}

}  // namespace stepadapt
