#include "stepadapt/analysis.hpp"

#include <cmath>

#include "gtest/gtest.h"
#include "oracles.hpp"

namespace stepadapt {
namespace {

SimConfig base_config(std::size_t horizon = 20000) {
  SimConfig c{.problem = make_tanh(1.0), .noise = NoiseModel::gaussian(0.1), .rule = Multiplicative{1.05, 0.9, 0.5}};
  c.x0 = 2.0;
  c.gamma0 = 0.5;
  c.horizon = horizon;
  c.seed = 5;
  return c;
}

TEST(Classification, Examples) {
  const auto g = NoiseModel::gaussian(1.0);
  const auto conv = theoretical_classification(1.1, 0.8, g);
  EXPECT_EQ(conv.theoretical_class, TheoreticalClass::Converge);
  EXPECT_EQ(conv.k_plus_at_0, 0.5);
  EXPECT_NEAR(conv.kappa, oracle::kKappa_1p1_0p8, 1e-15);

  const auto div = theoretical_classification(1.2, 0.9, g);
  EXPECT_EQ(div.theoretical_class, TheoreticalClass::Diverge);
  EXPECT_EQ(div.inf_k_minus, 0.5);
  EXPECT_EQ(div.inf_k_minus_argmin, 0.0);

  EXPECT_EQ(theoretical_classification(2.0, 0.5, g).theoretical_class, TheoreticalClass::Indeterminate);
  EXPECT_EQ(to_string(TheoreticalClass::Indeterminate), "indeterminate");
}

TEST(Classification, FollowsProductForSymmetricFamilies) {
  for (const auto& noise : {NoiseModel::gaussian(0.3), NoiseModel::uniform(0.3), NoiseModel::laplace(0.3)}) {
    for (double u : {1.02, 1.1, 1.5}) {
      for (double d : {0.5, 0.8, 0.95}) {
        const auto r = theoretical_classification(u, d, noise);
        const double ud = u * d;
        if (std::abs(ud - 1.0) < 1e-9) continue;
        EXPECT_EQ(r.theoretical_class, ud < 1 ? TheoreticalClass::Converge : TheoreticalClass::Diverge)
            << noise.name() << ' ' << u << ' ' << d;
      }
    }
  }
}

TEST(Classification, AtomAtZeroWidensTheGap) {
  const auto noise = NoiseModel::mixture(Uniform{1.0}, {{0.0, 0.2}});
  const auto r = theoretical_classification(1.2, 0.9, noise);
  EXPECT_NEAR(r.k_plus_at_0, 0.52, 1e-12);
  EXPECT_LE(r.inf_k_minus, r.k_plus_at_0);
  // kappa = 0.366 lies between inf k_minus = 0.32 and k_plus(0) = 0.52.
  EXPECT_NEAR(r.inf_k_minus, 0.32, 1e-9);
  EXPECT_EQ(r.theoretical_class, TheoreticalClass::Indeterminate);
}

TEST(Membership, ZeroIsInsideWhenKappaAboveHalf) {
  const auto f = make_tanh(1.0);
  const auto n = NoiseModel::gaussian(0.1);
  EXPECT_TRUE(limit_set_membership(0.0, f, n, 1.1, 0.8).member);
  EXPECT_TRUE(limit_set_membership(0.0, f, n, 2.0, 0.5).member);  // k(0) = kappa exactly
  EXPECT_FALSE(limit_set_membership(0.0, f, n, 1.2, 0.9).member);
  EXPECT_FALSE(limit_set_membership(1.0, f, n, 1.1, 0.8).member);
}

TEST(Membership, BoundaryIsInclusiveAndMatchesOracle) {
  const auto n = NoiseModel::gaussian(0.1);
  const double kap = kappa(1.1, 0.8);
  const auto b = boundary_abs_phi(n, kap);
  ASSERT_TRUE(b.has_value());
  EXPECT_NEAR(*b, oracle::kBoundary[2], 1e-9);
  // A problem whose value at x = 1 is exactly the boundary level.
  const TargetFunction lin("lin", [](double x) { return x; }, [](double) { return 1.0; }, 1.0, 1.0, {0.0}, true);
  const double z = *b;
  EXPECT_TRUE(limit_set_membership(z, lin, n, 1.1, 0.8).member);
  EXPECT_FALSE(limit_set_membership(z * (1 + 1e-6), lin, n, 1.1, 0.8).member);
}

TEST(Membership, LambdaAndKappaThresholdsAgree) {
  const auto f = make_sine_drift(1.0, 0.5);
  const auto n = NoiseModel::laplace(0.2);
  for (double u : {1.05, 1.3}) {
    for (double d : {0.6, 0.9}) {
      for (double x : linspace(-1.0, 1.0, 41)) {
        const auto m = limit_set_membership(x, f, n, u, d);
        EXPECT_NEAR(m.threshold, m.threshold_via_lambda, 1e-12);
        EXPECT_EQ(m.member, m.k_value <= m.threshold_via_lambda + 1e-12 && m.k_value <= m.threshold + 1e-12);
      }
    }
  }
}

TEST(Boundary, EdgeCases) {
  const auto n = NoiseModel::gaussian(0.1);
  EXPECT_FALSE(boundary_abs_phi(n, 0.4).has_value());
  // k - 1/2 is quadratic at 0, so the level set is resolved to ~sqrt(eps) * sigma.
  EXPECT_NEAR(*boundary_abs_phi(n, 0.5), 0.0, 1e-7);
  EXPECT_TRUE(std::isinf(*boundary_abs_phi(n, 1.0)));
  EXPECT_THROW(boundary_abs_phi(NoiseModel::mixture(Uniform{1.0}, {{0.0, 0.2}}), 0.7), UnsupportedQuery);
}

TEST(Boundary, ShrinksAsLambdaApproachesOne) {
  const auto n = NoiseModel::gaussian(0.1);
  const double ds[4] = {0.5, 0.7, 0.8, 0.88};
  double prev = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 4; ++i) {
    const double b = *boundary_abs_phi(n, kappa(1.1, ds[i]));
    EXPECT_NEAR(b, oracle::kBoundary[i], 1e-9);
    EXPECT_LT(b, prev);
    prev = b;
  }
}

TEST(Hausdorff, Examples) {
  const std::vector<double> a{0.0, 1.0}, b{0.0}, e{};
  EXPECT_EQ(hausdorff_upper(b, b), 0.0);
  EXPECT_EQ(hausdorff_upper(a, b), 1.0);
  EXPECT_THROW(hausdorff_upper(e, b), EmptySet);
}

TEST(Hausdorff, SampledSetMatchesBisection) {
  const auto f = make_tanh(1.0);
  const auto n = NoiseModel::gaussian(0.1);
  const double thr = 1.0 / (1.0 + 0.9);
  const std::size_t pts = 20001;
  const double lo = -1.0, hi = 1.0;
  const double h = (hi - lo) / static_cast<double>(pts - 1);
  const auto set = sample_limit_set(f, n, thr, lo, hi, pts);
  ASSERT_FALSE(set.empty());
  const std::vector<double> zeros{0.0};
  const double expected = std::atanh(*boundary_abs_phi(n, thr));
  EXPECT_NEAR(hausdorff_upper(set, zeros), expected, h);
}

TEST(Hausdorff, LimitSetShrinksAsLambdaRises) {
  const auto f = make_tanh(1.0);
  const auto n = NoiseModel::gaussian(0.1);
  const std::vector<double> zeros{0.0};
  double prev = std::numeric_limits<double>::infinity();
  for (double lambda : {0.2, 0.4, 0.6, 0.8, 0.95}) {
    const auto set = sample_limit_set(f, n, 1.0 / (1.0 + lambda), -1.0, 1.0, 4001);
    const double dist = hausdorff_upper(set, zeros);
    EXPECT_LE(dist, prev);
    prev = dist;
  }
}

TEST(Rate, ExactGeometricInput) {
  std::vector<std::size_t> ts(50);
  std::vector<double> gs(50);
  for (std::size_t t = 0; t < 50; ++t) {
    ts[t] = t;
    gs[t] = 0.5 * std::pow(0.8, static_cast<double>(t));
  }
  const auto fit = fit_log_linear(ts, gs);
  EXPECT_NEAR(fit.slope, std::log(0.8), 1e-12);
  EXPECT_NEAR(fit.r2, 1.0, 1e-12);
}

TEST(Rate, AlternatingTwoCycle) {
  const double u = 1.2, d = 0.7;
  std::vector<std::size_t> ts(1001);
  std::vector<double> gs(1001);
  double g = 0.5;
  for (std::size_t t = 0; t < ts.size(); ++t) {
    ts[t] = t;
    gs[t] = g;
    g *= t % 2 ? u : d;
  }
  const auto fit = fit_log_linear(ts, gs);
  EXPECT_NEAR(fit.slope, 0.5 * (std::log(u) + std::log(d)), 1e-5);
  EXPECT_GE(fit.r2, 0.0);
  EXPECT_LE(fit.r2, 1.0);
}

TEST(Rate, InsufficientData) {
  const std::vector<std::size_t> ts{0, 1, 2};
  const std::vector<double> gs{1.0, 0.5, 0.25};
  EXPECT_THROW(fit_log_linear(ts, gs), InsufficientData);
  std::vector<std::size_t> t10(10, 3);
  std::vector<double> g10(10, 1.0);
  EXPECT_THROW(fit_log_linear(t10, g10), InsufficientData);
}

TEST(Rate, TrajectoryWindows) {
  auto c = base_config(4000);
  c.stop.stop_on_convergence = false;
  c.record_stride = 1;
  const auto traj = run(c);
  const auto tail = geometric_rate(traj, 1000);
  EXPECT_EQ(tail.t_hi, traj.t_final);
  EXPECT_EQ(tail.t_lo, traj.t_final - 999);
  // The same window read from the recorded series.
  const auto early = geometric_rate(traj, TimeWindow{100, 600});
  EXPECT_EQ(early.t_lo, 100u);
  EXPECT_EQ(early.t_hi, 600u);
  const auto via_tail = tail_rate(traj, 1000);
  ASSERT_TRUE(via_tail.has_value());
  EXPECT_NEAR(via_tail->slope, tail.slope, 1e-15);
}

TEST(Phase, EmptyAndSingleCell) {
  const auto c = base_config(2000);
  const std::vector<double> none{};
  EXPECT_TRUE(phase_sweep(none, none, c, 4).cells.empty());
  const std::vector<double> u{2.0}, d{0.5};
  const auto diagram = phase_sweep(u, d, c, 4);
  ASSERT_EQ(diagram.cells.size(), 1u);
  EXPECT_EQ(diagram.cells[0].theoretical_class, TheoreticalClass::Indeterminate);
  EXPECT_GE(diagram.cells[0].empirical_conv_fraction, 0.0);
  EXPECT_LE(diagram.cells[0].empirical_conv_fraction, 1.0);
  EXPECT_EQ(diagram.cells[0].n_seeds, 4u);
}

TEST(Phase, FiveByFiveGridSeparatesAtProductOne) {
  const auto c = base_config(20000);
  const std::vector<double> u{1.02, 1.09, 1.16, 1.23, 1.3};
  const std::vector<double> d{0.7, 0.77, 0.84, 0.91, 0.98};
  const auto diagram = phase_sweep(u, d, c, 20);
  ASSERT_EQ(diagram.cells.size(), 25u);
  EXPECT_EQ(diagram.cells[1].u, 1.02);  // u-major order
  EXPECT_EQ(diagram.cells[1].d, 0.77);
  for (const auto& cell : diagram.cells) {
    if (cell.ud <= 0.95) {
      EXPECT_GE(cell.empirical_conv_fraction, 0.9) << cell.u << ' ' << cell.d;
    }
    if (cell.ud >= 1.05) {
      EXPECT_LE(cell.empirical_conv_fraction, 0.1) << cell.u << ' ' << cell.d;
    }
    EXPECT_EQ(cell.theoretical_class, cell.ud < 1 ? TheoreticalClass::Converge : TheoreticalClass::Diverge);
  }
}

TEST(Precision, SingleRowAndValidation) {
  const auto c = base_config(5000);
  const std::vector<double> one{0.8};
  const auto rows = precision_vs_rate(1.1, one, c, 5);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_NEAR(*rows[0].boundary_abs_phi, oracle::kBoundary[2], 1e-9);
  const std::vector<double> bad{0.95};
  EXPECT_THROW(precision_vs_rate(1.1, bad, c, 5), InvalidConfig);
  const std::vector<double> descending{0.8, 0.7};
  EXPECT_THROW(precision_vs_rate(1.1, descending, c, 5), InvalidConfig);
}

TEST(Trend, Inversions) {
  const std::vector<double> v{5, 4, 4, 6, 3};
  EXPECT_EQ(adjacent_inversions(v, Trend::NonIncreasing), 1u);
  EXPECT_EQ(adjacent_inversions(v, Trend::NonDecreasing), 2u);
}

}  // namespace
}  // namespace stepadapt
