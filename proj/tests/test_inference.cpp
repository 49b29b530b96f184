#include <cmath>
#include <vector>

#include "doctest.h"
#include "otrbounds/inference.hpp"
#include "otrbounds/validation.hpp"

using namespace otr;

namespace {

// Simpson integration of the standard normal density over [0, x]
double normal_mass(double x) {
  const int steps = 4000;  // even
  double h = x / steps;
  auto phi = [](double t) { return std::exp(-0.5 * t * t) / std::sqrt(2.0 * std::acos(-1.0)); };
  double acc = phi(0.0) + phi(x);
  for (int i = 1; i < steps; ++i) acc += phi(i * h) * (i % 2 ? 4.0 : 2.0);
  return acc * h / 3.0;
}

MomentSet unit_moments(long n0 = 50, long n1 = 50) {
  MomentSet m;
  m.control = {n0, 0.0, 1.0};
  m.treatment = {n1, 0.0, 1.0};
  return m;
}

std::vector<double> simulate_bounded(SplitMix64& rng, std::size_t n, double lo, double hi,
                                     double shape) {
  std::vector<double> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    double u = rng.uniform();
    out.push_back(lo + (hi - lo) * std::pow(u, shape));
  }
  return out;
}

}  // namespace

TEST_CASE("normal quantile matches reference values and the density integral") {
  CHECK(normal_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(std::fabs(normal_quantile(0.975) - 1.959963984540054) < 1e-9);
  CHECK(std::fabs(normal_quantile(0.99375) - 2.497705474412374) < 1e-9);
  CHECK(std::fabs(normal_quantile(0.95) - 1.6448536269514722) < 1e-9);

  for (double p : {0.6, 0.75, 0.9, 0.975, 0.995, 0.9999}) {
    double z = normal_quantile(p);
    CHECK(std::fabs(normal_mass(z) - (p - 0.5)) < 1e-9);
    CHECK(std::fabs(normal_quantile(1.0 - p) + z) < 1e-10);  // symmetry
  }

  CHECK_THROWS_AS(normal_quantile(0.0), DomainError);
  CHECK_THROWS_AS(normal_quantile(1.0), DomainError);
  CHECK_THROWS_AS(normal_quantile(-0.3), DomainError);
}

TEST_CASE("moment sets derive ratios and guard degenerate variance") {
  MomentSet m;
  m.control = {100, 1.0, 4.0};
  m.treatment = {300, 2.5, 9.0};
  CHECK(m.total_n() == 400);
  CHECK(m.r_control() == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(m.delta_bar() == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(m.nu_hat() == doctest::Approx(1.5).epsilon(1e-12));
  CHECK_FALSE(m.has_exact_moments());

  m.control.variance = 0.0;
  CHECK_THROWS_AS(m.nu_hat(), ZeroControlVariance);
}

TEST_CASE("sample ingestion produces population-style moments") {
  std::vector<double> y0 = {0.0, 2.0};
  std::vector<double> y1 = {1.0, 1.0, 4.0};
  MomentSet m = MomentSet::from_samples(y0, y1);
  CHECK(m.control.n == 2);
  CHECK(m.control.mean == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(m.control.variance == doctest::Approx(1.0).epsilon(1e-12));  // divides by n, not n-1
  CHECK(*m.mu4_control == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(*m.raw3_control == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(m.treatment.mean == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(m.treatment.variance == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(m.has_exact_moments());

  CHECK_THROWS_AS(MomentSet::from_samples({1.0}, y1), DomainError);
}

TEST_CASE("heterogeneity variance terms vanish at equal arm variances") {
  std::vector<double> y = {0.0, 1.0, 2.0, 3.0};
  MomentSet m = MomentSet::from_samples(y, y);
  auto [tau_minus, tau_plus] = tau_het_exact(m);
  CHECK(tau_minus == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(tau_plus > 0.0);

  auto [bm, bp] = tau_het_bounded(m, 0.0, 3.0);
  CHECK(bm == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(bp >= tau_plus - 1e-12);  // the cap dominates the exact moment
}

TEST_CASE("bounded heterogeneity variance term matches the hand-evaluated binary case") {
  MomentSet m;
  m.control = {100, 0.5, 0.25};
  m.treatment = {100, 0.5, 0.25};
  auto [tau_minus, tau_plus] = tau_het_bounded(m, 0.0, 1.0);
  CHECK(tau_minus == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(tau_plus == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("heterogeneity interval for symmetric binary arms is frozen") {
  MomentSet m;
  m.control = {100, 0.5, 0.25};
  m.treatment = {100, 0.5, 0.25};
  CiReport rep = ci_heterogeneity(m, OutcomeSpace::binary(), 0.05);
  CHECK(rep.mode == "summary-bound");
  CHECK(rep.interval.lower == 0.0);
  CHECK(std::fabs(rep.interval.upper - 1.0979981992270027) < 1e-9);
  CHECK(rep.interval.units == "outcome^2");
}

TEST_CASE("degenerate and missing-moment paths raise the right errors") {
  MomentSet zero;
  zero.control = {50, 1.0, 0.0};
  zero.treatment = {50, 1.0, 0.0};
  CiReport rep = ci_heterogeneity(zero, OutcomeSpace::bounded_range(0.0, 2.0), 0.05);
  CHECK(rep.mode == "degenerate");
  CHECK(rep.interval.upper == 0.0);

  MomentSet m = unit_moments();
  CHECK_THROWS_AS(ci_heterogeneity(m, OutcomeSpace::unbounded(), 0.05), UnsupportedSpace);
  CHECK_THROWS_AS(ci_heterogeneity(m, OutcomeSpace::binary(), 0.05, MomentMode::Exact),
                  MissingMoments);
  CHECK_THROWS_AS(ci_heterogeneity(m, OutcomeSpace::binary(), 1.5), DomainError);

  MomentSet half;
  half.control = {50, 0.0, 0.0};
  half.treatment = {50, 0.0, 1.0};
  CHECK_THROWS_AS(ci_heterogeneity(half, OutcomeSpace::binary(), 0.05), ZeroControlVariance);

  CHECK_THROWS_AS(tau_ben_bound(zero, 0.0, 2.0), DegenerateDenominator);
}

TEST_CASE("benefit variance bound reproduces the hand-evaluated symmetric case") {
  // unit variances, zero means, equal arms on [-1, 1]: bracket 4 + 4 over 16 * 4
  CHECK(tau_ben_bound(unit_moments(), -1.0, 1.0) == doctest::Approx(0.125).epsilon(1e-12));
}

TEST_CASE("zero mean effect removes every effect-coupled bracket term") {
  MomentSet m = unit_moments();
  m.control.mean = 0.3;
  m.treatment.mean = 0.3;  // delta = 0 but means nonzero
  double cap4 = std::pow(-2.0 - 0.3, 2) * 1.0;  // max{(M-mean)^2, (m-mean)^2} * variance
  double expect = ((cap4 / 0.5 - 1.0) * 4.0 * 2.0) / (16.0 * 4.0);
  CHECK(tau_ben_bound(m, -2.0, 2.0) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("exact benefit variance agrees with a finite-difference delta method") {
  SplitMix64 rng(8675309);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> y0 = simulate_bounded(rng, 400, 0.0, 10.0, rng.uniform(0.5, 2.0));
    std::vector<double> y1 = simulate_bounded(rng, 300, 0.0, 10.0, rng.uniform(0.5, 2.0));
    MomentSet m = MomentSet::from_samples(y0, y1);
    if (m.control.variance < 0.05 || m.treatment.variance < 0.05) continue;

    auto estimator = [](double m0, double v0, double m1, double v1) {
      double s = std::sqrt(v0) + std::sqrt(v1);
      double d = m1 - m0;
      return 0.5 * std::sqrt(s * s + d * d);
    };
    double m0 = m.control.mean, v0 = m.control.variance;
    double m1 = m.treatment.mean, v1 = m.treatment.variance;
    double h = 1e-6;
    double g_m0 = (estimator(m0 + h, v0, m1, v1) - estimator(m0 - h, v0, m1, v1)) / (2 * h);
    double g_v0 = (estimator(m0, v0 + h, m1, v1) - estimator(m0, v0 - h, m1, v1)) / (2 * h);
    double g_m1 = (estimator(m0, v0, m1 + h, v1) - estimator(m0, v0, m1 - h, v1)) / (2 * h);
    double g_v1 = (estimator(m0, v0, m1, v1 + h) - estimator(m0, v0, m1, v1 - h)) / (2 * h);

    double r0 = m.r_control(), r1 = m.r_treatment();
    double mu3_0 = *m.raw3_control - 3.0 * m0 * (v0 + m0 * m0) + 2.0 * m0 * m0 * m0;
    double mu3_1 = *m.raw3_treatment - 3.0 * m1 * (v1 + m1 * m1) + 2.0 * m1 * m1 * m1;
    double tau_fd = (g_m0 * g_m0 * v0 + g_v0 * g_v0 * (*m.mu4_control - v0 * v0) +
                     2.0 * g_m0 * g_v0 * mu3_0) /
                        r0 +
                    (g_m1 * g_m1 * v1 + g_v1 * g_v1 * (*m.mu4_treatment - v1 * v1) +
                     2.0 * g_m1 * g_v1 * mu3_1) /
                        r1;

    double tau = tau_ben_exact(m);
    CHECK(std::fabs(tau - tau_fd) < 1e-5 * std::max(1.0, tau_fd));
  }
}

TEST_CASE("summary-based benefit variance dominates the exact one on nonnegative data") {
  SplitMix64 rng(424242);
  int tested = 0;
  for (int rep = 0; rep < 40; ++rep) {
    std::vector<double> y0 = simulate_bounded(rng, 300, 0.0, 8.0, rng.uniform(0.6, 1.8));
    std::vector<double> y1 = simulate_bounded(rng, 300, 0.0, 8.0, rng.uniform(0.6, 1.8));
    MomentSet m = MomentSet::from_samples(y0, y1);
    if (m.delta_bar() < 0.0) continue;  // the cap argument needs a nonnegative mean effect
    if (m.control.variance < 0.05 || m.treatment.variance < 0.05) continue;
    ++tested;
    CHECK(tau_ben_bound(m, 0.0, 8.0) >= tau_ben_exact(m) - 1e-10);
  }
  CHECK(tested > 5);
}

TEST_CASE("upper confidence bound collapses to the plug-in value at alpha one half") {
  MomentSet m;
  m.control = {100, 0.5, 0.25};
  m.treatment = {100, 0.5, 0.25};
  CiReport rep = ucb_benefit_closed(m, OutcomeSpace::binary(), 0.5);
  CHECK(rep.interval.lower == 0.0);
  CHECK(rep.interval.upper == doctest::Approx(0.5).epsilon(1e-9));  // half of sqrt((.5+.5)^2)
}

TEST_CASE("widened joint-distribution interval reproduces the trial-level convenience call") {
  std::vector<double> support;
  for (int v = 0; v <= 52; ++v) support.push_back(v);
  TrialSummary t;
  t.space = OutcomeSpace::finite_support(support);
  t.direction = Direction::LowerBetter;
  t.control = {123, 11.94, 56.5504};
  t.treatment = {115, 10.73, 42.6409};

  CiReport standard = ci_benefit_lp(t, 0.05, MeanSeConvention::Standard);
  CHECK(standard.mode == "widened-lp");
  CHECK(standard.interval.lower == 0.0);
  CHECK(std::fabs(standard.interval.upper - 12.25) < 0.15);

  // the printed convention puts the variance in the numerator, giving far wider mean bands
  CiReport printed = ci_benefit_lp(t, 0.05, MeanSeConvention::AsPrinted);
  CHECK(printed.interval.upper > standard.interval.upper);

  TrialSummary norm = normalize_direction(t);
  CiReport direct = ci_benefit_lp(MomentSet::from_trial(norm), norm.space, 0.05);
  CHECK(direct.interval.upper == doctest::Approx(standard.interval.upper).epsilon(1e-12));
}

TEST_CASE("confidence intervals are monotone in alpha and contain the point bounds") {
  TrialSummary t;
  t.space = OutcomeSpace::finite_support({0.0, 1.0, 2.0, 3.0, 4.0, 5.0});
  t.control = {120, 2.0, 1.0};
  t.treatment = {110, 3.0, 1.5};
  MomentSet m = MomentSet::from_trial(t);

  CiReport het_tight = ci_heterogeneity(m, t.space, 0.10);
  CiReport het_wide = ci_heterogeneity(m, t.space, 0.01);
  CHECK(het_wide.interval.lower <= het_tight.interval.lower + 1e-12);
  CHECK(het_wide.interval.upper >= het_tight.interval.upper - 1e-12);

  HeterogeneityBound point = het_bounds_general(t);
  CHECK(het_tight.interval.lower <= point.interval.lower + 1e-12);
  CHECK(het_tight.interval.upper >= point.interval.upper - 1e-12);

  CiReport ucb_tight = ucb_benefit_closed(m, t.space, 0.10);
  CiReport ucb_wide = ucb_benefit_closed(m, t.space, 0.01);
  CHECK(ucb_wide.interval.upper >= ucb_tight.interval.upper - 1e-12);
  CHECK(ucb_tight.interval.upper >= benefit_upper_closed(t) - 1e-12);

  CiReport lp_tight = ci_benefit_lp(m, t.space, 0.10);
  CiReport lp_wide = ci_benefit_lp(m, t.space, 0.01);
  CHECK(lp_wide.interval.lower <= lp_tight.interval.lower + 1e-12);
  CHECK(lp_wide.interval.upper >= lp_tight.interval.upper - 1e-12);

  BenefitBound lp_point = benefit_bounds_lp(t);
  CHECK(lp_tight.interval.lower <= lp_point.interval.lower + 1e-9);
  CHECK(lp_tight.interval.upper >= lp_point.interval.upper - 1e-9);
}

TEST_CASE("near-unit alpha shrinks intervals onto the point estimates") {
  TrialSummary t;
  t.space = OutcomeSpace::finite_support({0.0, 1.0, 2.0, 3.0, 4.0, 5.0});
  t.control = {120, 2.0, 1.0};
  t.treatment = {110, 3.0, 1.5};
  MomentSet m = MomentSet::from_trial(t);

  CiReport het = ci_heterogeneity(m, t.space, 0.9998);
  HeterogeneityBound point = het_bounds_general(t);
  CHECK(std::fabs(het.interval.upper - point.interval.upper) < 1e-2);

  CiReport ucb = ucb_benefit_closed(m, t.space, 0.4999);
  CHECK(std::fabs(ucb.interval.upper - benefit_upper_closed(t)) < 1e-2);
}

TEST_CASE("widened interval converges to the point interval as samples grow") {
  TrialSummary t;
  t.space = OutcomeSpace::finite_support({0.0, 1.0, 2.0, 3.0, 4.0, 5.0});
  t.control = {120, 2.0, 1.0};
  t.treatment = {110, 3.0, 1.5};
  BenefitBound point = benefit_bounds_lp(t);

  TrialSummary big = t;
  big.control.n = 4000000000000L;
  big.treatment.n = 4000000000000L;
  CiReport ci = ci_benefit_lp(MomentSet::from_trial(big), big.space, 0.05);
  CHECK(std::fabs(ci.interval.upper - point.interval.upper) < 1e-3);
  CHECK(std::fabs(ci.interval.lower - point.interval.lower) < 1e-3);
}

TEST_CASE("second-moment dispersion cap dominates simulated dispersion at large n") {
  SplitMix64 rng(1123581321);
  std::vector<double> y0 = simulate_bounded(rng, 10000, 0.0, 10.0, 1.4);
  std::vector<double> y1 = simulate_bounded(rng, 10000, 0.0, 10.0, 0.9);
  MomentSet m = MomentSet::from_samples(y0, y1);

  auto var_of_square = [](const std::vector<double>& y) {
    double s2 = 0.0, s4 = 0.0;
    for (double v : y) {
      s2 += v * v;
      s4 += v * v * v * v;
    }
    s2 /= y.size();
    s4 /= y.size();
    return s4 - s2 * s2;
  };

  std::vector<double> support;
  for (int v = 0; v <= 10; ++v) support.push_back(v);
  CiReport rep = ci_benefit_lp(m, OutcomeSpace::finite_support(support), 0.05);
  double g_better = 0.0, g_worse = 0.0;
  for (const auto& [k, v] : rep.details) {
    if (k == "gamma_better") g_better = v;
    if (k == "gamma_worse") g_worse = v;
  }
  bool treatment_better = m.treatment.mean >= m.control.mean;
  double g1 = treatment_better ? g_better : g_worse;
  double g0 = treatment_better ? g_worse : g_better;
  CHECK(g0 * g0 >= var_of_square(y0) * 0.999);
  CHECK(g1 * g1 >= var_of_square(y1) * 0.999);
}
