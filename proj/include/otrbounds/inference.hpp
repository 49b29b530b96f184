#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "otrbounds/benefit.hpp"
#include "otrbounds/core.hpp"
#include "otrbounds/lp.hpp"

namespace otr {

// arm moments for large-sample intervals; higher central/raw moments are optional and only
// available when individual-level outcomes were supplied
struct MomentSet {
  ArmSummary control;
  ArmSummary treatment;
  std::optional<double> mu4_control;    // E (Y - EY)^4
  std::optional<double> mu4_treatment;
  std::optional<double> raw3_control;   // E Y^3
  std::optional<double> raw3_treatment;

  long total_n() const { return control.n + treatment.n; }
  double r_control() const { return static_cast<double>(control.n) / total_n(); }
  double r_treatment() const { return static_cast<double>(treatment.n) / total_n(); }
  double delta_bar() const { return treatment.mean - control.mean; }

  // sd ratio treatment/control; control variance must be positive
  double nu_hat() const {
    if (control.variance <= 0.0)
      throw ZeroControlVariance("variance ratio undefined: control-arm variance is zero");
    return std::sqrt(treatment.variance / control.variance);
  }

  bool has_exact_moments() const {
    return mu4_control && mu4_treatment && raw3_control && raw3_treatment;
  }

  static MomentSet from_trial(const TrialSummary& trial) {
    MomentSet m;
    m.control = trial.control;
    m.treatment = trial.treatment;
    return m;
  }

  // population-style moments: every average divides by n
  static MomentSet from_samples(const std::vector<double>& y_control,
                                const std::vector<double>& y_treatment) {
    auto summarize = [](const std::vector<double>& y, ArmSummary& arm, double& mu4, double& raw3) {
      if (y.size() < 2) throw DomainError("each arm needs at least 2 observations");
      double n = static_cast<double>(y.size());
      double mean = 0.0;
      for (double v : y) mean += v;
      mean /= n;
      double m2 = 0.0, m4 = 0.0, r3 = 0.0;
      for (double v : y) {
        double d = v - mean;
        m2 += d * d;
        m4 += d * d * d * d;
        r3 += v * v * v;
      }
      arm.n = static_cast<long>(y.size());
      arm.mean = mean;
      arm.variance = m2 / n;
      mu4 = m4 / n;
      raw3 = r3 / n;
    };
    MomentSet m;
    double mu4 = 0.0, raw3 = 0.0;
    summarize(y_control, m.control, mu4, raw3);
    m.mu4_control = mu4;
    m.raw3_control = raw3;
    summarize(y_treatment, m.treatment, mu4, raw3);
    m.mu4_treatment = mu4;
    m.raw3_treatment = raw3;
    return m;
  }
};

struct CiReport {
  Interval interval;
  double alpha = 0.05;
  std::string mode;  // "exact-moments" | "summary-bound" | "widened-lp"
  std::vector<std::pair<std::string, double>> details;
  std::vector<std::string> notes;
};

enum class MomentMode { Auto, Exact, SummaryBound };
enum class MeanSeConvention { Standard, AsPrinted };

// inverse standard normal CDF: rational initial guess refined by one Newton step through the
// complementary error function; absolute error well under 1e-9 on (0, 1)
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw DomainError("normal quantile requires a probability strictly inside (0, 1)");

  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  const double p_low = 0.02425;

  double x;
  if (p < p_low) {
    double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    double q = p - 0.5;
    double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }

  double cdf = 0.5 * std::erfc(-x / std::sqrt(2.0));
  double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::acos(-1.0));
  if (pdf > 0.0) x -= (cdf - p) / pdf;
  return x;
}

namespace detail {

// central fourth moment cap for outcomes on [m, M]
inline double fourth_moment_cap(double mean, double variance, double m, double M) {
  double dM = M - mean, dm = m - mean;
  return std::max(dM * dM, dm * dm) * variance;
}

// |E Y^3| cap on [m, M]
inline double abs_third_moment_cap(double mean, double variance, double m, double M) {
  return std::max(std::fabs(M), std::fabs(m)) * (variance + mean * mean);
}

inline void require_positive_variances(const MomentSet& mom) {
  if (mom.control.variance <= 0.0 && mom.treatment.variance > 0.0)
    throw ZeroControlVariance("control-arm variance is zero while treatment-arm variance is positive");
  if (mom.control.variance <= 0.0 || mom.treatment.variance <= 0.0)
    throw DegenerateDenominator("large-sample variance formulas require positive arm variances");
}

inline void require_sample_sizes(const MomentSet& mom) {
  if (mom.control.n < 2 || mom.treatment.n < 2)
    throw DomainError("each arm needs at least 2 observations");
}

}  // namespace detail

// large-sample variance terms for the heterogeneity endpoints, exact central fourth moments
inline std::pair<double, double> tau_het_exact(const MomentSet& mom) {
  if (!(mom.mu4_control && mom.mu4_treatment))
    throw MissingMoments("exact mode requires central fourth moments for both arms");
  detail::require_sample_sizes(mom);
  detail::require_positive_variances(mom);
  double nu = mom.nu_hat();
  double a1 = *mom.mu4_treatment / mom.r_treatment() -
              mom.treatment.variance * mom.treatment.variance;
  double a0 = *mom.mu4_control / mom.r_control() - mom.control.variance * mom.control.variance;
  double inv = 1.0 / nu;
  double tau_minus = a1 * (inv - 1.0) * (inv - 1.0) + a0 * (nu - 1.0) * (nu - 1.0);
  double tau_plus = a1 * (inv + 1.0) * (inv + 1.0) + a0 * (nu + 1.0) * (nu + 1.0);
  return {std::max(0.0, tau_minus), std::max(0.0, tau_plus)};
}

// fourth moments replaced by their range-based caps; valid upper bounds on the exact taus
inline std::pair<double, double> tau_het_bounded(const MomentSet& mom, double m, double M) {
  detail::require_sample_sizes(mom);
  detail::require_positive_variances(mom);
  double nu = mom.nu_hat();
  double a1 = detail::fourth_moment_cap(mom.treatment.mean, mom.treatment.variance, m, M) /
                  mom.r_treatment() -
              mom.treatment.variance * mom.treatment.variance;
  double a0 = detail::fourth_moment_cap(mom.control.mean, mom.control.variance, m, M) /
                  mom.r_control() -
              mom.control.variance * mom.control.variance;
  double inv = 1.0 / nu;
  auto f = [&](double z) {
    return std::max(0.0, a1 * (inv + z) * (inv + z) + a0 * (nu + z) * (nu + z));
  };
  return {f(-1.0), f(1.0)};
}

inline CiReport ci_heterogeneity(const MomentSet& mom, const OutcomeSpace& space, double alpha,
                                 MomentMode mode = MomentMode::Auto) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
  detail::require_sample_sizes(mom);

  CiReport rep;
  rep.alpha = alpha;

  if (mom.control.variance <= 0.0 && mom.treatment.variance <= 0.0) {
    rep.interval = {0.0, 0.0, "ci-het", "outcome^2"};
    rep.mode = "degenerate";
    rep.notes.push_back("both arm variances are zero; the interval is a point at zero");
    return rep;
  }

  bool exact;
  switch (mode) {
    case MomentMode::Exact:
      exact = true;
      break;
    case MomentMode::SummaryBound:
      exact = false;
      break;
    default:
      exact = mom.mu4_control && mom.mu4_treatment;
  }
  if (exact && !(mom.mu4_control && mom.mu4_treatment))
    throw MissingMoments("exact mode requires central fourth moments for both arms");
  if (!exact && !space.is_bounded())
    throw UnsupportedSpace(
        "summary-only intervals require a bounded outcome space to cap the fourth moments");

  auto [tau_minus, tau_plus] =
      exact ? tau_het_exact(mom)
            : tau_het_bounded(mom, space.range_min(), space.range_max());

  double nu = mom.nu_hat();
  double v0 = mom.control.variance;
  double lo_est = v0 * (nu - 1.0) * (nu - 1.0);
  double hi_est = v0 * (nu + 1.0) * (nu + 1.0);
  double z = normal_quantile(1.0 - alpha / 2.0);
  double n = static_cast<double>(mom.total_n());
  double lower = std::max(0.0, lo_est - z * std::sqrt(tau_minus / n));
  double upper = hi_est + z * std::sqrt(tau_plus / n);

  rep.interval = {lower, upper, "ci-het", "outcome^2"};
  rep.mode = exact ? "exact-moments" : "summary-bound";
  rep.details = {{"tau_minus", tau_minus},
                 {"tau_plus", tau_plus},
                 {"z", z},
                 {"nu_hat", nu},
                 {"point_lower", lo_est},
                 {"point_upper", hi_est}};
  return rep;
}

// conservative large-sample variance for the closed-form benefit upper bound, evaluated from
// summary statistics and range caps exactly as the estimator is written
inline double tau_ben_bound(const MomentSet& mom, double m, double M) {
  detail::require_sample_sizes(mom);
  detail::require_positive_variances(mom);
  double nu = mom.nu_hat();
  double inv = 1.0 / nu;
  double v0 = mom.control.variance, v1 = mom.treatment.variance;
  double e0 = mom.control.mean, e1 = mom.treatment.mean;
  double r0 = mom.r_control(), r1 = mom.r_treatment();
  double delta = mom.delta_bar();

  double denom = 16.0 * (v0 * (nu + 1.0) * (nu + 1.0) + delta * delta);
  if (denom <= 0.0)
    throw DegenerateDenominator("benefit upper bound is zero; its variance estimator is undefined");

  double mm = std::max(std::fabs(M), std::fabs(m));
  double t1 = (detail::fourth_moment_cap(e1, v1, m, M) / r1 - v1 * v1) * (1.0 + inv) * (1.0 + inv);
  double t2 = (detail::fourth_moment_cap(e0, v0, m, M) / r0 - v0 * v0) * (1.0 + nu) * (1.0 + nu);
  double t3 = 4.0 * ((v1 + e1 * e1) / r1 + (v0 + e0 * e0) / r0 - delta * delta) * delta * delta;
  double t4 = 4.0 * ((mm * (v1 + e1 * e1) - 2.0 * e1 * v1 - e1 * e1 * e1) / r1 - delta * v1) *
              delta * (1.0 + inv);
  double t5 = 4.0 * ((mm * (v0 + e0 * e0) + 2.0 * e0 * v0 + e0 * e0 * e0) / r0 - delta * v0) *
              delta * (1.0 + nu);
  return (t1 + t2 + t3 + t4 + t5) / denom;
}

// delta-method variance of half the root of (s0+s1)^2 + delta^2 under two independent samples;
// requires exact central fourth and raw third moments
inline double tau_ben_exact(const MomentSet& mom) {
  if (!mom.has_exact_moments())
    throw MissingMoments("exact mode requires fourth and third moments for both arms");
  detail::require_sample_sizes(mom);
  detail::require_positive_variances(mom);
  double nu = mom.nu_hat();
  double inv = 1.0 / nu;
  double v0 = mom.control.variance, v1 = mom.treatment.variance;
  double e0 = mom.control.mean, e1 = mom.treatment.mean;
  double r0 = mom.r_control(), r1 = mom.r_treatment();
  double delta = mom.delta_bar();

  // central third moments from raw thirds
  double mu3_1 = *mom.raw3_treatment - 3.0 * e1 * (v1 + e1 * e1) + 2.0 * e1 * e1 * e1;
  double mu3_0 = *mom.raw3_control - 3.0 * e0 * (v0 + e0 * e0) + 2.0 * e0 * e0 * e0;

  double w2 = v0 * (nu + 1.0) * (nu + 1.0) + delta * delta;
  if (w2 <= 0.0)
    throw DegenerateDenominator("benefit upper bound is zero; its variance is undefined");

  double bracket = (*mom.mu4_treatment - v1 * v1) * (1.0 + inv) * (1.0 + inv) / r1 +
                   (*mom.mu4_control - v0 * v0) * (1.0 + nu) * (1.0 + nu) / r0 +
                   4.0 * delta * delta * (v1 / r1 + v0 / r0) +
                   4.0 * delta * (1.0 + inv) * mu3_1 / r1 -
                   4.0 * delta * (1.0 + nu) * mu3_0 / r0;
  return std::max(0.0, bracket / (16.0 * w2));
}

// one-sided upper confidence bound for the closed-form benefit bound
inline CiReport ucb_benefit_closed(const MomentSet& mom, const OutcomeSpace& space, double alpha,
                                   MomentMode mode = MomentMode::Auto) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
  detail::require_sample_sizes(mom);
  detail::require_positive_variances(mom);

  bool exact;
  switch (mode) {
    case MomentMode::Exact:
      exact = true;
      break;
    case MomentMode::SummaryBound:
      exact = false;
      break;
    default:
      exact = mom.has_exact_moments();
  }
  if (exact && !mom.has_exact_moments())
    throw MissingMoments("exact mode requires fourth and third moments for both arms");
  if (!exact && !space.is_bounded())
    throw UnsupportedSpace(
        "summary-only intervals require a bounded outcome space to cap the higher moments");

  double tau = exact ? tau_ben_exact(mom)
                     : std::max(0.0, tau_ben_bound(mom, space.range_min(), space.range_max()));
  double s0 = std::sqrt(mom.control.variance), s1 = std::sqrt(mom.treatment.variance);
  double delta = mom.delta_bar();
  double plug = 0.5 * std::sqrt((s0 + s1) * (s0 + s1) + delta * delta);
  double z = normal_quantile(1.0 - alpha);
  double upper = plug + z * std::sqrt(tau / static_cast<double>(mom.total_n()));

  CiReport rep;
  rep.alpha = alpha;
  rep.mode = exact ? "exact-moments" : "summary-bound";
  rep.interval = {0.0, upper, "ci-benefit-ucb", "outcome"};
  rep.details = {{"tau", tau}, {"z", z}, {"point_upper", plug}};
  return rep;
}

// sampling-uncertainty widening of the joint-distribution bounds: mean and second-moment
// constraints become two-sided inequality bands at level 1 - alpha/8 per side
inline CiReport ci_benefit_lp(const MomentSet& mom, const OutcomeSpace& space, double alpha,
                              MeanSeConvention mean_se = MeanSeConvention::Standard) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
  if (!space.is_finite())
    throw UnsupportedSpace("joint-distribution intervals require a finite outcome support");
  detail::require_sample_sizes(mom);

  const std::vector<double>& y = space.values();
  const std::size_t k = y.size();
  const double m = y.front(), M = y.back();
  const double z = normal_quantile(1.0 - alpha / 8.0);

  // better-arm role fixed by the larger mean, ties to treatment
  const ArmSummary& better = mom.treatment.mean >= mom.control.mean ? mom.treatment : mom.control;
  const ArmSummary& worse = mom.treatment.mean >= mom.control.mean ? mom.control : mom.treatment;

  CiReport rep;
  rep.alpha = alpha;
  rep.mode = "widened-lp";

  auto gamma = [&](const ArmSummary& arm) {
    double v = arm.variance, mu = arm.mean;
    double g2 = detail::fourth_moment_cap(mu, v, m, M) - v * v +
                4.0 * std::fabs(mu) * std::max(std::fabs(m), std::fabs(M)) * (v + mu * mu) -
                8.0 * v * mu * mu - 4.0 * mu * mu * mu * mu;
    if (g2 < 0.0) {
      rep.notes.push_back("second-moment dispersion cap clamped at zero");
      g2 = 0.0;
    }
    return std::sqrt(g2);
  };

  auto mean_halfwidth = [&](const ArmSummary& arm) {
    double spread = mean_se == MeanSeConvention::AsPrinted ? arm.variance : std::sqrt(arm.variance);
    return z * spread / std::sqrt(static_cast<double>(arm.n));
  };

  double g_b = gamma(better), g_w = gamma(worse);
  double hw_mean_b = mean_halfwidth(better);
  double hw_mean_w = mean_halfwidth(worse);
  double hw_sq_b = z * g_b / std::sqrt(static_cast<double>(better.n));
  double hw_sq_w = z * g_w / std::sqrt(static_cast<double>(worse.n));

  LinearProgram lp;
  lp.num_vars = k * k;
  lp.objective.assign(k * k, 0.0);
  std::vector<double> ones(k * k, 1.0), yb(k * k, 0.0), yw(k * k, 0.0), yb2(k * k, 0.0),
      yw2(k * k, 0.0);
  for (std::size_t r = 0; r < k; ++r) {
    for (std::size_t j = 0; j < k; ++j) {
      std::size_t idx = r * k + j;
      if (y[j] < y[r]) lp.objective[idx] = y[r] - y[j];
      yb[idx] = y[j];
      yw[idx] = y[r];
      yb2[idx] = y[j] * y[j];
      yw2[idx] = y[r] * y[r];
    }
  }
  lp.equalities.push_back({ones, 1.0});
  auto band = [&](const std::vector<double>& coeffs, double center, double hw) {
    lp.inequalities.push_back({coeffs, center + hw, LinearProgram::Relation::LessEq});
    lp.inequalities.push_back({coeffs, center - hw, LinearProgram::Relation::GreaterEq});
  };
  band(yb, better.mean, hw_mean_b);
  band(yw, worse.mean, hw_mean_w);
  band(yb2, detail::second_moment(better), hw_sq_b);
  band(yw2, detail::second_moment(worse), hw_sq_w);

  lp.sense = LinearProgram::Sense::Minimize;
  LpSolution lo = solve(lp);
  lp.sense = LinearProgram::Sense::Maximize;
  LpSolution hi = solve(lp);
  if (lo.status == LpSolution::Status::Infeasible || hi.status == LpSolution::Status::Infeasible)
    throw InfeasibleWidenedLp(
        "the widened moment bands admit no joint distribution on the declared support");
  if (lo.status != LpSolution::Status::Optimal || hi.status != LpSolution::Status::Optimal)
    throw Error("widened joint-distribution interval did not reach an optimum");

  double lower = std::max(0.0, lo.value);
  double upper = std::max(lower, hi.value);
  rep.interval = {lower, upper, "ci-benefit-lp", "outcome"};
  rep.details = {{"z", z},
                 {"gamma_better", g_b},
                 {"gamma_worse", g_w},
                 {"mean_halfwidth_better", hw_mean_b},
                 {"mean_halfwidth_worse", hw_mean_w},
                 {"second_moment_halfwidth_better", hw_sq_b},
                 {"second_moment_halfwidth_worse", hw_sq_w}};
  return rep;
}

// convenience: normalize the direction, then run the widened interval on the trial's moments
inline CiReport ci_benefit_lp(const TrialSummary& trial, double alpha,
                              MeanSeConvention mean_se = MeanSeConvention::Standard) {
  TrialSummary norm = normalize_direction(trial);
  return ci_benefit_lp(MomentSet::from_trial(norm), norm.space, alpha, mean_se);
}

}  // namespace otr
