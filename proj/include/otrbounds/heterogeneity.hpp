#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "otrbounds/core.hpp"

namespace otr {

struct HeterogeneityBound {
  Interval interval;
  std::optional<double> nu;       // sqrt(var(Y^treatment)/var(Y^control)); absent for stratified
  std::optional<double> s_minus;  // extremal covariance terms; absent for the unbounded formula
  std::optional<double> s_plus;
  std::string binding_lower;  // which formula produced each endpoint
  std::string binding_upper;
  std::vector<std::string> notes;
};

// two-point joint over (Y^control, Y^treatment), each point with probability 1/2
struct DoubletonJoint {
  double y0_a = 0.0;
  double y1_a = 0.0;
  double y0_b = 0.0;
  double y1_b = 0.0;

  double mean0() const { return 0.5 * (y0_a + y0_b); }
  double mean1() const { return 0.5 * (y1_a + y1_b); }
  double var0() const {
    double d = y0_a - y0_b;
    return 0.25 * d * d;
  }
  double var1() const {
    double d = y1_a - y1_b;
    return 0.25 * d * d;
  }
  double var_delta() const {
    double da = y1_a - y0_a, db = y1_b - y0_b;
    double d = da - db;
    return 0.25 * d * d;
  }
};

enum class AttainmentSide { Lower, Upper };
enum class PerStratumBound { General, Bounded };

namespace detail {

// variance-ratio bounds [var0 (nu-1)^2, var0 (nu+1)^2]; requires var0 > 0 or var1 == 0
inline void general_endpoints(double var0, double var1, double& lo, double& hi, double& nu) {
  if (var0 == 0.0) {
    if (var1 > 0.0)
      throw ZeroControlVariance(
          "control-arm variance is zero while treatment-arm variance is positive; the "
          "variance-ratio bound is undefined");
    lo = hi = 0.0;
    nu = 0.0;
    return;
  }
  nu = std::sqrt(var1 / var0);
  lo = std::max(0.0, var0 * (nu - 1.0) * (nu - 1.0));
  hi = var0 * (nu + 1.0) * (nu + 1.0);
}

}  // namespace detail

inline HeterogeneityBound het_bounds_general(const TrialSummary& trial) {
  HeterogeneityBound out;
  double lo = 0.0, hi = 0.0, nu = 0.0;
  detail::general_endpoints(trial.control.variance, trial.treatment.variance, lo, hi, nu);
  out.interval = {lo, hi, "het-general", "outcome^2"};
  out.nu = nu;
  out.binding_lower = "general";
  out.binding_upper = "general";
  return out;
}

// covariance-extremal refinement for outcomes confined to [m, M], intersected with the
// variance-ratio bound whenever the latter is defined
inline HeterogeneityBound het_bounds_bounded(const TrialSummary& trial) {
  if (!trial.space.is_bounded())
    throw UnsupportedSpace("bounded heterogeneity bound requires a bounded outcome space");
  const double m = trial.space.range_min();
  const double M = trial.space.range_max();
  const double e0 = trial.control.mean;
  const double e1 = trial.treatment.mean;
  const double v0 = trial.control.variance;
  const double v1 = trial.treatment.variance;
  if (e0 < m || e0 > M || e1 < m || e1 > M)
    throw InfeasibleSummaries("arm mean lies outside the declared outcome range");

  HeterogeneityBound out;
  bool inconsistent = !detail::variance_consistent(e0, v0, m, M) ||
                      !detail::variance_consistent(e1, v1, m, M);
  if (inconsistent)
    out.notes.push_back(
        "arm variance exceeds the largest value compatible with its mean on the declared range; "
        "bounds evaluated anyway and may be vacuous");

  double root = std::sqrt(v0 * v1);
  double s_minus = 2.0 * std::min({root, (M - e0) * (e1 - m), (e0 - m) * (M - e1)});
  double s_plus = 2.0 * std::min({root, (e0 - m) * (e1 - m), (M - e0) * (M - e1)});
  double lo = std::max(0.0, v0 + v1 - s_minus);
  double hi = v0 + v1 + s_plus;
  out.s_minus = s_minus;
  out.s_plus = s_plus;
  out.binding_lower = "bounded";
  out.binding_upper = "bounded";

  double nu = 0.0;
  bool general_defined = v0 > 0.0 || v1 == 0.0;
  if (general_defined) {
    double glo = 0.0, ghi = 0.0;
    detail::general_endpoints(v0, v1, glo, ghi, nu);
    out.nu = nu;
    if (!inconsistent) {
      if (glo > lo) {
        lo = glo;
        out.binding_lower = "general";
      }
      if (ghi < hi) {
        hi = ghi;
        out.binding_upper = "general";
      }
    }
  } else {
    out.notes.push_back(
        "control-arm variance is zero; only the bounded-outcome formula applies");
  }

  out.interval = {lo, hi, "het-bounded", "outcome^2"};
  return out;
}

// mixture decomposition: var(Delta) = between-stratum effect dispersion + within-stratum pieces
inline HeterogeneityBound het_bounds_stratified(const StratifiedSummary& summary,
                                                PerStratumBound per_stratum) {
  if (summary.strata.empty()) throw DomainError("stratified summary has no strata");
  if (per_stratum == PerStratumBound::Bounded && !summary.space.is_bounded())
    throw UnsupportedSpace("bounded per-stratum bounds require a bounded outcome space");

  double total = 0.0;
  for (const auto& s : summary.strata) {
    if (!(s.prob > 0.0)) throw DomainError("stratum probabilities must be positive");
    total += s.prob;
  }

  HeterogeneityBound out;
  if (std::fabs(total - 1.0) > 1e-6)
    out.notes.push_back("stratum probabilities renormalized from " + detail::num(total));

  double mean_effect = 0.0;
  for (const auto& s : summary.strata)
    mean_effect += (s.prob / total) * (s.treatment.mean - s.control.mean);

  double between = 0.0, within_lo = 0.0, within_hi = 0.0;
  for (const auto& s : summary.strata) {
    double pr = s.prob / total;
    double gap = (s.treatment.mean - s.control.mean) - mean_effect;
    between += pr * gap * gap;

    TrialSummary sub;
    sub.control = s.control;
    sub.treatment = s.treatment;
    sub.space = summary.space;
    sub.direction = summary.direction;
    HeterogeneityBound piece;
    try {
      piece = per_stratum == PerStratumBound::Bounded ? het_bounds_bounded(sub)
                                                      : het_bounds_general(sub);
    } catch (const Error& e) {
      throw Error("stratum '" + s.label + "': " + e.what());
    }
    within_lo += pr * piece.interval.lower;
    within_hi += pr * piece.interval.upper;
    for (const auto& note : piece.notes)
      out.notes.push_back("stratum '" + s.label + "': " + note);
  }

  out.interval = {between + within_lo, between + within_hi, "het-stratified", "outcome^2"};
  out.binding_lower = "stratified";
  out.binding_upper = "stratified";
  return out;
}

// joint distribution matching both arm means and variances whose effect variance sits at an
// endpoint of the variance-ratio bound: comonotone pairing for the lower, antitone for the upper
inline DoubletonJoint attainment_distribution(const TrialSummary& trial, AttainmentSide side) {
  const double m0 = trial.control.mean, m1 = trial.treatment.mean;
  const double s0 = std::sqrt(trial.control.variance);
  const double s1 = std::sqrt(trial.treatment.variance);
  DoubletonJoint j;
  if (side == AttainmentSide::Lower) {
    j = {m0 - s0, m1 - s1, m0 + s0, m1 + s1};
  } else {
    j = {m0 - s0, m1 + s1, m0 + s0, m1 - s1};
  }
  return j;
}

}  // namespace otr
