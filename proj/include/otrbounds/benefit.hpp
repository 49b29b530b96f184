#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "otrbounds/core.hpp"
#include "otrbounds/heterogeneity.hpp"
#include "otrbounds/lp.hpp"

namespace otr {

enum class BenefitMethod { Lp, ClosedForm, BinaryClosedForm, StratifiedLp, StratifiedClosedForm };

struct BenefitBound {
  Interval interval;
  BenefitMethod method = BenefitMethod::Lp;
  double mu_T = 0.0;            // value of the best single arm, original scale
  std::optional<double> mu_C;   // stratified rule value, original scale
  std::vector<std::string> notes;
};

namespace detail {

inline double second_moment(const ArmSummary& arm) {
  return arm.variance + arm.mean * arm.mean;
}

struct ArmRoles {
  ArmSummary better;
  ArmSummary worse;
  bool treatment_is_better = true;  // ties go to the treatment arm
};

inline ArmRoles assign_roles(const TrialSummary& normalized) {
  if (normalized.treatment.mean >= normalized.control.mean)
    return {normalized.treatment, normalized.control, true};
  return {normalized.control, normalized.treatment, false};
}

inline void require_valid_for_lp(const std::vector<Diagnostic>& diags) {
  std::string msg;
  for (const auto& d : diags) {
    if (d.severity != Diagnostic::Severity::Error) continue;
    if (!msg.empty()) msg += "; ";
    msg += d.message;
  }
  if (!msg.empty()) throw InfeasibleSummaries(msg);
}

// moment equalities relaxed to two-sided inequalities with slack eps * max(1, |rhs|)
inline void attach_moment_rows(LinearProgram& lp, const std::vector<double>& coeffs, double rhs,
                               double relax_eps) {
  if (relax_eps <= 0.0) {
    lp.equalities.push_back({coeffs, rhs});
    return;
  }
  double slack = relax_eps * std::max(1.0, std::fabs(rhs));
  lp.inequalities.push_back({coeffs, rhs + slack, LinearProgram::Relation::LessEq});
  lp.inequalities.push_back({coeffs, rhs - slack, LinearProgram::Relation::GreaterEq});
}

}  // namespace detail

// joint pmf p[r*k + j] = P(Y^worse = y_r, Y^better = y_j) over the declared support;
// objective is the expected positive part of (Y^worse - Y^better)
inline LinearProgram build_benefit_lp(const TrialSummary& normalized, LinearProgram::Sense sense,
                                      double relax_eps = 0.0) {
  if (!normalized.space.is_finite())
    throw UnsupportedSpace("joint-distribution bounds require a finite outcome support");
  const std::vector<double>& y = normalized.space.values();
  const std::size_t k = y.size();
  detail::ArmRoles roles = detail::assign_roles(normalized);

  LinearProgram lp;
  lp.num_vars = k * k;
  lp.sense = sense;
  lp.objective.assign(k * k, 0.0);
  for (std::size_t r = 0; r < k; ++r)
    for (std::size_t j = 0; j < k; ++j)
      if (y[j] < y[r]) lp.objective[r * k + j] = y[r] - y[j];

  std::vector<double> mass(k * k, 1.0);
  std::vector<double> mean_b(k * k, 0.0), mean_w(k * k, 0.0);
  std::vector<double> sq_b(k * k, 0.0), sq_w(k * k, 0.0);
  for (std::size_t r = 0; r < k; ++r) {
    for (std::size_t j = 0; j < k; ++j) {
      std::size_t idx = r * k + j;
      mean_b[idx] = y[j];
      mean_w[idx] = y[r];
      sq_b[idx] = y[j] * y[j];
      sq_w[idx] = y[r] * y[r];
    }
  }
  lp.equalities.push_back({std::move(mass), 1.0});
  detail::attach_moment_rows(lp, mean_b, roles.better.mean, relax_eps);
  detail::attach_moment_rows(lp, mean_w, roles.worse.mean, relax_eps);
  detail::attach_moment_rows(lp, sq_b, detail::second_moment(roles.better), relax_eps);
  detail::attach_moment_rows(lp, sq_w, detail::second_moment(roles.worse), relax_eps);
  return lp;
}

inline BenefitBound benefit_bounds_lp(const TrialSummary& trial, double relax_eps = 0.0) {
  if (!trial.space.is_finite())
    throw UnsupportedSpace("joint-distribution bounds require a finite outcome support");
  if (relax_eps < 0.0) throw std::invalid_argument("relax_eps must be nonnegative");
  detail::require_valid_for_lp(validate(trial));

  TrialSummary norm = normalize_direction(trial);
  LinearProgram lo_lp = build_benefit_lp(norm, LinearProgram::Sense::Minimize, relax_eps);
  LinearProgram hi_lp = build_benefit_lp(norm, LinearProgram::Sense::Maximize, relax_eps);
  LpSolution lo = solve(lo_lp);
  LpSolution hi = solve(hi_lp);
  if (lo.status == LpSolution::Status::Infeasible || hi.status == LpSolution::Status::Infeasible)
    throw InfeasibleSummaries(
        "no joint outcome distribution matches the supplied means and variances on the declared "
        "support; check the support or retry with a small relax_eps");
  if (lo.status != LpSolution::Status::Optimal || hi.status != LpSolution::Status::Optimal)
    throw Error("joint-distribution bound did not reach an optimum");

  BenefitBound out;
  double lower = std::max(0.0, lo.value);
  double upper = std::max(lower, hi.value);
  out.interval = {lower, upper, "benefit-lp", "outcome"};
  out.method = BenefitMethod::Lp;
  detail::ArmRoles roles = detail::assign_roles(norm);
  out.mu_T = roles.treatment_is_better ? trial.treatment.mean : trial.control.mean;
  out.notes.push_back(roles.treatment_is_better ? "preferred single arm: treatment"
                                                : "preferred single arm: control");
  if (trial.direction == Direction::LowerBetter)
    out.notes.push_back("outcomes reflected internally so that larger is better");
  if (relax_eps > 0.0)
    out.notes.push_back("moment constraints relaxed by relative slack " + detail::num(relax_eps));
  return out;
}

inline BenefitBound benefit_bounds_binary(const TrialSummary& trial) {
  if (!trial.space.is_binary())
    throw UnsupportedSpace("binary closed form requires a binary outcome");
  TrialSummary norm = normalize_direction(trial);
  const double e0 = norm.control.mean;
  const double e1 = norm.treatment.mean;
  if (e0 < 0.0 || e0 > 1.0 || e1 < 0.0 || e1 > 1.0)
    throw InfeasibleSummaries("binary arm mean lies outside [0, 1]");

  BenefitBound out;
  if (!detail::variance_consistent(e0, norm.control.variance, 0.0, 1.0) ||
      !detail::variance_consistent(e1, norm.treatment.variance, 0.0, 1.0))
    out.notes.push_back("arm variance inconsistent with a binary outcome; means used as-is");

  double upper = e0 <= e1 ? std::min(e0, 1.0 - e1) : std::min(1.0 - e0, e1);
  out.interval = {0.0, std::max(0.0, upper), "benefit-binary", "outcome"};
  out.method = BenefitMethod::BinaryClosedForm;
  detail::ArmRoles roles = detail::assign_roles(norm);
  out.mu_T = roles.treatment_is_better ? trial.treatment.mean : trial.control.mean;
  out.notes.push_back(roles.treatment_is_better ? "preferred single arm: treatment"
                                                : "preferred single arm: control");
  return out;
}

// half the root of (largest effect variance) + (mean effect)^2
inline double benefit_upper_closed(const TrialSummary& trial) {
  double b_plus = trial.space.is_bounded() ? het_bounds_bounded(trial).interval.upper
                                           : het_bounds_general(trial).interval.upper;
  double delta = trial.treatment.mean - trial.control.mean;
  return 0.5 * std::sqrt(b_plus + delta * delta);
}

namespace detail {

struct StratifiedCore {
  StratifiedSummary norm;
  std::vector<double> probs;  // renormalized
  double mu_c_norm = 0.0;
  double mu_t_norm = 0.0;
  bool treatment_is_single_best = true;
  bool renormalized = false;
};

inline StratifiedCore stratified_core(const StratifiedSummary& summary) {
  if (summary.strata.empty()) throw DomainError("stratified summary has no strata");
  StratifiedCore core;
  core.norm = normalize_direction(summary);
  double total = 0.0;
  for (const auto& s : core.norm.strata) {
    if (!(s.prob > 0.0) || !std::isfinite(s.prob))
      throw DomainError("stratum probabilities must be positive");
    total += s.prob;
  }
  core.renormalized = std::fabs(total - 1.0) > 1e-6;
  double agg0 = 0.0, agg1 = 0.0;
  for (const auto& s : core.norm.strata) {
    double pr = s.prob / total;
    core.probs.push_back(pr);
    core.mu_c_norm += pr * std::max(s.control.mean, s.treatment.mean);
    agg0 += pr * s.control.mean;
    agg1 += pr * s.treatment.mean;
  }
  core.mu_t_norm = std::max(agg0, agg1);
  core.treatment_is_single_best = agg1 >= agg0;
  return core;
}

inline double to_original_scale(double value_norm, const StratifiedSummary& original) {
  if (original.direction != Direction::LowerBetter) return value_norm;
  if (original.space.is_bounded())
    return (original.space.range_min() + original.space.range_max()) - value_norm;
  return -value_norm;
}

}  // namespace detail

// stratum-wise rule value minus best single arm, plus per-stratum joint-distribution bounds
inline BenefitBound benefit_bounds_stratified(const StratifiedSummary& summary,
                                              double relax_eps = 0.0) {
  if (!summary.space.is_finite())
    throw UnsupportedSpace("joint-distribution bounds require a finite outcome support");
  {
    auto diags = validate(summary);
    detail::require_valid_for_lp(diags);
  }
  detail::StratifiedCore core = detail::stratified_core(summary);

  BenefitBound out;
  if (core.renormalized) out.notes.push_back("stratum probabilities renormalized");

  double within_lo = 0.0, within_hi = 0.0;
  for (std::size_t i = 0; i < core.norm.strata.size(); ++i) {
    const Stratum& s = core.norm.strata[i];
    TrialSummary sub;
    sub.control = s.control;
    sub.treatment = s.treatment;
    sub.space = core.norm.space;
    sub.direction = core.norm.direction;
    try {
      LpSolution lo = solve(build_benefit_lp(sub, LinearProgram::Sense::Minimize, relax_eps));
      LpSolution hi = solve(build_benefit_lp(sub, LinearProgram::Sense::Maximize, relax_eps));
      if (lo.status == LpSolution::Status::Infeasible ||
          hi.status == LpSolution::Status::Infeasible)
        throw InfeasibleSummaries("no joint distribution matches the stratum moments");
      if (lo.status != LpSolution::Status::Optimal || hi.status != LpSolution::Status::Optimal)
        throw Error("stratum bound did not reach an optimum");
      within_lo += core.probs[i] * std::max(0.0, lo.value);
      within_hi += core.probs[i] * std::max(0.0, hi.value);
    } catch (const InfeasibleSummaries& e) {
      throw InfeasibleSummaries("stratum '" + s.label + "': " + e.what());
    } catch (const MaxIterationsExceeded& e) {
      throw MaxIterationsExceeded("stratum '" + s.label + "': " + e.what());
    }
  }

  double base = core.mu_c_norm - core.mu_t_norm;
  double lower = std::max(0.0, base + within_lo);
  double upper = std::max(lower, base + within_hi);
  out.interval = {lower, upper, "benefit-stratified-lp", "outcome"};
  out.method = BenefitMethod::StratifiedLp;
  out.mu_T = detail::to_original_scale(core.mu_t_norm, summary);
  out.mu_C = detail::to_original_scale(core.mu_c_norm, summary);
  out.notes.push_back(core.treatment_is_single_best ? "preferred single arm: treatment"
                                                    : "preferred single arm: control");
  if (summary.direction == Direction::LowerBetter)
    out.notes.push_back("outcomes reflected internally so that larger is better");
  return out;
}

inline double benefit_upper_closed_stratified(const StratifiedSummary& summary) {
  detail::StratifiedCore core = detail::stratified_core(summary);
  double within = 0.0;
  for (std::size_t i = 0; i < core.norm.strata.size(); ++i) {
    const Stratum& s = core.norm.strata[i];
    TrialSummary sub;
    sub.control = s.control;
    sub.treatment = s.treatment;
    sub.space = core.norm.space;
    sub.direction = core.norm.direction;
    double b_plus;
    try {
      b_plus = sub.space.is_bounded() ? het_bounds_bounded(sub).interval.upper
                                      : het_bounds_general(sub).interval.upper;
    } catch (const Error& e) {
      throw Error("stratum '" + s.label + "': " + e.what());
    }
    double delta = s.treatment.mean - s.control.mean;
    within += core.probs[i] * 0.5 * std::sqrt(b_plus + delta * delta);
  }
  return (core.mu_c_norm - core.mu_t_norm) + within;
}

}  // namespace otr
