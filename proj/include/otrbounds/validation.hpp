#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "otrbounds/benefit.hpp"
#include "otrbounds/core.hpp"
#include "otrbounds/lp.hpp"

namespace otr {

// splitmix64: tiny, seedable, identical output on every platform
struct SplitMix64 {
  std::uint64_t state;

  explicit SplitMix64(std::uint64_t seed) : state(seed) {}

  std::uint64_t next() {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }  // [0, 1)

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  std::size_t below(std::size_t n) {
    return static_cast<std::size_t>((static_cast<unsigned __int128>(next()) * n) >> 64);
  }
};

// pmf over (Y^control, Y^treatment) pairs; probs is row-major support0 x support1
struct JointDistribution {
  std::vector<double> support0;
  std::vector<double> support1;
  std::vector<double> probs;

  double mean0() const {
    double s = 0.0;
    for (std::size_t i = 0; i < support0.size(); ++i)
      for (std::size_t j = 0; j < support1.size(); ++j)
        s += probs[i * support1.size() + j] * support0[i];
    return s;
  }
  double mean1() const {
    double s = 0.0;
    for (std::size_t i = 0; i < support0.size(); ++i)
      for (std::size_t j = 0; j < support1.size(); ++j)
        s += probs[i * support1.size() + j] * support1[j];
    return s;
  }
  double second0() const {
    double s = 0.0;
    for (std::size_t i = 0; i < support0.size(); ++i)
      for (std::size_t j = 0; j < support1.size(); ++j)
        s += probs[i * support1.size() + j] * support0[i] * support0[i];
    return s;
  }
  double second1() const {
    double s = 0.0;
    for (std::size_t i = 0; i < support0.size(); ++i)
      for (std::size_t j = 0; j < support1.size(); ++j)
        s += probs[i * support1.size() + j] * support1[j] * support1[j];
    return s;
  }
};

// E max(Y^0, Y^1) - max(E Y^0, E Y^1) for a fully known joint
inline double benefit_of(const JointDistribution& joint) {
  double emax = 0.0;
  for (std::size_t i = 0; i < joint.support0.size(); ++i)
    for (std::size_t j = 0; j < joint.support1.size(); ++j)
      emax += joint.probs[i * joint.support1.size() + j] *
              std::max(joint.support0[i], joint.support1[j]);
  return emax - std::max(joint.mean0(), joint.mean1());
}

// joints matching the trial's means and variances, found by optimizing random directions over
// the moment polytope and mixing the resulting vertices; bit-reproducible for a given seed
inline std::vector<JointDistribution> sample_feasible_joints(const TrialSummary& trial,
                                                             std::size_t count,
                                                             std::uint64_t seed) {
  if (!trial.space.is_finite())
    throw UnsupportedSpace("joint sampling requires a finite outcome support");
  detail::require_valid_for_lp(validate(trial));
  if (count == 0) return {};

  TrialSummary norm = normalize_direction(trial);
  const std::vector<double>& y = norm.space.values();
  const std::size_t k = y.size();
  detail::ArmRoles roles = detail::assign_roles(norm);
  const bool reflected = trial.direction == Direction::LowerBetter;
  const std::vector<double>& y_orig = trial.space.values();

  LinearProgram lp = build_benefit_lp(norm, LinearProgram::Sense::Maximize);
  SplitMix64 rng(seed);

  // vertex layout: p[r*k + j] with r = worse-arm index, j = better-arm index
  std::vector<std::vector<double>> vertices;
  std::size_t num_vertices = std::min<std::size_t>(count, 16);
  for (std::size_t v = 0; v < num_vertices; ++v) {
    for (double& c : lp.objective) c = rng.uniform(-1.0, 1.0);
    LpSolution sol = solve(lp);
    if (sol.status == LpSolution::Status::Infeasible)
      throw InfeasibleSummaries(
          "no joint outcome distribution matches the supplied means and variances on the "
          "declared support");
    if (sol.status != LpSolution::Status::Optimal)
      throw Error("joint sampling optimization did not reach a vertex");
    vertices.push_back(std::move(sol.point));
  }

  std::vector<JointDistribution> out;
  out.reserve(count);
  std::vector<double> mix(k * k, 0.0);
  for (std::size_t idx = 0; idx < count; ++idx) {
    const std::vector<double>* p = nullptr;
    if (idx < vertices.size()) {
      p = &vertices[idx];
    } else {
      const std::vector<double>& a = vertices[rng.below(vertices.size())];
      const std::vector<double>& b = vertices[rng.below(vertices.size())];
      double w = rng.uniform();
      for (std::size_t i = 0; i < k * k; ++i) mix[i] = w * a[i] + (1.0 - w) * b[i];
      p = &mix;
    }

    JointDistribution joint;
    joint.support0 = y_orig;
    joint.support1 = y_orig;
    joint.probs.assign(k * k, 0.0);
    for (std::size_t i0 = 0; i0 < k; ++i0) {
      for (std::size_t i1 = 0; i1 < k; ++i1) {
        // normalized-scale indices for (control, treatment)
        std::size_t n0 = reflected ? k - 1 - i0 : i0;
        std::size_t n1 = reflected ? k - 1 - i1 : i1;
        double pr = roles.treatment_is_better ? (*p)[n0 * k + n1] : (*p)[n1 * k + n0];
        joint.probs[i0 * k + i1] = std::max(0.0, pr);
      }
    }

    // certify against the original summary
    double tol = 1e-8;
    double mass = 0.0;
    for (double pr : joint.probs) mass += pr;
    if (std::fabs(mass - 1.0) > tol ||
        std::fabs(joint.mean0() - trial.control.mean) > tol ||
        std::fabs(joint.mean1() - trial.treatment.mean) > tol ||
        std::fabs(joint.second0() - detail::second_moment(trial.control)) > tol ||
        std::fabs(joint.second1() - detail::second_moment(trial.treatment)) > tol)
      throw Error("sampled joint failed moment certification");
    out.push_back(std::move(joint));
  }
  return out;
}

// binary outcomes: one free parameter, the both-success probability; scan its full range
inline Interval brute_force_benefit_bounds(const TrialSummary& trial, std::size_t grid_points) {
  if (!trial.space.is_binary())
    throw UnsupportedSpace("brute-force scan is implemented for binary outcomes only");
  if (grid_points < 100) throw std::invalid_argument("grid must have at least 100 points");
  detail::require_valid_for_lp(validate(trial));

  TrialSummary norm = normalize_direction(trial);
  double p0 = norm.control.mean;
  double p1 = norm.treatment.mean;
  auto forced = [](double p) { return p * (1.0 - p); };
  if (std::fabs(norm.control.variance - forced(p0)) > 1e-9 * std::max(1.0, forced(p0)) ||
      std::fabs(norm.treatment.variance - forced(p1)) > 1e-9 * std::max(1.0, forced(p1)))
    throw InfeasibleSummaries("binary variance must equal mean * (1 - mean)");

  double lo_t = std::max(0.0, p0 + p1 - 1.0);
  double hi_t = std::min(p0, p1);
  double base = std::max(p0, p1);
  double best_lo = std::numeric_limits<double>::infinity();
  double best_hi = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid_points; ++i) {
    double t = lo_t + (hi_t - lo_t) * static_cast<double>(i) / static_cast<double>(grid_points - 1);
    // E max(Y0, Y1) = P(Y0=1 or Y1=1) = p0 + p1 - t
    double benefit = p0 + p1 - t - base;
    best_lo = std::min(best_lo, benefit);
    best_hi = std::max(best_hi, benefit);
  }
  best_lo = std::max(0.0, best_lo);
  best_hi = std::max(best_lo, best_hi);
  return {best_lo, best_hi, "benefit-brute-force", "outcome"};
}

}  // namespace otr
