#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace otr {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// var(Y^control) = 0 while var(Y^treatment) > 0: the variance-ratio bound is undefined
struct ZeroControlVariance : Error {
  using Error::Error;
};

// operation requires a different outcome-space kind than the one supplied
struct UnsupportedSpace : Error {
  using Error::Error;
};

// summary moments admit no distribution on the declared space
struct InfeasibleSummaries : Error {
  using Error::Error;
};

// exact-moment mode requested without the higher moments present
struct MissingMoments : Error {
  using Error::Error;
};

struct DegenerateDenominator : Error {
  using Error::Error;
};

// the sampling-uncertainty-widened polytope is empty
struct InfeasibleWidenedLp : Error {
  using Error::Error;
};

struct MaxIterationsExceeded : Error {
  using Error::Error;
};

struct DimensionTooLarge : Error {
  using Error::Error;
};

struct DomainError : Error {
  using Error::Error;
};

struct ParseError : Error {
  using Error::Error;
};

enum class Direction { HigherBetter, LowerBetter };

struct ArmSummary {
  long n = 0;
  double mean = 0.0;
  double variance = 0.0;
};

class OutcomeSpace {
 public:
  enum class Kind { Unbounded, BoundedRange, FiniteSupport, Binary };

  static OutcomeSpace unbounded() { return OutcomeSpace(Kind::Unbounded, 0.0, 0.0, {}); }

  static OutcomeSpace bounded_range(double lo, double hi) {
    if (!(std::isfinite(lo) && std::isfinite(hi)))
      throw std::invalid_argument("outcome range limits must be finite");
    if (!(lo < hi)) throw std::invalid_argument("outcome range requires min < max");
    return OutcomeSpace(Kind::BoundedRange, lo, hi, {});
  }

  static OutcomeSpace finite_support(std::vector<double> values) {
    if (values.size() < 2) throw std::invalid_argument("finite support needs at least 2 values");
    for (double v : values)
      if (!std::isfinite(v)) throw std::invalid_argument("finite support values must be finite");
    for (std::size_t i = 1; i < values.size(); ++i)
      if (!(values[i - 1] < values[i]))
        throw std::invalid_argument("finite support values must be strictly increasing");
    double lo = values.front(), hi = values.back();
    return OutcomeSpace(Kind::FiniteSupport, lo, hi, std::move(values));
  }

  static OutcomeSpace binary() { return OutcomeSpace(Kind::Binary, 0.0, 1.0, {0.0, 1.0}); }

  Kind kind() const { return kind_; }
  bool is_bounded() const { return kind_ != Kind::Unbounded; }
  bool is_finite() const { return kind_ == Kind::FiniteSupport || kind_ == Kind::Binary; }

  bool is_binary() const {
    if (kind_ == Kind::Binary) return true;
    return kind_ == Kind::FiniteSupport && values_.size() == 2 && values_[0] == 0.0 &&
           values_[1] == 1.0;
  }

  double range_min() const {
    require_bounded();
    return min_;
  }
  double range_max() const {
    require_bounded();
    return max_;
  }

  const std::vector<double>& values() const {
    if (!is_finite()) throw UnsupportedSpace("outcome space has no finite support list");
    return values_;
  }

 private:
  OutcomeSpace(Kind k, double lo, double hi, std::vector<double> vals)
      : kind_(k), min_(lo), max_(hi), values_(std::move(vals)) {}

  void require_bounded() const {
    if (!is_bounded()) throw UnsupportedSpace("outcome space is unbounded");
  }

  Kind kind_;
  double min_;
  double max_;
  std::vector<double> values_;
};

struct TrialSummary {
  ArmSummary control;    // arm 0
  ArmSummary treatment;  // arm 1
  OutcomeSpace space = OutcomeSpace::unbounded();
  Direction direction = Direction::HigherBetter;
  bool reflected = false;  // set when means/support were mapped through y -> (max+min)-y or y -> -y
};

struct Stratum {
  std::string label;
  double prob = 0.0;
  ArmSummary control;
  ArmSummary treatment;
};

struct StratifiedSummary {
  std::vector<Stratum> strata;
  OutcomeSpace space = OutcomeSpace::unbounded();
  Direction direction = Direction::HigherBetter;
  bool reflected = false;
};

// [lower, upper] with provenance; lower <= upper + slack enforced by producers
struct Interval {
  double lower = 0.0;
  double upper = 0.0;
  std::string method;
  std::string units = "outcome";
};

inline constexpr double kIntervalSlack = 1e-12;

struct Diagnostic {
  enum class Severity { Warning, Error };
  Severity severity = Severity::Warning;
  std::string message;
};

namespace detail {

inline std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

// largest admissible variance for a mean on [lo, hi]
inline double bhatia_davis_cap(double mean, double lo, double hi) {
  return (hi - mean) * (mean - lo);
}

inline bool variance_consistent(double mean, double variance, double lo, double hi) {
  double cap = bhatia_davis_cap(mean, lo, hi);
  return variance <= cap + 1e-9 * std::max(1.0, std::fabs(cap));
}

inline void check_arm(const ArmSummary& arm, const OutcomeSpace& space, const std::string& who,
                      std::vector<Diagnostic>& out) {
  if (arm.n < 2)
    out.push_back({Diagnostic::Severity::Error, who + ": sample size must be at least 2"});
  if (!std::isfinite(arm.mean))
    out.push_back({Diagnostic::Severity::Error, who + ": mean must be finite"});
  if (!(arm.variance >= 0.0) || !std::isfinite(arm.variance))
    out.push_back({Diagnostic::Severity::Error, who + ": variance must be a finite nonnegative number"});
  if (space.is_bounded() && std::isfinite(arm.mean)) {
    double lo = space.range_min(), hi = space.range_max();
    if (arm.mean < lo || arm.mean > hi) {
      out.push_back({Diagnostic::Severity::Error,
                     who + ": mean " + num(arm.mean) + " lies outside the outcome range [" +
                         num(lo) + ", " + num(hi) + "]"});
    } else if (std::isfinite(arm.variance) && arm.variance >= 0.0 &&
               !variance_consistent(arm.mean, arm.variance, lo, hi)) {
      out.push_back({Diagnostic::Severity::Error,
                     who + ": variance " + num(arm.variance) +
                         " exceeds the largest value compatible with mean " + num(arm.mean) +
                         " on [" + num(lo) + ", " + num(hi) + "] (" +
                         num(bhatia_davis_cap(arm.mean, lo, hi)) + ")"});
    }
  }
}

}  // namespace detail

inline std::vector<Diagnostic> validate(const TrialSummary& trial) {
  std::vector<Diagnostic> out;
  detail::check_arm(trial.control, trial.space, "control arm", out);
  detail::check_arm(trial.treatment, trial.space, "treatment arm", out);
  return out;
}

inline std::vector<Diagnostic> validate(const StratifiedSummary& summary) {
  std::vector<Diagnostic> out;
  if (summary.strata.empty()) {
    out.push_back({Diagnostic::Severity::Error, "stratified summary has no strata"});
    return out;
  }
  if (summary.strata.size() < 2)
    out.push_back({Diagnostic::Severity::Warning,
                   "only one stratum supplied; results reduce to the unstratified analysis"});
  double total = 0.0;
  for (std::size_t i = 0; i < summary.strata.size(); ++i) {
    const Stratum& s = summary.strata[i];
    std::string who = "stratum '" + s.label + "'";
    if (!(s.prob > 0.0) || s.prob > 1.0 || !std::isfinite(s.prob))
      out.push_back({Diagnostic::Severity::Error, who + ": probability must lie in (0, 1]"});
    else
      total += s.prob;
    detail::check_arm(s.control, summary.space, who + " control arm", out);
    detail::check_arm(s.treatment, summary.space, who + " treatment arm", out);
  }
  if (std::fabs(total - 1.0) > 1e-6)
    out.push_back({Diagnostic::Severity::Warning,
                   "stratum probabilities sum to " + detail::num(total) +
                       "; renormalizing to 1"});
  return out;
}

inline bool has_errors(const std::vector<Diagnostic>& diags) {
  return std::any_of(diags.begin(), diags.end(), [](const Diagnostic& d) {
    return d.severity == Diagnostic::Severity::Error;
  });
}

namespace detail {

inline ArmSummary reflect_arm(const ArmSummary& arm, const OutcomeSpace& space) {
  ArmSummary out = arm;
  if (space.is_bounded())
    out.mean = (space.range_min() + space.range_max()) - arm.mean;
  else
    out.mean = -arm.mean;
  return out;  // variance is invariant under the affine map
}

inline OutcomeSpace reflect_space(const OutcomeSpace& space) {
  switch (space.kind()) {
    case OutcomeSpace::Kind::Unbounded:
      return OutcomeSpace::unbounded();
    case OutcomeSpace::Kind::Binary:
      return OutcomeSpace::binary();
    case OutcomeSpace::Kind::BoundedRange:
      // [lo, hi] maps onto itself
      return OutcomeSpace::bounded_range(space.range_min(), space.range_max());
    case OutcomeSpace::Kind::FiniteSupport: {
      double s = space.range_min() + space.range_max();
      std::vector<double> vals;
      vals.reserve(space.values().size());
      for (auto it = space.values().rbegin(); it != space.values().rend(); ++it)
        vals.push_back(s - *it);
      return OutcomeSpace::finite_support(std::move(vals));
    }
  }
  throw Error("unreachable outcome-space kind");
}

}  // namespace detail

// flips the preference direction via y -> (max+min)-y (bounded) or y -> -y (unbounded)
inline TrialSummary reflect(const TrialSummary& trial) {
  TrialSummary out = trial;
  out.space = detail::reflect_space(trial.space);
  out.control = detail::reflect_arm(trial.control, trial.space);
  out.treatment = detail::reflect_arm(trial.treatment, trial.space);
  out.direction = trial.direction == Direction::HigherBetter ? Direction::LowerBetter
                                                             : Direction::HigherBetter;
  out.reflected = !trial.reflected;
  return out;
}

inline StratifiedSummary reflect(const StratifiedSummary& summary) {
  StratifiedSummary out = summary;
  out.space = detail::reflect_space(summary.space);
  for (std::size_t i = 0; i < summary.strata.size(); ++i) {
    out.strata[i].control = detail::reflect_arm(summary.strata[i].control, summary.space);
    out.strata[i].treatment = detail::reflect_arm(summary.strata[i].treatment, summary.space);
  }
  out.direction = summary.direction == Direction::HigherBetter ? Direction::LowerBetter
                                                               : Direction::HigherBetter;
  out.reflected = !summary.reflected;
  return out;
}

// returns an equivalent summary in which larger outcomes are better
inline TrialSummary normalize_direction(const TrialSummary& trial) {
  return trial.direction == Direction::HigherBetter ? trial : reflect(trial);
}

inline StratifiedSummary normalize_direction(const StratifiedSummary& summary) {
  return summary.direction == Direction::HigherBetter ? summary : reflect(summary);
}

}  // namespace otr
