#include <cmath>
#include <vector>

#include "doctest.h"
#include "otrbounds/core.hpp"
#include "otrbounds/validation.hpp"

using namespace otr;

namespace {

TrialSummary depression_trial() {
  std::vector<double> support;
  for (int v = 0; v <= 52; ++v) support.push_back(v);
  TrialSummary t;
  t.space = OutcomeSpace::finite_support(support);
  t.direction = Direction::LowerBetter;
  t.control = {123, 11.94, 56.5504};
  t.treatment = {115, 10.73, 42.6409};
  return t;
}

}  // namespace

TEST_CASE("outcome space factories enforce their invariants") {
  CHECK_THROWS_AS(OutcomeSpace::bounded_range(2.0, 2.0), std::invalid_argument);
  CHECK_THROWS_AS(OutcomeSpace::bounded_range(3.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(OutcomeSpace::bounded_range(0.0, std::numeric_limits<double>::infinity()),
                  std::invalid_argument);
  CHECK_THROWS_AS(OutcomeSpace::finite_support({1.0}), std::invalid_argument);
  CHECK_THROWS_AS(OutcomeSpace::finite_support({1.0, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(OutcomeSpace::finite_support({2.0, 1.0}), std::invalid_argument);

  OutcomeSpace r = OutcomeSpace::bounded_range(-1.0, 3.0);
  CHECK(r.is_bounded());
  CHECK_FALSE(r.is_finite());
  CHECK(r.range_min() == -1.0);
  CHECK(r.range_max() == 3.0);
  CHECK_THROWS_AS(r.values(), UnsupportedSpace);

  OutcomeSpace u = OutcomeSpace::unbounded();
  CHECK_FALSE(u.is_bounded());
  CHECK_THROWS_AS(u.range_min(), UnsupportedSpace);

  CHECK(OutcomeSpace::binary().is_binary());
  CHECK(OutcomeSpace::finite_support({0.0, 1.0}).is_binary());
  CHECK_FALSE(OutcomeSpace::finite_support({0.0, 2.0}).is_binary());
  CHECK(OutcomeSpace::binary().values() == std::vector<double>{0.0, 1.0});
}

TEST_CASE("normalizing a lower-is-better trial reflects means across the range midpoint") {
  TrialSummary norm = normalize_direction(depression_trial());
  CHECK(norm.direction == Direction::HigherBetter);
  CHECK(norm.reflected);
  CHECK(std::fabs(norm.treatment.mean - 41.27) < 1e-9);
  CHECK(std::fabs(norm.control.mean - 40.06) < 1e-9);
  CHECK(norm.treatment.variance == 42.6409);  // variance invariant under reflection
  CHECK(norm.control.variance == 56.5504);
  CHECK(norm.space.range_min() == 0.0);
  CHECK(norm.space.range_max() == 52.0);
  CHECK(norm.space.values().size() == 53);

  TrialSummary already = normalize_direction(norm);
  CHECK(already.treatment.mean == norm.treatment.mean);  // no-op on normalized input
}

TEST_CASE("reflection is an involution, exactly for integer data") {
  TrialSummary t = depression_trial();
  t.control.mean = 12.0;
  t.treatment.mean = 10.0;
  TrialSummary back = reflect(reflect(t));
  CHECK(back.control.mean == 12.0);
  CHECK(back.treatment.mean == 10.0);
  CHECK(back.direction == t.direction);
  CHECK(back.reflected == t.reflected);
  CHECK(back.space.values() == t.space.values());
}

TEST_CASE("double reflection returns the mean to within rounding noise") {
  SplitMix64 rng(20240817);
  for (int rep = 0; rep < 50; ++rep) {
    double lo = rng.uniform(-10.0, 5.0);
    double hi = lo + rng.uniform(0.5, 40.0);
    TrialSummary t;
    t.space = OutcomeSpace::bounded_range(lo, hi);
    t.control = {10, rng.uniform(lo, hi), 1.0};
    t.treatment = {10, rng.uniform(lo, hi), 2.0};
    TrialSummary back = reflect(reflect(t));
    double scale = std::max({1.0, std::fabs(lo + hi), std::fabs(t.control.mean)});
    CHECK(std::fabs(back.control.mean - t.control.mean) <= 1e-12 * scale);
    CHECK(std::fabs(back.treatment.mean - t.treatment.mean) <= 1e-12 * scale);
    CHECK(back.control.variance == t.control.variance);
  }
}

TEST_CASE("reflection on an unbounded space negates means exactly") {
  TrialSummary t;
  t.control = {5, 1.37, 2.0};
  t.treatment = {5, -0.25, 3.0};
  t.direction = Direction::LowerBetter;
  TrialSummary r = reflect(t);
  CHECK(r.control.mean == -1.37);
  CHECK(r.treatment.mean == 0.25);
  TrialSummary back = reflect(r);
  CHECK(back.control.mean == t.control.mean);
  CHECK(back.treatment.mean == t.treatment.mean);
}

TEST_CASE("validate accepts consistent summaries") {
  CHECK(validate(depression_trial()).empty());

  TrialSummary b;
  b.space = OutcomeSpace::binary();
  b.control = {100, 0.5, 0.25};  // variance exactly at the admissible cap
  b.treatment = {100, 0.3, 0.21};
  CHECK(validate(b).empty());
}

TEST_CASE("validate flags structural problems as errors") {
  TrialSummary t = depression_trial();

  t.control.n = 1;
  auto d1 = validate(t);
  REQUIRE(d1.size() == 1);
  CHECK(d1[0].severity == Diagnostic::Severity::Error);
  CHECK(has_errors(d1));

  t = depression_trial();
  t.treatment.mean = 60.0;  // outside [0, 52]
  CHECK(has_errors(validate(t)));

  t = depression_trial();
  t.control.variance = 700.0;  // above (52-11.94)*11.94
  CHECK(has_errors(validate(t)));

  t = depression_trial();
  t.control.variance = -1.0;
  CHECK(has_errors(validate(t)));

  t = depression_trial();
  t.treatment.mean = std::numeric_limits<double>::quiet_NaN();
  CHECK(has_errors(validate(t)));
}

TEST_CASE("stratified validation covers strata-specific rules") {
  StratifiedSummary s;
  s.space = OutcomeSpace::finite_support({0, 1, 2, 3, 4, 5});
  CHECK(has_errors(validate(s)));  // no strata

  Stratum a{"A", 0.5, {50, 2.0, 1.0}, {50, 3.0, 1.0}};
  Stratum b{"B", 0.5, {50, 2.5, 1.0}, {50, 2.5, 2.0}};
  s.strata = {a, b};
  CHECK(validate(s).empty());

  StratifiedSummary one = s;
  one.strata = {a};
  auto d = validate(one);
  REQUIRE(d.size() == 2);  // single-stratum warning + probability-sum warning
  CHECK_FALSE(has_errors(d));

  StratifiedSummary bad = s;
  bad.strata[0].prob = 0.0;
  CHECK(has_errors(validate(bad)));

  StratifiedSummary off = s;
  off.strata[0].prob = 0.3;  // sums to 0.8
  auto dw = validate(off);
  CHECK_FALSE(has_errors(dw));
  REQUIRE(dw.size() == 1);
  CHECK(dw[0].severity == Diagnostic::Severity::Warning);

  StratifiedSummary armbad = s;
  armbad.strata[1].treatment.mean = 9.0;  // outside [0, 5]
  CHECK(has_errors(validate(armbad)));
}
