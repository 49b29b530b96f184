#pragma once

#include <cstdio>
#include <ctime>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "otrbounds/benefit.hpp"
#include "otrbounds/core.hpp"
#include "otrbounds/heterogeneity.hpp"
#include "otrbounds/inference.hpp"
#include "otrbounds/lp.hpp"

namespace otr {

inline constexpr const char* kToolName = "otr-bounds";
inline constexpr const char* kToolVersion = "0.1.0";

struct AnalysisOptions {
  double alpha = 0.05;
  double relax_eps = 0.0;
  MeanSeConvention mean_se = MeanSeConvention::Standard;
  enum class VarianceConvention { Sample, Population } variance_convention =
      VarianceConvention::Sample;
  enum class Format { Text, Machine } format = Format::Text;
};

struct StudyInput {
  std::optional<TrialSummary> trial;
  std::optional<StratifiedSummary> stratified;
  AnalysisOptions options;
  std::vector<std::string> warnings;

  bool is_stratified() const { return stratified.has_value(); }
};

namespace detail_io {

using nlohmann::json;

inline std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

[[noreturn]] inline void fail(const std::string& path, const std::string& what) {
  throw ParseError(path + ": " + what);
}

inline void reject_unknown(const json& obj, const std::string& path,
                           std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        known = true;
        break;
      }
    if (!known) fail(path.empty() ? it.key() : path + "." + it.key(), "unknown field");
  }
}

inline const json& require(const json& obj, const std::string& path, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) fail(path.empty() ? key : path + "." + key, "required field is missing");
  return *it;
}

inline double require_number(const json& v, const std::string& path) {
  if (!v.is_number()) fail(path, "must be a number");
  double x = v.get<double>();
  if (!std::isfinite(x)) fail(path, "must be finite");
  return x;
}

inline long require_count(const json& v, const std::string& path) {
  if (!v.is_number_integer()) fail(path, "must be an integer");
  long n = v.get<long>();
  if (n < 2) fail(path, "must be an integer >= 2");
  return n;
}

inline std::string require_string(const json& v, const std::string& path) {
  if (!v.is_string()) fail(path, "must be a string");
  return v.get<std::string>();
}

inline ArmSummary parse_arm(const json& v, const std::string& path) {
  if (!v.is_object()) fail(path, "must be an object with n, mean, variance");
  reject_unknown(v, path, {"n", "mean", "variance"});
  ArmSummary arm;
  arm.n = require_count(require(v, path, "n"), path + ".n");
  arm.mean = require_number(require(v, path, "mean"), path + ".mean");
  arm.variance = require_number(require(v, path, "variance"), path + ".variance");
  if (arm.variance < 0.0) fail(path + ".variance", "must be >= 0");
  return arm;
}

inline OutcomeSpace parse_space(const json& v) {
  const std::string path = "outcome_space";
  if (!v.is_object()) fail(path, "must be an object with a 'type' field");
  std::string type = require_string(require(v, path, "type"), path + ".type");
  try {
    if (type == "unbounded") {
      reject_unknown(v, path, {"type"});
      return OutcomeSpace::unbounded();
    }
    if (type == "binary") {
      reject_unknown(v, path, {"type"});
      return OutcomeSpace::binary();
    }
    if (type == "range") {
      reject_unknown(v, path, {"type", "min", "max"});
      double lo = require_number(require(v, path, "min"), path + ".min");
      double hi = require_number(require(v, path, "max"), path + ".max");
      return OutcomeSpace::bounded_range(lo, hi);
    }
    if (type == "finite") {
      reject_unknown(v, path, {"type", "values"});
      const json& vals = require(v, path, "values");
      if (!vals.is_array()) fail(path + ".values", "must be an array of numbers");
      std::vector<double> values;
      for (std::size_t i = 0; i < vals.size(); ++i)
        values.push_back(
            require_number(vals[i], path + ".values[" + std::to_string(i) + "]"));
      return OutcomeSpace::finite_support(std::move(values));
    }
  } catch (const std::invalid_argument& e) {
    fail(path, e.what());
  }
  fail(path + ".type", "must be one of unbounded, range, finite, binary");
}

inline void parse_options(const json& v, AnalysisOptions& opts) {
  const std::string path = "options";
  if (!v.is_object()) fail(path, "must be an object");
  reject_unknown(v, path,
                 {"alpha", "relax_eps", "mean_se_convention", "variance_convention", "format"});
  if (v.contains("alpha")) {
    opts.alpha = require_number(v["alpha"], path + ".alpha");
    if (!(opts.alpha > 0.0 && opts.alpha < 1.0)) fail(path + ".alpha", "must lie in (0, 1)");
  }
  if (v.contains("relax_eps")) {
    opts.relax_eps = require_number(v["relax_eps"], path + ".relax_eps");
    if (opts.relax_eps < 0.0) fail(path + ".relax_eps", "must be >= 0");
  }
  if (v.contains("mean_se_convention")) {
    std::string s = require_string(v["mean_se_convention"], path + ".mean_se_convention");
    if (s == "as-printed")
      opts.mean_se = MeanSeConvention::AsPrinted;
    else if (s == "standard")
      opts.mean_se = MeanSeConvention::Standard;
    else
      fail(path + ".mean_se_convention", "must be 'as-printed' or 'standard'");
  }
  if (v.contains("variance_convention")) {
    std::string s = require_string(v["variance_convention"], path + ".variance_convention");
    if (s == "sample")
      opts.variance_convention = AnalysisOptions::VarianceConvention::Sample;
    else if (s == "population")
      opts.variance_convention = AnalysisOptions::VarianceConvention::Population;
    else
      fail(path + ".variance_convention", "must be 'sample' or 'population'");
  }
  if (v.contains("format")) {
    std::string s = require_string(v["format"], path + ".format");
    if (s == "text")
      opts.format = AnalysisOptions::Format::Text;
    else if (s == "machine")
      opts.format = AnalysisOptions::Format::Machine;
    else
      fail(path + ".format", "must be 'text' or 'machine'");
  }
}

}  // namespace detail_io

inline StudyInput parse_study(const std::string& text) {
  using nlohmann::json;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("document is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("document root must be an object");
  detail_io::reject_unknown(doc, "", {"outcome_space", "direction", "arms", "strata", "options"});

  StudyInput study;
  OutcomeSpace space = detail_io::parse_space(detail_io::require(doc, "", "outcome_space"));

  std::string dir =
      detail_io::require_string(detail_io::require(doc, "", "direction"), "direction");
  Direction direction;
  if (dir == "higher_better")
    direction = Direction::HigherBetter;
  else if (dir == "lower_better")
    direction = Direction::LowerBetter;
  else
    detail_io::fail("direction", "must be 'higher_better' or 'lower_better'");

  bool has_arms = doc.contains("arms");
  bool has_strata = doc.contains("strata");
  if (has_arms == has_strata)
    throw ParseError("exactly one of 'arms' or 'strata' must be present");

  if (has_arms) {
    const nlohmann::json& arms = doc["arms"];
    if (!arms.is_object()) detail_io::fail("arms", "must be an object");
    detail_io::reject_unknown(arms, "arms", {"control", "treatment"});
    TrialSummary trial;
    trial.control = detail_io::parse_arm(detail_io::require(arms, "arms", "control"), "arms.control");
    trial.treatment =
        detail_io::parse_arm(detail_io::require(arms, "arms", "treatment"), "arms.treatment");
    trial.space = space;
    trial.direction = direction;
    study.trial = std::move(trial);
  } else {
    const nlohmann::json& strata = doc["strata"];
    if (!strata.is_array() || strata.empty())
      detail_io::fail("strata", "must be a non-empty array");
    StratifiedSummary summary;
    summary.space = space;
    summary.direction = direction;
    double total = 0.0;
    for (std::size_t i = 0; i < strata.size(); ++i) {
      std::string path = "strata[" + std::to_string(i) + "]";
      const nlohmann::json& sv = strata[i];
      if (!sv.is_object()) detail_io::fail(path, "must be an object");
      detail_io::reject_unknown(sv, path, {"label", "prob", "arms"});
      Stratum s;
      s.label = detail_io::require_string(detail_io::require(sv, path, "label"), path + ".label");
      s.prob = detail_io::require_number(detail_io::require(sv, path, "prob"), path + ".prob");
      if (!(s.prob > 0.0 && s.prob <= 1.0)) detail_io::fail(path + ".prob", "must lie in (0, 1]");
      const nlohmann::json& arms = detail_io::require(sv, path, "arms");
      if (!arms.is_object()) detail_io::fail(path + ".arms", "must be an object");
      detail_io::reject_unknown(arms, path + ".arms", {"control", "treatment"});
      s.control = detail_io::parse_arm(detail_io::require(arms, path + ".arms", "control"),
                                       path + ".arms.control");
      s.treatment = detail_io::parse_arm(detail_io::require(arms, path + ".arms", "treatment"),
                                         path + ".arms.treatment");
      total += s.prob;
      summary.strata.push_back(std::move(s));
    }
    if (std::fabs(total - 1.0) > 1e-6)
      study.warnings.push_back("stratum probabilities sum to " + detail_io::fmt6(total) +
                               "; they will be renormalized");
    study.stratified = std::move(summary);
  }

  if (doc.contains("options")) detail_io::parse_options(doc["options"], study.options);
  return study;
}

struct Report {
  std::string human;
  nlohmann::json machine;
};

struct CommandOutcome {
  int exit_code = 0;
  bool machine_format = false;
  Report report;
};

struct CommandRequest {
  std::string subcommand;
  std::string input_text;  // unused by selfcheck
  std::string input_name;
  std::optional<double> alpha;
  std::optional<double> relax_eps;
  std::optional<MeanSeConvention> mean_se;
  std::optional<AnalysisOptions::VarianceConvention> variance_convention;
  std::optional<AnalysisOptions::Format> format;
  bool with_timestamp = true;
};

namespace detail_io {

inline json space_to_json(const OutcomeSpace& space) {
  switch (space.kind()) {
    case OutcomeSpace::Kind::Unbounded:
      return {{"type", "unbounded"}};
    case OutcomeSpace::Kind::Binary:
      return {{"type", "binary"}};
    case OutcomeSpace::Kind::BoundedRange:
      return {{"type", "range"}, {"min", space.range_min()}, {"max", space.range_max()}};
    case OutcomeSpace::Kind::FiniteSupport:
      return {{"type", "finite"}, {"values", space.values()}};
  }
  return {};
}

inline std::string space_to_text(const OutcomeSpace& space) {
  switch (space.kind()) {
    case OutcomeSpace::Kind::Unbounded:
      return "unbounded real line";
    case OutcomeSpace::Kind::Binary:
      return "binary {0, 1}";
    case OutcomeSpace::Kind::BoundedRange:
      return "interval [" + fmt6(space.range_min()) + ", " + fmt6(space.range_max()) + "]";
    case OutcomeSpace::Kind::FiniteSupport: {
      const auto& v = space.values();
      bool integers = true;
      for (std::size_t i = 0; i < v.size(); ++i)
        if (v[i] != v.front() + static_cast<double>(i)) {
          integers = false;
          break;
        }
      if (integers)
        return "integers " + fmt6(v.front()) + ".." + fmt6(v.back()) + " (" +
               std::to_string(v.size()) + " values)";
      std::string s = "finite support {";
      for (std::size_t i = 0; i < v.size() && i < 6; ++i) {
        if (i) s += ", ";
        s += fmt6(v[i]);
      }
      if (v.size() > 6) s += ", ...";
      s += "} (" + std::to_string(v.size()) + " values)";
      return s;
    }
  }
  return "";
}

inline json arm_to_json(const ArmSummary& arm) {
  return {{"n", arm.n}, {"mean", arm.mean}, {"variance", arm.variance}};
}

inline std::string arm_to_text(const ArmSummary& arm) {
  return "n=" + std::to_string(arm.n) + " mean=" + fmt6(arm.mean) +
         " variance=" + fmt6(arm.variance);
}

inline json interval_to_json(const Interval& iv) {
  return {{"lower", iv.lower}, {"upper", iv.upper}, {"method", iv.method}, {"units", iv.units}};
}

inline std::string interval_to_text(const Interval& iv) {
  return "[" + fmt6(iv.lower) + ", " + fmt6(iv.upper) + "]  (" + iv.units + ")";
}

inline json het_to_json(const HeterogeneityBound& b) {
  json j;
  j["interval"] = interval_to_json(b.interval);
  if (b.nu) j["nu"] = *b.nu;
  if (b.s_minus) j["s_minus"] = *b.s_minus;
  if (b.s_plus) j["s_plus"] = *b.s_plus;
  j["binding_lower"] = b.binding_lower;
  j["binding_upper"] = b.binding_upper;
  if (!b.notes.empty()) j["notes"] = b.notes;
  return j;
}

inline json benefit_to_json(const BenefitBound& b) {
  json j;
  j["interval"] = interval_to_json(b.interval);
  j["mu_T"] = b.mu_T;
  if (b.mu_C) j["mu_C"] = *b.mu_C;
  if (!b.notes.empty()) j["notes"] = b.notes;
  return j;
}

inline json ci_to_json(const CiReport& r) {
  json j;
  j["interval"] = interval_to_json(r.interval);
  j["alpha"] = r.alpha;
  j["mode"] = r.mode;
  json d = json::object();
  for (const auto& [k, v] : r.details) d[k] = v;
  j["details"] = d;
  if (!r.notes.empty()) j["notes"] = r.notes;
  return j;
}

inline std::string options_to_text(const AnalysisOptions& o) {
  std::string s = "alpha=" + fmt6(o.alpha) + " relax_eps=" + fmt6(o.relax_eps) + " mean_se=";
  s += o.mean_se == MeanSeConvention::AsPrinted ? "as-printed" : "standard";
  s += " variance_convention=";
  s += o.variance_convention == AnalysisOptions::VarianceConvention::Sample ? "sample"
                                                                            : "population";
  return s;
}

inline json options_to_json(const AnalysisOptions& o) {
  return {{"alpha", o.alpha},
          {"relax_eps", o.relax_eps},
          {"mean_se_convention",
           o.mean_se == MeanSeConvention::AsPrinted ? "as-printed" : "standard"},
          {"variance_convention",
           o.variance_convention == AnalysisOptions::VarianceConvention::Sample ? "sample"
                                                                                : "population"}};
}

inline std::string iso_utc_now() {
  std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace detail_io

namespace detail_io {

struct SelfcheckCase {
  std::string name;
  double value = 0.0;
  double target = 0.0;
  double tol = 0.0;
  bool pass = false;
};

inline TrialSummary embarc_trial(double treatment_mean, double control_mean) {
  std::vector<double> support;
  for (int v = 0; v <= 52; ++v) support.push_back(v);
  TrialSummary t;
  t.space = OutcomeSpace::finite_support(std::move(support));
  t.direction = Direction::LowerBetter;
  t.control = {123, control_mean, 7.52 * 7.52};
  t.treatment = {115, treatment_mean, 6.53 * 6.53};
  return t;
}

inline std::vector<SelfcheckCase> run_selfcheck() {
  std::vector<SelfcheckCase> cases;
  auto check = [&](const std::string& name, double value, double target, double tol) {
    cases.push_back({name, value, target, tol, std::fabs(value - target) <= tol});
  };

  TrialSummary actual = embarc_trial(10.73, 11.94);
  TrialSummary norm = normalize_direction(actual);
  check("reflected treatment mean on 0..52", norm.treatment.mean, 41.27, 1e-9);
  check("reflected control mean on 0..52", norm.control.mean, 40.06, 1e-9);

  BenefitBound lp = benefit_bounds_lp(actual);
  check("benefit bounds, depression trial: lower", lp.interval.lower, 0.0, 1e-9);
  check("benefit bounds, depression trial: upper", lp.interval.upper, 6.43, 0.05);

  CiReport ci = ci_benefit_lp(actual, 0.05, MeanSeConvention::Standard);
  check("benefit 95% interval, depression trial: lower", ci.interval.lower, 0.0, 1e-9);
  check("benefit 95% interval, depression trial: upper", ci.interval.upper, 12.25, 0.15);

  TrialSummary tripled = embarc_trial(11.94 - 3.63, 11.94);
  BenefitBound lp3 = benefit_bounds_lp(tripled);
  check("benefit bounds, tripled effect: upper", lp3.interval.upper, 5.43, 0.05);
  CiReport ci3 = ci_benefit_lp(tripled, 0.05, MeanSeConvention::Standard);
  check("benefit 95% interval, tripled effect: upper", ci3.interval.upper, 9.83, 0.15);

  TrialSummary zero = embarc_trial(11.94, 11.94);
  BenefitBound lp0 = benefit_bounds_lp(zero);
  check("benefit bounds, equal means: lower", lp0.interval.lower, 0.14, 0.05);
  check("benefit bounds, equal means: upper", lp0.interval.upper, 7.01, 0.05);
  CiReport ci0 = ci_benefit_lp(zero, 0.05, MeanSeConvention::Standard);
  check("benefit 95% interval, equal means: upper", ci0.interval.upper, 13.46, 0.15);

  TrialSummary unit;
  unit.space = OutcomeSpace::unbounded();
  unit.control = {100, 0.0, 1.0};
  unit.treatment = {100, 0.0, 1.0};
  DoubletonJoint low = attainment_distribution(unit, AttainmentSide::Lower);
  DoubletonJoint high = attainment_distribution(unit, AttainmentSide::Upper);
  check("matched-pairs construction: smallest effect variance", low.var_delta(), 0.0, 1e-10);
  check("matched-pairs construction: largest effect variance", high.var_delta(), 4.0, 1e-10);

  return cases;
}

}  // namespace detail_io

inline CommandOutcome run(const CommandRequest& req) {
  using nlohmann::json;
  CommandOutcome out;
  json machine;
  machine["tool"] = kToolName;
  machine["version"] = kToolVersion;
  machine["command"] = req.subcommand;
  std::vector<std::string> diagnostics;
  std::vector<std::string> lines;
  lines.push_back(std::string(kToolName) + " " + req.subcommand);
  bool machine_fmt = req.format && *req.format == AnalysisOptions::Format::Machine;

  auto finish = [&](int code) {
    out.machine_format = machine_fmt;
    machine["diagnostics"] = diagnostics;
    if (!diagnostics.empty()) {
      lines.push_back("diagnostics:");
      for (const auto& d : diagnostics) lines.push_back("  - " + d);
    }
    if (req.with_timestamp) {
      std::string ts = detail_io::iso_utc_now();
      machine["timestamp"] = ts;
      lines.push_back("timestamp: " + ts);
    }
    std::string human;
    for (const auto& l : lines) {
      human += l;
      human += '\n';
    }
    out.report.human = std::move(human);
    out.report.machine = std::move(machine);
    out.exit_code = code;
    return out;
  };

  try {
    if (req.subcommand == "selfcheck") {
      auto cases = detail_io::run_selfcheck();
      json results = json::array();
      bool all_pass = true;
      lines.push_back("built-in reference checks:");
      for (const auto& c : cases) {
        all_pass = all_pass && c.pass;
        results.push_back({{"name", c.name},
                           {"value", c.value},
                           {"target", c.target},
                           {"tolerance", c.tol},
                           {"pass", c.pass}});
        lines.push_back(std::string("  [") + (c.pass ? "PASS" : "FAIL") + "] " + c.name + ": " +
                        detail_io::fmt6(c.value) + " (target " + detail_io::fmt6(c.target) +
                        " within " + detail_io::fmt6(c.tol) + ")");
      }
      machine["results"] = {{"selfcheck", results}, {"all_pass", all_pass}};
      lines.push_back(all_pass ? "all checks passed" : "SOME CHECKS FAILED");
      return finish(all_pass ? 0 : 2);
    }

    StudyInput study = parse_study(req.input_text);
    for (const auto& w : study.warnings) diagnostics.push_back(w);
    AnalysisOptions opts = study.options;
    if (req.alpha) {
      if (!(*req.alpha > 0.0 && *req.alpha < 1.0))
        throw DomainError("--alpha must lie in (0, 1)");
      opts.alpha = *req.alpha;
    }
    if (req.relax_eps) {
      if (*req.relax_eps < 0.0) throw DomainError("--relax-eps must be >= 0");
      opts.relax_eps = *req.relax_eps;
    }
    if (req.mean_se) opts.mean_se = *req.mean_se;
    if (req.variance_convention) opts.variance_convention = *req.variance_convention;
    if (req.format) opts.format = *req.format;
    machine_fmt = opts.format == AnalysisOptions::Format::Machine;

    const OutcomeSpace& space =
        study.is_stratified() ? study.stratified->space : study.trial->space;
    Direction direction =
        study.is_stratified() ? study.stratified->direction : study.trial->direction;

    lines.push_back("input: " + (req.input_name.empty() ? "<inline>" : req.input_name));
    lines.push_back("outcome space: " + detail_io::space_to_text(space));
    lines.push_back(direction == Direction::HigherBetter
                        ? "direction: higher outcomes are better"
                        : "direction: lower outcomes are better (outcomes are reflected "
                          "internally so that larger is better)");
    json input_echo;
    input_echo["name"] = req.input_name;
    input_echo["outcome_space"] = detail_io::space_to_json(space);
    input_echo["direction"] =
        direction == Direction::HigherBetter ? "higher_better" : "lower_better";
    if (study.is_stratified()) {
      json strata = json::array();
      for (const auto& s : study.stratified->strata) {
        lines.push_back("stratum '" + s.label + "' (prob " + detail_io::fmt6(s.prob) +
                        "): control " + detail_io::arm_to_text(s.control) + " | treatment " +
                        detail_io::arm_to_text(s.treatment));
        strata.push_back({{"label", s.label},
                          {"prob", s.prob},
                          {"control", detail_io::arm_to_json(s.control)},
                          {"treatment", detail_io::arm_to_json(s.treatment)}});
      }
      input_echo["strata"] = strata;
    } else {
      lines.push_back("control arm:   " + detail_io::arm_to_text(study.trial->control));
      lines.push_back("treatment arm: " + detail_io::arm_to_text(study.trial->treatment));
      input_echo["arms"] = {{"control", detail_io::arm_to_json(study.trial->control)},
                            {"treatment", detail_io::arm_to_json(study.trial->treatment)}};
    }
    machine["input"] = input_echo;
    machine["options"] = detail_io::options_to_json(opts);
    lines.push_back("options: " + detail_io::options_to_text(opts));
    lines.push_back("");

    json results;

    if (req.subcommand == "validate") {
      auto diags = study.is_stratified() ? validate(*study.stratified) : validate(*study.trial);
      json errors = json::array(), warnings = json::array();
      lines.push_back("validation:");
      bool ok = true;
      for (const auto& d : diags) {
        bool is_err = d.severity == Diagnostic::Severity::Error;
        ok = ok && !is_err;
        (is_err ? errors : warnings).push_back(d.message);
        lines.push_back(std::string("  [") + (is_err ? "ERROR" : "WARN") + "] " + d.message);
      }
      if (diags.empty()) lines.push_back("  no findings; input is consistent");
      results["valid"] = ok;
      results["errors"] = errors;
      results["warnings"] = warnings;
      machine["results"] = results;
      return finish(ok ? 0 : 1);
    }

    if (req.subcommand == "heterogeneity") {
      lines.push_back("effect-variance bounds:");
      if (study.is_stratified()) {
        PerStratumBound per =
            space.is_bounded() ? PerStratumBound::Bounded : PerStratumBound::General;
        HeterogeneityBound b = het_bounds_stratified(*study.stratified, per);
        results["stratified"] = detail_io::het_to_json(b);
        results["per_stratum_formula"] =
            per == PerStratumBound::Bounded ? "bounded" : "general";
        lines.push_back("  stratified: " + detail_io::interval_to_text(b.interval));
        for (const auto& note : b.notes) diagnostics.push_back(note);
      } else {
        bool have_general = true;
        try {
          HeterogeneityBound g = het_bounds_general(*study.trial);
          results["general"] = detail_io::het_to_json(g);
          lines.push_back("  variance-ratio formula:     " +
                          detail_io::interval_to_text(g.interval));
        } catch (const ZeroControlVariance& e) {
          have_general = false;
          if (!space.is_bounded()) throw;
          diagnostics.push_back(std::string(e.what()) +
                                "; reporting the bounded-outcome formula only");
        }
        if (space.is_bounded()) {
          HeterogeneityBound b = het_bounds_bounded(*study.trial);
          results["bounded"] = detail_io::het_to_json(b);
          lines.push_back("  bounded-outcome formula:    " +
                          detail_io::interval_to_text(b.interval));
          lines.push_back("    binding: lower=" + b.binding_lower + " upper=" + b.binding_upper);
          for (const auto& note : b.notes) diagnostics.push_back(note);
        } else if (have_general) {
          diagnostics.push_back(
              "outcome space is unbounded; the bounded-outcome refinement is unavailable");
        }
      }
      machine["results"] = results;
      return finish(0);
    }

    if (req.subcommand == "benefit") {
      lines.push_back("benefit of individualized treatment (closed forms):");
      if (study.is_stratified()) {
        double ub = benefit_upper_closed_stratified(*study.stratified);
        Interval iv{0.0, std::max(0.0, ub), "benefit-stratified-closed", "outcome"};
        results["stratified_closed_form"] = detail_io::interval_to_json(iv);
        lines.push_back("  stratified closed-form interval: " + detail_io::interval_to_text(iv));
      } else {
        double ub = benefit_upper_closed(*study.trial);
        Interval iv{0.0, std::max(0.0, ub), "benefit-closed-upper", "outcome"};
        results["closed_form"] = detail_io::interval_to_json(iv);
        lines.push_back("  closed-form interval:     " + detail_io::interval_to_text(iv));
        if (space.is_binary()) {
          BenefitBound bin = benefit_bounds_binary(*study.trial);
          results["binary"] = detail_io::benefit_to_json(bin);
          lines.push_back("  binary closed form:       " +
                          detail_io::interval_to_text(bin.interval));
          lines.push_back("  best single arm value:    " + detail_io::fmt6(bin.mu_T));
          for (const auto& note : bin.notes) diagnostics.push_back(note);
        }
      }
      machine["results"] = results;
      return finish(0);
    }

    if (req.subcommand == "benefit-lp") {
      lines.push_back("benefit of individualized treatment (joint-distribution bounds):");
      if (study.is_stratified()) {
        BenefitBound b = benefit_bounds_stratified(*study.stratified, opts.relax_eps);
        results["stratified_lp"] = detail_io::benefit_to_json(b);
        lines.push_back("  stratified interval:      " + detail_io::interval_to_text(b.interval));
        lines.push_back("  stratum-rule value (mu_C): " + detail_io::fmt6(*b.mu_C));
        lines.push_back("  best single arm (mu_T):    " + detail_io::fmt6(b.mu_T));
        for (const auto& note : b.notes) diagnostics.push_back(note);
      } else {
        BenefitBound b = benefit_bounds_lp(*study.trial, opts.relax_eps);
        results["lp"] = detail_io::benefit_to_json(b);
        lines.push_back("  interval:                 " + detail_io::interval_to_text(b.interval));
        lines.push_back("  best single arm (mu_T):   " + detail_io::fmt6(b.mu_T));
        for (const auto& note : b.notes) diagnostics.push_back(note);
      }
      machine["results"] = results;
      return finish(0);
    }

    if (req.subcommand == "ci") {
      if (study.is_stratified())
        throw UnsupportedSpace(
            "confidence intervals for stratified summaries are not provided; the underlying "
            "method gives large-sample theory for the unstratified bounds only");
      TrialSummary norm = normalize_direction(*study.trial);
      MomentSet mom = MomentSet::from_trial(norm);
      lines.push_back("confidence intervals (level " + detail_io::fmt6(1.0 - opts.alpha) + "):");

      CiReport het = ci_heterogeneity(mom, norm.space, opts.alpha, MomentMode::SummaryBound);
      results["heterogeneity"] = detail_io::ci_to_json(het);
      lines.push_back("  effect-variance interval:        " +
                      detail_io::interval_to_text(het.interval));
      for (const auto& note : het.notes) diagnostics.push_back(note);

      CiReport ucb = ucb_benefit_closed(mom, norm.space, opts.alpha, MomentMode::SummaryBound);
      results["benefit_closed_ucb"] = detail_io::ci_to_json(ucb);
      lines.push_back("  benefit upper confidence bound:  " +
                      detail_io::interval_to_text(ucb.interval));
      for (const auto& note : ucb.notes) diagnostics.push_back(note);

      if (space.is_finite()) {
        CiReport lpci = ci_benefit_lp(mom, norm.space, opts.alpha, opts.mean_se);
        results["benefit_lp"] = detail_io::ci_to_json(lpci);
        lines.push_back("  benefit interval (widened lp):   " +
                        detail_io::interval_to_text(lpci.interval));
        for (const auto& note : lpci.notes) diagnostics.push_back(note);
        diagnostics.push_back(
            opts.mean_se == MeanSeConvention::AsPrinted
                ? "mean bands use variance/sqrt(n) half-widths as printed in the source method; "
                  "pass --mean-se standard for conventional standard errors"
                : "mean bands use standard errors s/sqrt(n); the source method as printed uses "
                  "variance/sqrt(n), available via --mean-se as-printed");
      } else {
        diagnostics.push_back(
            "joint-distribution interval skipped: it requires a finite outcome support");
      }
      machine["results"] = results;
      return finish(0);
    }

    throw DomainError("unknown subcommand '" + req.subcommand + "'");
  } catch (const ParseError& e) {
    diagnostics.push_back(std::string("parse error: ") + e.what());
    lines.push_back("error: " + std::string(e.what()));
    machine["error"] = e.what();
    return finish(1);
  } catch (const InfeasibleSummaries& e) {
    diagnostics.push_back(std::string("infeasible input: ") + e.what());
    lines.push_back("error: " + std::string(e.what()));
    machine["error"] = e.what();
    return finish(1);
  } catch (const InfeasibleWidenedLp& e) {
    // the widened region contains the point-estimate region, so emptiness signals a
    // numerical pathology rather than bad input
    diagnostics.push_back(std::string("internal error: ") + e.what());
    lines.push_back("error: " + std::string(e.what()));
    machine["error"] = e.what();
    return finish(2);
  } catch (const UnsupportedSpace& e) {
    diagnostics.push_back(std::string("unsupported input: ") + e.what());
    lines.push_back("error: " + std::string(e.what()));
    machine["error"] = e.what();
    return finish(1);
  } catch (const ZeroControlVariance& e) {
    diagnostics.push_back(std::string("degenerate input: ") + e.what());
    lines.push_back("error: " + std::string(e.what()));
    machine["error"] = e.what();
    return finish(1);
  } catch (const DegenerateDenominator& e) {
    diagnostics.push_back(std::string("degenerate input: ") + e.what());
    lines.push_back("error: " + std::string(e.what()));
    machine["error"] = e.what();
    return finish(1);
  } catch (const MissingMoments& e) {
    diagnostics.push_back(std::string("missing inputs: ") + e.what());
    lines.push_back("error: " + std::string(e.what()));
    machine["error"] = e.what();
    return finish(1);
  } catch (const DomainError& e) {
    diagnostics.push_back(std::string("invalid input: ") + e.what());
    lines.push_back("error: " + std::string(e.what()));
    machine["error"] = e.what();
    return finish(1);
  } catch (const std::exception& e) {
    diagnostics.push_back(std::string("internal error: ") + e.what());
    lines.push_back("error: " + std::string(e.what()));
    machine["error"] = e.what();
    return finish(2);
  }
}

}  // namespace otr
