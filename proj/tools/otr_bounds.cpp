#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "otrbounds/otrbounds.hpp"

namespace {

struct Flags {
  std::optional<double> alpha;
  std::optional<double> relax_eps;
  std::string mean_se;
  std::string variance_convention;
  std::string format;
  bool no_timestamp = false;
  std::string input_file;
};

void add_common(CLI::App* cmd, Flags& flags, bool input_required) {
  cmd->add_option("--alpha", flags.alpha, "miscoverage level in (0, 1)");
  cmd->add_option("--relax-eps", flags.relax_eps,
                  "relative slack for moment constraints (try 1e-3 for borderline inputs)");
  cmd->add_option("--mean-se", flags.mean_se, "mean band convention for the widened interval")
      ->check(CLI::IsMember({"as-printed", "standard"}));
  cmd->add_option("--variance-convention", flags.variance_convention,
                  "how the reported variances were computed (documentation only)")
      ->check(CLI::IsMember({"sample", "population"}));
  cmd->add_option("--format", flags.format, "output format")
      ->check(CLI::IsMember({"text", "machine"}));
  cmd->add_flag("--no-timestamp", flags.no_timestamp, "omit the timestamp from the report");
  auto* opt = cmd->add_option("input", flags.input_file, "study summary JSON file");
  if (input_required) opt->required();
}

int dispatch(const std::string& subcommand, const Flags& flags) {
  otr::CommandRequest req;
  req.subcommand = subcommand;
  req.input_name = flags.input_file;
  req.with_timestamp = !flags.no_timestamp;
  if (!flags.input_file.empty()) {
    std::ifstream in(flags.input_file);
    if (!in) {
      std::cerr << "error: cannot open input file '" << flags.input_file << "'\n";
      return 1;
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    req.input_text = buf.str();
  }
  req.alpha = flags.alpha;
  req.relax_eps = flags.relax_eps;
  if (flags.mean_se == "as-printed")
    req.mean_se = otr::MeanSeConvention::AsPrinted;
  else if (flags.mean_se == "standard")
    req.mean_se = otr::MeanSeConvention::Standard;
  if (flags.variance_convention == "sample")
    req.variance_convention = otr::AnalysisOptions::VarianceConvention::Sample;
  else if (flags.variance_convention == "population")
    req.variance_convention = otr::AnalysisOptions::VarianceConvention::Population;
  if (flags.format == "text")
    req.format = otr::AnalysisOptions::Format::Text;
  else if (flags.format == "machine")
    req.format = otr::AnalysisOptions::Format::Machine;

  otr::CommandOutcome out = otr::run(req);
  if (out.machine_format)
    std::cout << out.report.machine.dump(2) << "\n";
  else
    std::cout << out.report.human;
  return out.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "bounds on treatment-effect heterogeneity and on the benefit of individualized "
      "treatment, from randomized-trial summary statistics"};
  app.require_subcommand(1);

  struct Sub {
    const char* name;
    const char* help;
    bool input_required;
  };
  const Sub subs[] = {
      {"heterogeneity", "bounds on the variance of the individual treatment effect", true},
      {"benefit", "closed-form bounds on the benefit of individualized treatment", true},
      {"benefit-lp", "joint-distribution bounds on the benefit (finite outcome support)", true},
      {"ci", "confidence intervals for the bounds", true},
      {"validate", "check a study summary for internal consistency", true},
      {"selfcheck", "run built-in reference checks", false},
  };

  Flags flags[std::size(subs)];
  CLI::App* cmds[std::size(subs)];
  for (std::size_t i = 0; i < std::size(subs); ++i) {
    cmds[i] = app.add_subcommand(subs[i].name, subs[i].help);
    add_common(cmds[i], flags[i], subs[i].input_required);
  }

  CLI11_PARSE(app, argc, argv);

  for (std::size_t i = 0; i < std::size(subs); ++i)
    if (cmds[i]->parsed()) return dispatch(subs[i].name, flags[i]);
  return 1;
}
