#include <cstdlib>
#include <iostream>

#include "CLI11.hpp"
#include "sos/commands.hpp"
#include "sos/errors.hpp"

namespace {

std::uint64_t parse_seed(const std::string& text, const char* what) {
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    if (!text.empty() && text[0] != '-') v = std::stoull(text, &used, 10);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size()) {
    throw sos::ValidationError(std::string(what) + ": '" + text + "' is not an unsigned integer");
  }
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"System-of-systems security equilibrium toolkit"};
  app.require_subcommand(1);

  sos::CommandOptions opt;
  std::string seed_text;
  std::string baseline;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--scenario", opt.scenario, "Scenario file")->required();
    cmd->add_option("--out", opt.out, "Output directory")->required();
    cmd->add_option("--seed", seed_text, "Base seed (falls back to SOSEQ_SEED, then sim.seed)");
    cmd->add_option("--jobs", opt.jobs, "Worker threads")->check(CLI::PositiveNumber);
  };

  auto* run = app.add_subcommand("run", "Simulate one attack/defense pair");
  add_common(run);
  run->add_option("--attack", opt.attack, "Attack index i");
  run->add_option("--defense", opt.defense, "Defense index j");

  auto* colearn = app.add_subcommand("colearn", "Co-learn the system-of-systems equilibrium");
  add_common(colearn);

  auto* compare = app.add_subcommand("compare", "Cyber-aware vs cyber-unaware defense");
  add_common(compare);
  compare->add_option("--baseline", baseline, "Unaware baseline")
      ->check(CLI::IsMember({"none", "uniform"}));

  auto* sweep = app.add_subcommand("sweep", "Parameter sweep");
  add_common(sweep);
  sweep->add_option("--param", opt.param, "alpha, kappa, C_a[i] or C_d[j]")->required();
  sweep->add_option("--grid", opt.grid, "a:b:step")->required();

  auto* network = app.add_subcommand("network", "Run a multi-subsystem network");
  add_common(network);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : sos::kExitValidation;
  }

  try {
    const sos::Scenario sc = sos::parse_scenario(opt.scenario);
    if (!seed_text.empty()) {
      opt.seed = parse_seed(seed_text, "--seed");
    } else if (const char* env = std::getenv("SOSEQ_SEED"); env && *env) {
      opt.seed = parse_seed(env, "SOSEQ_SEED");
    } else {
      opt.seed = sc.subsystem ? sc.subsystem->sim.seed : sc.network->subsystems[0].sim.seed;
    }
    if (!baseline.empty()) {
      opt.baseline = baseline == "uniform" ? sos::Baseline::uniform : sos::Baseline::none;
    }

    int status = 0;
    if (*run) status = sos::cmd_run(sc, opt);
    else if (*colearn) status = sos::cmd_colearn(sc, opt);
    else if (*compare) status = sos::cmd_compare(sc, opt);
    else if (*sweep) status = sos::cmd_sweep(sc, opt);
    else status = sos::cmd_network(sc, opt);
    if (status == sos::kExitNotConverged) {
      std::cerr << "sosctl: co-learning did not converge; outputs written\n";
    }
    return status;
  } catch (const sos::ValidationError& e) {
    std::cerr << "sosctl: " << e.what() << "\n";
    return sos::kExitValidation;
  } catch (const sos::NumericError& e) {
    std::cerr << "sosctl: " << e.what() << "\n";
    return sos::kExitNumeric;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "sosctl: " << e.what() << "\n";
    return sos::kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "sosctl: " << e.what() << "\n";
    return sos::kExitNumeric;
  }
}
