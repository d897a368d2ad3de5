// mcrts: command-line driver for the emergency-routing simulator.

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mcrts/harness.hpp"

namespace {

mcrts::Variant to_variant(const std::string& s) {
  auto v = mcrts::parse_variant(s);
  if (!v) throw CLI::ValidationError("--variant", "unknown variant '" + s + "'");
  return *v;
}

const auto kVariantCheck = CLI::IsMember({"mcrts", "no_preemption", "static_route"});

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mixed-criticality emergency routing simulator"};
  app.require_subcommand(1);

  mcrts::RunConfig run;
  std::string run_variant = "mcrts";
  std::string run_policy;
  std::vector<std::string> formats;
  auto* run_cmd = app.add_subcommand("run", "Simulate one scenario and write trace and reports");
  run_cmd->add_option("--scenario", run.scenario_path, "Scenario JSON file")->required();
  run_cmd->add_option("--seed", run.seed, "Background traffic seed");
  run_cmd->add_option("--variant", run_variant, "mcrts | no_preemption | static_route")->check(kVariantCheck);
  run_cmd->add_option("--out", run.out_dir, "Output directory");
  run_cmd->add_option("--policy", run_policy, "Deadline policy preset (nz, uk, usa, au, hk) or JSON file");
  run_cmd->add_option("--format", formats, "Report formats to write (json, csv); both by default")
      ->check(CLI::IsMember({"json", "csv"}));

  mcrts::GenConfig gen;
  std::string gen_load = "default";
  std::string gen_out;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic grid scenario");
  gen_cmd->add_option("--grid-n", gen.grid_n, "Grid side length")->check(CLI::Range(2, 200));
  gen_cmd->add_option("--seed", gen.seed, "Generator seed");
  gen_cmd->add_option("--load", gen_load, "light | default | rush")->check(CLI::IsMember({"light", "default", "rush"}));
  gen_cmd->add_option("--out", gen_out, "Scenario file (stdout when omitted)");
  gen_cmd->add_flag("--split-network", gen.split_network, "Write the network to <stem>.net.json next to --out");

  mcrts::CompareConfig cmp;
  std::vector<std::string> cmp_variants{"mcrts", "no_preemption"};
  std::string cmp_policy;
  std::string cmp_out;
  auto* cmp_cmd = app.add_subcommand("compare", "Sweep seeds and variants, one CSV row per cell");
  cmp_cmd->add_option("--scenario", cmp.scenario_path, "Scenario JSON file")->required();
  cmp_cmd->add_option("--seeds", cmp.seeds, "Seeds to run")->delimiter(',');
  cmp_cmd->add_option("--variants", cmp_variants, "Variants to run")->delimiter(',')->check(kVariantCheck);
  cmp_cmd->add_option("--policy", cmp_policy, "Deadline policy preset or JSON file");
  cmp_cmd->add_option("--out", cmp_out, "CSV output file (stdout when omitted)");
  cmp_cmd->add_option("--threads", cmp.threads, "Worker threads (0 = all cores)");

  std::string validate_path;
  auto* val_cmd = app.add_subcommand("validate", "Check a scenario file and summarise it");
  val_cmd->add_option("--scenario", validate_path, "Scenario JSON file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // CLI11 reports success (0) for --help; anything else is invalid input.
    const int code = app.exit(e);
    return code == 0 ? mcrts::kExitOk : mcrts::kExitInvalidInput;
  }

  if (*run_cmd) {
    run.variant = to_variant(run_variant);
    if (!run_policy.empty()) run.policy = run_policy;
    if (!formats.empty()) run.formats = formats;
    return mcrts::cmd_run(run, std::cout, std::cerr);
  }
  if (*gen_cmd) {
    gen.load = *mcrts::parse_load(gen_load);
    if (!gen_out.empty()) gen.out_path = gen_out;
    return mcrts::cmd_gen(gen, std::cout, std::cerr);
  }
  if (*cmp_cmd) {
    cmp.variants.clear();
    for (const auto& v : cmp_variants) cmp.variants.push_back(to_variant(v));
    if (!cmp_policy.empty()) cmp.policy = cmp_policy;
    if (!cmp_out.empty()) cmp.out_path = cmp_out;
    return mcrts::cmd_compare(cmp, std::cout, std::cerr);
  }
  return mcrts::cmd_validate(validate_path, std::cout, std::cerr);
}
