#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

#include "xchain/sim.hpp"

using namespace xchain;

namespace {

std::string one_decimal(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", perf::round1(x));
  return buf;
}

void print_model(const std::string& scenario, const CostParams& params,
                 int instigators) {
  std::cout << "scenario,coordinating_node_tps,other_node_tps";
  if (instigators > 0) {
    std::cout << ",amortized_tps_n" << instigators;
  }
  std::cout << "\n";
  for (const auto& row : perf::reference_table(params)) {
    if (!scenario.empty() && row.scenario != scenario) continue;
    std::cout << row.scenario << "," << one_decimal(row.coordinating_node)
              << "," << one_decimal(row.other_node);
    if (instigators > 0) {
      auto s = perf::scenario_from_string(row.scenario);
      std::cout << "," << one_decimal(perf::amortized_rate(s, instigators, params));
    }
    std::cout << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deterministic simulator for atomic crosschain transactions"};
  app.require_subcommand(1);

  auto* run_cmd = app.add_subcommand("run", "run a simulation from a JSON config");
  std::string config_path, out_path, format = "json";
  uint64_t seed = 0;
  run_cmd->add_option("--config", config_path, "simulation config file (JSON)")
      ->required();
  auto* seed_opt = run_cmd->add_option("--seed", seed, "override the config seed");
  run_cmd->add_option("--out", out_path, "write the report to this file");
  run_cmd->add_option("--format", format, "report format")
      ->check(CLI::IsMember({"json", "csv"}));

  auto* model_cmd =
      app.add_subcommand("model", "print the analytical per-node rate table");
  std::string scenario;
  double base_tps = CostParams{}.base_tx_rate;
  double verify_ms = CostParams{}.bls_verify_time * 1000.0;
  int instigators = 0;
  model_cmd->add_option("--scenario", scenario, "restrict to one scenario")
      ->check(CLI::IsMember(sim::builtin_scenarios()));
  model_cmd->add_option("--base-tps", base_tps, "base transaction rate");
  model_cmd->add_option("--verify-ms", verify_ms,
                        "group-signature verification time in milliseconds");
  model_cmd->add_option("--instigators", instigators,
                        "also print the amortized rate for n rotating instigators");

  app.add_subcommand("scenarios", "list the built-in scenarios");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) {
      std::ifstream in(config_path);
      if (!in) throw sim::ConfigError("cannot open config file: " + config_path);
      auto cfg = sim::SimConfig::from_json(nlohmann::json::parse(in));
      if (seed_opt->count() > 0) cfg.seed = seed;
      auto report = sim::run(cfg);
      auto bytes = sim::emit_report(report, format);
      if (out_path.empty()) {
        std::cout << bytes;
      } else {
        std::ofstream out(out_path, std::ios::binary);
        if (!out) throw sim::ConfigError("cannot open output file: " + out_path);
        out << bytes;
      }
      if (report.atomicity_violations > 0) {
        std::cerr << "atomicity violations: " << report.atomicity_violations
                  << "\n";
        return 2;
      }
    } else if (model_cmd->parsed()) {
      CostParams params{base_tps, verify_ms / 1000.0};
      params.validate();
      print_model(scenario, params, instigators);
    } else {
      for (const auto& name : sim::builtin_scenarios()) std::cout << name << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
