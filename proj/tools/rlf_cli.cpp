// rlf: run, validate and list experiment configurations.
//
// Exit codes: 0 global verdict pass, 1 fail, 2 invalid config or usage,
// 3 non-commuting detected.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "rlf/expcli/runner.hpp"

namespace {

int exit_code(const std::string& verdict) {
  if (verdict == "pass") return 0;
  if (verdict == "non-commuting detected") return 3;
  return 1;
}

void print_diagnostics(const std::vector<std::string>& diags) {
  for (const auto& d : diags) std::cerr << "  " << d << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Regular Lagrangian flow experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::string suite;
  std::optional<std::uint64_t> seed;

  auto* run = app.add_subcommand("run", "Run an experiment suite and write report.csv / report.json");
  run->add_option("--config", config_path, "YAML experiment configuration")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "Output directory (overrides the config)");
  run->add_option("--suite", suite, "Suite name (overrides the config)");
  run->add_option("--seed", seed, "Seed for the cloud sample and the test-function panel (overrides the config)");

  auto* val = app.add_subcommand("validate", "Check a configuration and list problems");
  val->add_option("--config", config_path, "YAML experiment configuration")->required()->check(CLI::ExistingFile);
  val->add_option("--suite", suite, "Suite name (overrides the config)");
  val->add_option("--seed", seed, "Seed override");

  auto* presets = app.add_subcommand("presets", "List the preset field pairs");
  auto* version = app.add_subcommand("version", "Print the version");

  CLI11_PARSE(app, argc, argv);

  if (*version) {
    std::cout << "rlf " << rlf::kVersion << '\n';
    return 0;
  }
  if (*presets) {
    for (const auto& name : rlf::preset_names()) {
      const auto p = rlf::preset_pair(name);
      std::cout << name << (p.commuting ? "  commuting" : "  non-commuting") << "  X=" << p.x.name
                << " (" << rlf::to_string(p.x.regularity) << ")  Y=" << p.y.name << " ("
                << rlf::to_string(p.y.regularity) << ")\n";
    }
    return 0;
  }

  auto cfg = rlf::expcli::load_config(config_path);
  if (!suite.empty()) cfg.suite = suite;
  if (!out_dir.empty()) cfg.output = out_dir;
  if (seed) rlf::expcli::override_seed(cfg, *seed);

  const auto diags = rlf::expcli::validate(cfg);
  if (*val) {
    if (diags.empty()) {
      std::cout << "ok\n";
      return 0;
    }
    std::cerr << diags.size() << " problem(s) in " << config_path << ":\n";
    print_diagnostics(diags);
    return 2;
  }

  if (!diags.empty()) {
    std::cerr << "invalid configuration " << config_path << ":\n";
    print_diagnostics(diags);
    return 2;
  }
  try {
    const auto rep = rlf::expcli::run(cfg);
    rlf::expcli::write_outputs(cfg.output, rep, cfg);
    std::size_t failed = 0;
    for (const auto& r : rep.rows) failed += r.verdict != "pass";
    std::cout << cfg.suite << " on " << cfg.preset << ": " << rep.rows.size() << " rows, " << failed
              << " not passing, verdict " << rep.verdict << " (" << cfg.output << ")\n";
    return exit_code(rep.verdict);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
