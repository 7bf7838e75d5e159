// qttf - simulate and analyze fiber-optic two-way quantum time transfer.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qttf/cli.hpp"

using qttf::cli::Options;

int main(int argc, char** argv) {
  CLI::App app{"Two-way quantum time transfer over fiber: simulator and analysis toolkit"};
  app.require_subcommand(1);

  Options opt;
  opt.out_dir = qttf::cli::default_out_dir();
  std::string out_dir_flag;
  std::uint64_t seed_flag = 0;
  long long blocks_flag = 0;

  const auto add_common = [&](CLI::App* cmd, bool needs_scenario) {
    if (needs_scenario) {
      cmd->add_option("--preset", opt.preset,
                      "named scenario (see `qttf presets`)");
      cmd->add_option("--config", opt.config_path, "configuration file");
    }
    cmd->add_option("--out", out_dir_flag, "output directory (default $QTTF_OUT_DIR or ./qttf-out)");
    cmd->add_option("--seed", seed_flag, "override the scenario RNG seed")
        ->each([&](const std::string& s) { opt.seed = std::stoull(s); });
    cmd->add_option("--blocks", blocks_flag, "override the number of acquisition blocks")
        ->each([&](const std::string& s) { opt.blocks = std::stoll(s); });
  };

  auto* predict = app.add_subcommand("predict", "closed-form predictions, no simulation");
  add_common(predict, true);

  auto* simulate = app.add_subcommand("simulate", "generate QTTF tag files");
  add_common(simulate, true);

  auto* analyze = app.add_subcommand("analyze", "recover clock offsets from tag files");
  std::string in_dir;
  analyze->add_option("--in", in_dir, "directory with d1.qttf..d4.qttf")->required();
  add_common(analyze, true);

  auto* scan = app.add_subcommand("scan-length", "clock difference vs transmission length");
  std::vector<double> lengths_m;
  scan->add_option("--lengths", lengths_m, "transmission lengths in meters")
      ->delimiter(',')
      ->required();
  add_common(scan, true);

  auto* reproduce = app.add_subcommand("reproduce", "end-to-end run of a published scenario");
  add_common(reproduce, true);
  reproduce->add_flag("--full-scale", opt.full_scale, "8192 blocks (half-day run at 5 s/block)");

  auto* presets_cmd = app.add_subcommand("presets", "list available presets");

  CLI11_PARSE(app, argc, argv);
  if (!out_dir_flag.empty()) opt.out_dir = out_dir_flag;

  try {
    qttf::Report rep;
    if (presets_cmd->parsed()) {
      for (const auto& name : qttf::preset_names()) std::cout << name << "\n";
      return 0;
    } else if (predict->parsed()) {
      rep = qttf::cli::cmd_predict(opt);
    } else if (simulate->parsed()) {
      rep = qttf::cli::cmd_simulate(opt);
    } else if (analyze->parsed()) {
      rep = qttf::cli::cmd_analyze(opt, in_dir);
    } else if (scan->parsed()) {
      rep = qttf::cli::cmd_scan_length(opt, lengths_m);
    } else {
      rep = qttf::cli::cmd_reproduce(opt);
    }
    qttf::cli::print_report(rep, std::cout);
    return rep.all_checks_pass() ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
