// kcmfold - command-line driver for kinetostatic backbone folding runs.
//
//   kcmfold fold <config> [--out DIR]
//   kcmfold compare <config_a> <config_b> [--out DIR]
//   kcmfold check <config>
//   kcmfold diagnose <config> --theta-star FILE [--alpha A] [--c C] [--out FILE]
//   kcmfold dump-config <config>
//
// Exit codes: 0 converged (or zero torque), 2 iteration cap reached, 3 config
// parse error, 4 config validation error, 5 I/O error, 6 numerical error,
// 7 config mismatch, 8 self-check failure, 9 topology/parameter error,
// 1 anything else.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "kcm/error.hpp"
#include "kcm/experiment.hpp"

namespace fs = std::filesystem;

namespace {

int exit_code(kcm::ErrorCode code) {
  using kcm::ErrorCode;
  switch (code) {
    case ErrorCode::config_parse: return 3;
    case ErrorCode::config_validation:
    case ErrorCode::invalid_schedule:
    case ErrorCode::invalid_solver_config: return 4;
    case ErrorCode::io: return 5;
    case ErrorCode::coincident_atoms:
    case ErrorCode::non_finite_angle:
    case ErrorCode::non_finite_force:
    case ErrorCode::axis_normalization: return 6;
    case ErrorCode::config_mismatch: return 7;
    case ErrorCode::invalid_topology:
    case ErrorCode::missing_parameter:
    case ErrorCode::invalid_parameter:
    case ErrorCode::conformation_dimension:
    case ErrorCode::force_dimension: return 9;
  }
  return 1;
}

int termination_code(kcm::Termination t) {
  return t == kcm::Termination::max_iters ? 2 : 0;
}

void report_run(const std::string& label, const kcm::RunSummary& s) {
  std::printf("%s%s: E0=%.6f E_final=%.6f iterations=%zu oscillation=%zu status=%s\n",
              label.c_str(), kcm::to_string(s.mode), s.initial_energy, s.final_energy,
              s.iterations, s.oscillation_score, kcm::to_string(s.terminated_by));
}

int cmd_fold(const std::string& config_path, const std::string& out_dir) {
  const kcm::ExperimentConfig cfg = kcm::load_config(config_path);
  const kcm::FoldRun run = kcm::run_experiment(cfg);
  const fs::path dir = out_dir.empty() ? fs::path(cfg.output.directory) : fs::path(out_dir);
  kcm::write_outputs(run, dir);
  report_run("", kcm::summarize(run.trajectory));
  if (!run.trajectory.energy_increases.empty()) {
    std::printf("energy increased on %zu of %zu iterations\n",
                run.trajectory.energy_increases.size(), run.trajectory.last_iteration());
  }
  std::printf("outputs written to %s\n", dir.string().c_str());
  return termination_code(run.trajectory.terminated_by);
}

int cmd_compare(const std::string& a_path, const std::string& b_path,
                const std::string& out_dir) {
  const kcm::ExperimentConfig a = kcm::load_config(a_path);
  const kcm::ExperimentConfig b = kcm::load_config(b_path);
  const kcm::ComparisonReport report = kcm::run_compare(a, b);
  const fs::path dir = out_dir.empty() ? fs::path(a.output.directory) / "compare"
                                       : fs::path(out_dir);
  kcm::write_comparison(report, dir);
  std::fputs(kcm::format_summary(report).c_str(), stdout);
  std::printf("outputs written to %s\n", dir.string().c_str());
  return 0;
}

int cmd_check(const std::string& config_path) {
  const kcm::ExperimentConfig cfg = kcm::load_config(config_path);
  const kcm::ChainTopology topo = kcm::build_topology(cfg);
  const kcm::Conformation theta0 = kcm::initial_conformation(cfg, topo);
  bool ok = true;
  for (const auto& item : kcm::run_self_check(topo, theta0, cfg.force_field, cfg.initial.seed)) {
    std::printf("[%s] %s: %.3e (tolerance %.1e)\n", item.passed ? "PASS" : "FAIL",
                item.name.c_str(), item.value, item.tolerance);
    ok = ok && item.passed;
  }
  return ok ? 0 : 8;
}

int cmd_diagnose(const std::string& config_path, const std::string& theta_star_path,
                 double alpha, double c, const std::string& out_path) {
  const kcm::ExperimentConfig cfg = kcm::load_config(config_path);
  const kcm::FoldRun run = kcm::run_experiment(cfg);
  const kcm::Conformation theta_star = kcm::read_angles(theta_star_path);
  const kcm::MoulayReport report =
      kcm::check_moulay_conditions(run.trajectory, theta_star, alpha, c);
  if (out_path.empty()) {
    kcm::write_moulay_report(report, std::cout);
  } else {
    std::ofstream out(out_path);
    if (!out) throw kcm::Error(kcm::ErrorCode::io, "cannot write " + out_path);
    kcm::write_moulay_report(report, out);
  }
  std::size_t c1 = 0, c2 = 0;
  for (const auto& e : report.entries) {
    c1 += e.step_bound ? 1 : 0;
    c2 += e.descent ? 1 : 0;
  }
  std::fprintf(stderr,
               "condition 1 held on %zu/%zu records, condition 2 on %zu/%zu, condition 3: %s\n",
               c1, report.entries.size(), c2, report.entries.size(),
               report.vanishing_steps ? "yes" : "no");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kinetostatic compliance folding of protein backbone chains"};
  app.require_subcommand(1);

  std::string config, config_b, out, theta_star;
  double alpha = 1.0, c = 0.0;

  auto* fold = app.add_subcommand("fold", "Run one folding experiment");
  fold->add_option("config", config, "Experiment config (JSON)")->required();
  fold->add_option("--out", out, "Output directory (defaults to output.directory)");

  auto* compare = app.add_subcommand("compare", "Run two experiments from the same start");
  compare->add_option("config_a", config, "First experiment config")->required();
  compare->add_option("config_b", config_b, "Second experiment config")->required();
  compare->add_option("--out", out, "Output directory");

  auto* check = app.add_subcommand("check", "Gradient, force and rigidity self-test");
  check->add_option("config", config, "Experiment config (JSON)")->required();

  auto* diagnose = app.add_subcommand("diagnose", "Sign-descent convergence condition report");
  diagnose->add_option("config", config, "Experiment config (JSON)")->required();
  diagnose->add_option("--theta-star", theta_star, "Reference minimum, one angle per line")
      ->required();
  diagnose->add_option("--alpha", alpha, "Exponent of the descent condition")
      ->check(CLI::PositiveNumber);
  diagnose->add_option("--c", c, "Constant of the descent condition");
  diagnose->add_option("--out", out, "CSV output file (defaults to stdout)");

  auto* dump = app.add_subcommand("dump-config", "Print the normalized config");
  dump->add_option("config", config, "Experiment config (JSON)")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*fold) return cmd_fold(config, out);
    if (*compare) return cmd_compare(config, config_b, out);
    if (*check) return cmd_check(config);
    if (*diagnose) return cmd_diagnose(config, theta_star, alpha, c, out);
    if (*dump) {
      std::fputs(kcm::dump_config(kcm::load_config(config)).c_str(), stdout);
      return 0;
    }
  } catch (const kcm::Error& e) {
    std::fprintf(stderr, "kcmfold: %s error: %s\n", kcm::to_string(e.code()), e.what());
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "kcmfold: %s\n", e.what());
    return 1;
  }
  return 1;
}
