#pragma once

/**
 * experiment.hpp - experiment configuration, initial conformations, output
 * writers and the two-run comparison protocol used by the kcmfold driver.
 *
 * Config files are JSON with a schema_version key; see configs/README.md for
 * the schema. Trace files are CSV; snapshots are PDB ATOM records grouped in
 * MODEL blocks.
 */

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kcm/chain_model.hpp"
#include "kcm/energetics.hpp"
#include "kcm/kinematics.hpp"
#include "kcm/solvers.hpp"

namespace kcm {

inline constexpr int kSchemaVersion = 1;

struct ChainSpec {
  std::size_t num_planes = 15;
  PeptideGeometry geometry;
  // "builtin" or a JSON parameter file, stored as an absolute path once loaded.
  std::string parameters = "builtin";

  bool operator==(const ChainSpec&) const = default;
};

enum class InitialSource { explicit_list, preset, random };

struct InitialConformationSpec {
  InitialSource source = InitialSource::preset;
  std::vector<double> dihedrals;  // radians; explicit_list only
  std::string preset = "pre_coiled_alpha";
  std::uint64_t seed = 1;
  double perturbation_deg = 10.0;  // half-width of the preset's uniform offsets

  bool operator==(const InitialConformationSpec&) const = default;
};

struct OutputSpec {
  std::string directory = "kcmfold_out";
  std::size_t snapshot_stride = 100;
  std::vector<std::string> formats = {"trace", "pdb"};

  bool operator==(const OutputSpec&) const = default;
};

struct ExperimentConfig {
  int schema_version = kSchemaVersion;
  ChainSpec chain;
  InitialConformationSpec initial;
  SolverConfig solver;
  ForceFieldConfig force_field;
  OutputSpec output;

  bool operator==(const ExperimentConfig&) const = default;
};

// Parses and validates. Relative parameter paths resolve against base_dir.
// Throws config_parse (with line and column) or config_validation (naming the
// offending field).
ExperimentConfig parse_config(std::string_view text,
                              const std::filesystem::path& base_dir = ".");
ExperimentConfig load_config(const std::filesystem::path& path);
// Normalized JSON with every default filled in; parse_config(dump_config(c)) == c.
std::string dump_config(const ExperimentConfig& cfg);
void validate(const ExperimentConfig& cfg);

ParameterTable load_parameter_table(const std::filesystem::path& path);
std::string dump_parameter_table(const ParameterTable& table);

ChainTopology build_topology(const ExperimentConfig& cfg);

// Near-alpha-helix start: phi = -57, psi = -47 degrees wherever the backbone
// dihedral is defined, plus seeded uniform offsets of +-perturbation_deg.
Conformation pre_coiled_alpha(const ChainTopology& topology, std::uint64_t seed,
                              double perturbation_deg);
// Uniform on (-pi, pi] per component.
Conformation random_conformation(const ChainTopology& topology, std::uint64_t seed);
Conformation initial_conformation(const ExperimentConfig& cfg, const ChainTopology& topology);

// One angle per line, radians; '#' starts a comment.
void write_angles(const Conformation& theta, const std::filesystem::path& path);
Conformation read_angles(const std::filesystem::path& path);

struct TraceRow {
  std::size_t k = 0;
  double elec = 0.0;
  double vdw = 0.0;
  double total = 0.0;
  double tau_norm_2 = 0.0;
  double tau_norm_inf = 0.0;
  double kappa_k = 0.0;
};

inline constexpr std::string_view kTraceHeader = "k,elec,vdw,total,tau_norm_2,tau_norm_inf,kappa_k";

void write_energy_trace(const FoldingTrajectory& trajectory, std::ostream& os);
void write_energy_trace(const FoldingTrajectory& trajectory,
                        const std::filesystem::path& path);
std::vector<TraceRow> read_energy_trace(const std::filesystem::path& path);

// One MODEL block. The path overload appends to an existing file.
void write_snapshot(const ChainPose& pose, const ChainTopology& topology, std::ostream& os,
                    std::size_t index);
void write_snapshot(const ChainPose& pose, const ChainTopology& topology,
                    const std::filesystem::path& path, std::size_t index);
// Coordinates of every MODEL block, in file order.
std::vector<std::vector<Vec3>> read_snapshot_coordinates(const std::filesystem::path& path);

// Number of sign reversals in the successive differences of `energies`.
// Zero differences are skipped.
std::size_t oscillation_score(std::span<const double> energies);
// First k with energies[k] <= level.
std::optional<std::size_t> first_at_or_below(std::span<const double> energies, double level);

struct FoldRun {
  ExperimentConfig config;
  ChainTopology topology;
  Conformation theta0;
  FoldingTrajectory trajectory;
};

FoldRun run_experiment(const ExperimentConfig& cfg);
// Writes config.json, trace.csv, snapshots.pdb and final_theta.txt as selected
// by cfg.output.formats into `directory`.
void write_outputs(const FoldRun& run, const std::filesystem::path& directory);

struct RunSummary {
  SolverMode mode = SolverMode::sgd;
  double kappa0 = 0.0;
  double initial_energy = 0.0;
  double final_energy = 0.0;
  std::size_t iterations = 0;
  std::optional<std::size_t> iterations_to_convergence;
  std::size_t oscillation_score = 0;
  Termination terminated_by = Termination::max_iters;
};

RunSummary summarize(const FoldingTrajectory& trajectory);

struct ComparisonReport {
  FoldRun a;
  FoldRun b;
  RunSummary summary_a;
  RunSummary summary_b;
};

// Both configs must share chain, force field and initial conformation;
// otherwise throws config_mismatch.
ComparisonReport run_compare(const ExperimentConfig& a, const ExperimentConfig& b);
void write_comparison(const ComparisonReport& report, const std::filesystem::path& directory);
std::string format_summary(const ComparisonReport& report);

struct SelfCheckItem {
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

// Finite-difference and rigidity checks on the configured chain at theta0 and
// a few seeded random conformations.
std::vector<SelfCheckItem> run_self_check(const ChainTopology& topology,
                                          const Conformation& theta0,
                                          const ForceFieldConfig& ff, std::uint64_t seed);

// Moulay report as CSV: k,kappa_k,projection,distance,condition1,c_max,condition2,condition3
void write_moulay_report(const MoulayReport& report, std::ostream& os);

}  // namespace kcm
