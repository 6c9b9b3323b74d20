#include "kcm/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"
#include "kcm/error.hpp"

namespace kcm {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

[[noreturn]] void invalid(const std::string& field, const std::string& what) {
  throw Error(ErrorCode::config_validation, field + ": " + what);
}

// Typed access to one JSON object that remembers its dotted path and rejects
// keys nobody asked for.
class Section {
 public:
  Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) invalid(path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string field(std::string_view key) const {
    return path_.empty() ? std::string(key) : path_ + "." + std::string(key);
  }

  bool has(std::string_view key) const {
    seen_.insert(std::string(key));
    return node_.contains(key) && !node_.at(std::string(key)).is_null();
  }

  const json& raw(std::string_view key) const {
    seen_.insert(std::string(key));
    return node_.at(std::string(key));
  }

  Section section(std::string_view key) const { return Section(raw(key), field(key)); }

  double number(std::string_view key, double fallback) const {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_number()) invalid(field(key), "expected a number");
    return v.get<double>();
  }

  std::size_t count(std::string_view key, std::size_t fallback) const {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_number_integer() || v.get<long long>() < 0) {
      invalid(field(key), "expected a non-negative integer");
    }
    return v.get<std::size_t>();
  }

  std::string text(std::string_view key, std::string fallback) const {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_string()) invalid(field(key), "expected a string");
    return v.get<std::string>();
  }

  bool flag(std::string_view key, bool fallback) const {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_boolean()) invalid(field(key), "expected true or false");
    return v.get<bool>();
  }

  void reject_unknown() const {
    for (auto it = node_.begin(); it != node_.end(); ++it) {
      if (!seen_.contains(it.key())) invalid(field(it.key()), "unknown key");
    }
  }

 private:
  const json& node_;
  std::string path_;
  mutable std::set<std::string, std::less<>> seen_;
};

json parse_json(std::string_view text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, column = 1;
    const std::size_t end = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    for (std::size_t i = 0; i < end; ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    std::ostringstream os;
    os << origin << ":" << line << ":" << column << ": " << e.what();
    throw Error(ErrorCode::config_parse, os.str());
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::ofstream open_output(const fs::path& path, std::ios::openmode mode = std::ios::trunc) {
  std::ofstream out(path, std::ios::out | mode);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  return out;
}

PeptideGeometry read_geometry(const Section& s) {
  PeptideGeometry g;
  g.n_ca = s.number("n_ca", g.n_ca);
  g.ca_c = s.number("ca_c", g.ca_c);
  g.c_n = s.number("c_n", g.c_n);
  g.c_o = s.number("c_o", g.c_o);
  g.n_h = s.number("n_h", g.n_h);
  g.ca_ha = s.number("ca_ha", g.ca_ha);
  g.ca_side = s.number("ca_side", g.ca_side);
  g.c_oxt = s.number("c_oxt", g.c_oxt);
  g.angle_n_ca_c = s.number("angle_n_ca_c", g.angle_n_ca_c);
  g.angle_ca_c_n = s.number("angle_ca_c_n", g.angle_ca_c_n);
  g.angle_c_n_ca = s.number("angle_c_n_ca", g.angle_c_n_ca);
  s.reject_unknown();
  return g;
}

json geometry_json(const PeptideGeometry& g) {
  return {
      {"n_ca", g.n_ca},
      {"ca_c", g.ca_c},
      {"c_n", g.c_n},
      {"c_o", g.c_o},
      {"n_h", g.n_h},
      {"ca_ha", g.ca_ha},
      {"ca_side", g.ca_side},
      {"c_oxt", g.c_oxt},
      {"angle_n_ca_c", g.angle_n_ca_c},
      {"angle_ca_c_n", g.angle_ca_c_n},
      {"angle_c_n_ca", g.angle_c_n_ca},
  };
}

// Rethrows library validation errors as config errors naming the section.
template <typename F>
void validate_as(const std::string& field, F&& check) {
  try {
    check();
  } catch (const Error& e) {
    invalid(field, e.what());
  }
}

}  // namespace

ParameterTable load_parameter_table(const fs::path& path) {
  const std::string text = read_file(path);
  const json root = parse_json(text, path.string());
  if (!root.is_object()) invalid(path.string(), "expected an object keyed by atom kind");
  ParameterTable table;
  for (auto it = root.begin(); it != root.end(); ++it) {
    const auto kind = atom_kind_from_string(it.key());
    if (!kind) invalid(path.string() + ":" + it.key(), "unknown atom kind");
    Section s(it.value(), it.key());
    AtomParameters p;
    for (const char* key : {"charge", "vdw_radius", "well_depth"}) {
      if (!s.has(key)) {
        throw Error(ErrorCode::missing_parameter,
                    path.string() + ": " + s.field(key) + " is required");
      }
    }
    p.charge = s.number("charge", 0.0);
    p.vdw_radius = s.number("vdw_radius", 0.0);
    p.well_depth = s.number("well_depth", 0.0);
    p.w_elec = s.number("w_elec", 1.0);
    p.w_vdw = s.number("w_vdw", 1.0);
    s.reject_unknown();
    table[*kind] = p;
  }
  for (AtomKind kind : kAllAtomKinds) {
    if (!table.contains(kind)) {
      throw Error(ErrorCode::missing_parameter,
                  path.string() + ": no entry for " + to_string(kind));
    }
  }
  return table;
}

std::string dump_parameter_table(const ParameterTable& table) {
  json root = json::object();
  for (const auto& [kind, p] : table) {
    root[to_string(kind)] = {{"charge", p.charge},     {"vdw_radius", p.vdw_radius},
                             {"well_depth", p.well_depth}, {"w_elec", p.w_elec},
                             {"w_vdw", p.w_vdw}};
  }
  return root.dump(2) + "\n";
}

void validate(const ExperimentConfig& cfg) {
  if (cfg.schema_version != kSchemaVersion) {
    invalid("schema_version", "unsupported version " + std::to_string(cfg.schema_version));
  }
  if (cfg.chain.num_planes < 1) invalid("chain.num_planes", "must be >= 1");
  validate_as("chain.geometry", [&] { cfg.chain.geometry.validate(); });
  if (cfg.chain.parameters != "builtin" && !fs::exists(cfg.chain.parameters)) {
    invalid("chain.parameters", "file not found: " + cfg.chain.parameters);
  }

  const auto& init = cfg.initial;
  const std::size_t dof = 2 * (cfg.chain.num_planes + 1);
  switch (init.source) {
    case InitialSource::explicit_list:
      if (init.dihedrals.size() != dof) {
        invalid("initial_conformation.dihedrals",
                "expected " + std::to_string(dof) + " angles, got " +
                    std::to_string(init.dihedrals.size()));
      }
      for (double a : init.dihedrals) {
        if (!std::isfinite(a)) invalid("initial_conformation.dihedrals", "angle not finite");
      }
      break;
    case InitialSource::preset:
      if (init.preset != "pre_coiled_alpha") {
        invalid("initial_conformation.preset", "unknown preset '" + init.preset + "'");
      }
      if (!(init.perturbation_deg >= 0.0) || !std::isfinite(init.perturbation_deg)) {
        invalid("initial_conformation.perturbation_deg", "must be >= 0");
      }
      break;
    case InitialSource::random:
      break;
  }

  try {
    cfg.solver.validate();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::invalid_schedule) {
      invalid("solver.gamma0", "the geometric step-size rule needs gamma0 in (0, 1)");
    }
    invalid("solver", e.what());
  }
  validate_as("force_field", [&] { cfg.force_field.validate(); });

  if (cfg.output.snapshot_stride < 1) invalid("output.snapshot_stride", "must be >= 1");
  for (const std::string& f : cfg.output.formats) {
    if (f != "trace" && f != "pdb") invalid("output.formats", "unknown format '" + f + "'");
  }
}

ExperimentConfig parse_config(std::string_view text, const fs::path& base_dir) {
  const json root_json = parse_json(text, "config");
  const Section root(root_json, "");
  ExperimentConfig cfg;

  if (!root.has("schema_version")) invalid("schema_version", "is required");
  cfg.schema_version = static_cast<int>(root.count("schema_version", 0));

  if (root.has("chain")) {
    const Section s = root.section("chain");
    cfg.chain.num_planes = s.count("num_planes", cfg.chain.num_planes);
    if (s.has("geometry")) cfg.chain.geometry = read_geometry(s.section("geometry"));
    cfg.chain.parameters = s.text("parameters", cfg.chain.parameters);
    s.reject_unknown();
  }
  if (cfg.chain.parameters != "builtin") {
    fs::path p(cfg.chain.parameters);
    if (p.is_relative()) p = base_dir / p;
    cfg.chain.parameters = fs::weakly_canonical(fs::absolute(p)).string();
  }

  if (root.has("initial_conformation")) {
    const Section s = root.section("initial_conformation");
    const int sources = int(s.has("dihedrals")) + int(s.has("preset")) + int(s.has("random"));
    if (sources != 1) {
      invalid("initial_conformation",
              "exactly one of 'dihedrals', 'preset' or 'random' must be given");
    }
    auto& init = cfg.initial;
    if (s.has("dihedrals")) {
      init.source = InitialSource::explicit_list;
      const std::string unit = s.text("unit", "radians");
      if (unit != "radians" && unit != "degrees") {
        invalid(s.field("unit"), "expected 'radians' or 'degrees'");
      }
      const json& list = s.raw("dihedrals");
      if (!list.is_array()) invalid(s.field("dihedrals"), "expected an array of numbers");
      for (const json& v : list) {
        if (!v.is_number()) invalid(s.field("dihedrals"), "expected an array of numbers");
        init.dihedrals.push_back(unit == "degrees" ? v.get<double>() * kDeg : v.get<double>());
      }
    } else if (s.has("preset")) {
      init.source = InitialSource::preset;
      init.preset = s.text("preset", init.preset);
      init.seed = s.count("seed", init.seed);
      init.perturbation_deg = s.number("perturbation_deg", init.perturbation_deg);
    } else {
      init.source = InitialSource::random;
      const Section r = s.section("random");
      init.seed = r.count("seed", init.seed);
      r.reject_unknown();
    }
    s.reject_unknown();
  }

  if (root.has("solver")) {
    const Section s = root.section("solver");
    auto& sv = cfg.solver;
    if (s.has("mode")) {
      const auto mode = solver_mode_from_string(s.text("mode", ""));
      if (!mode) invalid(s.field("mode"), "expected 'conventional' or 'sgd'");
      sv.mode = *mode;
    }
    sv.kappa0 = s.number("kappa0", sv.kappa0);
    sv.gamma0 = s.number("gamma0", sv.gamma0);
    sv.tau_tol = s.number("tau_tol", sv.tau_tol);
    sv.max_iters = s.count("max_iters", sv.max_iters);
    sv.record_every = s.count("record_every", sv.record_every);
    s.reject_unknown();
  }

  if (root.has("force_field")) {
    const Section s = root.section("force_field");
    auto& ff = cfg.force_field;
    ff.coulomb_constant = s.number("coulomb_constant", ff.coulomb_constant);
    ff.dielectric = s.number("dielectric", ff.dielectric);
    ff.apply_exclusions = s.flag("exclusions", ff.apply_exclusions);
    if (s.has("cutoff")) ff.cutoff = s.number("cutoff", 0.0);
    if (s.has("radius_rule")) {
      const std::string rule = s.text("radius_rule", "");
      if (rule == "sum") {
        ff.radius_rule = RadiusRule::sum;
      } else if (rule == "geometric_mean") {
        ff.radius_rule = RadiusRule::geometric_mean;
      } else {
        invalid(s.field("radius_rule"), "expected 'sum' or 'geometric_mean'");
      }
    }
    s.reject_unknown();
  }

  if (root.has("output")) {
    const Section s = root.section("output");
    auto& out = cfg.output;
    out.directory = s.text("directory", out.directory);
    out.snapshot_stride = s.count("snapshot_stride", out.snapshot_stride);
    if (s.has("formats")) {
      const json& list = s.raw("formats");
      if (!list.is_array()) invalid(s.field("formats"), "expected an array of strings");
      out.formats.clear();
      for (const json& v : list) {
        if (!v.is_string()) invalid(s.field("formats"), "expected an array of strings");
        out.formats.push_back(v.get<std::string>());
      }
    }
    s.reject_unknown();
  }
  root.reject_unknown();

  validate(cfg);
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  if (!fs::exists(path)) throw Error(ErrorCode::io, "config not found: " + path.string());
  const std::string text = read_file(path);
  try {
    return parse_config(text, fs::absolute(path).parent_path());
  } catch (const Error& e) {
    // Parse errors read "config:line:col: ..."; point them at the file instead.
    std::string_view what = e.what();
    if (e.code() == ErrorCode::config_parse && what.starts_with("config:")) {
      throw Error(e.code(), path.string() + std::string(what.substr(6)));
    }
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

std::string dump_config(const ExperimentConfig& cfg) {
  json root;
  root["schema_version"] = cfg.schema_version;
  root["chain"] = {{"num_planes", cfg.chain.num_planes},
                   {"geometry", geometry_json(cfg.chain.geometry)},
                   {"parameters", cfg.chain.parameters}};

  json init;
  switch (cfg.initial.source) {
    case InitialSource::explicit_list:
      init["dihedrals"] = cfg.initial.dihedrals;
      init["unit"] = "radians";
      break;
    case InitialSource::preset:
      init["preset"] = cfg.initial.preset;
      init["seed"] = cfg.initial.seed;
      init["perturbation_deg"] = cfg.initial.perturbation_deg;
      break;
    case InitialSource::random:
      init["random"] = {{"seed", cfg.initial.seed}};
      break;
  }
  root["initial_conformation"] = init;

  const auto& sv = cfg.solver;
  root["solver"] = {{"mode", to_string(sv.mode)},    {"kappa0", sv.kappa0},
                    {"gamma0", sv.gamma0},           {"tau_tol", sv.tau_tol},
                    {"max_iters", sv.max_iters},     {"record_every", sv.record_every}};

  const auto& ff = cfg.force_field;
  root["force_field"] = {
      {"coulomb_constant", ff.coulomb_constant},
      {"dielectric", ff.dielectric},
      {"exclusions", ff.apply_exclusions},
      {"cutoff", ff.cutoff ? json(*ff.cutoff) : json(nullptr)},
      {"radius_rule", ff.radius_rule == RadiusRule::sum ? "sum" : "geometric_mean"},
  };
  root["output"] = {{"directory", cfg.output.directory},
                    {"snapshot_stride", cfg.output.snapshot_stride},
                    {"formats", cfg.output.formats}};
  return root.dump(2) + "\n";
}

ChainTopology build_topology(const ExperimentConfig& cfg) {
  const ParameterTable params = cfg.chain.parameters == "builtin"
                                    ? default_parameters()
                                    : load_parameter_table(cfg.chain.parameters);
  return build_backbone(cfg.chain.num_planes, cfg.chain.geometry, params);
}

Conformation pre_coiled_alpha(const ChainTopology& topology, std::uint64_t seed,
                              double perturbation_deg) {
  constexpr double phi_helix = -57.0 * kDeg;
  constexpr double psi_helix = -47.0 * kDeg;
  const std::size_t n = topology.num_dihedrals;

  // Each joint changes only its own backbone dihedral, by +-theta_j.
  const Conformation zero = Conformation::zeros(n);
  const Eigen::VectorXd base = measure_backbone_dihedrals(pose(topology, zero), topology);
  Eigen::VectorXd target(static_cast<Eigen::Index>(n));
  for (std::size_t j = 0; j < n; ++j) {
    const auto i = static_cast<Eigen::Index>(j);
    if (std::isnan(base(i))) {
      target(i) = 0.0;
      continue;
    }
    Conformation probe = zero;
    probe.theta(i) = 0.5;
    const double moved = measure_backbone_dihedrals(pose(topology, probe), topology)(i);
    const double direction = wrap_angle(moved - base(i)) > 0.0 ? 1.0 : -1.0;
    const double goal = (j % 2 == 0) ? phi_helix : psi_helix;
    target(i) = direction * wrap_angle(goal - base(i));
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> offset(-perturbation_deg * kDeg,
                                                perturbation_deg * kDeg);
  for (Eigen::Index i = 0; i < target.size(); ++i) target(i) += offset(rng);
  return wrap_angles(target);
}

Conformation random_conformation(const ChainTopology& topology, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
  Eigen::VectorXd theta(static_cast<Eigen::Index>(topology.num_dihedrals));
  for (Eigen::Index i = 0; i < theta.size(); ++i) theta(i) = angle(rng);
  return wrap_angles(theta);
}

Conformation initial_conformation(const ExperimentConfig& cfg, const ChainTopology& topology) {
  switch (cfg.initial.source) {
    case InitialSource::explicit_list:
      return wrap_angles(Eigen::Map<const Eigen::VectorXd>(
          cfg.initial.dihedrals.data(), static_cast<Eigen::Index>(cfg.initial.dihedrals.size())));
    case InitialSource::preset:
      return pre_coiled_alpha(topology, cfg.initial.seed, cfg.initial.perturbation_deg);
    case InitialSource::random:
      return random_conformation(topology, cfg.initial.seed);
  }
  throw Error(ErrorCode::config_validation, "unknown initial conformation source");
}

void write_angles(const Conformation& theta, const fs::path& path) {
  std::ofstream out = open_output(path);
  out << "# dihedral angles, radians\n" << std::setprecision(17);
  for (Eigen::Index i = 0; i < theta.theta.size(); ++i) out << theta.theta(i) << "\n";
  if (!out) throw Error(ErrorCode::io, "failed writing " + path.string());
}

Conformation read_angles(const fs::path& path) {
  std::istringstream in(read_file(path));
  std::vector<double> values;
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::string token;
    while (fields >> token) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(token, &used));
        if (used != token.size()) throw std::invalid_argument(token);
      } catch (const std::exception&) {
        throw Error(ErrorCode::config_parse, path.string() + ": not a number: " + token);
      }
    }
  }
  return Conformation(
      Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size())));
}

void write_energy_trace(const FoldingTrajectory& trajectory, std::ostream& os) {
  if (trajectory.records.empty()) {
    throw Error(ErrorCode::io, "cannot write an energy trace for an empty trajectory");
  }
  os << kTraceHeader << "\n";
  char buf[512];
  for (const IterationRecord& r : trajectory.records) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.k,
                  r.energy.elec, r.energy.vdw, r.energy.total, r.tau_norm_2, r.tau_norm_inf,
                  r.kappa_k);
    os << buf;
  }
}

void write_energy_trace(const FoldingTrajectory& trajectory, const fs::path& path) {
  std::ofstream out = open_output(path);
  write_energy_trace(trajectory, out);
  if (!out) throw Error(ErrorCode::io, "failed writing " + path.string());
}

std::vector<TraceRow> read_energy_trace(const fs::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line) || line != kTraceHeader) {
    throw Error(ErrorCode::config_parse, path.string() + ": missing trace header");
  }
  std::vector<TraceRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    TraceRow r;
    const int n = std::sscanf(line.c_str(), "%zu,%lf,%lf,%lf,%lf,%lf,%lf", &r.k, &r.elec,
                              &r.vdw, &r.total, &r.tau_norm_2, &r.tau_norm_inf, &r.kappa_k);
    if (n != 7) {
      throw Error(ErrorCode::config_parse,
                  path.string() + ":" + std::to_string(line_no) + ": expected 7 columns");
    }
    rows.push_back(r);
  }
  return rows;
}

void write_snapshot(const ChainPose& pose, const ChainTopology& topology, std::ostream& os,
                    std::size_t index) {
  if (pose.atom_positions.size() != topology.num_atoms()) {
    throw Error(ErrorCode::force_dimension, "pose does not match topology");
  }
  char buf[128];
  std::snprintf(buf, sizeof buf, "MODEL     %4zu\n", index);
  os << buf;
  for (std::size_t i = 0; i < topology.num_atoms(); ++i) {
    const Atom& atom = topology.atoms[i];
    const Vec3& r = pose.atom_positions[i];
    const std::string name = pdb_atom_name(atom.kind);
    // Names shorter than four characters start in column 14.
    const std::string padded = name.size() < 4 ? " " + name : name;
    std::snprintf(buf, sizeof buf,
                  "ATOM  %5zu %-4s %3s %1s%4zu    %8.3f%8.3f%8.3f%6.2f%6.2f          %2s\n",
                  (i + 1) % 100000, padded.c_str(), "UNK", "A", atom.residue % 10000, r.x(),
                  r.y(), r.z(), 1.0, 0.0, element_symbol(atom.kind));
    os << buf;
  }
  os << "ENDMDL\n";
}

void write_snapshot(const ChainPose& pose, const ChainTopology& topology, const fs::path& path,
                    std::size_t index) {
  std::ofstream out = open_output(path, std::ios::app);
  write_snapshot(pose, topology, out, index);
  if (!out) throw Error(ErrorCode::io, "failed writing " + path.string());
}

std::vector<std::vector<Vec3>> read_snapshot_coordinates(const fs::path& path) {
  std::istringstream in(read_file(path));
  std::vector<std::vector<Vec3>> models;
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("MODEL", 0) == 0) {
      models.emplace_back();
    } else if (line.rfind("ATOM", 0) == 0 && line.size() >= 54) {
      if (models.empty()) models.emplace_back();
      models.back().emplace_back(std::stod(line.substr(30, 8)), std::stod(line.substr(38, 8)),
                                 std::stod(line.substr(46, 8)));
    }
  }
  return models;
}

std::size_t oscillation_score(std::span<const double> energies) {
  std::size_t reversals = 0;
  int previous = 0;
  for (std::size_t k = 1; k < energies.size(); ++k) {
    const double delta = energies[k] - energies[k - 1];
    const int s = delta > 0.0 ? 1 : (delta < 0.0 ? -1 : 0);
    if (s == 0) continue;
    if (previous != 0 && s != previous) ++reversals;
    previous = s;
  }
  return reversals;
}

std::optional<std::size_t> first_at_or_below(std::span<const double> energies, double level) {
  for (std::size_t k = 0; k < energies.size(); ++k) {
    if (energies[k] <= level) return k;
  }
  return std::nullopt;
}

FoldRun run_experiment(const ExperimentConfig& cfg) {
  validate(cfg);
  FoldRun run;
  run.config = cfg;
  run.topology = build_topology(cfg);
  run.theta0 = initial_conformation(cfg, run.topology);
  run.trajectory = run_folding(run.topology, run.theta0, cfg.solver, cfg.force_field);
  return run;
}

void write_outputs(const FoldRun& run, const fs::path& directory) {
  std::error_code ec;
  fs::create_directories(directory, ec);
  if (ec) throw Error(ErrorCode::io, "cannot create " + directory.string() + ": " + ec.message());

  {
    std::ofstream out = open_output(directory / "config.json");
    out << dump_config(run.config);
  }
  write_angles(run.trajectory.final_theta, directory / "final_theta.txt");

  const auto& formats = run.config.output.formats;
  auto wants = [&](std::string_view f) {
    return std::find(formats.begin(), formats.end(), f) != formats.end();
  };
  if (wants("trace")) write_energy_trace(run.trajectory, directory / "trace.csv");
  if (wants("pdb")) {
    const fs::path pdb = directory / "snapshots.pdb";
    open_output(pdb);  // truncate
    const auto& records = run.trajectory.records;
    for (std::size_t r = 0; r < records.size(); ++r) {
      const bool last = r + 1 == records.size();
      if (records[r].k % run.config.output.snapshot_stride == 0 || last) {
        write_snapshot(pose(run.topology, records[r].theta), run.topology, pdb, records[r].k);
      }
    }
  }
}

RunSummary summarize(const FoldingTrajectory& trajectory) {
  RunSummary s;
  s.mode = trajectory.solver.mode;
  s.kappa0 = trajectory.solver.kappa0;
  s.initial_energy = trajectory.energy_history.front();
  s.final_energy = trajectory.energy_history.back();
  s.iterations = trajectory.last_iteration();
  if (trajectory.terminated_by != Termination::max_iters) {
    s.iterations_to_convergence = trajectory.last_iteration();
  }
  s.oscillation_score = oscillation_score(trajectory.energy_history);
  s.terminated_by = trajectory.terminated_by;
  return s;
}

ComparisonReport run_compare(const ExperimentConfig& a, const ExperimentConfig& b) {
  if (!(a.chain == b.chain)) {
    throw Error(ErrorCode::config_mismatch, "the two experiments describe different chains");
  }
  if (!(a.initial == b.initial)) {
    throw Error(ErrorCode::config_mismatch,
                "the two experiments start from different initial conformations");
  }
  ComparisonReport report;
  report.a = run_experiment(a);
  report.b = run_experiment(b);
  report.summary_a = summarize(report.a.trajectory);
  report.summary_b = summarize(report.b.trajectory);
  return report;
}

namespace {

json summary_json(const RunSummary& s) {
  return {
      {"mode", to_string(s.mode)},
      {"kappa0", s.kappa0},
      {"initial_energy", s.initial_energy},
      {"final_energy", s.final_energy},
      {"iterations", s.iterations},
      {"iterations_to_convergence",
       s.iterations_to_convergence ? json(*s.iterations_to_convergence) : json(nullptr)},
      {"oscillation_score", s.oscillation_score},
      {"terminated_by", to_string(s.terminated_by)},
  };
}

}  // namespace

std::string format_summary(const ComparisonReport& report) {
  std::ostringstream os;
  auto line = [&](const char* label, const RunSummary& s) {
    os << label << ": mode=" << to_string(s.mode) << " kappa0=" << s.kappa0
       << std::setprecision(10) << " E0=" << s.initial_energy << " E_final=" << s.final_energy
       << " iterations=" << s.iterations << " converged_at=";
    if (s.iterations_to_convergence) {
      os << *s.iterations_to_convergence;
    } else {
      os << "-";
    }
    os << " oscillation=" << s.oscillation_score << " (" << to_string(s.terminated_by)
       << ")\n";
  };
  line("a", report.summary_a);
  line("b", report.summary_b);
  os << std::setprecision(10)
     << "final energy difference (b - a): "
     << report.summary_b.final_energy - report.summary_a.final_energy << "\n";
  return os.str();
}

void write_comparison(const ComparisonReport& report, const fs::path& directory) {
  write_outputs(report.a, directory / "a");
  write_outputs(report.b, directory / "b");
  const json root = {
      {"a", summary_json(report.summary_a)},
      {"b", summary_json(report.summary_b)},
      {"final_energy_difference", report.summary_b.final_energy - report.summary_a.final_energy},
  };
  std::ofstream out = open_output(directory / "summary.json");
  out << root.dump(2) << "\n";
}

namespace {

// Five-point central difference of f at 0.
template <class F>
double five_point(double h, F&& f) {
  return (f(-2 * h) - 8 * f(-h) + 8 * f(h) - f(2 * h)) / (12 * h);
}

}  // namespace

std::vector<SelfCheckItem> run_self_check(const ChainTopology& topology,
                                          const Conformation& theta0,
                                          const ForceFieldConfig& ff, std::uint64_t seed) {
  std::vector<SelfCheckItem> items;
  std::vector<Conformation> samples{theta0};
  for (std::uint64_t s = 0; s < 4; ++s) samples.push_back(random_conformation(topology, seed + s));

  constexpr double h_theta = 1e-4;
  constexpr double h_r = 1e-4;
  double worst_torque = 0.0, worst_force = 0.0, worst_balance = 0.0, worst_rigid = 0.0;
  const ChainPose reference = pose(topology, Conformation::zeros(topology.num_dihedrals));

  // Relative error, floored at 1e-3 of the largest component of the vector
  // being compared: the first joint spins the whole chain rigidly, so its
  // torque is exactly zero and only finite-difference noise is left to compare.
  auto rel = [](double a, double b, double largest) {
    const double scale = std::max({std::abs(a), std::abs(b), 1e-3 * largest, 1e-300});
    return std::abs(a - b) / scale;
  };

  for (const Conformation& theta : samples) {
    const TorqueEvaluation eval = evaluate(topology, theta, ff);
    Eigen::VectorXd fd(static_cast<Eigen::Index>(topology.num_dihedrals));
    for (Eigen::Index j = 0; j < fd.size(); ++j) {
      fd(j) = -five_point(h_theta, [&](double dx) {
        Conformation shifted = theta;
        shifted.theta(j) += dx;
        return free_energy(pose(topology, shifted), topology, ff).total;
      });
    }
    const double largest_tau = fd.lpNorm<Eigen::Infinity>();
    for (Eigen::Index j = 0; j < fd.size(); ++j) {
      worst_torque = std::max(worst_torque, rel(eval.torque.tau(j), fd(j), largest_tau));
    }

    ChainPose p = pose(topology, theta);
    const std::vector<Vec3> forces = atomic_forces(p, topology, ff);
    Vec3 net = Vec3::Zero();
    double largest_force = 0.0;
    for (const Vec3& f : forces) {
      net += f;
      largest_force = std::max(largest_force, f.lpNorm<Eigen::Infinity>());
    }
    // Random conformations can clash, with forces up to ~1e13; judge the
    // balance against the largest force so rounding of the sum is not flagged.
    if (!ff.cutoff && largest_force > 0.0) {
      worst_balance = std::max(worst_balance, net.lpNorm<Eigen::Infinity>() / largest_force);
    }
    for (std::size_t i = 0; i < topology.num_atoms(); ++i) {
      for (int c = 0; c < 3; ++c) {
        const double saved = p.atom_positions[i](c);
        const double fd = -five_point(h_r, [&](double dx) {
          p.atom_positions[i](c) = saved + dx;
          return free_energy(p, topology, ff).total;
        });
        p.atom_positions[i](c) = saved;
        worst_force = std::max(worst_force, rel(forces[i](c), fd, largest_force));
      }
    }

    for (const auto& plane : topology.plane_atoms) {
      for (std::size_t a = 0; a < plane.size(); ++a) {
        for (std::size_t b = a + 1; b < plane.size(); ++b) {
          const double d0 =
              (reference.atom_positions[plane[a]] - reference.atom_positions[plane[b]]).norm();
          const double d = (p.atom_positions[plane[a]] - p.atom_positions[plane[b]]).norm();
          worst_rigid = std::max(worst_rigid, std::abs(d - d0));
        }
      }
    }
  }

  items.push_back({"torque vs -dG/dtheta (max relative error)", worst_torque, 1e-6,
                   worst_torque < 1e-6});
  items.push_back({"forces vs -dG/dr (max relative error)", worst_force, 1e-6, worst_force < 1e-6});
  items.push_back({"net force |sum F_i|_inf / max |F_i|_inf", worst_balance, 1e-12,
                   worst_balance < 1e-12});
  items.push_back({"intra-plane distance drift (Å)", worst_rigid, 1e-9, worst_rigid < 1e-9});
  return items;
}

void write_moulay_report(const MoulayReport& report, std::ostream& os) {
  os << "k,kappa_k,projection,distance,condition1,c_max,condition2,condition3\n";
  char buf[256];
  for (const MoulayEntry& e : report.entries) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%d,%.17g,%d,%d\n", e.k, e.kappa_k,
                  e.projection, e.distance, e.step_bound ? 1 : 0, e.c_max, e.descent ? 1 : 0,
                  report.vanishing_steps ? 1 : 0);
    os << buf;
  }
}

}  // namespace kcm
