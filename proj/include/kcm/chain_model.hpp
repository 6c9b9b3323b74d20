#pragma once

/**
 * chain_model.hpp - peptide-plane linkage description of a protein backbone.
 *
 * A chain with P peptide planes has N = P + 1 residues and 2N rotatable
 * dihedrals. Joint 2k-1 rotates about the N(k)-CA(k) bond and joint 2k about
 * the CA(k)-C(k) bond (1-based, k = 1..N). Body vector b_j runs along the bond
 * of joint j, so b_{2k-1} = CA(k) - N(k) and b_{2k} = C(k) - CA(k).
 *
 * The remaining atoms of peptide plane k (O(k), N(k+1), H(k+1)) sit at
 * CA(k) + k1 * b_{2k} + k2 * b_{2k+1} with coefficients shared by all planes.
 * Off-plane substituents (HA, side placeholder, C-terminal oxygens) are rigid
 * offsets carried by the cumulative rotation of their link.
 */

#include <array>
#include <cstddef>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Core>

namespace kcm {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

enum class AtomKind {
  N,
  H_N,
  C_alpha,
  H_alpha,
  C,
  O,
  N_terminus,
  C_terminus,
  side_placeholder,
};

inline constexpr std::array<AtomKind, 9> kAllAtomKinds = {
    AtomKind::N,          AtomKind::H_N,        AtomKind::C_alpha,
    AtomKind::H_alpha,    AtomKind::C,          AtomKind::O,
    AtomKind::N_terminus, AtomKind::C_terminus, AtomKind::side_placeholder,
};

const char* to_string(AtomKind kind);
std::optional<AtomKind> atom_kind_from_string(std::string_view name);
// Four-character PDB atom name ("CA", "OXT", ...).
const char* pdb_atom_name(AtomKind kind);
const char* element_symbol(AtomKind kind);

struct AtomParameters {
  double charge = 0.0;      // e
  double vdw_radius = 1.0;  // Å
  double well_depth = 0.0;  // kcal/mol
  double w_elec = 1.0;
  double w_vdw = 1.0;

  bool operator==(const AtomParameters&) const = default;
};

using ParameterTable = std::map<AtomKind, AtomParameters>;

// Throws invalid_parameter when a field violates its bound.
void validate(const AtomParameters& params, AtomKind kind);

// Built-in table: AMBER-style partial charges and half-R_min radii, kcal/mol,
// Å, e. Representative values only; not fitted for this model.
ParameterTable default_parameters();

// Planar coefficients (k1, k2) of an in-plane atom relative to CA(k):
// offset = k1 * b_{2k} + k2 * b_{2k+1}.
struct PlaneCoefficients {
  double k1 = 0.0;
  double k2 = 0.0;

  bool operator==(const PlaneCoefficients&) const = default;
};

// Index into PeptideGeometry::plane_coefficients().
enum class PlaneSite { carbonyl_c = 0, carbonyl_o = 1, amide_n = 2, amide_h = 3 };

// Ideal backbone geometry. Lengths in Å, angles in radians.
struct PeptideGeometry {
  double n_ca = 1.47;
  double ca_c = 1.53;
  double c_n = 1.32;
  double c_o = 1.23;
  double n_h = 1.01;
  double ca_ha = 1.09;
  double ca_side = 1.53;
  double c_oxt = 1.25;
  double angle_n_ca_c = std::numbers::pi * 111.0 / 180.0;
  double angle_ca_c_n = std::numbers::pi * 116.0 / 180.0;
  double angle_c_n_ca = std::numbers::pi * 122.0 / 180.0;

  bool operator==(const PeptideGeometry&) const = default;

  // Throws invalid_parameter on non-positive lengths or angles outside (0, pi).
  void validate() const;

  // Coefficients for CA->C, CA->O, CA->N(next), CA->H(next), m = 1..4.
  std::array<PlaneCoefficients, 4> plane_coefficients() const;
};

// Position rules, evaluated in atom order (anchors always precede dependents).
struct FixedPoint {
  Vec3 position;
};
// r = r[anchor] + b[body]
struct ChainStep {
  std::size_t anchor;
  std::size_t body;  // 0-based body vector index
};
// r = r[anchor] + k1 * b[body] + k2 * b[body + 1]
struct PlaneSum {
  std::size_t anchor;
  std::size_t body;
  PlaneCoefficients coeff;
};
// r = r[anchor] + Xi[link] * offset
struct RigidOffset {
  std::size_t anchor;
  std::size_t link;
  Vec3 offset;
};
using PositionRule = std::variant<FixedPoint, ChainStep, PlaneSum, RigidOffset>;

struct Atom {
  AtomKind kind;
  AtomParameters params;
  std::size_t residue;  // 1-based
  std::size_t plane;    // owning peptide plane, 1-based; 0 if none
  // Rigid body the atom belongs to: the position depends on theta_1..theta_link.
  std::size_t link;
  PositionRule rule;
};

struct ChainTopology {
  std::size_t num_planes = 0;
  std::size_t num_dihedrals = 0;
  PeptideGeometry geometry;
  std::array<PlaneCoefficients, 4> plane_coefficients{};

  std::vector<Vec3> zero_unit_vectors;
  std::vector<Vec3> zero_body_vectors;
  std::vector<Vec3> zero_positions;
  std::vector<Atom> atoms;

  std::vector<std::pair<std::size_t, std::size_t>> bonds;
  // Sorted (i < j) pairs removed from the nonbonded sums.
  std::vector<std::pair<std::size_t, std::size_t>> exclusion_set;

  // Six atoms of each peptide plane: CA(k), C(k), O(k), N(k+1), H(k+1), CA(k+1).
  std::vector<std::array<std::size_t, 6>> plane_atoms;
  // Backbone atoms in chain order: N1, CA1, C1, N2, ...
  std::vector<std::size_t> backbone;
  // For each joint, the atom on its axis at the proximal end of the bond.
  std::vector<std::size_t> axis_anchor;
  // For each joint, atoms whose position depends on that dihedral.
  std::vector<std::vector<std::size_t>> downstream;

  std::size_t num_atoms() const { return atoms.size(); }
  std::size_t num_residues() const { return num_planes + 1; }
  bool excluded(std::size_t i, std::size_t j) const {
    return exclusion_mask[i * atoms.size() + j] != 0;
  }

  // Row-major num_atoms x num_atoms view of exclusion_set.
  std::vector<char> exclusion_mask;
};

ChainTopology build_backbone(std::size_t num_planes,
                             const PeptideGeometry& geometry,
                             const ParameterTable& params);

// Plain angle vector in radians; dimension equals the topology's dihedral count.
struct Conformation {
  Eigen::VectorXd theta;

  Conformation() = default;
  explicit Conformation(Eigen::VectorXd t) : theta(std::move(t)) {}
  static Conformation zeros(std::size_t n) {
    return Conformation(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n)));
  }

  std::size_t size() const { return static_cast<std::size_t>(theta.size()); }
  bool operator==(const Conformation& other) const {
    return theta.size() == other.theta.size() && theta == other.theta;
  }
};

// Maps every component into (-pi, pi]. Throws non_finite_angle.
Conformation wrap_angles(const Eigen::VectorXd& theta);
double wrap_angle(double angle);

}  // namespace kcm
