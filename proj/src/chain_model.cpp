#include "kcm/chain_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <queue>
#include <sstream>

#include <Eigen/Dense>

#include "kcm/error.hpp"

namespace kcm {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_topology: return "invalid-topology";
    case ErrorCode::missing_parameter: return "missing-parameter";
    case ErrorCode::invalid_parameter: return "invalid-parameter";
    case ErrorCode::non_finite_angle: return "non-finite-angle";
    case ErrorCode::axis_normalization: return "axis-normalization";
    case ErrorCode::conformation_dimension: return "conformation-dimension";
    case ErrorCode::force_dimension: return "force-dimension";
    case ErrorCode::non_finite_force: return "non-finite-force";
    case ErrorCode::coincident_atoms: return "coincident-atoms";
    case ErrorCode::invalid_schedule: return "invalid-schedule";
    case ErrorCode::invalid_solver_config: return "invalid-solver-config";
    case ErrorCode::config_parse: return "config-parse";
    case ErrorCode::config_validation: return "config-validation";
    case ErrorCode::config_mismatch: return "config-mismatch";
    case ErrorCode::io: return "io";
  }
  return "unknown";
}

const char* to_string(AtomKind kind) {
  switch (kind) {
    case AtomKind::N: return "N";
    case AtomKind::H_N: return "H_N";
    case AtomKind::C_alpha: return "C_alpha";
    case AtomKind::H_alpha: return "H_alpha";
    case AtomKind::C: return "C";
    case AtomKind::O: return "O";
    case AtomKind::N_terminus: return "N_terminus";
    case AtomKind::C_terminus: return "C_terminus";
    case AtomKind::side_placeholder: return "side_placeholder";
  }
  return "?";
}

std::optional<AtomKind> atom_kind_from_string(std::string_view name) {
  for (AtomKind kind : kAllAtomKinds) {
    if (name == to_string(kind)) return kind;
  }
  return std::nullopt;
}

const char* pdb_atom_name(AtomKind kind) {
  switch (kind) {
    case AtomKind::N: return "N";
    case AtomKind::H_N: return "H";
    case AtomKind::C_alpha: return "CA";
    case AtomKind::H_alpha: return "HA";
    case AtomKind::C: return "C";
    case AtomKind::O: return "O";
    case AtomKind::N_terminus: return "N";
    case AtomKind::C_terminus: return "OXT";
    case AtomKind::side_placeholder: return "CB";
  }
  return "X";
}

const char* element_symbol(AtomKind kind) {
  switch (kind) {
    case AtomKind::N:
    case AtomKind::N_terminus: return "N";
    case AtomKind::H_N:
    case AtomKind::H_alpha: return "H";
    case AtomKind::C_alpha:
    case AtomKind::C:
    case AtomKind::side_placeholder: return "C";
    case AtomKind::O:
    case AtomKind::C_terminus: return "O";
  }
  return "X";
}

void validate(const AtomParameters& p, AtomKind kind) {
  auto fail = [&](const char* what) {
    std::ostringstream os;
    os << "atom parameters for " << to_string(kind) << ": " << what;
    throw Error(ErrorCode::invalid_parameter, os.str());
  };
  if (!std::isfinite(p.charge)) fail("charge must be finite");
  if (!(p.vdw_radius > 0.0) || !std::isfinite(p.vdw_radius)) fail("vdw_radius must be > 0");
  if (!(p.well_depth >= 0.0) || !std::isfinite(p.well_depth)) fail("well_depth must be >= 0");
  if (!(p.w_elec >= 0.0) || !std::isfinite(p.w_elec)) fail("w_elec must be >= 0");
  if (!(p.w_vdw >= 0.0) || !std::isfinite(p.w_vdw)) fail("w_vdw must be >= 0");
}

ParameterTable default_parameters() {
  // Backbone residue charges sum to ~0; the N-terminus lumps N and H and the
  // C-terminal oxygen is a neutral lumped hydroxyl.
  return {
      {AtomKind::N, {-0.4157, 1.8240, 0.1700, 1.0, 1.0}},
      {AtomKind::H_N, {0.2719, 0.6000, 0.0157, 1.0, 1.0}},
      {AtomKind::C_alpha, {0.0337, 1.9080, 0.1094, 1.0, 1.0}},
      {AtomKind::H_alpha, {0.0823, 1.3870, 0.0157, 1.0, 1.0}},
      {AtomKind::C, {0.5973, 1.9080, 0.0860, 1.0, 1.0}},
      {AtomKind::O, {-0.5679, 1.6612, 0.2100, 1.0, 1.0}},
      {AtomKind::N_terminus, {-0.1438, 1.8240, 0.1700, 1.0, 1.0}},
      {AtomKind::C_terminus, {0.0000, 1.7210, 0.2104, 1.0, 1.0}},
      {AtomKind::side_placeholder, {0.0000, 1.9080, 0.1094, 0.0, 0.0}},
  };
}

void PeptideGeometry::validate() const {
  const std::pair<const char*, double> lengths[] = {
      {"n_ca", n_ca}, {"ca_c", ca_c},   {"c_n", c_n},         {"c_o", c_o},
      {"n_h", n_h},   {"ca_ha", ca_ha}, {"ca_side", ca_side}, {"c_oxt", c_oxt},
  };
  for (const auto& [name, value] : lengths) {
    if (!(value > 0.0) || !std::isfinite(value)) {
      throw Error(ErrorCode::invalid_parameter,
                  std::string("bond length ") + name + " must be > 0");
    }
  }
  const std::pair<const char*, double> angles[] = {
      {"angle_n_ca_c", angle_n_ca_c},
      {"angle_ca_c_n", angle_ca_c_n},
      {"angle_c_n_ca", angle_c_n_ca},
  };
  for (const auto& [name, value] : angles) {
    if (!(value > 0.0 && value < std::numbers::pi)) {
      throw Error(ErrorCode::invalid_parameter,
                  std::string("bond angle ") + name + " must lie in (0, pi)");
    }
  }
}

namespace {

// Fully extended (all-trans) backbone in the z = 0 plane. Turns alternate in
// sense along the chain, which puts every backbone dihedral at 180 degrees.
struct ExtendedBackbone {
  std::vector<Vec3> n, ca, c;
  Vec3 virtual_n;  // where N(N+1) would be; orients the C-terminal group
};

ExtendedBackbone extended_backbone(const PeptideGeometry& g, std::size_t residues) {
  ExtendedBackbone out;
  double heading = 0.0;
  double sense = 1.0;
  Vec3 pos = Vec3::Zero();
  auto advance = [&](double length) {
    pos += length * Vec3(std::cos(heading), std::sin(heading), 0.0);
    return pos;
  };
  auto turn = [&](double bond_angle) {
    heading += sense * (std::numbers::pi - bond_angle);
    sense = -sense;
  };
  for (std::size_t k = 0; k < residues; ++k) {
    out.n.push_back(pos);
    out.ca.push_back(advance(g.n_ca));
    turn(g.angle_n_ca_c);
    out.c.push_back(advance(g.ca_c));
    turn(g.angle_ca_c_n);
    Vec3 next = advance(g.c_n);
    if (k + 1 == residues) out.virtual_n = next;
    turn(g.angle_c_n_ca);
  }
  return out;
}

// In-plane substituent on `center` pointing away from both neighbours.
Vec3 bisector_site(const Vec3& center, const Vec3& a, const Vec3& b, double length) {
  Vec3 dir = -((a - center).normalized() + (b - center).normalized()).normalized();
  return center + length * dir;
}

// Tetrahedral substituent on CA, above (+1) or below (-1) the backbone plane.
Vec3 tetrahedral_site(const Vec3& ca, const Vec3& n, const Vec3& c, double length,
                      double side) {
  const Vec3 u = (n - ca).normalized();
  const Vec3 v = (c - ca).normalized();
  const Vec3 bis = -(u + v).normalized();
  const Vec3 perp = u.cross(v).normalized();
  // Half of the ideal tetrahedral angle.
  const double half = 0.5 * std::acos(-1.0 / 3.0);
  return ca + length * (std::cos(half) * bis + side * std::sin(half) * perp);
}

PlaneCoefficients solve_plane(const Vec3& offset, const Vec3& a, const Vec3& b) {
  Eigen::Matrix<double, 3, 2> basis;
  basis.col(0) = a;
  basis.col(1) = b;
  const Eigen::Vector2d k = basis.colPivHouseholderQr().solve(offset);
  return {k(0), k(1)};
}

}  // namespace

std::array<PlaneCoefficients, 4> PeptideGeometry::plane_coefficients() const {
  validate();
  const ExtendedBackbone bb = extended_backbone(*this, 2);
  const Vec3 along_ca_c = bb.c[0] - bb.ca[0];
  const Vec3 along_n_ca = bb.ca[1] - bb.n[1];
  const Vec3 o = bisector_site(bb.c[0], bb.ca[0], bb.n[1], c_o);
  const Vec3 h = bisector_site(bb.n[1], bb.c[0], bb.ca[1], n_h);
  std::array<PlaneCoefficients, 4> out;
  out[static_cast<int>(PlaneSite::carbonyl_c)] = {1.0, 0.0};
  out[static_cast<int>(PlaneSite::carbonyl_o)] =
      solve_plane(o - bb.ca[0], along_ca_c, along_n_ca);
  out[static_cast<int>(PlaneSite::amide_n)] =
      solve_plane(bb.n[1] - bb.ca[0], along_ca_c, along_n_ca);
  out[static_cast<int>(PlaneSite::amide_h)] =
      solve_plane(h - bb.ca[0], along_ca_c, along_n_ca);
  return out;
}

ChainTopology build_backbone(std::size_t num_planes, const PeptideGeometry& geometry,
                             const ParameterTable& params) {
  if (num_planes == 0) {
    throw Error(ErrorCode::invalid_topology, "a chain needs at least one peptide plane");
  }
  geometry.validate();
  for (AtomKind kind : kAllAtomKinds) {
    auto it = params.find(kind);
    if (it == params.end()) {
      throw Error(ErrorCode::missing_parameter,
                  std::string("parameter table has no entry for ") + to_string(kind));
    }
    validate(it->second, kind);
  }

  ChainTopology topo;
  const std::size_t residues = num_planes + 1;
  topo.num_planes = num_planes;
  topo.num_dihedrals = 2 * residues;
  topo.geometry = geometry;
  topo.plane_coefficients = geometry.plane_coefficients();

  const ExtendedBackbone bb = extended_backbone(geometry, residues);
  for (std::size_t k = 0; k < residues; ++k) {
    topo.zero_body_vectors.push_back(bb.ca[k] - bb.n[k]);
    topo.zero_body_vectors.push_back(bb.c[k] - bb.ca[k]);
  }
  for (const Vec3& b : topo.zero_body_vectors) {
    topo.zero_unit_vectors.push_back(b.normalized());
  }

  const auto& coeff = topo.plane_coefficients;
  auto add = [&](AtomKind kind, std::size_t residue, std::size_t plane, std::size_t link,
                 PositionRule rule, const Vec3& zero_pos) {
    topo.atoms.push_back({kind, params.at(kind), residue, plane, link, rule});
    topo.zero_positions.push_back(zero_pos);
    return topo.atoms.size() - 1;
  };
  auto bond = [&](std::size_t i, std::size_t j) { topo.bonds.emplace_back(i, j); };

  // Joint indices below are 0-based: joint 2k rotates about N-CA of residue k,
  // joint 2k+1 about CA-C. Link L means "moved by joints 0..L-1".
  std::vector<std::size_t> ca_index(residues), c_index(residues), n_index(residues);
  std::vector<std::size_t> o_index(residues), h_index(residues, 0);
  std::size_t prev_ca = 0;
  for (std::size_t k = 0; k < residues; ++k) {
    const std::size_t res = k + 1;
    const std::size_t j_nca = 2 * k;
    const std::size_t j_cac = 2 * k + 1;
    const bool first = k == 0;
    const bool last = k + 1 == residues;

    if (first) {
      n_index[k] = add(AtomKind::N_terminus, res, 0, 0, FixedPoint{Vec3::Zero()}, bb.n[k]);
    } else {
      // Plane k (1-based) spans CA(k)..CA(k+1); with 0-based residue k it is
      // plane number k, built on body vectors j_cac of the previous residue.
      const std::size_t plane = k;
      const std::size_t body = 2 * (k - 1) + 1;
      n_index[k] = add(AtomKind::N, res, plane, j_nca,
                       PlaneSum{prev_ca, body, coeff[static_cast<int>(PlaneSite::amide_n)]},
                       bb.n[k]);
      const Vec3 h = bisector_site(bb.n[k], bb.c[k - 1], bb.ca[k], geometry.n_h);
      h_index[k] = add(AtomKind::H_N, res, plane, j_nca,
                       PlaneSum{prev_ca, body, coeff[static_cast<int>(PlaneSite::amide_h)]}, h);
      bond(c_index[k - 1], n_index[k]);
      bond(n_index[k], h_index[k]);
    }

    const std::size_t ca_plane = last ? num_planes : res;
    ca_index[k] = add(AtomKind::C_alpha, res, ca_plane, j_nca,
                      ChainStep{n_index[k], j_nca}, bb.ca[k]);
    bond(n_index[k], ca_index[k]);

    const std::size_t sub_link = j_nca + 1;
    const Vec3 ha = tetrahedral_site(bb.ca[k], bb.n[k], bb.c[k], geometry.ca_ha, -1.0);
    const std::size_t ha_index =
        add(AtomKind::H_alpha, res, 0, sub_link,
            RigidOffset{ca_index[k], sub_link, ha - bb.ca[k]}, ha);
    const Vec3 sr = tetrahedral_site(bb.ca[k], bb.n[k], bb.c[k], geometry.ca_side, 1.0);
    const std::size_t sr_index =
        add(AtomKind::side_placeholder, res, 0, sub_link,
            RigidOffset{ca_index[k], sub_link, sr - bb.ca[k]}, sr);
    bond(ca_index[k], ha_index);
    bond(ca_index[k], sr_index);

    c_index[k] = add(AtomKind::C, res, last ? 0 : res, sub_link,
                     ChainStep{ca_index[k], j_cac}, bb.c[k]);
    bond(ca_index[k], c_index[k]);

    const std::size_t plane_link = j_cac + 1;
    if (!last) {
      const Vec3 o = bisector_site(bb.c[k], bb.ca[k], bb.n[k + 1], geometry.c_o);
      o_index[k] = add(AtomKind::O, res, res, plane_link,
                       PlaneSum{ca_index[k], j_cac,
                                coeff[static_cast<int>(PlaneSite::carbonyl_o)]},
                       o);
      bond(c_index[k], o_index[k]);
    } else {
      const Vec3 o = bisector_site(bb.c[k], bb.ca[k], bb.virtual_n, geometry.c_o);
      o_index[k] = add(AtomKind::O, res, 0, plane_link,
                       RigidOffset{c_index[k], plane_link, o - bb.c[k]}, o);
      const Vec3 oxt =
          bb.c[k] + geometry.c_oxt * (bb.virtual_n - bb.c[k]).normalized();
      const std::size_t oxt_index =
          add(AtomKind::C_terminus, res, 0, plane_link,
              RigidOffset{c_index[k], plane_link, oxt - bb.c[k]}, oxt);
      bond(c_index[k], o_index[k]);
      bond(c_index[k], oxt_index);
    }
    prev_ca = ca_index[k];
  }

  for (std::size_t k = 0; k < residues; ++k) {
    topo.backbone.push_back(n_index[k]);
    topo.backbone.push_back(ca_index[k]);
    topo.backbone.push_back(c_index[k]);
    topo.axis_anchor.push_back(n_index[k]);
    topo.axis_anchor.push_back(ca_index[k]);
  }
  for (std::size_t k = 0; k < num_planes; ++k) {
    topo.plane_atoms.push_back({ca_index[k], c_index[k], o_index[k], n_index[k + 1],
                                h_index[k + 1], ca_index[k + 1]});
  }

  const std::size_t n_atoms = topo.atoms.size();
  topo.downstream.resize(topo.num_dihedrals);
  for (std::size_t j = 0; j < topo.num_dihedrals; ++j) {
    for (std::size_t i = 0; i < n_atoms; ++i) {
      if (topo.atoms[i].link > j) topo.downstream[j].push_back(i);
    }
  }

  // 1-2 and 1-3 exclusions: breadth-first search to depth two.
  std::vector<std::vector<std::size_t>> adjacency(n_atoms);
  for (const auto& [a, b] : topo.bonds) {
    adjacency[a].push_back(b);
    adjacency[b].push_back(a);
  }
  topo.exclusion_mask.assign(n_atoms * n_atoms, 0);
  for (std::size_t i = 0; i < n_atoms; ++i) {
    std::vector<int> depth(n_atoms, -1);
    std::queue<std::size_t> frontier;
    depth[i] = 0;
    frontier.push(i);
    while (!frontier.empty()) {
      const std::size_t a = frontier.front();
      frontier.pop();
      if (depth[a] == 2) continue;
      for (std::size_t b : adjacency[a]) {
        if (depth[b] < 0) {
          depth[b] = depth[a] + 1;
          frontier.push(b);
        }
      }
    }
    for (std::size_t j = i + 1; j < n_atoms; ++j) {
      if (depth[j] > 0) {
        topo.exclusion_set.emplace_back(i, j);
        topo.exclusion_mask[i * n_atoms + j] = 1;
        topo.exclusion_mask[j * n_atoms + i] = 1;
      }
    }
  }
  return topo;
}

double wrap_angle(double angle) {
  if (!std::isfinite(angle)) {
    throw Error(ErrorCode::non_finite_angle, "dihedral angle is not finite");
  }
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double r = std::remainder(angle, two_pi);  // [-pi, pi]
  if (r <= -std::numbers::pi) r += two_pi;
  return r;
}

Conformation wrap_angles(const Eigen::VectorXd& theta) {
  Eigen::VectorXd out(theta.size());
  for (Eigen::Index i = 0; i < theta.size(); ++i) out(i) = wrap_angle(theta(i));
  return Conformation(std::move(out));
}

}  // namespace kcm
