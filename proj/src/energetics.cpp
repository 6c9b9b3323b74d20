#include "kcm/energetics.hpp"

#include <cmath>
#include <sstream>

#include "kcm/error.hpp"

namespace kcm {

void ForceFieldConfig::validate() const {
  if (!(coulomb_constant > 0.0) || !std::isfinite(coulomb_constant)) {
    throw Error(ErrorCode::invalid_parameter, "coulomb_constant must be > 0");
  }
  if (!(dielectric > 0.0) || !std::isfinite(dielectric)) {
    throw Error(ErrorCode::invalid_parameter, "dielectric must be > 0");
  }
  if (cutoff && !(*cutoff > 0.0)) {
    throw Error(ErrorCode::invalid_parameter, "cutoff must be > 0 when present");
  }
}

namespace {

void require_separated(double d) {
  if (!(d > 0.0)) {
    throw Error(ErrorCode::coincident_atoms, "pair distance must be > 0");
  }
}

[[noreturn]] void coincident(std::size_t i, std::size_t j) {
  std::ostringstream os;
  os << "atoms " << i << " and " << j << " coincide";
  throw Error(ErrorCode::coincident_atoms, os.str());
}

}  // namespace

double pair_elec_energy(double q_i, double q_j, double d, const ForceFieldConfig& cfg,
                        double w) {
  require_separated(d);
  return w * cfg.coulomb_constant * q_i * q_j / (cfg.dielectric * d);
}

double pair_vdw_energy(double eps_ij, double r0_ij, double d, double w) {
  require_separated(d);
  const double s2 = (r0_ij / d) * (r0_ij / d);
  const double s6 = s2 * s2 * s2;
  return w * eps_ij * (s6 * s6 - 2.0 * s6);
}

PairParameters combine(const AtomParameters& a, const AtomParameters& b, RadiusRule rule) {
  PairParameters p;
  p.w_elec = a.w_elec * b.w_elec;
  p.eps = std::sqrt(a.well_depth * b.well_depth);
  p.r0 = rule == RadiusRule::sum ? a.vdw_radius + b.vdw_radius
                                 : 2.0 * std::sqrt(a.vdw_radius * b.vdw_radius);
  p.w_vdw = a.w_vdw * b.w_vdw;
  return p;
}

namespace {

// Visits every interacting pair (i < j, lexicographic order) with its
// separation vector r_i - r_j and distance.
template <typename Visitor>
void for_each_pair(const ChainPose& pose, const ChainTopology& topology,
                   const ForceFieldConfig& cfg, Visitor&& visit) {
  const auto& r = pose.atom_positions;
  const std::size_t n = topology.num_atoms();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (cfg.apply_exclusions && topology.excluded(i, j)) continue;
      const Vec3 delta = r[i] - r[j];
      const double d = delta.norm();
      if (cfg.cutoff && d > *cfg.cutoff) continue;
      if (!(d > 0.0)) coincident(i, j);
      visit(i, j, delta, d);
    }
  }
}

}  // namespace

EnergyAndForces energy_and_forces(const ChainPose& pose, const ChainTopology& topology,
                                  const ForceFieldConfig& cfg) {
  EnergyAndForces out;
  out.forces.assign(topology.num_atoms(), Vec3::Zero());
  for_each_pair(pose, topology, cfg, [&](std::size_t i, std::size_t j, const Vec3& delta,
                                         double d) {
    const AtomParameters& a = topology.atoms[i].params;
    const AtomParameters& b = topology.atoms[j].params;
    const PairParameters p = combine(a, b, cfg.radius_rule);
    const double e_elec = pair_elec_energy(a.charge, b.charge, d, cfg, p.w_elec);
    const double e_vdw = pair_vdw_energy(p.eps, p.r0, d, p.w_vdw);
    const double inv_d = 1.0 / d;
    const double s2 = (p.r0 * inv_d) * (p.r0 * inv_d);
    const double s6 = s2 * s2 * s2;
    out.energy.elec += e_elec;
    out.energy.vdw += e_vdw;
    // -dE/dd for both terms; force on i is along +delta when repulsive.
    const double f_elec = e_elec * inv_d;
    const double f_vdw = 12.0 * p.w_vdw * p.eps * (s6 * s6 - s6) * inv_d;
    const Vec3 f = (f_elec + f_vdw) * inv_d * delta;
    out.forces[i] += f;
    out.forces[j] -= f;
  });
  out.energy.total = out.energy.elec + out.energy.vdw;
  return out;
}

EnergyBreakdown free_energy(const ChainPose& pose, const ChainTopology& topology,
                            const ForceFieldConfig& cfg) {
  EnergyBreakdown e;
  for_each_pair(pose, topology, cfg,
                [&](std::size_t i, std::size_t j, const Vec3&, double d) {
                  const AtomParameters& a = topology.atoms[i].params;
                  const AtomParameters& b = topology.atoms[j].params;
                  const PairParameters p = combine(a, b, cfg.radius_rule);
                  e.elec += pair_elec_energy(a.charge, b.charge, d, cfg, p.w_elec);
                  e.vdw += pair_vdw_energy(p.eps, p.r0, d, p.w_vdw);
                });
  e.total = e.elec + e.vdw;
  return e;
}

std::vector<Vec3> atomic_forces(const ChainPose& pose, const ChainTopology& topology,
                                const ForceFieldConfig& cfg) {
  return energy_and_forces(pose, topology, cfg).forces;
}

TorqueVector torque(const ChainTopology& topology, const Conformation& theta,
                    const ForceFieldConfig& cfg) {
  return evaluate(topology, theta, cfg).torque;
}

TorqueEvaluation evaluate(const ChainTopology& topology, const Conformation& theta,
                          const ForceFieldConfig& cfg) {
  const ChainPose p = pose(topology, theta);
  EnergyAndForces ef = energy_and_forces(p, topology, cfg);
  return {ef.energy, jacobian_torque(p, topology, ef.forces)};
}

}  // namespace kcm
