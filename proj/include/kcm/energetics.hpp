#pragma once

#include <optional>
#include <vector>

#include "kcm/chain_model.hpp"
#include "kcm/kinematics.hpp"

namespace kcm {

enum class RadiusRule {
  sum,            // r0_ij = R_i + R_j
  geometric_mean  // r0_ij = 2 sqrt(R_i R_j)
};

struct ForceFieldConfig {
  double coulomb_constant = 332.0636;  // kcal Å / (mol e^2)
  double dielectric = 1.0;
  bool apply_exclusions = true;
  // Plain truncation: pairs farther apart are skipped (energy is discontinuous).
  std::optional<double> cutoff;
  RadiusRule radius_rule = RadiusRule::sum;

  bool operator==(const ForceFieldConfig&) const = default;

  // Throws invalid_parameter.
  void validate() const;
};

struct EnergyBreakdown {
  double elec = 0.0;   // kcal/mol
  double vdw = 0.0;    // kcal/mol
  double total = 0.0;  // elec + vdw

  bool operator==(const EnergyBreakdown&) const = default;
};

// w K q_i q_j / (eps_r d)
double pair_elec_energy(double q_i, double q_j, double d, const ForceFieldConfig& cfg,
                        double w);
// w eps [ (r0/d)^12 - 2 (r0/d)^6 ]
double pair_vdw_energy(double eps_ij, double r0_ij, double d, double w);

// Combined pair parameters for atoms a and b.
struct PairParameters {
  double w_elec;  // w_elec,a w_elec,b
  double eps;     // sqrt(eps_a eps_b)
  double r0;
  double w_vdw;   // w_vdw,a w_vdw,b
};
PairParameters combine(const AtomParameters& a, const AtomParameters& b,
                       RadiusRule rule);

EnergyBreakdown free_energy(const ChainPose& pose, const ChainTopology& topology,
                            const ForceFieldConfig& cfg);

// F_i = -grad_{r_i} G, per atom, kcal/mol/Å.
std::vector<Vec3> atomic_forces(const ChainPose& pose, const ChainTopology& topology,
                                const ForceFieldConfig& cfg);

struct EnergyAndForces {
  EnergyBreakdown energy;
  std::vector<Vec3> forces;
};
// One pass over the pair list producing both results.
EnergyAndForces energy_and_forces(const ChainPose& pose, const ChainTopology& topology,
                                  const ForceFieldConfig& cfg);

// pose -> atomic forces -> Jacobian-transpose torque.
TorqueVector torque(const ChainTopology& topology, const Conformation& theta,
                    const ForceFieldConfig& cfg);

struct TorqueEvaluation {
  EnergyBreakdown energy;
  TorqueVector torque;
};
TorqueEvaluation evaluate(const ChainTopology& topology, const Conformation& theta,
                          const ForceFieldConfig& cfg);

}  // namespace kcm
