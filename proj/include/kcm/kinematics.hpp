#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "kcm/chain_model.hpp"

namespace kcm {

// Realized geometry of a chain at one conformation.
struct ChainPose {
  std::vector<Vec3> unit_vectors;    // u_j(theta)
  std::vector<Vec3> body_vectors;    // b_j(theta), Å
  std::vector<Vec3> atom_positions;  // r_i(theta), Å
  std::vector<Vec3> joint_origins;   // a point on each rotation axis, Å
  // frames[L] is the product of the first L joint rotations; frames[0] = I.
  std::vector<Mat3> frames;
};

struct TorqueVector {
  Eigen::VectorXd tau;  // kcal/mol/rad

  std::size_t size() const { return static_cast<std::size_t>(tau.size()); }
};

// Rodrigues rotation by `angle` about the unit vector `axis`.
// Throws axis_normalization when |axis| deviates from 1 by more than 1e-9.
Mat3 rotation_matrix(double angle, const Vec3& axis);

// Conformation-to-geometry map. Throws conformation_dimension.
ChainPose pose(const ChainTopology& topology, const Conformation& theta);

// tau_j = sum over downstream atoms of u_j . ((r_i - p_j) x F_i).
// This is J^T F without materializing the chain Jacobian.
TorqueVector jacobian_torque(const ChainPose& pose, const ChainTopology& topology,
                             std::span<const Vec3> atomic_forces);

// Standard backbone dihedrals measured from atom positions, one per joint:
// phi(k) from C(k-1), N, CA, C and psi(k) from N, CA, C, N(k+1) (OXT for the
// last residue). phi of the first residue is undefined and reported as NaN.
Eigen::VectorXd measure_backbone_dihedrals(const ChainPose& pose,
                                           const ChainTopology& topology);

// Signed dihedral angle a-b-c-d in (-pi, pi].
double dihedral_angle(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d);

}  // namespace kcm
