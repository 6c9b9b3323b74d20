#include "kcm/kinematics.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <type_traits>

#include <Eigen/Geometry>

#include "kcm/error.hpp"

namespace kcm {

Mat3 rotation_matrix(double angle, const Vec3& axis) {
  const double norm = axis.norm();
  if (!(std::abs(norm - 1.0) <= 1e-9)) {
    std::ostringstream os;
    os << "rotation axis must be a unit vector (|axis| = " << norm << ")";
    throw Error(ErrorCode::axis_normalization, os.str());
  }
  if (!std::isfinite(angle)) {
    throw Error(ErrorCode::non_finite_angle, "rotation angle is not finite");
  }
  // R = I + sin(a) K + (1 - cos(a)) K^2, K the cross-product matrix of axis.
  Mat3 k;
  k << 0.0, -axis.z(), axis.y(),
       axis.z(), 0.0, -axis.x(),
       -axis.y(), axis.x(), 0.0;
  const double s = std::sin(angle);
  const double c = std::cos(angle);
  return Mat3::Identity() + s * k + (1.0 - c) * (k * k);
}

ChainPose pose(const ChainTopology& topology, const Conformation& theta) {
  const std::size_t n_joints = topology.num_dihedrals;
  if (theta.size() != n_joints) {
    std::ostringstream os;
    os << "conformation has " << theta.size() << " angles, topology expects " << n_joints;
    throw Error(ErrorCode::conformation_dimension, os.str());
  }

  ChainPose out;
  out.frames.reserve(n_joints + 1);
  out.frames.push_back(Mat3::Identity());
  out.unit_vectors.resize(n_joints);
  out.body_vectors.resize(n_joints);
  for (std::size_t j = 0; j < n_joints; ++j) {
    const Vec3& axis = topology.zero_unit_vectors[j];
    out.frames.push_back(out.frames.back() *
                         rotation_matrix(theta.theta(static_cast<Eigen::Index>(j)), axis));
    const Mat3& xi = out.frames.back();
    out.unit_vectors[j] = xi * axis;
    out.body_vectors[j] = xi * topology.zero_body_vectors[j];
  }

  const auto& b = out.body_vectors;
  out.atom_positions.resize(topology.num_atoms());
  for (std::size_t i = 0; i < topology.num_atoms(); ++i) {
    out.atom_positions[i] = std::visit(
        [&](const auto& rule) -> Vec3 {
          using Rule = std::decay_t<decltype(rule)>;
          if constexpr (std::is_same_v<Rule, FixedPoint>) {
            return rule.position;
          } else if constexpr (std::is_same_v<Rule, ChainStep>) {
            return out.atom_positions[rule.anchor] + b[rule.body];
          } else if constexpr (std::is_same_v<Rule, PlaneSum>) {
            return out.atom_positions[rule.anchor] + rule.coeff.k1 * b[rule.body] +
                   rule.coeff.k2 * b[rule.body + 1];
          } else {
            return out.atom_positions[rule.anchor] + out.frames[rule.link] * rule.offset;
          }
        },
        topology.atoms[i].rule);
  }

  out.joint_origins.resize(n_joints);
  for (std::size_t j = 0; j < n_joints; ++j) {
    out.joint_origins[j] = out.atom_positions[topology.axis_anchor[j]];
  }
  return out;
}

TorqueVector jacobian_torque(const ChainPose& pose, const ChainTopology& topology,
                             std::span<const Vec3> atomic_forces) {
  if (atomic_forces.size() != topology.num_atoms()) {
    std::ostringstream os;
    os << "got " << atomic_forces.size() << " force vectors for " << topology.num_atoms()
       << " atoms";
    throw Error(ErrorCode::force_dimension, os.str());
  }
  for (std::size_t i = 0; i < atomic_forces.size(); ++i) {
    if (!atomic_forces[i].allFinite()) {
      std::ostringstream os;
      os << "force on atom " << i << " is not finite";
      throw Error(ErrorCode::non_finite_force, os.str());
    }
  }

  TorqueVector out{Eigen::VectorXd::Zero(static_cast<Eigen::Index>(topology.num_dihedrals))};
  for (std::size_t j = 0; j < topology.num_dihedrals; ++j) {
    const Vec3& origin = pose.joint_origins[j];
    Vec3 moment = Vec3::Zero();
    for (std::size_t i : topology.downstream[j]) {
      moment += (pose.atom_positions[i] - origin).cross(atomic_forces[i]);
    }
    out.tau(static_cast<Eigen::Index>(j)) = pose.unit_vectors[j].dot(moment);
  }
  return out;
}

double dihedral_angle(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  const Vec3 b0 = a - b;
  const Vec3 b1 = (c - b).normalized();
  const Vec3 b2 = d - c;
  const Vec3 v = b0 - b0.dot(b1) * b1;
  const Vec3 w = b2 - b2.dot(b1) * b1;
  const double x = v.dot(w);
  const double y = b1.cross(v).dot(w);
  return wrap_angle(std::atan2(y, x));
}

Eigen::VectorXd measure_backbone_dihedrals(const ChainPose& pose,
                                           const ChainTopology& topology) {
  const auto& r = pose.atom_positions;
  const auto& bb = topology.backbone;
  const std::size_t residues = topology.num_residues();
  Eigen::VectorXd out(static_cast<Eigen::Index>(topology.num_dihedrals));
  for (std::size_t k = 0; k < residues; ++k) {
    const Vec3& n = r[bb[3 * k]];
    const Vec3& ca = r[bb[3 * k + 1]];
    const Vec3& c = r[bb[3 * k + 2]];
    const auto phi = static_cast<Eigen::Index>(2 * k);
    out(phi) = k == 0 ? std::numeric_limits<double>::quiet_NaN()
                      : dihedral_angle(r[bb[3 * k - 1]], n, ca, c);
    // The C-terminal OXT is the last atom of the topology.
    const Vec3& next = k + 1 < residues ? r[bb[3 * k + 3]] : r.back();
    out(phi + 1) = dihedral_angle(n, ca, c, next);
  }
  return out;
}

}  // namespace kcm
