#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "kcm/chain_model.hpp"
#include "kcm/energetics.hpp"
#include "kcm/kinematics.hpp"

namespace kcm {

enum class SolverMode { conventional, sgd };

const char* to_string(SolverMode mode);
std::optional<SolverMode> solver_mode_from_string(std::string_view name);

struct SolverConfig {
  SolverMode mode = SolverMode::sgd;
  double kappa0 = 0.01;       // rad
  double gamma0 = 0.99;       // geometric decay, sgd only
  double tau_tol = 0.05;      // kcal/mol/rad, on |tau|_2
  std::size_t max_iters = 3000;
  std::size_t record_every = 1;

  bool operator==(const SolverConfig&) const = default;

  // Throws invalid_schedule for gamma0 outside (0, 1), invalid_solver_config
  // for the other bounds.
  void validate() const;
};

struct IterationRecord {
  std::size_t k = 0;
  Conformation theta;
  EnergyBreakdown energy;
  double tau_norm_2 = 0.0;
  double tau_norm_inf = 0.0;
  double kappa_k = 0.0;
  // sgn(tau(theta_k)), kept for the convergence diagnostics.
  Eigen::VectorXd tau_sign;
};

enum class Termination { converged, max_iters, zero_torque };
const char* to_string(Termination t);

struct FoldingTrajectory {
  SolverConfig solver;
  std::vector<IterationRecord> records;
  Termination terminated_by = Termination::max_iters;
  Conformation final_theta;
  // Total energy at every evaluated iteration, k = 0..last.
  std::vector<double> energy_history;
  // Iterations k > 0 whose energy exceeded that of k - 1.
  std::vector<std::size_t> energy_increases;

  std::size_t last_iteration() const { return energy_history.size() - 1; }
};

// theta + kappa0 * tau / |tau|_inf, or nullopt when tau is identically zero.
std::optional<Conformation> conventional_step(const Conformation& theta,
                                              const TorqueVector& tau, double kappa0);

// theta + kappa * sgn(tau), with sgn(0) = 0.
Conformation sgd_step(const Conformation& theta, const TorqueVector& tau, double kappa);

// gamma0 * kappa. Throws invalid_schedule unless 0 < gamma0 < 1 and kappa > 0.
double schedule_geometric(double kappa, double gamma0);

Eigen::VectorXd sign(const Eigen::VectorXd& v);

// Anything that yields an energy and a generalized torque (-dG/dtheta).
using Objective = std::function<TorqueEvaluation(const Conformation&)>;

// Runs the selected iteration from theta0 until |tau|_2 < tau_tol, the
// iteration cap, or (conventional mode) an exactly zero torque. Angles are
// wrapped into (-pi, pi] after every step when `wrap` is set.
FoldingTrajectory minimize(const Objective& objective, const Conformation& theta0,
                           const SolverConfig& cfg, bool wrap = true);

FoldingTrajectory run_folding(const ChainTopology& topology, const Conformation& theta0,
                              const SolverConfig& cfg, const ForceFieldConfig& ff);

struct MoulayEntry {
  std::size_t k = 0;
  double kappa_k = 0.0;
  double projection = 0.0;  // (theta* - theta_k)^T sgn(tau(theta_k))
  double distance = 0.0;    // |theta* - theta_k|_2
  bool step_bound = false;  // condition 1: 0 < kappa_k < 2 * projection
  // Largest c for which condition 2 holds at this iteration and alpha.
  double c_max = 0.0;
  bool descent = false;     // condition 2 for the supplied c
};

struct MoulayReport {
  double alpha = 1.0;
  double c = 0.0;
  bool vanishing_steps = false;  // condition 3
  std::vector<MoulayEntry> entries;
};

// Pointwise evaluation of the sign-descent convergence conditions at every
// recorded iteration. Differences theta* - theta_k are taken modulo 2 pi.
MoulayReport check_moulay_conditions(const FoldingTrajectory& trajectory,
                                     const Conformation& theta_star, double alpha,
                                     double c);

}  // namespace kcm
