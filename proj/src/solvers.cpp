#include "kcm/solvers.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "kcm/error.hpp"

namespace kcm {

const char* to_string(SolverMode mode) {
  return mode == SolverMode::conventional ? "conventional" : "sgd";
}

std::optional<SolverMode> solver_mode_from_string(std::string_view name) {
  if (name == "conventional") return SolverMode::conventional;
  if (name == "sgd") return SolverMode::sgd;
  return std::nullopt;
}

const char* to_string(Termination t) {
  switch (t) {
    case Termination::converged: return "converged";
    case Termination::max_iters: return "max_iters";
    case Termination::zero_torque: return "zero_torque";
  }
  return "?";
}

void SolverConfig::validate() const {
  if (!(kappa0 > 0.0) || !std::isfinite(kappa0)) {
    throw Error(ErrorCode::invalid_solver_config, "kappa0 must be > 0");
  }
  if (!(gamma0 > 0.0 && gamma0 < 1.0)) {
    throw Error(ErrorCode::invalid_schedule,
                "gamma0 must lie in (0, 1) so the step sizes contract to zero");
  }
  if (!(tau_tol > 0.0) || !std::isfinite(tau_tol)) {
    throw Error(ErrorCode::invalid_solver_config, "tau_tol must be > 0");
  }
  if (max_iters < 1) {
    throw Error(ErrorCode::invalid_solver_config, "max_iters must be >= 1");
  }
  if (record_every < 1) {
    throw Error(ErrorCode::invalid_solver_config, "record_every must be >= 1");
  }
}

namespace {

void require_same_size(const Conformation& theta, const TorqueVector& tau) {
  if (theta.size() != tau.size()) {
    std::ostringstream os;
    os << "torque has " << tau.size() << " components, conformation has " << theta.size();
    throw Error(ErrorCode::conformation_dimension, os.str());
  }
}

void require_finite(const Conformation& theta, const TorqueVector& tau) {
  if (!theta.theta.allFinite()) {
    throw Error(ErrorCode::non_finite_angle, "conformation is not finite");
  }
  if (!tau.tau.allFinite()) {
    throw Error(ErrorCode::non_finite_force, "torque is not finite");
  }
}

}  // namespace

Eigen::VectorXd sign(const Eigen::VectorXd& v) {
  return v.unaryExpr([](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

std::optional<Conformation> conventional_step(const Conformation& theta,
                                              const TorqueVector& tau, double kappa0) {
  require_same_size(theta, tau);
  require_finite(theta, tau);
  const double scale = tau.tau.lpNorm<Eigen::Infinity>();
  if (scale == 0.0) return std::nullopt;
  return Conformation(theta.theta + kappa0 * (tau.tau / scale));
}

Conformation sgd_step(const Conformation& theta, const TorqueVector& tau, double kappa) {
  require_same_size(theta, tau);
  require_finite(theta, tau);
  if (!(kappa > 0.0)) {
    throw Error(ErrorCode::invalid_schedule, "step size must be > 0");
  }
  return Conformation(theta.theta + kappa * sign(tau.tau));
}

double schedule_geometric(double kappa, double gamma0) {
  if (!(gamma0 > 0.0 && gamma0 < 1.0)) {
    throw Error(ErrorCode::invalid_schedule,
                "gamma0 must lie in (0, 1) so the step sizes contract to zero");
  }
  if (!(kappa > 0.0)) {
    throw Error(ErrorCode::invalid_schedule, "step size must be > 0");
  }
  return gamma0 * kappa;
}

FoldingTrajectory minimize(const Objective& objective, const Conformation& theta0,
                           const SolverConfig& cfg, bool wrap) {
  cfg.validate();
  FoldingTrajectory traj;
  traj.solver = cfg;
  Conformation theta = wrap ? wrap_angles(theta0.theta) : theta0;
  double kappa = cfg.kappa0;

  for (std::size_t k = 0;; ++k) {
    TorqueEvaluation eval;
    try {
      eval = objective(theta);
    } catch (const Error& e) {
      std::ostringstream os;
      os << "iteration " << k << ": " << e.what();
      throw Error(e.code(), os.str());
    }
    const double norm2 = eval.torque.tau.norm();
    const double norm_inf = eval.torque.tau.lpNorm<Eigen::Infinity>();

    if (!traj.energy_history.empty() && eval.energy.total > traj.energy_history.back()) {
      traj.energy_increases.push_back(k);
    }
    traj.energy_history.push_back(eval.energy.total);

    std::optional<Termination> done;
    if (cfg.mode == SolverMode::conventional && norm_inf == 0.0) {
      done = Termination::zero_torque;
    } else if (norm2 < cfg.tau_tol) {
      done = Termination::converged;
    } else if (k >= cfg.max_iters) {
      done = Termination::max_iters;
    }

    if (k % cfg.record_every == 0 || done) {
      traj.records.push_back({k, theta, eval.energy, norm2, norm_inf, kappa,
                              sign(eval.torque.tau)});
    }
    if (done) {
      traj.terminated_by = *done;
      traj.final_theta = theta;
      return traj;
    }

    if (cfg.mode == SolverMode::conventional) {
      theta = *conventional_step(theta, eval.torque, cfg.kappa0);
    } else {
      theta = sgd_step(theta, eval.torque, kappa);
      kappa = schedule_geometric(kappa, cfg.gamma0);
    }
    if (wrap) theta = wrap_angles(theta.theta);
  }
}

FoldingTrajectory run_folding(const ChainTopology& topology, const Conformation& theta0,
                              const SolverConfig& cfg, const ForceFieldConfig& ff) {
  if (theta0.size() != topology.num_dihedrals) {
    std::ostringstream os;
    os << "initial conformation has " << theta0.size() << " angles, topology expects "
       << topology.num_dihedrals;
    throw Error(ErrorCode::conformation_dimension, os.str());
  }
  ff.validate();
  return minimize(
      [&](const Conformation& theta) { return evaluate(topology, theta, ff); }, theta0,
      cfg);
}

MoulayReport check_moulay_conditions(const FoldingTrajectory& trajectory,
                                     const Conformation& theta_star, double alpha,
                                     double c) {
  MoulayReport report;
  report.alpha = alpha;
  report.c = c;
  report.vanishing_steps = trajectory.solver.mode == SolverMode::sgd &&
                           trajectory.solver.gamma0 > 0.0 && trajectory.solver.gamma0 < 1.0;
  for (const IterationRecord& rec : trajectory.records) {
    if (rec.theta.size() != theta_star.size()) {
      std::ostringstream os;
      os << "theta* has " << theta_star.size() << " angles, trajectory has "
         << rec.theta.size();
      throw Error(ErrorCode::conformation_dimension, os.str());
    }
    Eigen::VectorXd diff = theta_star.theta - rec.theta.theta;
    for (Eigen::Index i = 0; i < diff.size(); ++i) diff(i) = wrap_angle(diff(i));

    MoulayEntry e;
    e.k = rec.k;
    e.kappa_k = rec.kappa_k;
    e.projection = diff.dot(rec.tau_sign);
    e.distance = diff.norm();
    e.step_bound = rec.kappa_k > 0.0 && rec.kappa_k < 2.0 * e.projection;
    const double lhs = rec.kappa_k * e.projection;
    if (e.distance > 0.0) {
      e.c_max = lhs / std::pow(e.distance, alpha);
      e.descent = lhs >= c * std::pow(e.distance, alpha);
    } else {
      e.c_max = std::numeric_limits<double>::infinity();
      e.descent = lhs >= 0.0;
    }
    report.entries.push_back(e);
  }
  return report;
}

}  // namespace kcm
