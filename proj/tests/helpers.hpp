#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>

#include "kcm/chain_model.hpp"

namespace testing {

inline kcm::ChainTopology chain(std::size_t planes,
                                const kcm::ParameterTable& params = kcm::default_parameters()) {
  return kcm::build_backbone(planes, kcm::PeptideGeometry{}, params);
}

inline kcm::Conformation random_theta(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> angle(-3.141592653589793, 3.141592653589793);
  Eigen::VectorXd t(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < t.size(); ++i) t(i) = angle(rng);
  return kcm::Conformation(t);
}

inline kcm::ParameterTable zero_interaction_parameters() {
  kcm::ParameterTable t = kcm::default_parameters();
  for (auto& [kind, p] : t) {
    p.charge = 0.0;
    p.well_depth = 0.0;
  }
  return t;
}

// Componentwise relative error; exact zeros on both sides count as agreement.
inline double relative_error(double value, double reference) {
  const double scale = std::max(std::abs(value), std::abs(reference));
  return scale == 0.0 ? 0.0 : std::abs(value - reference) / scale;
}

// Componentwise relative error with the denominator floored at 1e-3 of the
// largest reference component. Needed because some components vanish
// identically (the first joint turns the whole chain rigidly), where a
// finite-difference reference is pure noise.
inline double floored_relative_error(double value, double reference, double largest) {
  const double scale = std::max({std::abs(value), std::abs(reference), 1e-3 * largest});
  return scale == 0.0 ? 0.0 : std::abs(value - reference) / scale;
}

}  // namespace testing
