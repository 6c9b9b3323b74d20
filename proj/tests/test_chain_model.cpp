#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include <Eigen/Geometry>

#include "doctest.h"
#include "helpers.hpp"
#include "kcm/chain_model.hpp"
#include "kcm/error.hpp"
#include "oracle.hpp"

using kcm::AtomKind;
using kcm::ErrorCode;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const kcm::Error& e) {
    return e.code();
  }
  FAIL("expected kcm::Error");
  return ErrorCode::io;
}

}  // namespace

TEST_CASE("build_backbone: 15 planes give a 32-dimensional dihedral space") {
  const auto topo = testing::chain(15);
  CHECK(topo.num_dihedrals == 32);
  CHECK(topo.num_planes == 15);
  CHECK(topo.plane_atoms.size() == 15);
  CHECK(topo.zero_unit_vectors.size() == 32);
  CHECK(topo.zero_body_vectors.size() == 32);
}

TEST_CASE("build_backbone: smallest chain") {
  const auto topo = testing::chain(1);
  CHECK(topo.num_dihedrals == 4);
  CHECK(topo.num_planes == 1);
  CHECK(topo.num_residues() == 2);
}

TEST_CASE("build_backbone: dihedral count law over chain lengths") {
  for (std::size_t p = 1; p <= 24; ++p) {
    const auto topo = testing::chain(p);
    CHECK(topo.num_dihedrals == 2 * (p + 1));
    CHECK(topo.zero_body_vectors.size() == 2 * (p + 1));
    CHECK(topo.zero_unit_vectors.size() == 2 * (p + 1));
    CHECK(topo.downstream.size() == 2 * (p + 1));
  }
}

TEST_CASE("build_backbone: body vectors have their bond lengths") {
  const kcm::PeptideGeometry g;
  const auto topo = testing::chain(2);
  REQUIRE(topo.zero_body_vectors.size() == 6);
  for (std::size_t j = 0; j < 6; ++j) {
    // Even (0-based) joints are N-CA bonds, odd ones CA-C.
    const double bond = j % 2 == 0 ? g.n_ca : g.ca_c;
    CHECK(topo.zero_body_vectors[j].norm() == doctest::Approx(bond).epsilon(1e-14));
  }
  for (const auto& u : topo.zero_unit_vectors) CHECK(std::abs(u.norm() - 1.0) < 1e-12);
}

TEST_CASE("build_backbone: zero-position bond lengths match the geometry table") {
  const kcm::PeptideGeometry g;
  const auto topo = testing::chain(3);
  const auto& r = topo.zero_positions;
  for (std::size_t k = 0; k < topo.num_residues(); ++k) {
    const auto n = topo.backbone[3 * k], ca = topo.backbone[3 * k + 1], c = topo.backbone[3 * k + 2];
    CHECK((r[ca] - r[n]).norm() == doctest::Approx(g.n_ca).epsilon(1e-12));
    CHECK((r[c] - r[ca]).norm() == doctest::Approx(g.ca_c).epsilon(1e-12));
    if (k + 1 < topo.num_residues()) {
      CHECK((r[topo.backbone[3 * k + 3]] - r[c]).norm() == doctest::Approx(g.c_n).epsilon(1e-12));
    }
  }
}

TEST_CASE("build_backbone: termini and atom kinds") {
  const auto topo = testing::chain(3);
  CHECK(topo.atoms.front().kind == AtomKind::N_terminus);
  CHECK(topo.atoms.back().kind == AtomKind::C_terminus);
  CHECK(topo.zero_positions.front().norm() == 0.0);
  std::size_t ca = 0, placeholders = 0;
  for (const auto& a : topo.atoms) {
    ca += a.kind == AtomKind::C_alpha;
    placeholders += a.kind == AtomKind::side_placeholder;
  }
  CHECK(ca == topo.num_residues());
  CHECK(placeholders == topo.num_residues());
  // Each plane holds six atoms: CA, C, O, N, H, CA.
  for (const auto& plane : topo.plane_atoms) {
    CHECK(topo.atoms[plane[0]].kind == AtomKind::C_alpha);
    CHECK(topo.atoms[plane[1]].kind == AtomKind::C);
    CHECK(topo.atoms[plane[2]].kind == AtomKind::O);
    CHECK(topo.atoms[plane[3]].kind == AtomKind::N);
    CHECK(topo.atoms[plane[4]].kind == AtomKind::H_N);
    CHECK(topo.atoms[plane[5]].kind == AtomKind::C_alpha);
  }
}

TEST_CASE("build_backbone: peptide planes are planar at the zero position") {
  const auto topo = testing::chain(4);
  const auto& r = topo.zero_positions;
  for (const auto& plane : topo.plane_atoms) {
    const kcm::Vec3 normal =
        (r[plane[1]] - r[plane[0]]).cross(r[plane[5]] - r[plane[0]]).normalized();
    for (auto i : plane) CHECK(std::abs((r[i] - r[plane[0]]).dot(normal)) < 1e-12);
  }
}

TEST_CASE("build_backbone: plane coefficients are shared by every plane") {
  const auto topo = testing::chain(5);
  const auto& r = topo.zero_positions;
  for (std::size_t k = 0; k < topo.num_planes; ++k) {
    const auto& plane = topo.plane_atoms[k];
    const kcm::Vec3 a = topo.zero_body_vectors[2 * k + 1];
    const kcm::Vec3 b = topo.zero_body_vectors[2 * k + 2];
    const std::pair<std::size_t, kcm::PlaneSite> sites[] = {
        {plane[1], kcm::PlaneSite::carbonyl_c},
        {plane[2], kcm::PlaneSite::carbonyl_o},
        {plane[3], kcm::PlaneSite::amide_n},
        {plane[4], kcm::PlaneSite::amide_h},
    };
    for (const auto& [atom, site] : sites) {
      const auto& coeff = topo.plane_coefficients[static_cast<int>(site)];
      const kcm::Vec3 predicted = r[plane[0]] + coeff.k1 * a + coeff.k2 * b;
      CHECK((predicted - r[atom]).norm() < 1e-12);
    }
  }
}

TEST_CASE("build_backbone: exclusions are exactly the pairs within two bonds") {
  for (std::size_t planes = 1; planes <= 4; ++planes) {
    const auto topo = testing::chain(planes);
    const oracle::Reference ref(topo);
    const std::size_t n = topo.num_atoms();
    std::size_t expected = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const bool close = ref.graph_distance[i][j] <= 2;
        expected += close;
        CHECK(topo.excluded(i, j) == close);
        CHECK(topo.excluded(j, i) == close);
      }
    }
    CHECK(topo.exclusion_set.size() == expected);
    for (const auto& [i, j] : topo.exclusion_set) {
      CHECK(i < j);
      CHECK(ref.graph_distance[i][j] <= 2);
    }
  }
}

TEST_CASE("build_backbone: errors") {
  CHECK(code_of([] { testing::chain(0); }) == ErrorCode::invalid_topology);

  auto params = kcm::default_parameters();
  params.erase(AtomKind::H_alpha);
  try {
    testing::chain(2, params);
    FAIL("expected missing-parameter error");
  } catch (const kcm::Error& e) {
    CHECK(e.code() == ErrorCode::missing_parameter);
    CHECK(std::string(e.what()).find("H_alpha") != std::string::npos);
  }

  params = kcm::default_parameters();
  params[AtomKind::O].vdw_radius = 0.0;
  CHECK(code_of([&] { testing::chain(2, params); }) == ErrorCode::invalid_parameter);
  params = kcm::default_parameters();
  params[AtomKind::C].well_depth = -1.0;
  CHECK(code_of([&] { testing::chain(2, params); }) == ErrorCode::invalid_parameter);
  params = kcm::default_parameters();
  params[AtomKind::N].w_elec = -0.5;
  CHECK(code_of([&] { testing::chain(2, params); }) == ErrorCode::invalid_parameter);

  kcm::PeptideGeometry g;
  g.c_n = 0.0;
  CHECK(code_of([&] { kcm::build_backbone(2, g, kcm::default_parameters()); }) ==
        ErrorCode::invalid_parameter);
}

TEST_CASE("default parameters satisfy their invariants") {
  for (const auto& [kind, p] : kcm::default_parameters()) {
    CHECK_NOTHROW(kcm::validate(p, kind));
  }
  const auto side = kcm::default_parameters().at(AtomKind::side_placeholder);
  CHECK(side.w_elec == 0.0);
  CHECK(side.w_vdw == 0.0);
}

TEST_CASE("atom kind names round-trip") {
  for (AtomKind kind : kcm::kAllAtomKinds) {
    CHECK(kcm::atom_kind_from_string(kcm::to_string(kind)) == kind);
  }
  CHECK_FALSE(kcm::atom_kind_from_string("CB").has_value());
}

TEST_CASE("wrap_angles: examples") {
  constexpr double pi = std::numbers::pi;
  Eigen::VectorXd zeros = Eigen::VectorXd::Zero(4);
  CHECK(kcm::wrap_angles(zeros).theta == zeros);

  Eigen::VectorXd v(4);
  v << 3 * pi, -pi, pi, 2 * pi;
  const auto w = kcm::wrap_angles(v);
  CHECK(w.theta(0) == doctest::Approx(pi).epsilon(1e-15));
  CHECK(w.theta(1) == pi);
  CHECK(w.theta(2) == pi);
  CHECK(w.theta(3) == 0.0);

  Eigen::VectorXd seven = Eigen::VectorXd::Zero(4);
  seven(0) = 7.0;
  CHECK(kcm::wrap_angles(seven).theta(0) == doctest::Approx(7.0 - 2 * pi).epsilon(1e-15));
  CHECK(kcm::wrap_angles(seven).theta(0) == doctest::Approx(0.7168146928204138));
}

TEST_CASE("wrap_angles: non-finite input") {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(3);
  v(1) = std::nan("");
  CHECK(code_of([&] { kcm::wrap_angles(v); }) == ErrorCode::non_finite_angle);
  v(1) = INFINITY;
  CHECK(code_of([&] { kcm::wrap_angles(v); }) == ErrorCode::non_finite_angle);
}

TEST_CASE("wrap_angles: range, idempotence and 2pi offsets") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> dist(-50.0, 50.0);
  constexpr double pi = std::numbers::pi;
  for (int trial = 0; trial < 200; ++trial) {
    Eigen::VectorXd v(8);
    for (auto& x : v) x = dist(rng);
    const auto once = kcm::wrap_angles(v);
    const auto twice = kcm::wrap_angles(once.theta);
    CHECK(once == twice);
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      CHECK(once.theta(i) > -pi);
      CHECK(once.theta(i) <= pi);
      const double turns = (v(i) - once.theta(i)) / (2 * pi);
      CHECK(std::abs(turns - std::round(turns)) < 1e-12);
    }
  }
}
