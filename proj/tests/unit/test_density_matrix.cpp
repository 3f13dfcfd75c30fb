#include "doctest.h"
#include "support.hpp"

#include <numbers>

using namespace mks;

namespace {

DensityMatrix random_gamma(const BasisPtr& b, Eigen::Index m, std::mt19937_64& rng, double lo = 0.05,
                           double hi = 0.95) {
  std::uniform_real_distribution<double> occ(lo, hi);
  Eigen::VectorXd f(m);
  for (Eigen::Index i = 0; i < m; ++i) f[i] = occ(rng);
  return DensityMatrix(b, test::random_orthonormal(b->size(), m, rng), f);
}

/// S^{1,1} norm from singular values, with the plane-wave matrix assembled
/// from outer products.
double s11_oracle(const DensityMatrix& a, const DensityMatrix& b, const PlaneWaveBasis& big) {
  Eigen::MatrixXcd d = Eigen::MatrixXcd::Zero(big.size(), big.size());
  auto add = [&](const DensityMatrix& g, double sign) {
    for (Eigen::Index i = 0; i < g.states(); ++i) {
      Eigen::VectorXcd v = Eigen::VectorXcd::Zero(big.size());
      for (Eigen::Index r = 0; r < g.basis()->size(); ++r)
        v[*big.find(g.basis()->miller()[static_cast<std::size_t>(r)])] = g.orbitals()(r, i);
      d += sign * g.occupations()[i] * v * v.adjoint();
    }
  };
  add(a, 1.0);
  add(b, -1.0);
  Eigen::MatrixXcd kdk = d;
  for (Eigen::Index i = 0; i < big.size(); ++i)
    for (Eigen::Index j = 0; j < big.size(); ++j) kdk(i, j) *= std::sqrt(big.g2()[i] * big.g2()[j]);
  return Eigen::JacobiSVD<Eigen::MatrixXcd>(d).singularValues().sum() +
         Eigen::JacobiSVD<Eigen::MatrixXcd>(kdk).singularValues().sum();
}

}  // namespace

TEST_CASE("construction validates orbitals and occupations") {
  std::mt19937_64 rng(1);
  const BasisPtr b = build_basis(Cell::cubic(1, 5.0), 10.0);
  const Eigen::MatrixXcd q = test::random_orthonormal(b->size(), 3, rng);
  CHECK_NOTHROW(DensityMatrix(b, q, Eigen::Vector3d(1.0, 0.5, 0.0)));
  CHECK_THROWS_AS(DensityMatrix(b, 1.01 * q, Eigen::Vector3d(1.0, 0.5, 0.0)), std::invalid_argument);
  CHECK_THROWS_AS(DensityMatrix(b, q, Eigen::Vector3d(1.2, 0.5, 0.0)), std::invalid_argument);
  CHECK_THROWS_AS(DensityMatrix(b, q, Eigen::Vector3d(0.5, -0.1, 0.0)), std::invalid_argument);
  const DensityMatrix g(b, q, Eigen::Vector3d(1.0, 0.5, 0.5));
  CHECK(g.admissible(2.0));
  CHECK_FALSE(g.admissible(2.5));
  CHECK(g.orthonormality_error() < 1e-12);
}

TEST_CASE("densities of simple density matrices") {
  const BasisPtr b = build_basis(Cell::cubic(2, 4.0), 8.0);
  Eigen::MatrixXcd e = Eigen::MatrixXcd::Zero(b->size(), 3);
  for (Eigen::Index i = 0; i < 3; ++i) e(i * 5, i) = 1.0;
  const DensityMatrix one(b, e.leftCols(1), Eigen::VectorXd::Ones(1));
  CHECK(integrate(density(one)).real() == doctest::Approx(1.0).epsilon(1e-13));

  const DensityMatrix free(b, e, Eigen::Vector3d(1.0, 0.7, 0.3));
  const GridFunction rho = density(free);
  for (Eigen::Index x = 0; x < rho.size(); ++x) CHECK(rho[x].real() == doctest::Approx(2.0 / 16.0).epsilon(1e-13));
}

TEST_CASE("density matches pointwise orbital summation") {
  std::mt19937_64 rng(31);
  const BasisPtr b = build_basis(Cell::cubic(1, 6.0), 9.0);
  const DensityMatrix g = random_gamma(b, 4, rng);
  const GridFunction rho = density(g);
  const double norm = 1.0 / std::sqrt(b->cell().volume());
  for (Eigen::Index x = 0; x < b->grid_size(); ++x) {
    const Eigen::VectorXd r = b->grid_position(x);
    double expected = 0.0;
    for (Eigen::Index i = 0; i < g.states(); ++i) {
      cplx phi = 0.0;
      for (Eigen::Index k = 0; k < b->size(); ++k)
        phi += g.orbitals()(k, i) * norm * std::exp(cplx(0.0, b->g_vector(k).dot(r)));
      expected += g.occupations()[i] * std::norm(phi);
    }
    CHECK(std::abs(rho[x].real() - expected) < 1e-12);
    CHECK(rho[x].real() >= -1e-10);
  }
  CHECK(std::abs(integrate(rho).real() - g.trace()) < 1e-10);
  CHECK(std::abs(g.dense().trace().real() - g.trace()) < 1e-10);
}

TEST_CASE("S11 norm of simple operators") {
  const BasisPtr b = build_basis(Cell::cubic(1, 2.0 * std::numbers::pi), 8.0);
  Eigen::MatrixXcd e = Eigen::MatrixXcd::Zero(b->size(), 1);
  const Eigen::Index k = *b->find({3, 0, 0});
  e(k, 0) = 1.0;
  CHECK(s11_norm(DensityMatrix(b, e, Eigen::VectorXd::Ones(1))) == doctest::Approx(10.0));
  CHECK(s11_norm(DensityMatrix(b, e, Eigen::VectorXd::Zero(1))) == 0.0);
  CHECK(s11_norm_dense(DensityMatrix(b, e, Eigen::VectorXd::Ones(1)).dense(), *b) == doctest::Approx(10.0));
}

TEST_CASE("S11 distance matches the singular-value oracle") {
  std::mt19937_64 rng(41);
  const Cell cell = Cell::cubic(1, 5.0);
  const BasisPtr small = build_basis(cell, 5.0);
  const BasisPtr big = build_basis(cell, 14.0);
  REQUIRE(big->size() <= 25);
  for (int trial = 0; trial < 5; ++trial) {
    const DensityMatrix a = random_gamma(small, 3, rng);
    const DensityMatrix c = random_gamma(big, 4, rng);
    const double d = s11_distance(a, c);
    CHECK(test::rel_err(d, s11_oracle(a, c, *big)) < 1e-10);
    CHECK(test::rel_err(s11_distance(c, a), d) < 1e-12);
    CHECK(d <= orbital_distance(a, c) * (1 + 1e-10));
  }
  const DensityMatrix a = random_gamma(big, 3, rng);
  CHECK(test::rel_err(s11_norm(a), s11_norm_dense(a.dense(), *big)) < 1e-10);
}

TEST_CASE("spectral bounds and kinetic trace identity") {
  std::mt19937_64 rng(43);
  const BasisPtr b = build_basis(Cell::cubic(2, 4.0), 6.0);
  const DensityMatrix g = random_gamma(b, 5, rng, 0.0, 1.0);
  const Eigen::MatrixXcd dense = g.dense();
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::VectorXcd phi = test::random_vector(b->size(), rng);
    const double q = (phi.adjoint() * dense * phi)(0, 0).real();
    CHECK(q >= -1e-12);
    CHECK(q <= phi.squaredNorm() * (1 + 1e-12));
  }
  const Eigen::VectorXcd k = b->g2().cwiseSqrt().cast<cplx>();
  const double kinetic_trace = (k.asDiagonal() * dense * k.asDiagonal()).trace().real();
  CHECK(test::rel_err(2.0 * kinetic_energy(g), kinetic_trace) < 1e-12);
}

TEST_CASE("free energy of free electrons") {
  const BasisPtr b = build_basis(Cell::cubic(1, 2.0 * std::numbers::pi), 10.0);
  Model m;
  m.xc = XcFunctional::none();
  m.interactions = {false, false};
  m.electrons = 3.0;
  m.smearing = Smearing(3.0);
  Eigen::MatrixXcd e = Eigen::MatrixXcd::Zero(b->size(), 3);
  e(*b->find({0, 0, 0}), 0) = 1.0;
  e(*b->find({1, 0, 0}), 1) = 1.0;
  e(*b->find({-1, 0, 0}), 2) = 1.0;
  const FreeEnergyBreakdown full = free_energy(DensityMatrix(b, e, Eigen::Vector3d(1, 1, 1)), m);
  CHECK(full.total == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(full.entropy == 0.0);

  m.electrons = 1.0;
  const FreeEnergyBreakdown half = free_energy(DensityMatrix(b, e.rightCols(2), Eigen::Vector2d(0.5, 0.5)), m);
  CHECK(half.entropy == doctest::Approx(-2.0 * std::log(2.0) / 3.0).epsilon(1e-14));
  CHECK(half.total == doctest::Approx(0.5 - 2.0 * std::log(2.0) / 3.0).epsilon(1e-14));
}

TEST_CASE("free energy breakdown sums to its total") {
  std::mt19937_64 rng(47);
  const BasisPtr b = build_basis(test::chain_cell(), 12.0);
  const FreeEnergyBreakdown f = free_energy(random_gamma(b, 4, rng), test::chain_model());
  const double sum = f.kinetic + f.external + f.hartree + f.xc + f.entropy;
  CHECK(std::abs(sum - f.total) <= 1e-12 * std::abs(f.total));
  CHECK(f.hartree >= 0.0);
}

TEST_CASE("free energy directional derivative") {
  std::mt19937_64 rng(53);
  const BasisPtr b = build_basis(test::chain_cell(), 10.0);
  Model model = test::chain_model();
  const DensityMatrix g = random_gamma(b, 4, rng, 0.2, 0.8);
  model.electrons = g.trace();
  for (int trial = 0; trial < 4; ++trial) {
    const test::AdmissibleCurve curve = test::random_curve(g, rng);
    const double eps = 1e-4;
    const double fd =
        (free_energy(curve.at(eps), model).total - free_energy(curve.at(-eps), model).total) / (2 * eps);
    CHECK(test::rel_err(fd, test::free_energy_derivative(model, g, curve.tangent())) < 1e-5);
  }
}

TEST_CASE("gauge invariance under mixing of equally occupied orbitals") {
  std::mt19937_64 rng(59);
  const BasisPtr b = build_basis(test::chain_cell(), 10.0);
  const Model model = test::chain_model();
  const Eigen::MatrixXcd q = test::random_orthonormal(b->size(), 4, rng);
  const Eigen::Vector4d f(0.6, 0.6, 0.6, 0.2);
  Eigen::MatrixXcd u = Eigen::MatrixXcd::Identity(4, 4);
  u.topLeftCorner(3, 3) = test::random_orthonormal(3, 3, rng);
  const DensityMatrix g1(b, q, f), g2(b, q * u, f);
  CHECK(l2_norm(density(g1) - density(g2)) < 1e-10);
  CHECK(std::abs(free_energy(g1, model).total - free_energy(g2, model).total) < 1e-10);
  CHECK(std::abs(s11_norm(g1) - s11_norm(g2)) < 1e-10);
  CHECK(s11_distance(g1, g2) < 1e-10);
}

TEST_CASE("Galerkin projection") {
  std::mt19937_64 rng(61);
  const Cell cell = Cell::cubic(1, 6.0);
  const BasisPtr fine = build_basis(cell, 40.0);
  const BasisPtr coarse = build_basis(cell, 6.0);

  SUBCASE("representable matrices are unchanged") {
    const DensityMatrix g = random_gamma(coarse, 3, rng);
    const DensityMatrix lifted(fine, embed_coefficients(g.orbitals(), *coarse, *fine), g.occupations());
    CHECK(s11_distance(project_dm(lifted, coarse), g) < 1e-12);
    CHECK((project_dm_raw(lifted, *coarse) - lifted.dense()).norm() < 1e-12);
  }

  SUBCASE("annihilated orbitals are rejected") {
    Eigen::MatrixXcd e = Eigen::MatrixXcd::Zero(fine->size(), 1);
    e(*fine->find({7, 0, 0}), 0) = 1.0;
    CHECK_THROWS_AS(project_dm(DensityMatrix(fine, e, Eigen::VectorXd::Ones(1)), coarse), std::domain_error);
    const DensityMatrix small(coarse, test::random_orthonormal(coarse->size(), 1, rng), Eigen::VectorXd::Ones(1));
    CHECK_THROWS_AS(project_dm(small, fine), std::invalid_argument);
  }

  SUBCASE("projection error vanishes with the cutoff and obeys the tail bound") {
    // Smooth orbitals: Gaussian-damped coefficients.
    Eigen::MatrixXcd c = test::random_matrix(fine->size(), 3, rng);
    for (Eigen::Index k = 0; k < fine->size(); ++k) c.row(k) *= std::exp(-0.4 * fine->g2()[k]);
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(c);
    const DensityMatrix g(fine, qr.householderQ() * Eigen::MatrixXcd::Identity(fine->size(), 3),
                          Eigen::Vector3d(1.0, 0.8, 0.3));
    double previous = std::numeric_limits<double>::infinity();
    for (double ec : {4.0, 8.0, 12.0, 16.0, 20.0}) {
      const BasisPtr target = build_basis(cell, ec);
      const Eigen::MatrixXcd raw = project_dm_raw(g, *target);
      const double err = s11_norm_dense(raw - g.dense(), *fine);
      double bound = 0.0;
      for (Eigen::Index i = 0; i < 3; ++i) {
        Eigen::VectorXcd phi = g.orbitals().col(i), tail = phi;
        for (Eigen::Index k = 0; k < fine->size(); ++k)
          if (fine->g2()[k] <= 2.0 * ec) tail[k] = 0.0;
        bound += g.occupations()[i] * h1_norm(*fine, tail) * (h1_norm(*fine, phi) + h1_norm(*fine, phi - tail));
      }
      CHECK(err <= bound * (1 + 1e-10));
      CHECK(err < previous);
      previous = err;
      const DensityMatrix projected = project_dm(g, target);
      CHECK(projected.orthonormality_error() < 1e-12);
      CHECK((projected.occupations() - g.occupations()).norm() == 0.0);
    }
    CHECK(previous < 1e-5);
  }
}
