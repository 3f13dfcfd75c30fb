#pragma once

#include <cmath>
#include <random>

#include <unsupported/Eigen/MatrixFunctions>

#include "mks/config.hpp"
#include "mks/scf.hpp"

namespace mks::test {

inline Eigen::VectorXcd random_vector(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Eigen::VectorXcd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = cplx(normal(rng), normal(rng));
  return v;
}

inline Eigen::MatrixXcd random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXcd a(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) a(i, j) = cplx(normal(rng), normal(rng));
  return a;
}

inline Eigen::MatrixXcd random_hermitian(Eigen::Index n, std::mt19937_64& rng) {
  const Eigen::MatrixXcd a = random_matrix(n, n, rng);
  return 0.5 * (a + a.adjoint());
}

/// Orthonormal columns from a QR of a random matrix.
inline Eigen::MatrixXcd random_orthonormal(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  Eigen::HouseholderQR<Eigen::MatrixXcd> qr(random_matrix(rows, cols, rng));
  return qr.householderQ() * Eigen::MatrixXcd::Identity(rows, cols);
}

/// Coefficients of a real function: c(-G) = conj(c(G)).
inline Eigen::VectorXcd random_real_coefficients(const PlaneWaveBasis& basis, std::mt19937_64& rng) {
  Eigen::VectorXcd c = random_vector(basis.size(), rng);
  for (Eigen::Index i = 0; i < basis.size(); ++i) {
    const Miller& m = basis.miller()[static_cast<std::size_t>(i)];
    const auto j = basis.find({-m[0], -m[1], -m[2]});
    if (*j == i) c[i] = c[i].real();
    else if (*j < i) c[i] = std::conj(c[*j]);
  }
  return c;
}

/// A positive smooth density on basis' grid with integral `total`.
inline GridFunction smooth_density(const BasisPtr& basis, double total, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::acos(-1.0));
  std::vector<double> values(static_cast<std::size_t>(basis->grid_size()));
  const double a = phase(rng), b = phase(rng);
  for (Eigen::Index x = 0; x < basis->grid_size(); ++x) {
    const Eigen::VectorXd r = basis->grid_position(x);
    const Eigen::VectorXd b0 = basis->cell().reciprocal().row(0).transpose();
    const double t = r.dot(b0);
    values[static_cast<std::size_t>(x)] = 1.0 + 0.4 * std::cos(t + a) + 0.2 * std::sin(2.0 * t + b);
  }
  GridFunction rho = GridFunction::from_real(basis, values);
  rho *= total / integrate(rho).real();
  return rho;
}

/// Small interacting 1D model used across module tests.
inline Model chain_model(bool xc = true) {
  Model m;
  m.external = ExternalPotential::gaussian_wells({{Eigen::VectorXd::Constant(1, 1.3), 4.0, 0.7},
                                                  {Eigen::VectorXd::Constant(1, 4.1), 3.2, 0.8}});
  m.xc = xc ? XcFunctional::dirac() : XcFunctional::none();
  m.interactions = {true, xc};
  m.electrons = 2.0;
  m.smearing = Smearing(10.0);
  return m;
}

inline Cell chain_cell() { return Cell::cubic(1, 6.0); }

inline ScfOptions tight_options() {
  ScfOptions o;
  o.tol_rho = 1e-11;
  o.tol_f = 1e-13;
  o.buffer_states = 4;
  return o;
}


/// Curve Gamma(eps) = Phi U(eps) diag(f + eps df) U(eps)^H Phi^H with
/// U = exp(eps A), A anti-Hermitian, sum(df) = 0: stays inside the admissible
/// set for small eps. Its derivative at 0, in the orbital frame, is
///   Psi = A diag(f) - diag(f) A + diag(df).
struct AdmissibleCurve {
  DensityMatrix gamma;
  Eigen::MatrixXcd a;
  Eigen::VectorXd df;

  DensityMatrix at(double eps) const {
    const Eigen::MatrixXcd u = (eps * a).exp();
    return DensityMatrix(gamma.basis(), gamma.orbitals() * u, gamma.occupations() + eps * df);
  }
  Eigen::MatrixXcd tangent() const {
    const Eigen::MatrixXcd f = gamma.occupations().cast<cplx>().asDiagonal();
    Eigen::MatrixXcd psi = a * f - f * a;
    psi.diagonal() += df.cast<cplx>();
    return psi;
  }
};

inline AdmissibleCurve random_curve(const DensityMatrix& gamma, std::mt19937_64& rng) {
  const Eigen::Index m = gamma.states();
  const Eigen::MatrixXcd h = random_hermitian(m, rng);
  std::normal_distribution<double> normal;
  Eigen::VectorXd df(m);
  for (Eigen::Index i = 0; i < m; ++i) df[i] = normal(rng);
  df.array() -= df.mean();
  return {gamma, cplx(0.0, 1.0) * h, 0.1 * df};
}

/// dF along Psi predicted by Tr((H(rho) + beta^-1 (ln G - ln(1 - G))) Psi),
/// Psi given in gamma's orbital frame; all occupations must lie in (0, 1).
inline double free_energy_derivative(const Model& model, const DensityMatrix& gamma, const Eigen::MatrixXcd& psi) {
  const Hamiltonian h = build_hamiltonian(model, gamma.basis(), density(gamma));
  const Eigen::MatrixXcd frame = gamma.orbitals().adjoint() * h.apply(gamma.orbitals());
  double d = (frame.transpose().cwiseProduct(psi)).sum().real();
  for (Eigen::Index i = 0; i < gamma.states(); ++i) {
    const double f = gamma.occupations()[i];
    d += std::log(f / (1.0 - f)) / model.smearing.beta() * psi(i, i).real();
  }
  return d;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace mks::test
