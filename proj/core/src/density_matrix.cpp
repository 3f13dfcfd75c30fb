#include "mks/density_matrix.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mks {

namespace {

constexpr double orthonormality_tolerance = 1e-8;

double trace_norm_hermitian(const Eigen::MatrixXcd& a) {
  if (a.size() == 0) return 0.0;
  const Eigen::MatrixXcd h = 0.5 * (a + a.adjoint());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().sum();
}

Eigen::VectorXd h1_weights(const PlaneWaveBasis& basis) { return (1.0 + basis.g2().array()).matrix(); }

double h1_norm_column(const PlaneWaveBasis& basis, const Eigen::VectorXcd& c) {
  return std::sqrt((h1_weights(basis).array() * c.array().abs2()).sum());
}

const PlaneWaveBasis& larger(const PlaneWaveBasis& a, const PlaneWaveBasis& b) { return a.size() >= b.size() ? a : b; }

}  // namespace

DensityMatrix::DensityMatrix(BasisPtr basis, Eigen::MatrixXcd orbitals, Eigen::VectorXd occupations,
                             std::optional<Eigen::VectorXd> eigenvalues)
    : basis_(std::move(basis)),
      orbitals_(std::move(orbitals)),
      occupations_(std::move(occupations)),
      eigenvalues_(std::move(eigenvalues)) {
  if (!basis_) throw std::invalid_argument("DensityMatrix: null basis");
  if (orbitals_.rows() != basis_->size())
    throw std::invalid_argument("DensityMatrix: orbital length does not match the basis");
  if (orbitals_.cols() != occupations_.size())
    throw std::invalid_argument("DensityMatrix: one occupation per orbital required");
  if (eigenvalues_ && eigenvalues_->size() != occupations_.size())
    throw std::invalid_argument("DensityMatrix: one eigenvalue per orbital required");
  for (Eigen::Index i = 0; i < occupations_.size(); ++i) {
    const double f = occupations_[i];
    if (!(f >= -1e-12 && f <= 1.0 + 1e-12)) throw std::invalid_argument("DensityMatrix: occupation outside [0, 1]");
    occupations_[i] = std::clamp(f, 0.0, 1.0);
  }
  if (orthonormality_error() > orthonormality_tolerance)
    throw std::invalid_argument("DensityMatrix: orbitals are not orthonormal");
}

double DensityMatrix::orthonormality_error() const {
  if (orbitals_.cols() == 0) return 0.0;
  const Eigen::MatrixXcd s = orbitals_.adjoint() * orbitals_;
  return (s - Eigen::MatrixXcd::Identity(s.rows(), s.cols())).cwiseAbs().maxCoeff();
}

bool DensityMatrix::admissible(double electrons, double tol) const {
  if (orthonormality_error() > tol) return false;
  if (occupations_.size() > 0 && (occupations_.minCoeff() < -tol || occupations_.maxCoeff() > 1.0 + tol)) return false;
  return std::abs(trace() - electrons) <= tol * std::max(1.0, electrons);
}

Eigen::MatrixXcd DensityMatrix::dense(const PlaneWaveBasis& target) const {
  const Eigen::MatrixXcd c = embed_coefficients(orbitals_, *basis_, target);
  return c * occupations_.cast<cplx>().asDiagonal() * c.adjoint();
}

Eigen::MatrixXcd embed_coefficients(const Eigen::MatrixXcd& coefficients, const PlaneWaveBasis& from,
                                    const PlaneWaveBasis& to) {
  if (coefficients.rows() != from.size()) throw std::invalid_argument("embed_coefficients: size mismatch");
  const auto map = embedding(from, to);
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(to.size(), coefficients.cols());
  for (Eigen::Index i = 0; i < from.size(); ++i) out.row(map[static_cast<std::size_t>(i)]) = coefficients.row(i);
  return out;
}

GridFunction density(const DensityMatrix& gamma) {
  const auto& basis = gamma.basis();
  std::vector<cplx> rho(static_cast<std::size_t>(basis->grid_size()), 0.0);
  for (Eigen::Index i = 0; i < gamma.states(); ++i) {
    const double f = gamma.occupations()[i];
    if (f == 0.0) continue;
    const auto phi = to_grid(basis, gamma.orbitals().col(i));
    for (std::size_t k = 0; k < rho.size(); ++k) rho[k] += f * std::norm(phi[static_cast<Eigen::Index>(k)]);
  }
  return GridFunction(basis, std::move(rho));
}

double s11_norm(const DensityMatrix& gamma) {
  const Eigen::VectorXd w = h1_weights(*gamma.basis());
  double sum = 0.0;
  for (Eigen::Index i = 0; i < gamma.states(); ++i)
    sum += std::abs(gamma.occupations()[i]) * (w.array() * gamma.orbitals().col(i).array().abs2()).sum();
  return sum;
}

double s11_norm_dense(const Eigen::MatrixXcd& op, const PlaneWaveBasis& basis) {
  if (op.rows() != basis.size() || op.cols() != basis.size())
    throw std::invalid_argument("s11_norm_dense: operator does not match the basis");
  const Eigen::VectorXcd k = basis.g2().cwiseSqrt().cast<cplx>();
  const Eigen::MatrixXcd kak = k.asDiagonal() * op * k.asDiagonal();
  return trace_norm_hermitian(op) + trace_norm_hermitian(kak);
}

double s11_distance(const DensityMatrix& a, const DensityMatrix& b) {
  if (!(a.basis()->cell() == b.basis()->cell())) throw std::invalid_argument("s11_distance: cells differ");
  const PlaneWaveBasis& big = larger(*a.basis(), *b.basis());
  return s11_norm_dense(a.dense(big) - b.dense(big), big);
}

double orbital_distance(const DensityMatrix& a, const DensityMatrix& b) {
  if (!(a.basis()->cell() == b.basis()->cell())) throw std::invalid_argument("orbital_distance: cells differ");
  const PlaneWaveBasis& big = larger(*a.basis(), *b.basis());
  const Eigen::MatrixXcd ca = embed_coefficients(a.orbitals(), *a.basis(), big);
  const Eigen::MatrixXcd cb = embed_coefficients(b.orbitals(), *b.basis(), big);
  const Eigen::Index n = std::max(a.states(), b.states());
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const bool has_a = i < a.states(), has_b = i < b.states();
    const double fa = has_a ? a.occupations()[i] : 0.0;
    const double fb = has_b ? b.occupations()[i] : 0.0;
    Eigen::VectorXcd pa = has_a ? Eigen::VectorXcd(ca.col(i)) : Eigen::VectorXcd::Zero(big.size());
    Eigen::VectorXcd pb = has_b ? Eigen::VectorXcd(cb.col(i)) : Eigen::VectorXcd::Zero(big.size());
    const cplx overlap = pb.dot(pa);
    if (std::abs(overlap) > 0.0) pb *= overlap / std::abs(overlap);
    const double na = h1_norm_column(big, pa), nb = h1_norm_column(big, pb);
    sum += fa * h1_norm_column(big, pa - pb) * (na + nb) + std::abs(fa - fb) * nb * nb;
  }
  return sum;
}

double kinetic_energy(const DensityMatrix& gamma) {
  const Eigen::VectorXd& g2 = gamma.basis()->g2();
  double sum = 0.0;
  for (Eigen::Index i = 0; i < gamma.states(); ++i)
    sum += gamma.occupations()[i] * 0.5 * (g2.array() * gamma.orbitals().col(i).array().abs2()).sum();
  return sum;
}

FreeEnergyBreakdown free_energy(const DensityMatrix& gamma, const Model& model) {
  const GridFunction rho = density(gamma);
  const auto terms = assemble_effective(rho, model.external, model.xc, model.interactions);
  FreeEnergyBreakdown e;
  e.kinetic = kinetic_energy(gamma);
  e.external = terms.external;
  e.hartree = terms.hartree;
  e.xc = terms.xc;
  e.entropy = entropy(gamma.occupations(), model.smearing);
  e.total = e.kinetic + e.external + e.hartree + e.xc + e.entropy;
  return e;
}

namespace {

Eigen::MatrixXcd truncate(const DensityMatrix& gamma, const PlaneWaveBasis& target) {
  const auto map = embedding(target, *gamma.basis());
  Eigen::MatrixXcd c(target.size(), gamma.states());
  for (Eigen::Index i = 0; i < target.size(); ++i) c.row(i) = gamma.orbitals().row(map[static_cast<std::size_t>(i)]);
  return c;
}

}  // namespace

DensityMatrix project_dm(const DensityMatrix& gamma, const BasisPtr& target) {
  Eigen::MatrixXcd c = truncate(gamma, *target);
  if (c.cols() > 0) {
    const Eigen::MatrixXcd s = c.adjoint() * c;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(s);
    const Eigen::VectorXd lambda = es.eigenvalues();
    if (lambda.minCoeff() < 1e-14)
      throw std::domain_error("project_dm: truncated orbitals are linearly dependent");
    const Eigen::MatrixXcd inv_sqrt =
        es.eigenvectors() * lambda.cwiseSqrt().cwiseInverse().cast<cplx>().asDiagonal() * es.eigenvectors().adjoint();
    c = c * inv_sqrt;
  }
  return DensityMatrix(target, std::move(c), gamma.occupations());
}

Eigen::MatrixXcd project_dm_raw(const DensityMatrix& gamma, const PlaneWaveBasis& target) {
  const Eigen::MatrixXcd c = embed_coefficients(truncate(gamma, target), target, *gamma.basis());
  return c * gamma.occupations().cast<cplx>().asDiagonal() * c.adjoint();
}

}  // namespace mks
