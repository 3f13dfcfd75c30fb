#pragma once

// One-body density matrices Gamma = sum_i f_i |phi_i><phi_i| stored in
// spectral form, their densities, the S^{1,1} norm
//   ||A|| = Tr|A| + Tr| |grad| A |grad| |,
// the free energy and the orbital-wise Galerkin projection.

#include <optional>

#include "mks/cell_basis.hpp"
#include "mks/potentials.hpp"
#include "mks/smearing.hpp"

namespace mks {

/// Physics shared by every discretization of one system.
struct Model {
  ExternalPotential external;
  XcFunctional xc;
  Interactions interactions;
  double electrons = 1.0;
  Smearing smearing{1.0};
  GSign g_sign = GSign::paper;
};

class DensityMatrix {
 public:
  /// Orbitals are columns of plane-wave coefficients. Throws
  /// std::invalid_argument unless the columns are orthonormal to 1e-8 and
  /// every occupation lies in [0, 1].
  DensityMatrix(BasisPtr basis, Eigen::MatrixXcd orbitals, Eigen::VectorXd occupations,
                std::optional<Eigen::VectorXd> eigenvalues = std::nullopt);

  const BasisPtr& basis() const { return basis_; }
  const Eigen::MatrixXcd& orbitals() const { return orbitals_; }
  const Eigen::VectorXd& occupations() const { return occupations_; }
  const std::optional<Eigen::VectorXd>& eigenvalues() const { return eigenvalues_; }
  Eigen::Index states() const { return orbitals_.cols(); }

  double trace() const { return occupations_.sum(); }
  /// Member of K_N: orthonormal orbitals, occupations in [0,1], trace N.
  bool admissible(double electrons, double tol = 1e-10) const;
  /// Largest |<phi_i, phi_j> - delta_ij|.
  double orthonormality_error() const;

  /// Gamma as a dense matrix over the plane waves of `target` (which must
  /// contain this basis).
  Eigen::MatrixXcd dense(const PlaneWaveBasis& target) const;
  Eigen::MatrixXcd dense() const { return dense(*basis_); }

 private:
  BasisPtr basis_;
  Eigen::MatrixXcd orbitals_;
  Eigen::VectorXd occupations_;
  std::optional<Eigen::VectorXd> eigenvalues_;
};

struct FreeEnergyBreakdown {
  double kinetic = 0.0;
  double external = 0.0;
  double hartree = 0.0;
  double xc = 0.0;
  double entropy = 0.0;
  double total = 0.0;
};

/// rho(x) = sum_i f_i |phi_i(x)|^2 on the basis grid.
GridFunction density(const DensityMatrix& gamma);

/// Spectral S^{1,1} norm sum_i |f_i| (1 + <phi_i, |G|^2 phi_i>).
double s11_norm(const DensityMatrix& gamma);

/// S^{1,1} norm of a Hermitian operator given densely over `basis`' plane
/// waves, via eigendecomposition of A and of K A K with K = diag(|G|).
double s11_norm_dense(const Eigen::MatrixXcd& op, const PlaneWaveBasis& basis);

/// ||a - b||_{S^{1,1}} evaluated densely on the larger of the two (nested) bases.
double s11_distance(const DensityMatrix& a, const DensityMatrix& b);

/// Orbital upper bound for the distance, for bases too large to densify:
///   sum_i f_i ||phi_i - phi'_i||_{H1} (||phi_i||_{H1} + ||phi'_i||_{H1})
///       + |f_i - f'_i| ||phi'_i||_{H1}^2
/// with phases aligned by overlap and orbitals paired by index (missing
/// partners count as zero).
double orbital_distance(const DensityMatrix& a, const DensityMatrix& b);

/// Kinetic energy sum_i f_i 1/2 ||grad phi_i||^2.
double kinetic_energy(const DensityMatrix& gamma);

FreeEnergyBreakdown free_energy(const DensityMatrix& gamma, const Model& model);

/// Orbital-wise truncation onto `target` followed by Loewdin orthonormalization
/// of the truncated orbitals. Occupations are preserved. Throws
/// std::invalid_argument if target is not nested in gamma's basis, or
/// std::domain_error when the truncation annihilates an occupied orbital.
DensityMatrix project_dm(const DensityMatrix& gamma, const BasisPtr& target);

/// sum_i f_i |pi phi_i><pi phi_i| without re-orthonormalization, as a dense
/// matrix over gamma's own basis.
Eigen::MatrixXcd project_dm_raw(const DensityMatrix& gamma, const PlaneWaveBasis& target);

/// Coefficients of `coefficients` (given in `from`) inside the nested
/// superset `to`.
Eigen::MatrixXcd embed_coefficients(const Eigen::MatrixXcd& coefficients, const PlaneWaveBasis& from,
                                    const PlaneWaveBasis& to);

}  // namespace mks
