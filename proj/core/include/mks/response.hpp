#pragma once

// Linear response of the occupation map at a converged state, the Jacobian of
// the optimality map and its block solve, and the stability audit.
//
// Tangent perturbations are Hermitian matrices Psi expressed in the frame of
// retained eigenvectors phi_i of H(rho_bar), paired with a scalar s in the
// chemical-potential direction.

#include <string>

#include "mks/scf.hpp"

namespace mks {

struct TangentPerturbation {
  Eigen::MatrixXcd psi;
  double s = 0.0;
};

class ResponseContext {
 public:
  /// Recomputes the retained eigenpairs of H(state.rho) and the xc kernel.
  /// Throws std::invalid_argument unless the state is converged.
  ResponseContext(const Model& model, const ScfState& state, const ScfOptions& options = {});

  const Model& model() const { return model_; }
  const BasisPtr& basis() const { return basis_; }
  const GridFunction& rho() const { return rho_; }
  Eigen::Index dim() const { return values_.size(); }
  const Eigen::VectorXd& eigenvalues() const { return values_; }
  const Eigen::MatrixXcd& orbitals() const { return vectors_; }
  const Eigen::VectorXd& occupations() const { return occupations_; }
  double mu() const { return mu_; }
  /// Divided differences (f(l_i) - f(l_j)) / (l_i - l_j), f' on the diagonal.
  const Eigen::MatrixXd& divided_differences() const { return divided_; }
  /// g_mu(l_i) under the model's sign convention.
  const Eigen::VectorXd& g() const { return g_; }

  /// rho_Psi(x) = sum_ij Psi_ij phi_i(x) conj(phi_j(x)).
  GridFunction density_of(const Eigen::MatrixXcd& psi) const;
  /// delta v_eff[rho] = v_H[rho] + e''(rho_bar) rho, per enabled interaction.
  GridFunction kernel(const GridFunction& rho) const;
  /// <phi_i | v | phi_j> for a grid function v.
  Eigen::MatrixXcd matrix_elements(const GridFunction& v) const;

  /// Complex-linear chi without the Hermiticity check.
  Eigen::MatrixXcd chi_linear(const Eigen::MatrixXcd& psi) const;
  /// The m^2 x m^2 coupling matrix C with (chi Psi) = D o (C vec Psi),
  /// vec in column-major order.
  Eigen::MatrixXcd coupling_matrix() const;
  /// Dense chi on column-major vec(Psi).
  Eigen::MatrixXcd chi_matrix() const;

 private:
  Model model_;
  BasisPtr basis_;
  GridFunction rho_;
  Eigen::VectorXd values_;
  Eigen::MatrixXcd vectors_;
  Eigen::VectorXd occupations_;
  double mu_ = 0.0;
  Eigen::MatrixXd divided_;
  Eigen::VectorXd g_;
  Eigen::MatrixXcd orbital_grid_;  // grid points x retained orbitals
  Eigen::VectorXd xc_kernel_;       // e''(rho_bar) per grid point, zero if xc is off
};

/// chi Psi. Throws std::invalid_argument for non-Hermitian Psi (1e-12).
Eigen::MatrixXcd apply_chi(const ResponseContext& ctx, const Eigen::MatrixXcd& psi);

/// (chi Psi - Psi + s diag(g), Tr Psi).
TangentPerturbation apply_jacobian(const ResponseContext& ctx, const TangentPerturbation& tp);

/// Dense (m^2 + 1)-square matrix of apply_jacobian acting on (vec Psi, s).
Eigen::MatrixXcd jacobian_matrix(const ResponseContext& ctx);

struct JacobianSolution {
  TangentPerturbation solution;
  double denominator = 0.0;         // Tr((chi - I)^-1 g)
  double smallest_singular = 0.0;   // of chi - I
  double residual = 0.0;            // ||J(Psi, s) - (Phi, t)||
};

/// Psi = (chi - I)^-1 (Phi - s g) with
/// s = (Tr((chi - I)^-1 Phi) - t) / Tr((chi - I)^-1 g).
/// Throws std::domain_error if chi - I is numerically singular or the
/// denominator vanishes.
JacobianSolution solve_jacobian(const ResponseContext& ctx, const TangentPerturbation& rhs);

struct A4Report {
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  double kappa = 0.0;  // 1 / lambda_min, infinite if lambda_min <= 0
  double condition = 0.0;
  double denominator_s = 0.0;
  std::string g_sign;
  Eigen::Index tangent_dim = 0;
  std::string method;  // "dense", or "lanczos" for large tangent spaces
  bool violated = false;
};

/// Spectrum of I - chi symmetrized as I + |D|^{1/2} C |D|^{1/2}: dense for
/// tangent dimension m <= 40, otherwise extreme eigenvalues by Lanczos and
/// the denominator by conjugate gradients.
enum class AuditMethod { automatic, dense, lanczos };
A4Report audit_a4(const ResponseContext& ctx, AuditMethod method = AuditMethod::automatic);

/// Centered difference (f_mu(H(rho_bar + eps rho_Psi)) - f_mu(H(rho_bar - eps rho_Psi))) / (2 eps)
/// at fixed mu, by full dense diagonalization, expressed in the retained frame.
Eigen::MatrixXcd chi_finite_difference(const ResponseContext& ctx, const Eigen::MatrixXcd& psi, double eps = 1e-5);

/// <chi Psi, Psi> in the Hartree metric:
///   int rho_{chi Psi} v_H[rho_Psi] = sum_ij (chi Psi)_ij conj(<phi_i| v_H[rho_Psi] |phi_j>).
/// With xc disabled this equals sum_ij D_ij |<phi_i| v_H[rho_Psi] |phi_j>|^2 <= 0.
double chi_pairing(const ResponseContext& ctx, const Eigen::MatrixXcd& psi);

}  // namespace mks
