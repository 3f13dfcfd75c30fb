#pragma once

// H = -1/2 Laplacian + v_local in a plane-wave basis, and its lowest eigenpairs.

#include <optional>

#include "mks/cell_basis.hpp"

namespace mks {

class Hamiltonian {
 public:
  /// v_local must live on basis' grid and be real.
  Hamiltonian(BasisPtr basis, GridFunction v_local);

  const BasisPtr& basis() const { return basis_; }
  const GridFunction& v_local() const { return v_local_; }
  Eigen::Index size() const { return basis_->size(); }
  /// 1/2 |G|^2 per basis vector.
  const Eigen::VectorXd& kinetic() const { return kinetic_; }

  Eigen::VectorXcd apply(const Eigen::VectorXcd& psi) const;
  Eigen::MatrixXcd apply(const Eigen::MatrixXcd& block) const;

  /// Explicit matrix 1/2|G|^2 delta_GG' + |Omega|^{-1/2} v_hat(G - G').
  Eigen::MatrixXcd dense() const;

 private:
  BasisPtr basis_;
  GridFunction v_local_;
  Eigen::VectorXd kinetic_;
  std::vector<cplx> v_hat_;  // Fourier coefficients of v_local per grid slot
};

Eigen::VectorXcd apply_h(const Hamiltonian& h, const Eigen::VectorXcd& psi);

enum class EigenMethod { automatic, dense, lobpcg };

struct EigenOptions {
  EigenMethod method = EigenMethod::automatic;
  /// automatic switches to the iterative solver above this basis size.
  Eigen::Index dense_limit = 512;
  double tolerance = 1e-9;  // on ||H x - lambda x||
  int max_iterations = 500;
  /// Optional starting block for the iterative solver (columns in the basis).
  std::optional<Eigen::MatrixXcd> guess;
};

struct EigenResult {
  Eigen::VectorXd values;   // ascending
  Eigen::MatrixXcd vectors; // orthonormal columns
  double max_residual = 0.0;
  int iterations = 0;
};

/// The m lowest eigenpairs. Throws std::invalid_argument if m exceeds the
/// basis size and std::runtime_error if the iterative solver hits its cap.
EigenResult lowest_eigenpairs(const Hamiltonian& h, Eigen::Index m, const EigenOptions& options = {});

/// Block LOBPCG with kinetic preconditioning and SVQB orthonormalization.
EigenResult lobpcg(const Hamiltonian& h, Eigen::Index m, const EigenOptions& options);

/// Full dense diagonalization truncated to the m lowest pairs.
EigenResult dense_eigenpairs(const Hamiltonian& h, Eigen::Index m);

}  // namespace mks
