#pragma once

// Self-consistent field iteration on the density.

#include <functional>
#include <vector>

#include "mks/density_matrix.hpp"
#include "mks/hamiltonian.hpp"

namespace mks {

struct MixingOptions {
  enum class Kind { simple, anderson };
  Kind kind = Kind::anderson;
  double alpha = 0.5;
  int window = 5;
};

struct IterationRecord {
  int iteration = 0;
  double free_energy = 0.0;
  double drho = 0.0;
  double mu = 0.0;
};

struct ScfOptions {
  double tol_rho = 1e-8;
  double tol_f = 1e-10;
  int max_iterations = 200;
  MixingOptions mixing;
  /// States kept beyond those with occupation above occupation_floor.
  int buffer_states = 8;
  double occupation_floor = 1e-12;
  EigenOptions eigen;
  /// Called after every iteration (for logging).
  std::function<void(const IterationRecord&)> on_iteration;
};

/// Result of one application of the occupation map rho -> f_mu(H(rho)).
struct FixedPointResult {
  DensityMatrix gamma;
  double mu = 0.0;
  GridFunction rho;
};

/// H(rho) = -1/2 Laplacian + v_ext + v_H(rho) + v_xc(rho).
Hamiltonian build_hamiltonian(const Model& model, const BasisPtr& basis, const GridFunction& rho);

struct RetainedSpectrum {
  Eigen::VectorXd values;
  Eigen::MatrixXcd vectors;
  Eigen::VectorXd occupations;
  double mu = 0.0;
};

/// The m lowest eigenpairs of h, with m grown until the occupation of the
/// highest computed state at the self-consistent mu drops below
/// occupation_floor. The retained set is every state above the floor plus
/// buffer_states (capped by the basis size). Throws std::runtime_error if
/// the tail never drops below the floor inside the basis.
RetainedSpectrum retained_spectrum(const Hamiltonian& h, const Model& model, const ScfOptions& options,
                                   const Eigen::MatrixXcd* guess = nullptr);

FixedPointResult fixed_point_map(const Model& model, const BasisPtr& basis, const GridFunction& rho_in,
                                 const ScfOptions& options, const Eigen::MatrixXcd* guess = nullptr);

struct ScfState {
  DensityMatrix gamma;
  double mu = 0.0;
  GridFunction rho;
  FreeEnergyBreakdown free_energy;
  double residual_density = 0.0;     // last ||rho_out - rho_in||_L2
  double residual_fixedpoint = 0.0;  // trace norm of f_mu(H(rho_Gamma)) - Gamma
  double residual_fixedpoint_s11 = 0.0;
  double residual_trace = 0.0;       // |Tr Gamma - N|
  int iterations = 0;
  bool converged = false;
  std::vector<IterationRecord> history;
};

/// Both rows of the optimality map at (gamma, mu): the trace and S^{1,1}
/// norms of f_mu(H(rho_gamma)) - gamma on the joint span of the two frames,
/// and |Tr gamma - N|.
struct FixedPointResidual {
  double trace_norm = 0.0;
  double s11 = 0.0;
  double trace = 0.0;
};
FixedPointResidual fixed_point_residual(const Model& model, const DensityMatrix& gamma, double mu,
                                        const ScfOptions& options);

/// Iterates rho <- mix(rho, rho_out) from rho0 (uniform N/|Omega| when
/// absent) until ||rho_out - rho_in||_L2 <= tol_rho and |dF| <= tol_f.
/// Returns the last iterate flagged non-converged when max_iterations is hit.
ScfState run_scf(const Model& model, const BasisPtr& basis, const ScfOptions& options,
                 const GridFunction* rho0 = nullptr);

}  // namespace mks
