#pragma once

// Cutoff-convergence experiments against a fine-cutoff reference.

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mks/config.hpp"
#include "mks/fit.hpp"
#include "mks/response.hpp"

namespace mks {

/// An SCF run inside a sweep failed to converge.
class SweepError : public std::runtime_error {
 public:
  SweepError(double cutoff, double beta, const std::string& what)
      : std::runtime_error(what), cutoff_(cutoff), beta_(beta) {}
  double cutoff() const { return cutoff_; }
  double beta() const { return beta_; }

 private:
  double cutoff_, beta_;
};

struct SweepRow {
  double ec = 0.0;
  double f_total = 0.0;
  double f_err = 0.0;          // |F_n - F_ref|
  double rho_l2_err = 0.0;     // ||rho_n - rho_ref||_L2
  double gamma_s11_err = 0.0;  // ||Gamma_n - Gamma_ref|| (dense S^{1,1} or orbital bound)
  double proj_err = 0.0;       // ||Pi_n Gamma_ref - Gamma_ref||
  double ratio = 0.0;          // gamma_s11_err / proj_err
  int scf_iters = 0;
  double wall_s = 0.0;
  bool dense_norm = true;      // false when the orbital bound was used
  double orbital_err = 0.0;    // max_i ||phi_i,ref - phi_i,n||_H1 over occupied orbitals
  double orbital_best = 0.0;   // max_i ||phi_i,ref - pi_n phi_i,ref||_H1
  int basis_size = 0;
};

struct TemperatureSweep {
  double beta = 0.0;
  double f_reference = 0.0;
  int reference_basis_size = 0;
  std::vector<SweepRow> rows;  // ordered by cutoff
  std::optional<DecayFit> energy_fit;
  std::optional<DecayFit> density_fit;
  std::string fit_note;        // why a fit is missing, if it is
  double max_ratio = 0.0;
  double orbital_constant = 0.0;
  bool errors_monotone = true;
  bool energies_monotone = true;
  std::optional<A4Report> a4;
};

struct SweepResult {
  std::string config_name;
  std::string config_hash;
  double reference_cutoff = 0.0;
  double floor = 0.0;  // 10 tol_rho
  std::vector<TemperatureSweep> temperatures;
};

struct SweepRequest {
  std::vector<double> cutoffs;   // empty = config list
  double reference = 0.0;        // 0 = config value, or 2.5 x max cutoff
  std::vector<double> betas;     // empty = config list, else the config beta
  bool audit = true;             // run the stability audit at the reference
};

/// Occupation above which orbitals enter the orbital-error comparison.
inline constexpr double occupied_threshold = 1e-2;
/// Reference bases up to this size use the dense S^{1,1} distance.
inline constexpr Eigen::Index dense_norm_limit = 600;

/// Runs the reference and every coarse cutoff (in parallel up to the
/// worker cap) for each temperature. Throws ConfigError for an invalid
/// request and SweepError on SCF failure.
SweepResult run_sweep(const RunConfig& config, const SweepRequest& request = {});

struct QuasiOptimalityReport {
  TemperatureSweep sweep;
  double bound = 50.0;
  double max_ratio = 0.0;
  double first_ratio = 0.0;
  double last_ratio = 0.0;
  double ratio_trend = 0.0;  // least-squares slope of ratio vs E_c
  bool bounded = false;
  bool nonincreasing = false;
  double orbital_constant = 0.0;
  bool passes() const { return bounded && nonincreasing; }
};

/// Ratio of the computed error to the best-approximation error along a
/// sweep at the config temperature. Requires a reference basis of at most
/// 200 plane waves (dense norms); throws ConfigError otherwise.
QuasiOptimalityReport quasi_optimality(const RunConfig& config, const SweepRequest& request = {});

/// Runs f(0..n-1) on up to `workers` threads. Exceptions are rethrown for the
/// lowest failing index.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& f);

}  // namespace mks
