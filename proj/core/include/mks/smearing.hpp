#pragma once

// Fermi-Dirac occupations, the entropy term and the chemical-potential solve.

#include <Eigen/Dense>

#include <span>
#include <string_view>

namespace mks {

/// Inverse temperature beta (hartree^-1).
class Smearing {
 public:
  explicit Smearing(double beta);
  double beta() const { return beta_; }
  double temperature() const { return 1.0 / beta_; }

 private:
  double beta_;
};

/// Sign convention for d f_mu / d mu.
///   paper:    the negative convention g(x) = -beta e^{beta(x-mu)} / (1 + e^{beta(x-mu)})^2  (always < 0)
///   analytic: the true partial derivative, the negative of the above.
enum class GSign { paper, analytic };

GSign parse_g_sign(std::string_view text);
std::string_view to_string(GSign sign);

/// (1 + exp(beta (eps - mu)))^-1, overflow safe.
double fermi_dirac(double eps, double mu, const Smearing& s);

/// d f / d eps = -beta e^x / (1 + e^x)^2 with x = beta (eps - mu).
double fermi_dirac_deps(double eps, double mu, const Smearing& s);

/// The mu-derivative under the chosen sign convention.
double fermi_dirac_dmu(double eps, double mu, const Smearing& s, GSign sign = GSign::paper);

Eigen::VectorXd occupations(const Eigen::VectorXd& eigenvalues, double mu, const Smearing& s);

/// Chemical potential with sum_i f_mu(lambda_i) = n_electrons.
///
/// Bracketed bisection switched to safeguarded Newton once the bracket is
/// narrower than 1 hartree. Throws std::invalid_argument unless
/// 0 < n_electrons < eigenvalues.size().
double solve_mu(const Eigen::VectorXd& eigenvalues, double n_electrons, const Smearing& s);

/// beta^-1 sum_i (f ln f + (1-f) ln(1-f)), with 0 ln 0 = 0. Always <= 0.
/// Throws std::invalid_argument for occupations outside [0, 1] by more than 1e-12.
double entropy(std::span<const double> occupations, const Smearing& s);
double entropy(const Eigen::VectorXd& occupations, const Smearing& s);

}  // namespace mks
