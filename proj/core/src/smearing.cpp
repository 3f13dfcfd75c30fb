#include "mks/smearing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace mks {

Smearing::Smearing(double beta) : beta_(beta) {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw std::invalid_argument("Smearing: beta must be positive and finite");
}

GSign parse_g_sign(std::string_view text) {
  if (text == "paper") return GSign::paper;
  if (text == "analytic") return GSign::analytic;
  throw std::invalid_argument("unknown g_sign '" + std::string(text) + "' (expected paper|analytic)");
}

std::string_view to_string(GSign sign) { return sign == GSign::paper ? "paper" : "analytic"; }

double fermi_dirac(double eps, double mu, const Smearing& s) {
  const double x = s.beta() * (eps - mu);
  if (x > 0.0) {
    const double e = std::exp(-x);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(x));
}

double fermi_dirac_deps(double eps, double mu, const Smearing& s) {
  // e^x / (1+e^x)^2 is even in x; evaluate with e^{-|x|} to avoid overflow.
  const double x = std::abs(s.beta() * (eps - mu));
  const double e = std::exp(-x);
  return -s.beta() * e / ((1.0 + e) * (1.0 + e));
}

double fermi_dirac_dmu(double eps, double mu, const Smearing& s, GSign sign) {
  const double g = fermi_dirac_deps(eps, mu, s);
  return sign == GSign::paper ? g : -g;
}

Eigen::VectorXd occupations(const Eigen::VectorXd& eigenvalues, double mu, const Smearing& s) {
  Eigen::VectorXd f(eigenvalues.size());
  for (Eigen::Index i = 0; i < f.size(); ++i) f[i] = fermi_dirac(eigenvalues[i], mu, s);
  return f;
}

double solve_mu(const Eigen::VectorXd& eigenvalues, double n_electrons, const Smearing& s) {
  const auto m = eigenvalues.size();
  if (!(n_electrons > 0.0) || !(n_electrons < static_cast<double>(m)))
    throw std::invalid_argument("solve_mu: electron count must satisfy 0 < N < number of states");
  if (!eigenvalues.allFinite()) throw std::invalid_argument("solve_mu: non-finite eigenvalue");

  // Occupied states contribute 1 - (1 - f) with the hole 1 - f evaluated
  // directly, so the residual keeps full relative precision inside gaps.
  auto count = [&](double mu) {
    double integer = -n_electrons, tails = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (eigenvalues[i] <= mu) {
        integer += 1.0;
        tails -= fermi_dirac(2.0 * mu - eigenvalues[i], mu, s);
      } else {
        tails += fermi_dirac(eigenvalues[i], mu, s);
      }
    }
    return integer + tails;
  };
  auto slope = [&](double mu) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) sum -= fermi_dirac_deps(eigenvalues[i], mu, s);
    return sum;
  };

  const double kT = 1.0 / s.beta();
  double lo = eigenvalues.minCoeff() - 10.0 * kT;
  double hi = eigenvalues.maxCoeff() + 10.0 * kT;
  // The seed bracket fails for N within e^-10 of 0 or m; widen until it holds.
  for (double step = 10.0 * kT; count(lo) > 0.0; step *= 2.0) lo -= step;
  for (double step = 10.0 * kT; count(hi) < 0.0; step *= 2.0) hi += step;

  const double tol = 1e-12 * n_electrons;
  double mu = 0.5 * (lo + hi);
  for (int iter = 0; iter < 2000; ++iter) {
    const double r = count(mu);
    if (r == 0.0) return mu;
    if (r > 0.0) hi = mu; else lo = mu;
    if (!(hi - lo > 4.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(lo), std::abs(hi))))
      return mu;

    double next = 0.5 * (lo + hi);
    if (hi - lo < 1.0) {
      const double d = slope(mu);
      if (d > 0.0) {
        const double newton = mu - r / d;
        if (std::abs(r) <= tol && std::abs(newton - mu) <= 1e-15 * std::max(1.0, std::abs(mu))) return mu;
        if (newton > lo && newton < hi) next = newton;
      }
    }
    mu = next;
  }
  return mu;
}

double entropy(std::span<const double> occupations, const Smearing& s) {
  double sum = 0.0;
  for (double f : occupations) {
    if (f < -1e-12 || f > 1.0 + 1e-12 || std::isnan(f))
      throw std::invalid_argument("entropy: occupation outside [0, 1]");
    f = std::clamp(f, 0.0, 1.0);
    const double g = 1.0 - f;
    if (f > 1e-300) sum += f * std::log(f);
    if (g > 1e-300) sum += g * std::log(g);
  }
  return sum / s.beta();
}

double entropy(const Eigen::VectorXd& occupations, const Smearing& s) {
  return entropy(std::span<const double>(occupations.data(), static_cast<std::size_t>(occupations.size())), s);
}

}  // namespace mks
