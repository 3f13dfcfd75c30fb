#pragma once

// External potential models, the periodic Hartree solve and LDA-type
// exchange-correlation functionals.

#include <string>
#include <vector>

#include "mks/cell_basis.hpp"

namespace mks {

/// Periodic Gaussian well: -depth * exp(-|r - center|^2 / (2 width^2)),
/// summed over lattice images.
struct GaussianWell {
  Eigen::VectorXd center;  // cartesian, bohr
  double depth = 0.0;      // hartree
  double width = 1.0;      // bohr
};

/// amplitude * cos(G.r) for the reciprocal vector with integer coordinates `miller`.
struct CosineTerm {
  Miller miller{0, 0, 0};
  double amplitude = 0.0;
};

class ExternalPotential {
 public:
  enum class Kind { none, gaussian_wells, cosine_series };

  ExternalPotential() = default;
  static ExternalPotential gaussian_wells(std::vector<GaussianWell> wells);
  static ExternalPotential cosine_series(std::vector<CosineTerm> terms);

  Kind kind() const { return kind_; }
  const std::vector<GaussianWell>& wells() const { return wells_; }
  const std::vector<CosineTerm>& terms() const { return terms_; }

  /// Exact Fourier coefficient (e_G, v) of the potential for reciprocal vector m.
  cplx coefficient(const Cell& cell, const Miller& m) const;

  /// The potential on basis' grid, synthesized from its exact coefficients on
  /// every grid mode. Real and periodic.
  GridFunction on_grid(const BasisPtr& basis) const;

 private:
  Kind kind_ = Kind::none;
  std::vector<GaussianWell> wells_;
  std::vector<CosineTerm> terms_;
};

/// Growth constants witnessing
///   |e(t)| <= c0 (t^{4/3} + 1),
///   |e'(t)| + |t e''(t)| <= c1 (1 + t^{p1}),
///   |e''(t)| + |t e'''(t)| <= c2 (1 + t^{p2 - 1})   for t > 0.
struct XcBounds {
  double c0 = 0.0, c1 = 0.0, c2 = 0.0;
  double p1 = 0.0, p2 = 1.0;
};

/// Local exchange-correlation energy density e(t) of the density t and its
/// first three derivatives.
///
/// Available forms:
///   none:            e = 0
///   dirac:           e = -c t^{4/3}
///   dirac_rational:  e = -c t^{4/3} - a t^2 / (1 + b t)
///
/// The rational piece is a smooth, C-infinity correlation-like term with
/// bounded second derivative. Derivatives with negative powers of t clamp
/// t at density_floor.
class XcFunctional {
 public:
  enum class Kind { none, dirac, dirac_rational };

  static constexpr double dirac_default = 0.738558766;
  static constexpr double density_floor = 1e-12;

  XcFunctional() = default;
  static XcFunctional none();
  static XcFunctional dirac(double coefficient = dirac_default);
  static XcFunctional dirac_rational(double coefficient, double a, double b);

  Kind kind() const { return kind_; }
  std::string name() const;

  double energy(double t) const;
  double d1(double t) const;
  double d2(double t) const;
  double d3(double t) const;

  XcBounds bounds() const;

 private:
  Kind kind_ = Kind::none;
  double coefficient_ = 0.0;
  double a_ = 0.0;
  double b_ = 1.0;
};

/// Sampled check of the growth bounds on a logarithmic grid.
struct XcAudit {
  XcBounds stated;
  double t_min = 0.0, t_max = 0.0;
  int samples = 0;
  double worst_a2 = 0.0;  // max |e| / (t^{4/3} + 1)
  double worst_c1 = 0.0;  // max (|e'| + |t e''|) / (1 + t^{p1})
  double worst_c2 = 0.0;  // max (|e''| + |t e'''|) / (1 + t^{p2-1})
  double derivative_error = 0.0;  // max relative |d1 - FD(e)| on [0.01, 10]
  bool passes = false;
  std::string note;
};

XcAudit audit_xc(const XcFunctional& f, double t_min = 1e-4, double t_max = 1e4, int samples = 400);

struct HartreeResult {
  GridFunction potential;
  double energy = 0.0;
};

/// Periodic Coulomb solve with kernel 4 pi / |G|^2, G = 0 removed
/// (compensating background). E_H = 1/2 sum_G 4 pi / |G|^2 |rho_G|^2 >= 0.
HartreeResult hartree(const GridFunction& rho);

struct XcResult {
  GridFunction potential;
  double energy = 0.0;
};

/// E_xc = int e(rho), v_xc = e'(rho). Throws std::domain_error if rho drops
/// below -negative_tolerance anywhere.
XcResult xc_eval(const GridFunction& rho, const XcFunctional& f, double negative_tolerance = 1e-8);

struct Interactions {
  bool hartree = true;
  bool xc = true;
};

struct EffectivePotentialTerms {
  GridFunction v_ext, v_h, v_xc;
  double external = 0.0;
  double hartree = 0.0;
  double xc = 0.0;

  GridFunction total() const;
};

EffectivePotentialTerms assemble_effective(const GridFunction& rho, const ExternalPotential& vext,
                                           const XcFunctional& f, Interactions interactions = {});

}  // namespace mks
