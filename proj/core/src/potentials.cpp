#include "mks/potentials.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace mks {

namespace {
constexpr double four_pi = 4.0 * std::numbers::pi;
}

// ---------------------------------------------------------------- external

ExternalPotential ExternalPotential::gaussian_wells(std::vector<GaussianWell> wells) {
  for (const auto& w : wells)
    if (!(w.width > 0.0)) throw std::invalid_argument("gaussian well width must be positive");
  ExternalPotential v;
  v.kind_ = Kind::gaussian_wells;
  v.wells_ = std::move(wells);
  return v;
}

ExternalPotential ExternalPotential::cosine_series(std::vector<CosineTerm> terms) {
  ExternalPotential v;
  v.kind_ = Kind::cosine_series;
  v.terms_ = std::move(terms);
  return v;
}

cplx ExternalPotential::coefficient(const Cell& cell, const Miller& m) const {
  const int d = cell.dimension();
  const double volume = cell.volume();
  cplx c = 0.0;
  switch (kind_) {
    case Kind::none:
      break;
    case Kind::gaussian_wells: {
      const Eigen::VectorXd g = cell.g_vector(m);
      const double g2 = g.squaredNorm();
      for (const auto& w : wells_) {
        if (w.center.size() != d) throw std::invalid_argument("gaussian well center has the wrong dimension");
        const double amplitude = -w.depth * std::pow(2.0 * std::numbers::pi * w.width * w.width, 0.5 * d) *
                                 std::exp(-0.5 * w.width * w.width * g2);
        c += amplitude * std::polar(1.0, -g.dot(w.center));
      }
      c /= std::sqrt(volume);
      break;
    }
    case Kind::cosine_series: {
      const Miller minus{-m[0], -m[1], -m[2]};
      for (const auto& t : terms_) {
        const bool zero = t.miller == Miller{0, 0, 0};
        if (zero && m == t.miller) c += t.amplitude;
        else {
          if (m == t.miller) c += 0.5 * t.amplitude;
          if (minus == t.miller) c += 0.5 * t.amplitude;
        }
      }
      c *= std::sqrt(volume);
      break;
    }
  }
  return c;
}

GridFunction ExternalPotential::on_grid(const BasisPtr& basis) const {
  const auto& n = basis->fft_grid();
  std::vector<cplx> coeffs(static_cast<std::size_t>(basis->grid_size()), 0.0);
  if (kind_ != Kind::none) {
    for (Eigen::Index s = 0; s < basis->grid_size(); ++s) {
      const Miller m = basis->slot_miller(s);
      // A Nyquist slot stands for both +n/2 and -n/2; average the aliases so
      // the synthesized potential stays real.
      std::vector<int> nyquist;
      for (int j = 0; j < 3; ++j)
        if (n[j] > 1 && 2 * m[j] == -n[j]) nyquist.push_back(j);
      const int combos = 1 << nyquist.size();
      cplx sum = 0.0;
      for (int mask = 0; mask < combos; ++mask) {
        Miller alias = m;
        for (std::size_t k = 0; k < nyquist.size(); ++k)
          if (mask & (1 << k)) alias[nyquist[k]] = -alias[nyquist[k]];
        sum += coefficient(basis->cell(), alias);
      }
      coeffs[static_cast<std::size_t>(s)] = sum / static_cast<double>(combos);
    }
  }
  auto v = from_fourier(basis, std::move(coeffs));
  for (auto& x : v.values()) x = x.real();
  return v;
}

// ---------------------------------------------------------------- xc

XcFunctional XcFunctional::none() { return {}; }

XcFunctional XcFunctional::dirac(double coefficient) {
  if (!(coefficient >= 0.0)) throw std::invalid_argument("dirac coefficient must be non-negative");
  XcFunctional f;
  f.kind_ = Kind::dirac;
  f.coefficient_ = coefficient;
  return f;
}

XcFunctional XcFunctional::dirac_rational(double coefficient, double a, double b) {
  if (!(coefficient >= 0.0) || !(a >= 0.0) || !(b > 0.0))
    throw std::invalid_argument("dirac_rational requires coefficient >= 0, a >= 0, b > 0");
  XcFunctional f;
  f.kind_ = Kind::dirac_rational;
  f.coefficient_ = coefficient;
  f.a_ = a;
  f.b_ = b;
  return f;
}

std::string XcFunctional::name() const {
  switch (kind_) {
    case Kind::none: return "none";
    case Kind::dirac: return "dirac";
    case Kind::dirac_rational: return "dirac_rational";
  }
  return "unknown";
}

double XcFunctional::energy(double t) const {
  if (kind_ == Kind::none) return 0.0;
  t = std::max(t, 0.0);
  double e = -coefficient_ * t * std::cbrt(t);
  if (kind_ == Kind::dirac_rational) e -= a_ * t * t / (1.0 + b_ * t);
  return e;
}

double XcFunctional::d1(double t) const {
  if (kind_ == Kind::none) return 0.0;
  t = std::max(t, 0.0);
  double e = -4.0 / 3.0 * coefficient_ * std::cbrt(t);
  if (kind_ == Kind::dirac_rational) {
    const double q = 1.0 + b_ * t;
    e -= a_ * t * (2.0 + b_ * t) / (q * q);
  }
  return e;
}

double XcFunctional::d2(double t) const {
  if (kind_ == Kind::none) return 0.0;
  const double tc = std::max(t, density_floor);
  double e = -4.0 / 9.0 * coefficient_ / (std::cbrt(tc) * std::cbrt(tc));
  if (kind_ == Kind::dirac_rational) {
    const double q = 1.0 + b_ * std::max(t, 0.0);
    e -= 2.0 * a_ / (q * q * q);
  }
  return e;
}

double XcFunctional::d3(double t) const {
  if (kind_ == Kind::none) return 0.0;
  const double tc = std::max(t, density_floor);
  double e = 8.0 / 27.0 * coefficient_ / (tc * std::cbrt(tc) * std::cbrt(tc));
  if (kind_ == Kind::dirac_rational) {
    const double q = 1.0 + b_ * std::max(t, 0.0);
    e += 6.0 * a_ * b_ / (q * q * q * q);
  }
  return e;
}

XcBounds XcFunctional::bounds() const {
  XcBounds b;
  b.p1 = 1.0 / 3.0;
  b.p2 = 1.0 / 3.0;
  if (kind_ == Kind::none) return b;
  const double c = coefficient_;
  b.c0 = c;
  b.c1 = 16.0 * c / 9.0;
  b.c2 = 20.0 * c / 27.0;
  if (kind_ == Kind::dirac_rational) {
    b.c0 += a_ / b_;
    b.c1 += 3.0 * a_ / b_;
    b.c2 += 3.0 * a_;
  }
  return b;
}

XcAudit audit_xc(const XcFunctional& f, double t_min, double t_max, int samples) {
  if (!(t_min > 0.0) || !(t_max > t_min) || samples < 2)
    throw std::invalid_argument("audit_xc: need 0 < t_min < t_max and at least two samples");
  XcAudit a;
  a.stated = f.bounds();
  a.t_min = t_min;
  a.t_max = t_max;
  a.samples = samples;
  const double ratio = std::log(t_max / t_min) / (samples - 1);
  for (int i = 0; i < samples; ++i) {
    const double t = t_min * std::exp(ratio * i);
    a.worst_a2 = std::max(a.worst_a2, std::abs(f.energy(t)) / (std::pow(t, 4.0 / 3.0) + 1.0));
    a.worst_c1 = std::max(a.worst_c1, (std::abs(f.d1(t)) + std::abs(t * f.d2(t))) / (1.0 + std::pow(t, a.stated.p1)));
    a.worst_c2 =
        std::max(a.worst_c2, (std::abs(f.d2(t)) + std::abs(t * f.d3(t))) / (1.0 + std::pow(t, a.stated.p2 - 1.0)));
  }
  const int fd_samples = 200;
  for (int i = 0; i < fd_samples; ++i) {
    const double t = 0.01 * std::pow(1000.0, static_cast<double>(i) / (fd_samples - 1));
    const double h = 1e-4 * t;
    const double fd = (f.energy(t + h) - f.energy(t - h)) / (2.0 * h);
    const double exact = f.d1(t);
    const double scale = std::max(std::abs(exact), 1e-300);
    if (f.kind() != XcFunctional::Kind::none) a.derivative_error = std::max(a.derivative_error, std::abs(fd - exact) / scale);
  }
  const double slack = 1.0 + 1e-12;
  a.passes = a.worst_a2 <= a.stated.c0 * slack && a.worst_c1 <= a.stated.c1 * slack &&
             a.worst_c2 <= a.stated.c2 * slack && a.derivative_error <= 1e-6;
  std::ostringstream note;
  note << "sampled t in [" << t_min << ", " << t_max << "]; t = 0 excluded: second and third derivatives clamp t at "
       << XcFunctional::density_floor;
  a.note = note.str();
  return a;
}

// ---------------------------------------------------------------- hartree / xc

HartreeResult hartree(const GridFunction& rho) {
  const auto& basis = rho.basis();
  auto coeffs = fourier_coefficients(rho);
  const auto& g2 = basis->slot_g2();
  double energy = 0.0;
  for (std::size_t s = 0; s < coeffs.size(); ++s) {
    const double q2 = g2[static_cast<Eigen::Index>(s)];
    if (q2 > 0.0) {
      const double kernel = four_pi / q2;
      energy += kernel * std::norm(coeffs[s]);
      coeffs[s] *= kernel;
    } else {
      coeffs[s] = 0.0;
    }
  }
  return {from_fourier(basis, std::move(coeffs)), 0.5 * energy};
}

XcResult xc_eval(const GridFunction& rho, const XcFunctional& f, double negative_tolerance) {
  const auto& basis = rho.basis();
  std::vector<cplx> v(static_cast<std::size_t>(rho.size()));
  double energy = 0.0;
  for (Eigen::Index i = 0; i < rho.size(); ++i) {
    const double t = rho[i].real();
    if (t < -negative_tolerance) throw std::domain_error("xc_eval: density is negative beyond tolerance");
    energy += f.energy(t);
    v[static_cast<std::size_t>(i)] = f.d1(t);
  }
  return {GridFunction(basis, std::move(v)), energy * basis->grid_weight()};
}

GridFunction EffectivePotentialTerms::total() const { return v_ext + v_h + v_xc; }

EffectivePotentialTerms assemble_effective(const GridFunction& rho, const ExternalPotential& vext,
                                           const XcFunctional& f, Interactions interactions) {
  const auto& basis = rho.basis();
  EffectivePotentialTerms t;
  t.v_ext = vext.on_grid(basis);
  GridFunction weighted = t.v_ext;
  for (Eigen::Index i = 0; i < weighted.size(); ++i) weighted[i] *= rho[i];
  t.external = integrate(weighted).real();
  if (interactions.hartree) {
    auto h = hartree(rho);
    t.v_h = std::move(h.potential);
    t.hartree = h.energy;
  } else {
    t.v_h = GridFunction::zeros(basis);
  }
  if (interactions.xc) {
    auto x = xc_eval(rho, f);
    t.v_xc = std::move(x.potential);
    t.xc = x.energy;
  } else {
    t.v_xc = GridFunction::zeros(basis);
  }
  return t;
}

}  // namespace mks
