#include "mks/response.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <tuple>

namespace mks {

namespace {

double log_cosh(double x) {
  x = std::abs(x);
  return x + std::log1p(std::exp(-2.0 * x)) - std::numbers::ln2;
}

/// log(sinh(d) / d) for d >= 0.
double log_sinhc(double d) {
  if (d < 1.0) return d == 0.0 ? 0.0 : std::log(std::sinh(d) / d);
  return d + std::log1p(-std::exp(-2.0 * d)) - std::numbers::ln2 - std::log(d);
}

/// (f(a) - f(b)) / (a - b) for the Fermi-Dirac function, in closed form
///   -(beta/4) sinhc(delta) / (cosh x_a cosh x_b),
/// x = beta (lambda - mu) / 2, delta = x_a - x_b. Exact at a = b.
double divided_difference(double a, double b, double mu, double beta) {
  const double xa = 0.5 * beta * (a - mu);
  const double xb = 0.5 * beta * (b - mu);
  const double log_value = std::log(0.25 * beta) + log_sinhc(std::abs(xa - xb)) - log_cosh(xa) - log_cosh(xb);
  return -std::exp(log_value);
}

Eigen::VectorXcd vec(const Eigen::MatrixXcd& a) { return Eigen::Map<const Eigen::VectorXcd>(a.data(), a.size()); }

Eigen::MatrixXcd unvec(const Eigen::VectorXcd& v, Eigen::Index m) {
  return Eigen::Map<const Eigen::MatrixXcd>(v.data(), m, m);
}

void require_hermitian(const Eigen::MatrixXcd& psi, Eigen::Index m) {
  if (psi.rows() != m || psi.cols() != m) throw std::invalid_argument("tangent has the wrong dimension");
  const double scale = std::max(1.0, psi.cwiseAbs().maxCoeff());
  if ((psi - psi.adjoint()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw std::invalid_argument("tangent is not Hermitian");
}

}  // namespace

ResponseContext::ResponseContext(const Model& model, const ScfState& state, const ScfOptions& options)
    : model_(model), basis_(state.gamma.basis()), rho_(state.rho) {
  if (!state.converged) throw std::invalid_argument("ResponseContext: state is not converged");
  const Hamiltonian h = build_hamiltonian(model_, basis_, rho_);
  const RetainedSpectrum retained = retained_spectrum(h, model_, options, &state.gamma.orbitals());
  values_ = retained.values;
  vectors_ = retained.vectors;
  occupations_ = retained.occupations;
  mu_ = retained.mu;

  const Eigen::Index m = values_.size();
  const double beta = model_.smearing.beta();
  divided_.resize(m, m);
  for (Eigen::Index j = 0; j < m; ++j)
    for (Eigen::Index i = 0; i <= j; ++i)
      divided_(i, j) = divided_(j, i) = divided_difference(values_[i], values_[j], mu_, beta);
  g_.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) g_[i] = fermi_dirac_dmu(values_[i], mu_, model_.smearing, model_.g_sign);

  orbital_grid_.resize(basis_->grid_size(), m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const GridFunction phi = to_grid(basis_, vectors_.col(i));
    for (Eigen::Index x = 0; x < phi.size(); ++x) orbital_grid_(x, i) = phi[x];
  }
  xc_kernel_ = Eigen::VectorXd::Zero(basis_->grid_size());
  if (model_.interactions.xc)
    for (Eigen::Index x = 0; x < xc_kernel_.size(); ++x) xc_kernel_[x] = model_.xc.d2(rho_[x].real());
}

GridFunction ResponseContext::density_of(const Eigen::MatrixXcd& psi) const {
  const Eigen::MatrixXcd t = orbital_grid_ * psi;
  const Eigen::VectorXcd r = t.cwiseProduct(orbital_grid_.conjugate()).rowwise().sum();
  return GridFunction(basis_, std::vector<cplx>(r.data(), r.data() + r.size()));
}

GridFunction ResponseContext::kernel(const GridFunction& rho) const {
  GridFunction v = model_.interactions.hartree ? hartree(rho).potential : GridFunction::zeros(basis_);
  for (Eigen::Index x = 0; x < v.size(); ++x) v[x] += xc_kernel_[x] * rho[x];
  return v;
}

Eigen::MatrixXcd ResponseContext::matrix_elements(const GridFunction& v) const {
  const Eigen::Map<const Eigen::VectorXcd> values(v.values().data(), v.size());
  return basis_->grid_weight() * (orbital_grid_.adjoint() * values.asDiagonal() * orbital_grid_);
}

Eigen::MatrixXcd ResponseContext::chi_linear(const Eigen::MatrixXcd& psi) const {
  const Eigen::MatrixXcd elements = matrix_elements(kernel(density_of(psi)));
  return divided_.cast<cplx>().cwiseProduct(elements);
}

Eigen::MatrixXcd ResponseContext::coupling_matrix() const {
  const Eigen::Index m = dim();
  Eigen::MatrixXcd c(m * m, m * m);
  Eigen::MatrixXcd unit = Eigen::MatrixXcd::Zero(m, m);
  for (Eigen::Index j = 0; j < m; ++j)
    for (Eigen::Index i = 0; i < m; ++i) {
      unit(i, j) = 1.0;
      c.col(i + j * m) = vec(matrix_elements(kernel(density_of(unit))));
      unit(i, j) = 0.0;
    }
  return c;
}

Eigen::MatrixXcd ResponseContext::chi_matrix() const {
  return vec(divided_.cast<cplx>()).asDiagonal() * coupling_matrix();
}

namespace {

/// (I + W C W) v with W = diag(w), the symmetrized form of I - chi.
Eigen::VectorXcd symmetrized_apply(const ResponseContext& ctx, const Eigen::VectorXcd& w, const Eigen::VectorXcd& v) {
  const Eigen::MatrixXcd psi = unvec(w.cwiseProduct(v), ctx.dim());
  return v + w.cwiseProduct(vec(ctx.matrix_elements(ctx.kernel(ctx.density_of(psi)))));
}

}  // namespace

Eigen::MatrixXcd apply_chi(const ResponseContext& ctx, const Eigen::MatrixXcd& psi) {
  require_hermitian(psi, ctx.dim());
  return ctx.chi_linear(psi);
}

TangentPerturbation apply_jacobian(const ResponseContext& ctx, const TangentPerturbation& tp) {
  require_hermitian(tp.psi, ctx.dim());
  TangentPerturbation out;
  out.psi = ctx.chi_linear(tp.psi) - tp.psi;
  out.psi.diagonal() += tp.s * ctx.g().cast<cplx>();
  out.s = tp.psi.trace().real();
  return out;
}

Eigen::MatrixXcd jacobian_matrix(const ResponseContext& ctx) {
  const Eigen::Index m = ctx.dim();
  const Eigen::Index n = m * m;
  Eigen::MatrixXcd j = Eigen::MatrixXcd::Zero(n + 1, n + 1);
  j.topLeftCorner(n, n) = ctx.chi_matrix() - Eigen::MatrixXcd::Identity(n, n);
  for (Eigen::Index i = 0; i < m; ++i) {
    j(i + i * m, n) = ctx.g()[i];
    j(n, i + i * m) = 1.0;
  }
  return j;
}

namespace {

Eigen::VectorXcd refined_solve(const Eigen::MatrixXcd& a, const Eigen::PartialPivLU<Eigen::MatrixXcd>& lu,
                               const Eigen::VectorXcd& b) {
  Eigen::VectorXcd x = lu.solve(b);
  const double scale = std::max(b.norm(), std::numeric_limits<double>::min());
  for (int k = 0; k < 3; ++k) {
    const Eigen::VectorXcd r = b - a * x;
    if (r.norm() <= 1e-10 * scale) break;
    x += lu.solve(r);
  }
  return x;
}

}  // namespace

JacobianSolution solve_jacobian(const ResponseContext& ctx, const TangentPerturbation& rhs) {
  const Eigen::Index m = ctx.dim();
  require_hermitian(rhs.psi, m);
  const Eigen::Index n = m * m;
  const Eigen::MatrixXcd a = ctx.chi_matrix() - Eigen::MatrixXcd::Identity(n, n);

  JacobianSolution out;
  Eigen::BDCSVD<Eigen::MatrixXcd> svd(a);
  out.smallest_singular = svd.singularValues().minCoeff();
  if (!(out.smallest_singular > 1e-12 * std::max(1.0, svd.singularValues().maxCoeff())))
    throw std::domain_error("solve_jacobian: chi - I is singular (smallest singular value " +
                            std::to_string(out.smallest_singular) + ")");

  const Eigen::PartialPivLU<Eigen::MatrixXcd> lu(a);
  const Eigen::MatrixXcd y_phi = unvec(refined_solve(a, lu, vec(rhs.psi)), m);
  const Eigen::MatrixXcd g_mat = ctx.g().cast<cplx>().asDiagonal();
  const Eigen::MatrixXcd y_g = unvec(refined_solve(a, lu, vec(g_mat)), m);

  out.denominator = y_g.trace().real();
  if (!(std::abs(out.denominator) > 1e-300))
    throw std::domain_error("solve_jacobian: Tr((chi - I)^-1 g) vanishes");
  const double s = (y_phi.trace().real() - rhs.s) / out.denominator;
  Eigen::MatrixXcd psi = y_phi - s * y_g;
  psi = 0.5 * (psi + psi.adjoint()).eval();
  out.solution = {psi, s};

  const TangentPerturbation check = apply_jacobian(ctx, out.solution);
  out.residual = std::sqrt((check.psi - rhs.psi).squaredNorm() + std::pow(check.s - rhs.s, 2));
  return out;
}

namespace {

/// Tangent dimensions m above which the audit runs matrix-free.
constexpr Eigen::Index dense_audit_limit = 40;

using Operator = std::function<Eigen::VectorXcd(const Eigen::VectorXcd&)>;

/// Extreme eigenvalues of a Hermitian operator by Lanczos with full
/// reorthogonalization, to a Ritz residual of 1e-10.
std::pair<double, double> lanczos_extremes(const Operator& a, Eigen::Index n) {
  std::mt19937_64 rng(0x5eed);
  std::normal_distribution<double> normal;
  Eigen::VectorXcd q(n);
  for (auto& x : q) x = cplx(normal(rng), normal(rng));
  const Eigen::Index k_max = std::min<Eigen::Index>(n, 400);
  Eigen::MatrixXcd basis(n, k_max);
  std::vector<double> alpha, beta;
  basis.col(0) = q.normalized();
  double lo = 0.0, hi = 0.0;
  for (Eigen::Index k = 0; k < k_max; ++k) {
    Eigen::VectorXcd w = a(basis.col(k));
    alpha.push_back(basis.col(k).dot(w).real());
    for (int pass = 0; pass < 2; ++pass)
      w -= basis.leftCols(k + 1) * (basis.leftCols(k + 1).adjoint() * w);
    const double b = w.norm();

    const auto m = static_cast<Eigen::Index>(alpha.size());
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
      t(i, i) = alpha[static_cast<std::size_t>(i)];
      if (i + 1 < m) t(i, i + 1) = t(i + 1, i) = beta[static_cast<std::size_t>(i)];
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
    lo = es.eigenvalues()[0];
    hi = es.eigenvalues()[m - 1];
    const double r_lo = b * std::abs(es.eigenvectors()(m - 1, 0));
    const double r_hi = b * std::abs(es.eigenvectors()(m - 1, m - 1));
    if (b < 1e-14 || (r_lo <= 1e-10 * std::max(1.0, std::abs(lo)) && r_hi <= 1e-10 * std::max(1.0, std::abs(hi))))
      break;
    if (k + 1 < k_max) {
      beta.push_back(b);
      basis.col(k + 1) = w / b;
    }
  }
  return {lo, hi};
}

/// Conjugate gradients for a Hermitian positive definite operator.
Eigen::VectorXcd conjugate_gradient(const Operator& a, const Eigen::VectorXcd& b) {
  Eigen::VectorXcd x = Eigen::VectorXcd::Zero(b.size());
  Eigen::VectorXcd r = b, p = r;
  double rr = r.squaredNorm();
  const double stop = 1e-26 * std::max(rr, std::numeric_limits<double>::min());
  for (Eigen::Index k = 0; k < 10 * b.size() && rr > stop; ++k) {
    const Eigen::VectorXcd ap = a(p);
    const double step = rr / p.dot(ap).real();
    x += step * p;
    r -= step * ap;
    const double next = r.squaredNorm();
    p = r + (next / rr) * p;
    rr = next;
  }
  return x;
}

}  // namespace

A4Report audit_a4(const ResponseContext& ctx, AuditMethod method) {
  const Eigen::Index m = ctx.dim();
  const Eigen::VectorXd d_abs = vec(ctx.divided_differences().cast<cplx>()).real().cwiseAbs();
  const Eigen::VectorXcd w = d_abs.cwiseSqrt().cast<cplx>();

  A4Report r;
  r.tangent_dim = m;
  r.g_sign = std::string(to_string(ctx.model().g_sign));
  const bool dense = method == AuditMethod::dense || (method == AuditMethod::automatic && m <= dense_audit_limit);
  if (dense) {
    r.method = "dense";
    Eigen::MatrixXcd s = w.asDiagonal() * ctx.coupling_matrix() * w.asDiagonal();
    s = 0.5 * (s + s.adjoint()).eval();
    s += Eigen::MatrixXcd::Identity(m * m, m * m);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(s, Eigen::EigenvaluesOnly);
    r.lambda_min = es.eigenvalues().minCoeff();
    r.lambda_max = es.eigenvalues().maxCoeff();
  } else {
    r.method = "lanczos";
    std::tie(r.lambda_min, r.lambda_max) = lanczos_extremes(
        [&](const Eigen::VectorXcd& v) { return symmetrized_apply(ctx, w, v); }, m * m);
  }
  r.violated = !(r.lambda_min > 0.0);
  r.kappa = r.violated ? std::numeric_limits<double>::infinity() : 1.0 / r.lambda_min;
  r.condition = r.violated ? std::numeric_limits<double>::infinity() : r.lambda_max / r.lambda_min;

  r.denominator_s = std::numeric_limits<double>::quiet_NaN();
  if (dense) {
    try {
      TangentPerturbation probe{Eigen::MatrixXcd::Zero(m, m), 1.0};
      r.denominator_s = solve_jacobian(ctx, probe).denominator;
    } catch (const std::domain_error&) {
    }
  } else if (!r.violated) {
    // chi - I = -W (I + S) W^-1 with W = |D|^1/2, so
    // Tr((chi - I)^-1 g) = -sum_i W_ii [(I + S)^-1 W^-1 g]_ii.
    Eigen::VectorXcd b = Eigen::VectorXcd::Zero(m * m);
    for (Eigen::Index i = 0; i < m; ++i)
      if (w[i + i * m].real() > 0.0) b[i + i * m] = ctx.g()[i] / w[i + i * m].real();
    const Eigen::VectorXcd y =
        conjugate_gradient([&](const Eigen::VectorXcd& v) { return symmetrized_apply(ctx, w, v); }, b);
    double trace = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) trace -= w[i + i * m].real() * y[i + i * m].real();
    r.denominator_s = trace;
  }
  return r;
}

Eigen::MatrixXcd chi_finite_difference(const ResponseContext& ctx, const Eigen::MatrixXcd& psi, double eps) {
  require_hermitian(psi, ctx.dim());
  const GridFunction drho = ctx.density_of(psi);
  auto occupation_operator = [&](double sign) {
    GridFunction rho = ctx.rho();
    for (Eigen::Index x = 0; x < rho.size(); ++x) rho[x] = (rho[x] + sign * eps * drho[x]).real();
    Eigen::MatrixXcd h = build_hamiltonian(ctx.model(), ctx.basis(), rho).dense();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (h + h.adjoint()));
    const Eigen::VectorXd f = occupations(es.eigenvalues(), ctx.mu(), ctx.model().smearing);
    const Eigen::MatrixXcd u = ctx.orbitals().adjoint() * es.eigenvectors();
    return Eigen::MatrixXcd(u * f.cast<cplx>().asDiagonal() * u.adjoint());
  };
  return (occupation_operator(1.0) - occupation_operator(-1.0)) / (2.0 * eps);
}

double chi_pairing(const ResponseContext& ctx, const Eigen::MatrixXcd& psi) {
  require_hermitian(psi, ctx.dim());
  const GridFunction rho = ctx.density_of(psi);
  const Eigen::MatrixXcd chi = ctx.chi_linear(psi);
  const Eigen::MatrixXcd vh = ctx.matrix_elements(hartree(rho).potential);
  return chi.cwiseProduct(vh.conjugate()).sum().real();
}

}  // namespace mks
