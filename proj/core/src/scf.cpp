#include "mks/scf.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>

namespace mks {

namespace {

bool interacting(const Model& m) {
  return m.interactions.hartree || (m.interactions.xc && m.xc.kind() != XcFunctional::Kind::none);
}

Eigen::VectorXd real_values(const GridFunction& u) {
  Eigen::VectorXd v(u.size());
  for (Eigen::Index i = 0; i < u.size(); ++i) v[i] = u[i].real();
  return v;
}

GridFunction from_values(const BasisPtr& basis, const Eigen::VectorXd& v) {
  return GridFunction::from_real(basis, std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
}

/// Pulay/Anderson extrapolation over the last `window` (input, residual) pairs.
class Mixer {
 public:
  Mixer(MixingOptions options, bool enabled) : options_(options), enabled_(enabled) {}

  Eigen::VectorXd next(const Eigen::VectorXd& in, const Eigen::VectorXd& out) {
    if (!enabled_) return out;
    const Eigen::VectorXd r = out - in;
    const Eigen::VectorXd simple = in + options_.alpha * r;
    if (options_.kind == MixingOptions::Kind::simple) return simple;

    inputs_.push_back(in);
    residuals_.push_back(r);
    if (static_cast<int>(inputs_.size()) > options_.window + 1) {
      inputs_.pop_front();
      residuals_.pop_front();
    }
    const auto h = static_cast<Eigen::Index>(inputs_.size()) - 1;
    if (h < 1) return simple;
    Eigen::MatrixXd d_in(in.size(), h), d_res(in.size(), h);
    for (Eigen::Index k = 0; k < h; ++k) {
      d_in.col(k) = inputs_[static_cast<std::size_t>(k + 1)] - inputs_[static_cast<std::size_t>(k)];
      d_res.col(k) = residuals_[static_cast<std::size_t>(k + 1)] - residuals_[static_cast<std::size_t>(k)];
    }
    const Eigen::VectorXd gamma = d_res.colPivHouseholderQr().solve(r);
    const Eigen::VectorXd mixed = simple - (d_in + options_.alpha * d_res) * gamma;
    // Extrapolation may leave the admissible cone; fall back to damping then.
    if (!mixed.allFinite() || mixed.minCoeff() < 0.0) {
      inputs_.clear();
      residuals_.clear();
      return simple;
    }
    return mixed;
  }

 private:
  MixingOptions options_;
  bool enabled_;
  std::deque<Eigen::VectorXd> inputs_, residuals_;
};

}  // namespace

Hamiltonian build_hamiltonian(const Model& model, const BasisPtr& basis, const GridFunction& rho) {
  const auto terms = assemble_effective(rho, model.external, model.xc, model.interactions);
  return Hamiltonian(basis, terms.total());
}

RetainedSpectrum retained_spectrum(const Hamiltonian& h, const Model& model, const ScfOptions& options,
                                   const Eigen::MatrixXcd* guess) {
  const Eigen::Index n = h.size();
  const double electrons = model.electrons;
  if (!(electrons < static_cast<double>(n)))
    throw std::invalid_argument("retained_spectrum: basis too small for the electron count");
  const Eigen::Index buffer = std::max(0, options.buffer_states);
  Eigen::Index m = std::min<Eigen::Index>(n, static_cast<Eigen::Index>(std::ceil(electrons)) + buffer);
  m = std::max<Eigen::Index>(m, static_cast<Eigen::Index>(std::floor(electrons)) + 1);

  EigenOptions eig = options.eigen;
  if (guess) eig.guess = *guess;
  while (true) {
    EigenResult er = lowest_eigenpairs(h, m, eig);
    const double mu = solve_mu(er.values, electrons, model.smearing);
    const Eigen::VectorXd f = occupations(er.values, mu, model.smearing);
    const bool tail_small = f[m - 1] < options.occupation_floor;
    if (!tail_small && m < n) {
      m = std::min<Eigen::Index>(n, 2 * m);
      eig.guess = er.vectors;
      continue;
    }
    const Eigen::Index above = (f.array() > options.occupation_floor).count();
    const Eigen::Index keep = std::min<Eigen::Index>(n, above + buffer);
    if (keep > m) {
      m = keep;
      eig.guess = er.vectors;
      continue;
    }
    RetainedSpectrum r;
    r.values = er.values.head(keep);
    r.vectors = er.vectors.leftCols(keep);
    r.mu = solve_mu(r.values, electrons, model.smearing);
    r.occupations = occupations(r.values, r.mu, model.smearing);
    return r;
  }
}

FixedPointResult fixed_point_map(const Model& model, const BasisPtr& basis, const GridFunction& rho_in,
                                 const ScfOptions& options, const Eigen::MatrixXcd* guess) {
  const Hamiltonian h = build_hamiltonian(model, basis, rho_in);
  RetainedSpectrum retained = retained_spectrum(h, model, options, guess);
  DensityMatrix gamma(basis, std::move(retained.vectors), std::move(retained.occupations), std::move(retained.values));
  GridFunction rho = density(gamma);
  return {std::move(gamma), retained.mu, std::move(rho)};
}

FixedPointResidual fixed_point_residual(const Model& model, const DensityMatrix& gamma, double mu,
                                        const ScfOptions& options) {
  const auto& basis = gamma.basis();
  const Hamiltonian h = build_hamiltonian(model, basis, density(gamma));
  const RetainedSpectrum retained = retained_spectrum(h, model, options, &gamma.orbitals());
  const Eigen::VectorXd f_new = occupations(retained.values, mu, model.smearing);

  const Eigen::Index n = basis->size();
  Eigen::MatrixXcd z(n, gamma.states() + retained.vectors.cols());
  z << gamma.orbitals(), retained.vectors;
  const Eigen::Index cols = std::min(n, z.cols());
  const Eigen::MatrixXcd q = z.householderQr().householderQ() * Eigen::MatrixXcd::Identity(n, cols);

  const Eigen::MatrixXcd a = q.adjoint() * gamma.orbitals();
  const Eigen::MatrixXcd b = q.adjoint() * retained.vectors;
  Eigen::MatrixXcd diff = b * f_new.cast<cplx>().asDiagonal() * b.adjoint() -
                          a * gamma.occupations().cast<cplx>().asDiagonal() * a.adjoint();
  diff = 0.5 * (diff + diff.adjoint()).eval();

  FixedPointResidual r;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(diff, Eigen::EigenvaluesOnly);
  r.trace_norm = es.eigenvalues().cwiseAbs().sum();

  // Tr| K D K | with K = |grad|: same nonzero spectrum as M^{1/2} diff M^{1/2},
  // M = Q^H K^2 Q.
  const Eigen::MatrixXcd m = q.adjoint() * basis->g2().cast<cplx>().asDiagonal() * q;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> ms(0.5 * (m + m.adjoint()));
  const Eigen::VectorXd mev = ms.eigenvalues().cwiseMax(0.0);
  const Eigen::MatrixXcd msqrt = ms.eigenvectors() * mev.cwiseSqrt().cast<cplx>().asDiagonal() * ms.eigenvectors().adjoint();
  Eigen::MatrixXcd weighted = msqrt * diff * msqrt;
  weighted = 0.5 * (weighted + weighted.adjoint()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> ws(weighted, Eigen::EigenvaluesOnly);
  r.s11 = r.trace_norm + ws.eigenvalues().cwiseAbs().sum();

  r.trace = std::abs(gamma.trace() - model.electrons);
  return r;
}

ScfState run_scf(const Model& model, const BasisPtr& basis, const ScfOptions& options, const GridFunction* rho0) {
  GridFunction rho_in =
      rho0 ? *rho0 : GridFunction::constant(basis, model.electrons / basis->cell().volume());
  if (rho_in.size() != basis->grid_size()) throw std::invalid_argument("run_scf: initial density grid mismatch");

  Mixer mixer(options.mixing, interacting(model));
  std::vector<IterationRecord> history;
  std::optional<FixedPointResult> last;
  double previous_f = std::numeric_limits<double>::infinity();
  double drho = std::numeric_limits<double>::infinity();
  bool converged = false;
  int iter = 0;
  for (iter = 1; iter <= options.max_iterations; ++iter) {
    FixedPointResult out =
        fixed_point_map(model, basis, rho_in, options, last ? &last->gamma.orbitals() : nullptr);
    const double f = free_energy(out.gamma, model).total;
    drho = l2_norm(out.rho - rho_in);
    const double df = std::abs(f - previous_f);
    IterationRecord rec{iter, f, drho, out.mu};
    history.push_back(rec);
    if (options.on_iteration) options.on_iteration(rec);
    previous_f = f;

    const Eigen::VectorXd next = mixer.next(real_values(rho_in), real_values(out.rho));
    last = std::move(out);
    if (drho <= options.tol_rho && df <= options.tol_f) {
      converged = true;
      break;
    }
    rho_in = from_values(basis, next);
  }
  if (!last) throw std::runtime_error("run_scf: max_iterations must be positive");

  ScfState state{last->gamma, last->mu, last->rho, free_energy(last->gamma, model), drho, 0.0, 0.0, 0.0,
                 std::min(iter, options.max_iterations), converged, std::move(history)};
  const auto res = fixed_point_residual(model, state.gamma, state.mu, options);
  state.residual_fixedpoint = res.trace_norm;
  state.residual_fixedpoint_s11 = res.s11;
  state.residual_trace = res.trace;
  return state;
}

}  // namespace mks
