#include "mks/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

namespace mks {

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& f) {
  const std::size_t threads = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, workers)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex guard;
  std::size_t failed_index = n;
  std::exception_ptr failure;
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        f(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(guard);
        if (i < failed_index) {
          failed_index = i;
          failure = std::current_exception();
        }
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

namespace {

struct Job {
  std::optional<ScfState> state;
  double wall_s = 0.0;
};

std::string describe(double cutoff, double beta, const ScfState& s) {
  std::ostringstream out;
  out << "SCF did not converge at cutoff " << cutoff << " (beta " << beta << ") after " << s.iterations
      << " iterations, last drho " << s.residual_density;
  return out.str();
}

Job solve(const Model& model, const BasisPtr& basis, const ScfOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  Job j;
  j.state = run_scf(model, basis, options);
  j.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return j;
}

double h1(const PlaneWaveBasis& basis, const Eigen::VectorXcd& c) { return h1_norm(basis, c); }

/// Orbitals of gamma that enter the orthonormalized projection onto target.
/// Candidates above `floor` are taken by decreasing occupation and kept while
/// the Gram-Schmidt remainder of their truncation has norm^2 of at least 1e-8;
/// the rest project to zero. This also caps the count at the target size.
DensityMatrix projectable(const DensityMatrix& gamma, const PlaneWaveBasis& target, double floor) {
  const auto map = embedding(target, *gamma.basis());
  std::vector<Eigen::Index> order;
  for (Eigen::Index i = 0; i < gamma.states(); ++i)
    if (gamma.occupations()[i] > floor) order.push_back(i);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return gamma.occupations()[a] > gamma.occupations()[b];
  });

  std::vector<Eigen::Index> keep;
  Eigen::MatrixXcd q(static_cast<Eigen::Index>(map.size()), 0);
  for (Eigen::Index i : order) {
    if (q.cols() == q.rows()) break;
    Eigen::VectorXcd v(q.rows());
    for (Eigen::Index k = 0; k < v.size(); ++k) v[k] = gamma.orbitals()(map[static_cast<std::size_t>(k)], i);
    for (int pass = 0; pass < 2; ++pass) v -= q * (q.adjoint() * v);
    if (v.squaredNorm() < 1e-8) continue;
    q.conservativeResize(Eigen::NoChange, q.cols() + 1);
    q.col(q.cols() - 1) = v.normalized();
    keep.push_back(i);
  }
  std::sort(keep.begin(), keep.end());

  Eigen::MatrixXcd c(gamma.basis()->size(), static_cast<Eigen::Index>(keep.size()));
  Eigen::VectorXd f(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    c.col(static_cast<Eigen::Index>(k)) = gamma.orbitals().col(keep[k]);
    f[static_cast<Eigen::Index>(k)] = gamma.occupations()[keep[k]];
  }
  return DensityMatrix(gamma.basis(), std::move(c), std::move(f));
}

void fill_errors(SweepRow& row, const ScfState& coarse, const ScfState& ref, const RunConfig& config,
                 double occupation_floor) {
  const BasisPtr& fine = ref.gamma.basis();
  const BasisPtr& basis = coarse.gamma.basis();
  row.basis_size = static_cast<int>(basis->size());
  row.f_total = coarse.free_energy.total;
  row.f_err = std::abs(coarse.free_energy.total - ref.free_energy.total);
  row.rho_l2_err = l2_norm(transfer(coarse.rho, fine) - ref.rho);

  row.dense_norm = fine->size() <= dense_norm_limit;
  const DensityMatrix ref_trim = projectable(ref.gamma, *basis, occupation_floor);
  if (row.dense_norm) {
    row.gamma_s11_err = s11_distance(coarse.gamma, ref.gamma);
    if (config.projection == ProjectionKind::raw) {
      row.proj_err = s11_norm_dense(project_dm_raw(ref.gamma, *basis) - ref.gamma.dense(), *fine);
    } else {
      row.proj_err = s11_distance(project_dm(ref_trim, basis), ref.gamma);
    }
  } else {
    row.gamma_s11_err = orbital_distance(coarse.gamma, ref.gamma);
    row.proj_err = orbital_distance(project_dm(ref_trim, basis), ref_trim);
  }
  row.ratio = row.proj_err > 0.0 ? row.gamma_s11_err / row.proj_err : 0.0;

  // Orbital-wise errors over occupied states, phases aligned by overlap.
  const Eigen::MatrixXcd coarse_fine = embed_coefficients(coarse.gamma.orbitals(), *basis, *fine);
  const auto map = embedding(*basis, *fine);
  const Eigen::Index n = std::min(coarse.gamma.states(), ref.gamma.states());
  for (Eigen::Index i = 0; i < n; ++i) {
    if (ref.gamma.occupations()[i] < occupied_threshold) continue;
    const Eigen::VectorXcd phi = ref.gamma.orbitals().col(i);
    Eigen::VectorXcd phi_n = coarse_fine.col(i);
    const cplx overlap = phi_n.dot(phi);
    if (std::abs(overlap) > 0.0) phi_n *= overlap / std::abs(overlap);
    row.orbital_err = std::max(row.orbital_err, h1(*fine, phi - phi_n));
    Eigen::VectorXcd tail = phi;
    for (auto k : map) tail[k] = 0.0;
    row.orbital_best = std::max(row.orbital_best, h1(*fine, tail));
  }
}

bool nonincreasing(const std::vector<double>& v, double slack) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[i - 1] + slack) return false;
  return true;
}

}  // namespace

SweepResult run_sweep(const RunConfig& config, const SweepRequest& request) {
  std::vector<double> cutoffs = request.cutoffs.empty() ? config.cutoffs : request.cutoffs;
  if (cutoffs.size() < 4) throw ConfigError("sweep.cutoffs", "a sweep needs at least four cutoffs");
  std::sort(cutoffs.begin(), cutoffs.end());
  if (cutoffs.front() <= 0.0) throw ConfigError("sweep.cutoffs", "cutoffs must be positive");
  double reference = request.reference > 0.0 ? request.reference : config.reference;
  if (!(reference > 0.0)) reference = 2.5 * cutoffs.back();
  if (reference < 2.0 * cutoffs.back())
    throw ConfigError("sweep.reference", "reference cutoff must be at least twice the largest swept cutoff");
  std::vector<double> betas = request.betas.empty() ? config.betas : request.betas;
  if (betas.empty()) betas.push_back(config.model.smearing.beta());

  SweepResult result;
  result.config_name = config.name;
  result.config_hash = config.hash;
  result.reference_cutoff = reference;
  result.floor = 10.0 * config.scf.tol_rho;

  ScfOptions ref_options = config.scf;
  ref_options.tol_rho /= 10.0;
  ref_options.tol_f /= 10.0;
  ref_options.on_iteration = nullptr;
  ScfOptions options = config.scf;
  options.on_iteration = nullptr;

  const BasisPtr fine = build_basis(config.cell, reference);
  std::vector<BasisPtr> bases;
  for (double ec : cutoffs) bases.push_back(build_basis(config.cell, ec));
  for (std::size_t k = 0; k < bases.size(); ++k)
    if (!(config.model.electrons < static_cast<double>(bases[k]->size())))
      throw ConfigError("sweep.cutoffs", "cutoff " + std::to_string(cutoffs[k]) + " holds too few plane waves");

  // One job per (temperature, cutoff), references included; results land in
  // fixed slots so the output order never depends on scheduling.
  const std::size_t per = cutoffs.size() + 1;
  std::vector<Job> jobs(betas.size() * per);
  const int workers = effective_workers(config.workers);
  parallel_for(jobs.size(), workers, [&](std::size_t idx) {
    const std::size_t t = idx / per, k = idx % per;
    Model model = config.model;
    model.smearing = Smearing(betas[t]);
    const bool is_ref = k == cutoffs.size();
    const BasisPtr& basis = is_ref ? fine : bases[k];
    jobs[idx] = solve(model, basis, is_ref ? ref_options : options);
    if (!jobs[idx].state->converged)
      throw SweepError(is_ref ? reference : cutoffs[k], betas[t],
                       describe(is_ref ? reference : cutoffs[k], betas[t], *jobs[idx].state));
  });

  for (std::size_t t = 0; t < betas.size(); ++t) {
    TemperatureSweep ts;
    ts.beta = betas[t];
    const ScfState& ref = *jobs[t * per + cutoffs.size()].state;
    ts.f_reference = ref.free_energy.total;
    ts.reference_basis_size = static_cast<int>(fine->size());
    ts.rows.resize(cutoffs.size());
    parallel_for(cutoffs.size(), workers, [&](std::size_t k) {
      const Job& job = jobs[t * per + k];
      SweepRow& row = ts.rows[k];
      row.ec = cutoffs[k];
      row.scf_iters = job.state->iterations;
      row.wall_s = job.wall_s;
      fill_errors(row, *job.state, ref, config, config.scf.occupation_floor);
    });

    std::vector<std::pair<double, double>> fe, de;
    std::vector<double> f_err, rho_err, g_err, f_tot;
    for (const auto& r : ts.rows) {
      fe.emplace_back(r.ec, r.f_err);
      de.emplace_back(r.ec, r.rho_l2_err);
      f_err.push_back(r.f_err);
      rho_err.push_back(r.rho_l2_err);
      g_err.push_back(r.gamma_s11_err);
      f_tot.push_back(r.f_total);
      if (r.proj_err > result.floor) ts.max_ratio = std::max(ts.max_ratio, r.ratio);
      if (r.orbital_best > result.floor)
        ts.orbital_constant = std::max(ts.orbital_constant, r.orbital_err / r.orbital_best);
    }
    f_tot.push_back(ts.f_reference);
    ts.errors_monotone = nonincreasing(f_err, result.floor) && nonincreasing(rho_err, result.floor) &&
                         nonincreasing(g_err, result.floor);
    ts.energies_monotone = nonincreasing(f_tot, 10.0 * config.scf.tol_f);
    try {
      ts.energy_fit = fit_decay(fe, result.floor);
    } catch (const std::invalid_argument& ex) {
      ts.fit_note += std::string("energy: ") + ex.what() + "; ";
    }
    try {
      ts.density_fit = fit_decay(de, result.floor);
    } catch (const std::invalid_argument& ex) {
      ts.fit_note += std::string("density: ") + ex.what() + "; ";
    }
    if (request.audit) {
      Model model = config.model;
      model.smearing = Smearing(betas[t]);
      ts.a4 = audit_a4(ResponseContext(model, ref, ref_options));
    }
    result.temperatures.push_back(std::move(ts));
  }
  return result;
}

QuasiOptimalityReport quasi_optimality(const RunConfig& config, const SweepRequest& request) {
  SweepRequest r = request;
  r.betas = {request.betas.empty() ? config.model.smearing.beta() : request.betas.front()};
  r.audit = false;
  double reference = r.reference > 0.0 ? r.reference : config.reference;
  const auto& cutoffs = r.cutoffs.empty() ? config.cutoffs : r.cutoffs;
  if (!(reference > 0.0) && !cutoffs.empty()) reference = 2.5 * *std::max_element(cutoffs.begin(), cutoffs.end());
  if (reference > 0.0 && build_basis(config.cell, reference)->size() > 200)
    throw ConfigError("sweep.reference", "quasi-optimality needs a reference basis of at most 200 plane waves");

  SweepResult sweep = run_sweep(config, r);
  QuasiOptimalityReport q;
  q.sweep = std::move(sweep.temperatures.front());
  q.bound = config.ratio_bound;
  std::vector<double> ec, ratio;
  for (const auto& row : q.sweep.rows) {
    if (!(row.proj_err > sweep.floor)) continue;
    ec.push_back(row.ec);
    ratio.push_back(row.ratio);
  }
  q.max_ratio = q.sweep.max_ratio;
  q.orbital_constant = q.sweep.orbital_constant;
  q.bounded = !ratio.empty() && q.max_ratio <= q.bound;
  if (!ratio.empty()) {
    q.first_ratio = ratio.front();
    q.last_ratio = ratio.back();
  }
  if (ratio.size() >= 2) q.ratio_trend = fit_line(ec, ratio).slope;
  q.nonincreasing = ratio.size() >= 2 && q.ratio_trend <= 0.0 && q.last_ratio <= q.first_ratio;
  return q;
}

}  // namespace mks
