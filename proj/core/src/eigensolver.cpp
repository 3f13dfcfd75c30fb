#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "mks/hamiltonian.hpp"

namespace mks {

namespace {

double residual_norm(const Eigen::VectorXcd& hx, const Eigen::VectorXcd& x, double lambda) {
  return (hx - lambda * x).norm();
}

/// Orthonormal basis of span(z) by SVQB: eigendecomposition of the Gram
/// matrix of the column-normalized block, dropping directions whose Gram
/// eigenvalue falls below drop * largest.
Eigen::MatrixXcd svqb(Eigen::MatrixXcd z, double drop) {
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    const double n = z.col(j).norm();
    if (n > 0.0) z.col(j) /= n;
  }
  for (int pass = 0; pass < 2; ++pass) {
    const Eigen::MatrixXcd gram = z.adjoint() * z;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (gram + gram.adjoint()));
    const Eigen::VectorXd& ev = es.eigenvalues();
    const double largest = ev.size() > 0 ? ev.maxCoeff() : 0.0;
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < ev.size(); ++i)
      if (ev[i] > drop * largest) keep.push_back(i);
    Eigen::MatrixXcd t(z.cols(), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k)
      t.col(static_cast<Eigen::Index>(k)) = es.eigenvectors().col(keep[k]) / std::sqrt(ev[keep[k]]);
    z = z * t;
  }
  return z;
}

struct Ritz {
  Eigen::VectorXd values;
  Eigen::MatrixXcd vectors;
};

Ritz rayleigh_ritz(const Eigen::MatrixXcd& q, const Eigen::MatrixXcd& hq, Eigen::Index k) {
  Eigen::MatrixXcd reduced = q.adjoint() * hq;
  reduced = 0.5 * (reduced + reduced.adjoint()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(reduced);
  k = std::min<Eigen::Index>(k, reduced.rows());
  return {es.eigenvalues().head(k), es.eigenvectors().leftCols(k)};
}

}  // namespace

EigenResult dense_eigenpairs(const Hamiltonian& h, Eigen::Index m) {
  if (m < 0 || m > h.size()) throw std::invalid_argument("lowest_eigenpairs: more states requested than basis functions");
  Eigen::MatrixXcd d = h.dense();
  d = 0.5 * (d + d.adjoint()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(d);
  EigenResult r;
  r.values = es.eigenvalues().head(m);
  r.vectors = es.eigenvectors().leftCols(m);
  const Eigen::MatrixXcd hx = h.apply(r.vectors);
  for (Eigen::Index i = 0; i < m; ++i)
    r.max_residual = std::max(r.max_residual, residual_norm(hx.col(i), r.vectors.col(i), r.values[i]));
  r.iterations = 1;
  return r;
}

EigenResult lobpcg(const Hamiltonian& h, Eigen::Index m, const EigenOptions& options) {
  const Eigen::Index n = h.size();
  if (m < 0 || m > n) throw std::invalid_argument("lowest_eigenpairs: more states requested than basis functions");
  if (m == 0) return {};
  // A few extra trial vectors speed up convergence of the highest wanted pair.
  const Eigen::Index k = std::min(n, m + std::max<Eigen::Index>(2, m / 5));

  Eigen::MatrixXcd x(n, k);
  Eigen::Index filled = 0;
  if (options.guess && options.guess->rows() == n) {
    filled = std::min(k, options.guess->cols());
    x.leftCols(filled) = options.guess->leftCols(filled);
  }
  {
    // Remaining columns: lowest-kinetic plane waves plus a small deterministic perturbation.
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return h.kinetic()[a] < h.kinetic()[b]; });
    std::mt19937_64 rng(0x5eed);
    std::normal_distribution<double> normal(0.0, 1e-3);
    for (Eigen::Index j = filled; j < k; ++j) {
      for (Eigen::Index i = 0; i < n; ++i) x(i, j) = cplx(normal(rng), normal(rng));
      x(order[static_cast<std::size_t>(j - filled)], j) += 1.0;
    }
  }
  x = svqb(x, 1e-14);

  const Eigen::ArrayXd precond = 1.0 / (1.0 + h.kinetic().array());
  Eigen::MatrixXcd p;
  EigenResult r;
  for (int iter = 1; iter <= options.max_iterations; ++iter) {
    Eigen::MatrixXcd hx = h.apply(x);
    const Ritz ritz = rayleigh_ritz(x, hx, x.cols());
    x = x * ritz.vectors;
    hx = hx * ritz.vectors;
    const Eigen::MatrixXcd res = hx - x * ritz.values.cast<cplx>().asDiagonal();

    double worst = 0.0;
    const Eigen::Index wanted = std::min(m, x.cols());
    for (Eigen::Index i = 0; i < wanted; ++i) worst = std::max(worst, res.col(i).norm());
    r.iterations = iter;
    if (worst <= options.tolerance && x.cols() >= m) {
      r.values = ritz.values.head(m);
      r.vectors = x.leftCols(m);
      r.max_residual = worst;
      return r;
    }

    Eigen::MatrixXcd w = precond.matrix().asDiagonal() * res;
    const Eigen::Index blocks = x.cols() + w.cols() + p.cols();
    Eigen::MatrixXcd z(n, blocks);
    z << x, w, p;
    const Eigen::MatrixXcd q = svqb(z, 1e-13);
    const Eigen::MatrixXcd hq = h.apply(q);
    const Ritz next = rayleigh_ritz(q, hq, k);
    const Eigen::MatrixXcd x_new = q * next.vectors;
    p = x_new - x * (x.adjoint() * x_new);
    x = svqb(x_new, 1e-14);
  }
  throw std::runtime_error("lobpcg: no convergence within the iteration cap");
}

EigenResult lowest_eigenpairs(const Hamiltonian& h, Eigen::Index m, const EigenOptions& options) {
  if (m < 0 || m > h.size()) throw std::invalid_argument("lowest_eigenpairs: more states requested than basis functions");
  const bool dense = options.method == EigenMethod::dense ||
                     (options.method == EigenMethod::automatic && h.size() <= options.dense_limit);
  return dense ? dense_eigenpairs(h, m) : lobpcg(h, m, options);
}

}  // namespace mks
