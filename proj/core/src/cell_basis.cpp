#include "mks/cell_basis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace mks {

namespace {
constexpr double two_pi = 2.0 * std::numbers::pi;

void require_same_cell(const PlaneWaveBasis& a, const PlaneWaveBasis& b, const char* what) {
  if (!(a.cell() == b.cell())) throw std::invalid_argument(std::string(what) + ": incompatible cells");
}
}  // namespace

// ---------------------------------------------------------------- Cell

Cell::Cell(const Eigen::MatrixXd& lattice) : lattice_(lattice) {
  if (lattice.rows() != lattice.cols() || lattice.rows() < 1 || lattice.rows() > 3)
    throw std::invalid_argument("Cell: lattice must be a square matrix of size 1, 2 or 3");
  if (!lattice.allFinite()) throw std::invalid_argument("Cell: lattice has non-finite entries");
  dimension_ = static_cast<int>(lattice.rows());
  const double det = lattice.determinant();
  const double scale = lattice.rowwise().norm().prod();
  if (!(std::abs(det) > 1e-12 * scale) || scale == 0.0)
    throw std::invalid_argument("Cell: degenerate lattice (zero volume)");
  volume_ = std::abs(det);
  reciprocal_ = two_pi * lattice.inverse().transpose();
}

Cell Cell::cubic(int dimension, double length) {
  if (dimension < 1 || dimension > 3) throw std::invalid_argument("Cell: dimension must be 1, 2 or 3");
  if (!(length > 0.0)) throw std::invalid_argument("Cell: edge length must be positive");
  return Cell(length * Eigen::MatrixXd::Identity(dimension, dimension));
}

Eigen::VectorXd Cell::g_vector(const Miller& m) const {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(dimension_);
  for (int j = 0; j < dimension_; ++j) g += m[j] * reciprocal_.row(j).transpose();
  return g;
}

Eigen::VectorXd Cell::position(const Eigen::VectorXd& fractional) const {
  return lattice_.transpose() * fractional;
}

bool Cell::operator==(const Cell& other) const {
  return dimension_ == other.dimension_ && lattice_ == other.lattice_;
}

// ---------------------------------------------------------------- PlaneWaveBasis

PlaneWaveBasis::PlaneWaveBasis(const Cell& cell, double cutoff) : cell_(cell), cutoff_(cutoff) {
  if (!(cutoff > 0.0) || !std::isfinite(cutoff))
    throw std::invalid_argument("build_basis: cutoff must be positive and finite");
  const int d = cell.dimension();
  const double gmax = std::sqrt(2.0 * cutoff);
  const double limit = 2.0 * cutoff * (1.0 + 1e-12);

  // |m_j| = |G . a_j| / 2pi <= |G| |a_j| / 2pi
  std::array<int, 3> bound{0, 0, 0};
  for (int j = 0; j < d; ++j)
    bound[j] = static_cast<int>(std::floor(gmax * cell.lattice().row(j).norm() / two_pi)) + 1;

  Miller m{0, 0, 0};
  for (m[0] = -bound[0]; m[0] <= bound[0]; ++m[0])
    for (m[1] = -bound[1]; m[1] <= bound[1]; ++m[1])
      for (m[2] = -bound[2]; m[2] <= bound[2]; ++m[2])
        if (cell.g_vector(m).squaredNorm() <= limit) miller_.push_back(m);
  std::sort(miller_.begin(), miller_.end());

  g2_.resize(size());
  std::array<int, 3> mmax{0, 0, 0};
  for (Eigen::Index i = 0; i < size(); ++i) {
    g2_[i] = cell.g_vector(miller_[i]).squaredNorm();
    for (int j = 0; j < 3; ++j) mmax[j] = std::max(mmax[j], std::abs(miller_[i][j]));
  }

  // Products of two basis functions carry |m_j| <= 2 mmax_j; a grid of
  // 4 mmax_j + 1 points holds them without aliasing.
  grid_size_ = 1;
  for (int j = 0; j < 3; ++j) {
    fft_grid_[j] = j < d ? fast_fft_length(4 * mmax[j] + 1) : 1;
    grid_size_ *= fft_grid_[j];
  }

  slots_.resize(miller_.size());
  for (std::size_t i = 0; i < miller_.size(); ++i) {
    Eigen::Index slot = 0;
    for (int j = 0; j < 3; ++j) {
      const int n = fft_grid_[j];
      slot = slot * n + ((miller_[i][j] % n) + n) % n;
    }
    slots_[i] = slot;
  }

  slot_g2_.resize(grid_size_);
  for (Eigen::Index s = 0; s < grid_size_; ++s) slot_g2_[s] = cell.g_vector(slot_miller(s)).squaredNorm();

  fft_ = std::make_shared<Fft>(d, fft_grid_);
}

std::optional<Eigen::Index> PlaneWaveBasis::find(const Miller& m) const {
  auto it = std::lower_bound(miller_.begin(), miller_.end(), m);
  if (it == miller_.end() || *it != m) return std::nullopt;
  return static_cast<Eigen::Index>(it - miller_.begin());
}

Miller PlaneWaveBasis::slot_miller(Eigen::Index slot) const {
  Miller m{0, 0, 0};
  auto p = grid_point(slot);
  for (int j = 0; j < 3; ++j) {
    const int n = fft_grid_[j];
    m[j] = (2 * p[j] < n) ? p[j] : p[j] - n;
  }
  return m;
}

std::array<int, 3> PlaneWaveBasis::grid_point(Eigen::Index index) const {
  std::array<int, 3> p{0, 0, 0};
  for (int j = 2; j >= 0; --j) {
    p[j] = static_cast<int>(index % fft_grid_[j]);
    index /= fft_grid_[j];
  }
  return p;
}

Eigen::VectorXd PlaneWaveBasis::grid_position(Eigen::Index index) const {
  const auto p = grid_point(index);
  const int d = dimension();
  Eigen::VectorXd frac(d);
  for (int j = 0; j < d; ++j) frac[j] = static_cast<double>(p[j]) / fft_grid_[j];
  return cell_.position(frac);
}

BasisPtr build_basis(const Cell& cell, double cutoff) {
  return std::make_shared<const PlaneWaveBasis>(cell, cutoff);
}

std::vector<Eigen::Index> embedding(const PlaneWaveBasis& inner, const PlaneWaveBasis& outer) {
  require_same_cell(inner, outer, "embedding");
  std::vector<Eigen::Index> map(static_cast<std::size_t>(inner.size()));
  for (Eigen::Index i = 0; i < inner.size(); ++i) {
    auto j = outer.find(inner.miller()[i]);
    if (!j) throw std::invalid_argument("embedding: basis sets are not nested");
    map[static_cast<std::size_t>(i)] = *j;
  }
  return map;
}

// ---------------------------------------------------------------- GridFunction

GridFunction::GridFunction(BasisPtr basis, std::vector<cplx> values)
    : basis_(std::move(basis)), values_(std::move(values)) {
  if (!basis_) throw std::invalid_argument("GridFunction: null basis");
  if (static_cast<Eigen::Index>(values_.size()) != basis_->grid_size())
    throw std::invalid_argument("GridFunction: value count does not match the FFT grid");
}

GridFunction GridFunction::zeros(BasisPtr basis) { return constant(std::move(basis), 0.0); }

GridFunction GridFunction::constant(BasisPtr basis, cplx value) {
  const auto n = static_cast<std::size_t>(basis->grid_size());
  return GridFunction(std::move(basis), std::vector<cplx>(n, value));
}

GridFunction GridFunction::from_real(BasisPtr basis, std::span<const double> values) {
  std::vector<cplx> v(values.begin(), values.end());
  return GridFunction(std::move(basis), std::move(v));
}

double GridFunction::max_imag() const {
  double m = 0.0;
  for (const auto& v : values_) m = std::max(m, std::abs(v.imag()));
  return m;
}

std::vector<double> GridFunction::real() const {
  std::vector<double> r(values_.size());
  std::transform(values_.begin(), values_.end(), r.begin(), [](cplx v) { return v.real(); });
  return r;
}

GridFunction& GridFunction::operator+=(const GridFunction& other) {
  if (other.values_.size() != values_.size()) throw std::invalid_argument("GridFunction: grid mismatch");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

GridFunction& GridFunction::operator-=(const GridFunction& other) {
  if (other.values_.size() != values_.size()) throw std::invalid_argument("GridFunction: grid mismatch");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other.values_[i];
  return *this;
}

GridFunction& GridFunction::operator*=(cplx scale) {
  for (auto& v : values_) v *= scale;
  return *this;
}

GridFunction operator+(GridFunction a, const GridFunction& b) { return a += b; }
GridFunction operator-(GridFunction a, const GridFunction& b) { return a -= b; }
GridFunction operator*(cplx s, GridFunction a) { return a *= s; }

// ---------------------------------------------------------------- transforms

GridFunction to_grid(const BasisPtr& basis, const Eigen::VectorXcd& coefficients) {
  if (coefficients.size() != basis->size())
    throw std::invalid_argument("to_grid: coefficient count does not match the basis");
  std::vector<cplx> work(static_cast<std::size_t>(basis->grid_size()), 0.0);
  for (Eigen::Index i = 0; i < basis->size(); ++i) work[static_cast<std::size_t>(basis->grid_slot(i))] = coefficients[i];
  basis->fft().backward(work);
  const double scale = 1.0 / std::sqrt(basis->cell().volume());
  for (auto& v : work) v *= scale;
  return GridFunction(basis, std::move(work));
}

Eigen::VectorXcd from_grid(const GridFunction& u) {
  const auto& basis = *u.basis();
  std::vector<cplx> work(u.values().begin(), u.values().end());
  basis.fft().forward(work);
  const double scale = std::sqrt(basis.cell().volume()) / static_cast<double>(basis.grid_size());
  Eigen::VectorXcd c(basis.size());
  for (Eigen::Index i = 0; i < basis.size(); ++i) c[i] = scale * work[static_cast<std::size_t>(basis.grid_slot(i))];
  return c;
}

std::vector<cplx> fourier_coefficients(const GridFunction& u) {
  const auto& basis = *u.basis();
  std::vector<cplx> work(u.values().begin(), u.values().end());
  basis.fft().forward(work);
  const double scale = std::sqrt(basis.cell().volume()) / static_cast<double>(basis.grid_size());
  for (auto& v : work) v *= scale;
  return work;
}

GridFunction from_fourier(const BasisPtr& basis, std::vector<cplx> coefficients) {
  if (static_cast<Eigen::Index>(coefficients.size()) != basis->grid_size())
    throw std::invalid_argument("from_fourier: coefficient count does not match the FFT grid");
  basis->fft().backward(coefficients);
  const double scale = 1.0 / std::sqrt(basis->cell().volume());
  for (auto& v : coefficients) v *= scale;
  return GridFunction(basis, std::move(coefficients));
}

GridFunction project(const GridFunction& u, const PlaneWaveBasis& target) {
  const auto& source = *u.basis();
  require_same_cell(source, target, "project");
  if (target.cutoff() > source.cutoff() * (1.0 + 1e-14))
    throw std::invalid_argument("project: target cutoff exceeds the source cutoff");
  auto coeffs = fourier_coefficients(u);
  const double limit = 2.0 * target.cutoff() * (1.0 + 1e-12);
  const auto& g2 = source.slot_g2();
  for (std::size_t s = 0; s < coeffs.size(); ++s)
    if (g2[static_cast<Eigen::Index>(s)] > limit) coeffs[s] = 0.0;
  return from_fourier(u.basis(), std::move(coeffs));
}

GridFunction transfer(const GridFunction& u, const BasisPtr& target) {
  const auto& source = *u.basis();
  require_same_cell(source, *target, "transfer");
  const auto coeffs = fourier_coefficients(u);
  std::vector<cplx> out(static_cast<std::size_t>(target->grid_size()), 0.0);
  const auto& n = target->fft_grid();
  for (Eigen::Index s = 0; s < source.grid_size(); ++s) {
    const Miller m = source.slot_miller(s);
    bool fits = true;
    Eigen::Index slot = 0;
    for (int j = 0; j < 3; ++j) {
      if (2 * m[j] >= n[j] || 2 * m[j] < -n[j]) fits = false;
      slot = slot * n[j] + ((m[j] % n[j]) + n[j]) % n[j];
    }
    if (fits) out[static_cast<std::size_t>(slot)] += coeffs[static_cast<std::size_t>(s)];
  }
  return from_fourier(target, std::move(out));
}

cplx l2_inner(const GridFunction& u, const GridFunction& v) {
  if (u.size() != v.size()) throw std::invalid_argument("l2_inner: grid mismatch");
  const auto a = fourier_coefficients(u);
  const auto b = fourier_coefficients(v);
  cplx s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
  return s;
}

double l2_norm(const GridFunction& u) {
  double s = 0.0;
  for (const auto& c : fourier_coefficients(u)) s += std::norm(c);
  return std::sqrt(s);
}

double h1_norm(const GridFunction& u) {
  const auto c = fourier_coefficients(u);
  const auto& g2 = u.basis()->slot_g2();
  double s = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) s += (1.0 + g2[static_cast<Eigen::Index>(i)]) * std::norm(c[i]);
  return std::sqrt(s);
}

cplx integrate(const GridFunction& u) {
  cplx s = 0.0;
  for (const auto& v : u.values()) s += v;
  return s * u.basis()->grid_weight();
}

double h1_norm(const PlaneWaveBasis& basis, const Eigen::VectorXcd& coefficients) {
  if (coefficients.size() != basis.size()) throw std::invalid_argument("h1_norm: size mismatch");
  return std::sqrt(((1.0 + basis.g2().array()) * coefficients.cwiseAbs2().array()).sum());
}

}  // namespace mks
