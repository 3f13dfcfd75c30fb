#pragma once

// Periodic cell geometry, plane-wave bases under an energy cutoff, and the
// transforms between plane-wave coefficients and real-space grid values.
//
// Conventions: the plane wave for reciprocal vector G is
//   e_G(r) = |Omega|^{-1/2} exp(i G.r),
// so {e_G} is L2-orthonormal and coefficients are (e_G, u). Lengths in bohr,
// energies in hartree.

#include <Eigen/Dense>

#include <array>
#include <complex>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "mks/fft.hpp"

namespace mks {

using cplx = std::complex<double>;
using Miller = std::array<int, 3>;

class Cell {
 public:
  /// Rows of `lattice` are the lattice vectors (bohr). Must be square with
  /// 1 <= dimension <= 3.
  explicit Cell(const Eigen::MatrixXd& lattice);

  /// Orthorhombic/cubic cell with all edges equal to `length`.
  static Cell cubic(int dimension, double length);

  int dimension() const { return dimension_; }
  const Eigen::MatrixXd& lattice() const { return lattice_; }
  /// Rows b_j with a_i . b_j = 2 pi delta_ij.
  const Eigen::MatrixXd& reciprocal() const { return reciprocal_; }
  double volume() const { return volume_; }

  /// Cartesian G for integer coordinates m (components beyond dimension ignored).
  Eigen::VectorXd g_vector(const Miller& m) const;
  /// Cartesian position of fractional coordinates.
  Eigen::VectorXd position(const Eigen::VectorXd& fractional) const;

  bool operator==(const Cell& other) const;

 private:
  int dimension_;
  Eigen::MatrixXd lattice_;
  Eigen::MatrixXd reciprocal_;
  double volume_;
};

class PlaneWaveBasis {
 public:
  PlaneWaveBasis(const Cell& cell, double cutoff);

  const Cell& cell() const { return cell_; }
  double cutoff() const { return cutoff_; }
  int dimension() const { return cell_.dimension(); }

  /// Number of plane waves.
  Eigen::Index size() const { return static_cast<Eigen::Index>(miller_.size()); }
  const std::vector<Miller>& miller() const { return miller_; }
  /// |G|^2 for every basis vector, same order as miller().
  const Eigen::VectorXd& g2() const { return g2_; }
  Eigen::VectorXd g_vector(Eigen::Index i) const { return cell_.g_vector(miller_[i]); }
  std::optional<Eigen::Index> find(const Miller& m) const;

  const std::array<int, 3>& fft_grid() const { return fft_grid_; }
  Eigen::Index grid_size() const { return grid_size_; }
  /// Linear grid slot holding basis vector i.
  Eigen::Index grid_slot(Eigen::Index i) const { return slots_[i]; }
  /// Signed Miller index of a grid slot (frequencies in [-n/2, n/2)).
  Miller slot_miller(Eigen::Index slot) const;
  /// |G|^2 of every grid slot.
  const Eigen::VectorXd& slot_g2() const { return slot_g2_; }
  /// Integer grid coordinates of a real-space sample index.
  std::array<int, 3> grid_point(Eigen::Index index) const;
  /// Cartesian position of a real-space sample.
  Eigen::VectorXd grid_position(Eigen::Index index) const;
  /// Quadrature weight |Omega| / N_grid.
  double grid_weight() const { return cell_.volume() / static_cast<double>(grid_size_); }

  const Fft& fft() const { return *fft_; }

 private:
  Cell cell_;
  double cutoff_;
  std::vector<Miller> miller_;
  Eigen::VectorXd g2_;
  std::array<int, 3> fft_grid_{1, 1, 1};
  Eigen::Index grid_size_ = 1;
  std::vector<Eigen::Index> slots_;
  Eigen::VectorXd slot_g2_;
  std::shared_ptr<const Fft> fft_;
};

using BasisPtr = std::shared_ptr<const PlaneWaveBasis>;

/// All G in the reciprocal lattice with |G|^2 <= 2 cutoff, ordered
/// lexicographically on integer coordinates. Throws std::invalid_argument
/// for a non-positive cutoff.
BasisPtr build_basis(const Cell& cell, double cutoff);

/// Positions of `inner`'s vectors inside `outer`. Throws if the cells differ
/// or `inner` is not a subset of `outer`.
std::vector<Eigen::Index> embedding(const PlaneWaveBasis& inner, const PlaneWaveBasis& outer);

/// Values on the FFT grid of a basis. Densities are in bohr^-d, potentials in
/// hartree; both are stored as complex with (numerically) zero imaginary part.
class GridFunction {
 public:
  GridFunction() = default;
  GridFunction(BasisPtr basis, std::vector<cplx> values);

  static GridFunction zeros(BasisPtr basis);
  static GridFunction constant(BasisPtr basis, cplx value);
  /// Real-valued grid function from samples.
  static GridFunction from_real(BasisPtr basis, std::span<const double> values);

  const BasisPtr& basis() const { return basis_; }
  Eigen::Index size() const { return static_cast<Eigen::Index>(values_.size()); }
  std::span<const cplx> values() const { return values_; }
  std::span<cplx> values() { return values_; }
  const cplx& operator[](Eigen::Index i) const { return values_[static_cast<std::size_t>(i)]; }
  cplx& operator[](Eigen::Index i) { return values_[static_cast<std::size_t>(i)]; }

  double max_imag() const;
  std::vector<double> real() const;

  GridFunction& operator+=(const GridFunction& other);
  GridFunction& operator-=(const GridFunction& other);
  GridFunction& operator*=(cplx scale);

 private:
  BasisPtr basis_;
  std::vector<cplx> values_;
};

GridFunction operator+(GridFunction a, const GridFunction& b);
GridFunction operator-(GridFunction a, const GridFunction& b);
GridFunction operator*(cplx s, GridFunction a);

/// Pointwise values of sum_G c_G e_G(r) on the FFT grid.
GridFunction to_grid(const BasisPtr& basis, const Eigen::VectorXcd& coefficients);
/// Coefficients (e_G, u) on the retained G set; inverse of to_grid.
Eigen::VectorXcd from_grid(const GridFunction& u);

/// Coefficients (e_G, u) for every grid slot, in slot order.
std::vector<cplx> fourier_coefficients(const GridFunction& u);
/// Inverse of fourier_coefficients.
GridFunction from_fourier(const BasisPtr& basis, std::vector<cplx> coefficients);

/// Zeroes every Fourier mode with |G|^2 > 2 E_c(target). The result lives on
/// u's grid. Throws if the cells differ or target's cutoff exceeds u's.
GridFunction project(const GridFunction& u, const PlaneWaveBasis& target);

/// Fourier interpolation of u onto target's grid. Exact when the target grid
/// holds every mode u carries.
GridFunction transfer(const GridFunction& u, const BasisPtr& target);

cplx l2_inner(const GridFunction& u, const GridFunction& v);
double l2_norm(const GridFunction& u);
double h1_norm(const GridFunction& u);
/// Integral over the cell (trapezoid rule, exact for represented modes).
cplx integrate(const GridFunction& u);

/// H1 norm of a coefficient vector: sum (1 + |G|^2) |c_G|^2, square-rooted.
double h1_norm(const PlaneWaveBasis& basis, const Eigen::VectorXcd& coefficients);

}  // namespace mks
