#include "mks/hamiltonian.hpp"

#include <cmath>
#include <stdexcept>

namespace mks {

namespace {

Eigen::Index wrapped_slot(const std::array<int, 3>& n, const Miller& m) {
  Eigen::Index slot = 0;
  for (int j = 0; j < 3; ++j) slot = slot * n[j] + ((m[j] % n[j]) + n[j]) % n[j];
  return slot;
}

}  // namespace

Hamiltonian::Hamiltonian(BasisPtr basis, GridFunction v_local)
    : basis_(std::move(basis)), v_local_(std::move(v_local)) {
  if (!basis_) throw std::invalid_argument("Hamiltonian: null basis");
  if (v_local_.size() != basis_->grid_size()) throw std::invalid_argument("Hamiltonian: potential grid mismatch");
  if (v_local_.max_imag() > 1e-10) throw std::invalid_argument("Hamiltonian: potential must be real");
  kinetic_ = 0.5 * basis_->g2();
  v_hat_ = fourier_coefficients(v_local_);
}

Eigen::VectorXcd Hamiltonian::apply(const Eigen::VectorXcd& psi) const {
  if (psi.size() != size()) throw std::invalid_argument("Hamiltonian::apply: vector does not match the basis");
  GridFunction u = to_grid(basis_, psi);
  for (Eigen::Index i = 0; i < u.size(); ++i) u[i] *= v_local_[i].real();
  Eigen::VectorXcd out = from_grid(u);
  out.array() += kinetic_.array() * psi.array();
  return out;
}

Eigen::MatrixXcd Hamiltonian::apply(const Eigen::MatrixXcd& block) const {
  Eigen::MatrixXcd out(block.rows(), block.cols());
  for (Eigen::Index j = 0; j < block.cols(); ++j) out.col(j) = apply(Eigen::VectorXcd(block.col(j)));
  return out;
}

Eigen::MatrixXcd Hamiltonian::dense() const {
  const auto n = size();
  const auto& grid = basis_->fft_grid();
  const auto& miller = basis_->miller();
  const double scale = 1.0 / std::sqrt(basis_->cell().volume());
  Eigen::MatrixXcd h(n, n);
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = 0; b < n; ++b) {
      const Miller d{miller[a][0] - miller[b][0], miller[a][1] - miller[b][1], miller[a][2] - miller[b][2]};
      h(a, b) = scale * v_hat_[static_cast<std::size_t>(wrapped_slot(grid, d))];
    }
  h.diagonal().array() += kinetic_.array().cast<cplx>();
  return h;
}

Eigen::VectorXcd apply_h(const Hamiltonian& h, const Eigen::VectorXcd& psi) { return h.apply(psi); }

}  // namespace mks
