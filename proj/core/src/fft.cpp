#include "mks/fft.hpp"

#include <fftw3.h>

#include <mutex>
#include <stdexcept>
#include <vector>

namespace mks {

namespace {
// fftw's planner is not thread safe; execution through the new-array
// interface is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

struct Fft::Plans {
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;
};

Fft::Fft(int rank, std::array<int, 3> dims)
    : rank_(rank), dims_(dims), size_(1), plans_(std::make_unique<Plans>()) {
  if (rank < 1 || rank > 3) throw std::invalid_argument("Fft: rank must be 1, 2 or 3");
  for (int i = 0; i < rank; ++i) {
    if (dims[i] < 1) throw std::invalid_argument("Fft: grid dimensions must be positive");
    size_ *= static_cast<std::size_t>(dims[i]);
  }
  for (int i = rank; i < 3; ++i) dims_[i] = 1;

  std::vector<std::complex<double>> scratch(size_);
  auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
  std::lock_guard lock(planner_mutex());
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  plans_->forward = fftw_plan_dft(rank, dims_.data(), buf, buf, FFTW_FORWARD, flags);
  plans_->backward = fftw_plan_dft(rank, dims_.data(), buf, buf, FFTW_BACKWARD, flags);
  if (!plans_->forward || !plans_->backward) throw std::runtime_error("Fft: planning failed");
}

Fft::~Fft() {
  std::lock_guard lock(planner_mutex());
  if (plans_->forward) fftw_destroy_plan(plans_->forward);
  if (plans_->backward) fftw_destroy_plan(plans_->backward);
}

void Fft::forward(std::span<std::complex<double>> data) const {
  if (data.size() != size_) throw std::invalid_argument("Fft::forward: size mismatch");
  auto* p = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(plans_->forward, p, p);
}

void Fft::backward(std::span<std::complex<double>> data) const {
  if (data.size() != size_) throw std::invalid_argument("Fft::backward: size mismatch");
  auto* p = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(plans_->backward, p, p);
}

int fast_fft_length(int n) {
  if (n <= 1) return 1;
  for (int candidate = n;; ++candidate) {
    int r = candidate;
    for (int p : {2, 3, 5})
      while (r % p == 0) r /= p;
    if (r == 1) return candidate;
  }
}

}  // namespace mks
