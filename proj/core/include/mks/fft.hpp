#pragma once

#include <array>
#include <complex>
#include <memory>
#include <span>

namespace mks {

/// Unnormalized complex FFT on a fixed rank-1/2/3 grid (row-major layout).
///
/// forward computes sum_k u_k exp(-2 pi i m.k/n), backward the same with +i.
/// Plans are created once; execution is reentrant so one Fft may be shared
/// between threads.
class Fft {
 public:
  Fft(int rank, std::array<int, 3> dims);
  ~Fft();

  Fft(const Fft&) = delete;
  Fft& operator=(const Fft&) = delete;

  void forward(std::span<std::complex<double>> data) const;
  void backward(std::span<std::complex<double>> data) const;

  int rank() const { return rank_; }
  const std::array<int, 3>& dims() const { return dims_; }
  std::size_t size() const { return size_; }

 private:
  struct Plans;
  int rank_;
  std::array<int, 3> dims_;
  std::size_t size_;
  std::unique_ptr<Plans> plans_;
};

/// Smallest n' >= n whose only prime factors are 2, 3 and 5.
int fast_fft_length(int n);

}  // namespace mks
