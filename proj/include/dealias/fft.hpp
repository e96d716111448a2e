#pragma once

#include <complex>
#include <cstddef>
#include <span>

namespace dealias {

// Real-input FFT of a fixed length, backed by FFTW. Plans are cached per
// thread and per length; execution is thread-safe.
class RealFft {
 public:
  explicit RealFft(std::size_t n);

  std::size_t size() const { return n_; }
  std::size_t num_bins() const { return n_ / 2 + 1; }

  // out.size() == num_bins(); unnormalized.
  void Forward(std::span<const double> in, std::span<std::complex<double>> out) const;
  // out.size() == size(); unnormalized (result is n times the inverse DFT).
  void Inverse(std::span<const std::complex<double>> in, std::span<double> out) const;

 private:
  std::size_t n_;
};

// Smallest 2^a 3^b 5^c that is >= n.
std::size_t NextFastLength(std::size_t n);

}  // namespace dealias
