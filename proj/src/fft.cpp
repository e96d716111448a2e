#include "dealias/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <map>
#include <memory>
#include <mutex>

#include "dealias/error.hpp"

namespace dealias {
namespace {

std::mutex& PlannerMutex() {
  static std::mutex m;
  return m;
}

struct PlanPair {
  explicit PlanPair(std::size_t n) : n(n) {
    std::lock_guard<std::mutex> lock(PlannerMutex());
    real = fftw_alloc_real(n);
    spec = fftw_alloc_complex(n / 2 + 1);
    const int len = static_cast<int>(n);
    forward = fftw_plan_dft_r2c_1d(len, real, spec, FFTW_ESTIMATE);
    inverse = fftw_plan_dft_c2r_1d(len, spec, real, FFTW_ESTIMATE | FFTW_DESTROY_INPUT);
  }
  ~PlanPair() {
    std::lock_guard<std::mutex> lock(PlannerMutex());
    fftw_destroy_plan(forward);
    fftw_destroy_plan(inverse);
    fftw_free(real);
    fftw_free(spec);
  }
  PlanPair(const PlanPair&) = delete;
  PlanPair& operator=(const PlanPair&) = delete;

  std::size_t n;
  double* real = nullptr;
  fftw_complex* spec = nullptr;
  fftw_plan forward = nullptr;
  fftw_plan inverse = nullptr;
};

PlanPair& PlanFor(std::size_t n) {
  thread_local std::map<std::size_t, std::unique_ptr<PlanPair>> cache;
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, std::make_unique<PlanPair>(n)).first;
  return *it->second;
}

}  // namespace

RealFft::RealFft(std::size_t n) : n_(n) {
  if (n < 2) throw InvalidArgument("RealFft: length must be >= 2");
}

void RealFft::Forward(std::span<const double> in, std::span<std::complex<double>> out) const {
  if (in.size() != n_ || out.size() != num_bins()) {
    throw InvalidArgument("RealFft::Forward: buffer size mismatch");
  }
  PlanPair& p = PlanFor(n_);
  std::copy(in.begin(), in.end(), p.real);
  fftw_execute(p.forward);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = {p.spec[k][0], p.spec[k][1]};
}

void RealFft::Inverse(std::span<const std::complex<double>> in, std::span<double> out) const {
  if (in.size() != num_bins() || out.size() != n_) {
    throw InvalidArgument("RealFft::Inverse: buffer size mismatch");
  }
  PlanPair& p = PlanFor(n_);
  for (std::size_t k = 0; k < in.size(); ++k) {
    p.spec[k][0] = in[k].real();
    p.spec[k][1] = in[k].imag();
  }
  fftw_execute(p.inverse);
  std::copy(p.real, p.real + n_, out.begin());
}

std::size_t NextFastLength(std::size_t n) {
  std::size_t best = 1;
  while (best < n) best <<= 1;
  for (std::size_t p5 = 1; p5 < best; p5 *= 5) {
    for (std::size_t p35 = p5; p35 < best; p35 *= 3) {
      std::size_t v = p35;
      while (v < n) v <<= 1;
      best = std::min(best, v);
    }
  }
  return best;
}

}  // namespace dealias
