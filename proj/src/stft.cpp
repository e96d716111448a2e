#include "dealias/stft.hpp"

#include <cmath>
#include <string>

#include "dealias/fft.hpp"

namespace dealias {

std::vector<double> PeriodicHann(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(i) / static_cast<double>(n));
  }
  return w;
}

std::size_t StftFrameCount(std::size_t signal_length, std::size_t hop) {
  return 1 + (signal_length + hop - 1) / hop;
}

Spectrogram stft_forward(const MultichannelSignal& signal, std::size_t fft_size,
                         std::size_t hop) {
  if (fft_size < 2 || fft_size % 2 != 0 || hop != fft_size / 2) {
    throw UnsupportedConfiguration("stft_forward: only Hann at 50% overlap (hop = fft_size/2) "
                                   "is supported, got fft_size=" + std::to_string(fft_size) +
                                   " hop=" + std::to_string(hop));
  }
  const std::size_t length = signal.length();
  if (length < fft_size) {
    throw InvalidArgument("stft_forward: signal shorter than fft_size");
  }
  const std::size_t frames = StftFrameCount(length, hop);
  const std::size_t bins = fft_size / 2 + 1;
  const std::size_t pad = fft_size / 2;
  Spectrogram out(signal.num_channels(), bins, frames, signal.sample_rate(), fft_size, hop,
                  length);

  const auto window = PeriodicHann(fft_size);
  RealFft fft(fft_size);
  std::vector<double> frame(fft_size);
  std::vector<cdouble> spectrum(bins);
  for (std::size_t c = 0; c < signal.num_channels(); ++c) {
    auto x = signal.channel(c);
    for (std::size_t n = 0; n < frames; ++n) {
      for (std::size_t i = 0; i < fft_size; ++i) {
        // Position in the unpadded signal.
        const auto pos = static_cast<std::ptrdiff_t>(n * hop + i) - static_cast<std::ptrdiff_t>(pad);
        const bool inside = pos >= 0 && pos < static_cast<std::ptrdiff_t>(length);
        frame[i] = inside ? x[static_cast<std::size_t>(pos)] * window[i] : 0.0;
      }
      fft.Forward(frame, spectrum);
      for (std::size_t k = 0; k < bins; ++k) out.at(c, k, n) = spectrum[k];
    }
  }
  return out;
}

MultichannelSignal stft_inverse(const Spectrogram& spec) {
  const std::size_t fft_size = spec.fft_size();
  const std::size_t hop = spec.hop();
  if (fft_size < 2 || spec.num_bins() != fft_size / 2 + 1) {
    throw InvalidArgument("stft_inverse: inconsistent fft_size and bin count");
  }
  if (hop != fft_size / 2) {
    throw UnsupportedConfiguration("stft_inverse: only 50% overlap is supported");
  }
  const std::size_t frames = spec.num_frames();
  const std::size_t pad = fft_size / 2;
  const std::size_t length =
      spec.signal_length() != 0 ? spec.signal_length() : (frames > 0 ? (frames - 1) * hop : 0);
  if (frames == 0 || (frames - 1) * hop + fft_size < length + 2 * pad) {
    throw InvalidArgument("stft_inverse: frame count does not cover the signal length");
  }

  const auto window = PeriodicHann(fft_size);
  const std::size_t padded = (frames - 1) * hop + fft_size;
  std::vector<double> norm(padded, 0.0);
  for (std::size_t n = 0; n < frames; ++n) {
    for (std::size_t i = 0; i < fft_size; ++i) norm[n * hop + i] += window[i] * window[i];
  }

  RealFft fft(fft_size);
  std::vector<cdouble> spectrum(spec.num_bins());
  std::vector<double> frame(fft_size);
  std::vector<double> acc(padded);
  MultichannelSignal out(spec.num_channels(), length, spec.sample_rate());
  const double scale = 1.0 / static_cast<double>(fft_size);
  for (std::size_t c = 0; c < spec.num_channels(); ++c) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t n = 0; n < frames; ++n) {
      for (std::size_t k = 0; k < spectrum.size(); ++k) spectrum[k] = spec.at(c, k, n);
      fft.Inverse(spectrum, frame);
      for (std::size_t i = 0; i < fft_size; ++i) acc[n * hop + i] += frame[i] * scale * window[i];
    }
    auto y = out.channel(c);
    for (std::size_t i = 0; i < length; ++i) y[i] = acc[i + pad] / norm[i + pad];
  }
  return out;
}

}  // namespace dealias
