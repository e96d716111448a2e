#pragma once

#include <cstddef>
#include <vector>

#include "dealias/core.hpp"

namespace dealias {

// Periodic Hann window of length n.
std::vector<double> PeriodicHann(std::size_t n);

// Hann-windowed STFT at 50% overlap. The signal is padded with fft_size/2
// zeros at both ends (plus trailing zeros to complete the last frame), giving
// 1 + ceil(length / hop) frames.
Spectrogram stft_forward(const MultichannelSignal& signal, std::size_t fft_size, std::size_t hop);

// Weighted overlap-add inverse (normalized by the summed squared window),
// trimmed to spec.signal_length().
MultichannelSignal stft_inverse(const Spectrogram& spec);

std::size_t StftFrameCount(std::size_t signal_length, std::size_t hop);

}  // namespace dealias
