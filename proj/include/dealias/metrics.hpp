#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dealias/core.hpp"
#include "dealias/simulate.hpp"

namespace dealias {

// Upper cap of c_si_snr (set by the 1e-12 error floor) and its lower clamp.
inline constexpr double kSiSnrCapDb = 120.0;

struct SiSnrResult {
  std::vector<double> per_channel_db;
  double mean_db = 0.0;
};

// Complex scale-invariant SNR per channel. For each channel the tiles are
// flattened, a = <est, tgt> / <tgt, tgt> with <u, w> = sum u conj(w), s = a tgt,
// value = 10 log10(|s|^2 / (|est - s|^2 + 1e-12 |s|^2)), clamped below at
// -kSiSnrCapDb. Throws UndefinedMetric for an all-zero target channel.
SiSnrResult c_si_snr(const Spectrogram& estimate, const Spectrogram& target);

// Amplitude plus phase-aware loss on magnitude-compressed spectra:
//   0.5 mean((|t|^p - |y|^p)^2) + 0.5 mean(| |t|^p e^{j<t} - |y|^p e^{j<y} |^2)
// per channel, averaged over channels.
double phasen_loss(const Spectrogram& estimate, const Spectrogram& target, double compression = 0.3);

struct Band {
  double lo = 0.0;
  double hi = 0.0;
};

// [0, fa), [fa, 2fa), [2fa, 4fa), [4fa, fs/2], each clipped to Nyquist; empty
// bands dropped.
std::vector<Band> band_partition(double f_alias, double sample_rate);

// Bins of a spectrogram falling in a band. The band containing Nyquist is
// closed on the right.
std::vector<std::size_t> BandBins(const Band& band, double sample_rate, std::size_t fft_size);

// Normalized band-wise magnitude response over an azimuth grid.
struct PolarResponse {
  std::vector<Band> bands;
  std::vector<double> azimuths_deg;
  std::size_t num_channels = 0;
  // Indexed [band][channel][azimuth].
  std::vector<std::vector<std::vector<double>>> magnitudes;

  double at(std::size_t band, std::size_t channel, std::size_t azimuth) const {
    return magnitudes[band][channel][azimuth];
  }

  // band_lo_hz,band_hi_hz,channel,azimuth_deg,magnitude
  std::string ToCsv() const;
};

// dB deviation of a measured from an ideal pattern value, both clamped below
// at floor_db so that pattern nulls compare as equal.
inline constexpr double kPatternFloorDb = -30.0;
double PatternDeviationDb(double measured, double ideal, double floor_db = kPatternFloorDb);

// Maps one single-source scene and its dry signal to decoded output channels.
using SweepPipeline =
    std::function<Spectrogram(const SourceScene& scene, std::span<const MonoSignal> sources)>;

struct SweepConfig {
  std::vector<double> azimuths_deg;
  std::size_t n_signals = 16;
  std::vector<Band> bands;
  std::uint64_t seed = 0;
  double sample_rate = 16000.0;
  double duration = 0.5;  // seconds per noise burst
  double spacing_x = 0.06;
  double spacing_y = 0.06;
  std::size_t threads = 1;
};

// For each azimuth, runs n_signals independent white-noise single-source
// scenes through the pipeline, takes the per-band RMS magnitude of every output
// channel, averages over signals, then normalizes each (band, channel) by its
// maximum over azimuths.
PolarResponse spatial_sweep(const SweepPipeline& pipeline, const SweepConfig& config);

std::vector<double> UniformAzimuthsDeg(std::size_t n);

}  // namespace dealias
