#include "dealias/core.hpp"

#include <cmath>
#include <string>

namespace dealias {

const char* ErrorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "invalid-argument";
    case ErrorKind::kUnsupportedConfiguration: return "unsupported-configuration";
    case ErrorKind::kConfiguration: return "configuration-error";
    case ErrorKind::kNotAWeightFile: return "not-a-weight-file";
    case ErrorKind::kCorruptWeights: return "corrupt-weights";
    case ErrorKind::kUndefinedMetric: return "undefined-metric";
    case ErrorKind::kIo: return "io-error";
    case ErrorKind::kNumeric: return "numeric-failure";
  }
  return "error";
}

Direction::Direction(double normalized_deg)
    : azimuth_(normalized_deg),
      ux_(std::cos(normalized_deg * kPi / 180.0)),
      uy_(std::sin(normalized_deg * kPi / 180.0)) {
  // Exact values on the axes keep symmetric geometries exactly symmetric.
  if (normalized_deg == 0.0) {
    ux_ = 1.0, uy_ = 0.0;
  } else if (normalized_deg == 90.0) {
    ux_ = 0.0, uy_ = 1.0;
  } else if (normalized_deg == 180.0) {
    ux_ = -1.0, uy_ = 0.0;
  } else if (normalized_deg == 270.0) {
    ux_ = 0.0, uy_ = -1.0;
  }
}

Direction Direction::FromAzimuth(double azimuth_deg) {
  if (!std::isfinite(azimuth_deg)) {
    throw InvalidArgument("direction_from_azimuth: azimuth must be finite");
  }
  double a = std::fmod(azimuth_deg, 360.0);
  if (a < 0.0) a += 360.0;
  if (a >= 360.0) a = 0.0;
  return Direction(a);
}

double aliasing_frequency(double spacing_m, double speed_of_sound) {
  if (!(spacing_m > 0.0) || !(speed_of_sound > 0.0)) {
    throw InvalidArgument("aliasing_frequency: spacing and speed of sound must be positive");
  }
  return speed_of_sound / (2.0 * spacing_m);
}

ArrayGeometry::ArrayGeometry(double spacing_x, double spacing_y)
    : spacing_x_(spacing_x),
      spacing_y_(spacing_y),
      positions_{{{spacing_x / 2, 0.0}, {-spacing_x / 2, 0.0}, {0.0, spacing_y / 2},
                  {0.0, -spacing_y / 2}}} {}

ArrayGeometry ArrayGeometry::Cross(double spacing_x, double spacing_y) {
  auto in_range = [](double d) { return d >= kMinSpacing && d <= kMaxSpacing; };
  if (!in_range(spacing_x) || !in_range(spacing_y)) {
    throw InvalidArgument("ArrayGeometry: spacing must lie in [0.005, 0.20] m, got " +
                          std::to_string(spacing_x) + ", " + std::to_string(spacing_y));
  }
  return ArrayGeometry(spacing_x, spacing_y);
}

MultichannelSignal::MultichannelSignal(std::size_t channels, std::size_t length,
                                       double sample_rate)
    : channels_(channels, std::vector<double>(length, 0.0)), sample_rate_(sample_rate) {}

MultichannelSignal MultichannelSignal::FromChannels(std::vector<std::vector<double>> channels,
                                                    double sample_rate) {
  for (const auto& ch : channels) {
    if (ch.size() != channels.front().size()) {
      throw InvalidArgument("MultichannelSignal: channels must have equal length");
    }
  }
  if (!(sample_rate > 0.0)) throw InvalidArgument("MultichannelSignal: sample rate must be > 0");
  MultichannelSignal out;
  out.channels_ = std::move(channels);
  out.sample_rate_ = sample_rate;
  return out;
}

Spectrogram::Spectrogram(std::size_t channels, std::size_t bins, std::size_t frames,
                         double sample_rate, std::size_t fft_size, std::size_t hop,
                         std::size_t signal_length)
    : channels_(channels),
      bins_(bins),
      frames_(frames),
      sample_rate_(sample_rate),
      fft_size_(fft_size),
      hop_(hop),
      signal_length_(signal_length),
      data_(channels * bins * frames) {
  if (fft_size != 0 && bins != fft_size / 2 + 1) {
    throw InvalidArgument("Spectrogram: bin count must equal fft_size/2 + 1");
  }
}

Spectrogram Spectrogram::ZerosLike(const Spectrogram& like, std::size_t channels) {
  return Spectrogram(channels, like.bins_, like.frames_, like.sample_rate_, like.fft_size_,
                     like.hop_, like.signal_length_);
}

bool Spectrogram::AllFinite() const {
  for (const auto& z : data_) {
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
  }
  return true;
}

Spectrogram Spectrogram::SelectChannels(std::span<const std::size_t> indices) const {
  Spectrogram out = ZerosLike(*this, indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= channels_) throw InvalidArgument("SelectChannels: index out of range");
    auto src = channel(indices[i]);
    std::copy(src.begin(), src.end(), out.channel(i).begin());
  }
  return out;
}

}  // namespace dealias
