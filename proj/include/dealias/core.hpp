#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "dealias/error.hpp"

namespace dealias {

using cdouble = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kDefaultSpeedOfSound = 343.0;  // m/s

// Horizontal-plane direction. Azimuth in degrees, counter-clockwise from +x.
class Direction {
 public:
  Direction() : Direction(0.0) {}

  static Direction FromAzimuth(double azimuth_deg);

  double azimuth() const { return azimuth_; }
  double ux() const { return ux_; }
  double uy() const { return uy_; }
  double Dot(const Direction& other) const { return ux_ * other.ux_ + uy_ * other.uy_; }

 private:
  explicit Direction(double normalized_deg);

  double azimuth_;
  double ux_;
  double uy_;
};

inline Direction direction_from_azimuth(double azimuth_deg) {
  return Direction::FromAzimuth(azimuth_deg);
}

// f_alias = c / (2 d)
double aliasing_frequency(double spacing_m, double speed_of_sound = kDefaultSpeedOfSound);

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

// Four omnidirectional capsules on a cross, ordered (+x, -x, +y, -y).
class ArrayGeometry {
 public:
  static constexpr double kMinSpacing = 0.005;
  static constexpr double kMaxSpacing = 0.20;

  static ArrayGeometry Cross(double spacing_x, double spacing_y);

  double spacing_x() const { return spacing_x_; }
  double spacing_y() const { return spacing_y_; }
  const std::array<Point2, 4>& positions() const { return positions_; }
  std::size_t num_sensors() const { return positions_.size(); }

 private:
  ArrayGeometry(double spacing_x, double spacing_y);

  double spacing_x_;
  double spacing_y_;
  std::array<Point2, 4> positions_;
};

struct MonoSignal {
  std::vector<double> samples;
  double sample_rate = 16000.0;

  std::size_t size() const { return samples.size(); }
};

class MultichannelSignal {
 public:
  MultichannelSignal() = default;
  MultichannelSignal(std::size_t channels, std::size_t length, double sample_rate);

  static MultichannelSignal FromChannels(std::vector<std::vector<double>> channels,
                                         double sample_rate);

  std::size_t num_channels() const { return channels_.size(); }
  std::size_t length() const { return channels_.empty() ? 0 : channels_.front().size(); }
  double sample_rate() const { return sample_rate_; }

  std::span<double> channel(std::size_t c) { return channels_.at(c); }
  std::span<const double> channel(std::size_t c) const { return channels_.at(c); }
  const std::vector<std::vector<double>>& channels() const { return channels_; }

 private:
  std::vector<std::vector<double>> channels_;
  double sample_rate_ = 16000.0;
};

// Complex STFT grid, layout [channel][bin][frame].
class Spectrogram {
 public:
  Spectrogram() = default;
  Spectrogram(std::size_t channels, std::size_t bins, std::size_t frames, double sample_rate,
              std::size_t fft_size, std::size_t hop, std::size_t signal_length = 0);

  // Same geometry and metadata as `like`, with a different channel count.
  static Spectrogram ZerosLike(const Spectrogram& like, std::size_t channels);

  std::size_t num_channels() const { return channels_; }
  std::size_t num_bins() const { return bins_; }
  std::size_t num_frames() const { return frames_; }
  double sample_rate() const { return sample_rate_; }
  std::size_t fft_size() const { return fft_size_; }
  std::size_t hop() const { return hop_; }
  // Length of the time signal this grid was computed from (0 if unknown).
  std::size_t signal_length() const { return signal_length_; }
  void set_signal_length(std::size_t n) { signal_length_ = n; }

  double BinFrequency(std::size_t k) const {
    return static_cast<double>(k) * sample_rate_ / static_cast<double>(fft_size_);
  }

  cdouble& at(std::size_t c, std::size_t k, std::size_t n) {
    return data_[(c * bins_ + k) * frames_ + n];
  }
  const cdouble& at(std::size_t c, std::size_t k, std::size_t n) const {
    return data_[(c * bins_ + k) * frames_ + n];
  }

  std::span<cdouble> channel(std::size_t c) {
    return {data_.data() + c * bins_ * frames_, bins_ * frames_};
  }
  std::span<const cdouble> channel(std::size_t c) const {
    return {data_.data() + c * bins_ * frames_, bins_ * frames_};
  }
  std::span<cdouble> data() { return data_; }
  std::span<const cdouble> data() const { return data_; }

  bool SameGrid(const Spectrogram& other) const {
    return bins_ == other.bins_ && frames_ == other.frames_;
  }
  bool AllFinite() const;

  // Listed channels, in the given order, as a new spectrogram.
  Spectrogram SelectChannels(std::span<const std::size_t> indices) const;

 private:
  std::size_t channels_ = 0;
  std::size_t bins_ = 0;
  std::size_t frames_ = 0;
  double sample_rate_ = 16000.0;
  std::size_t fft_size_ = 0;
  std::size_t hop_ = 0;
  std::size_t signal_length_ = 0;
  std::vector<cdouble> data_;
};

}  // namespace dealias
