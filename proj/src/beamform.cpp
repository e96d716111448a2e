#include "dealias/beamform.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace dealias {
namespace {

constexpr cdouble kJ{0.0, 1.0};

void RequireChannels(const Spectrogram& s, std::size_t n, const char* who) {
  if (s.num_channels() != n) {
    throw InvalidArgument(std::string(who) + ": expected " + std::to_string(n) +
                          " input channels, got " + std::to_string(s.num_channels()));
  }
}

}  // namespace

EqualizerProfile::EqualizerProfile(RawResponse raw, double max_gain_db, double sample_rate,
                                   std::size_t fft_size)
    : raw_(std::move(raw)), max_gain_db_(max_gain_db) {
  const std::size_t bins = fft_size / 2 + 1;
  double peak = 0.0;
  for (std::size_t k = 0; k < bins; ++k) {
    const double f = static_cast<double>(k) * sample_rate / static_cast<double>(fft_size);
    peak = std::max(peak, std::norm(raw_(f)));
  }
  lambda_ = std::pow(10.0, -max_gain_db / 10.0) * peak;
  bin_gains_.resize(bins);
  for (std::size_t k = 0; k < bins; ++k) {
    bin_gains_[k] = gain(static_cast<double>(k) * sample_rate / static_cast<double>(fft_size));
  }
  // Gradient of a constant is zero; keep the DC output exactly zero.
  bin_gains_[0] = 0.0;
}

cdouble EqualizerProfile::gain(double f) const {
  if (f == 0.0) return 0.0;
  const cdouble r = raw_(f);
  return std::conj(r) / (std::norm(r) + lambda_);
}

EqualizerProfile CardioidEqualizer(double spacing, double speed_of_sound, double max_gain_db,
                                   double sample_rate, std::size_t fft_size) {
  auto raw = [=](double f) {
    const double beta = kPi * f * spacing / speed_of_sound;
    return 2.0 * kJ * std::sin(2.0 * beta) * std::polar(1.0, -beta);
  };
  return EqualizerProfile(raw, max_gain_db, sample_rate, fft_size);
}

EqualizerProfile FigureEightEqualizer(double spacing, double speed_of_sound, double max_gain_db,
                                      double sample_rate, std::size_t fft_size) {
  auto raw = [=](double f) { return 2.0 * kJ * std::sin(kPi * f * spacing / speed_of_sound); };
  return EqualizerProfile(raw, max_gain_db, sample_rate, fft_size);
}

Spectrogram gradient_cardioid_pair(const Spectrogram& mics, double spacing,
                                   double speed_of_sound, double max_gain_db) {
  RequireChannels(mics, 2, "gradient_cardioid_pair");
  const auto eq = CardioidEqualizer(spacing, speed_of_sound, max_gain_db, mics.sample_rate(),
                                    mics.fft_size());
  Spectrogram out = Spectrogram::ZerosLike(mics, 2);
  for (std::size_t k = 0; k < mics.num_bins(); ++k) {
    const double f = mics.BinFrequency(k);
    const cdouble h = eq.bin_gains()[k];
    const cdouble internal_delay = std::polar(1.0, -2.0 * kPi * f * spacing / speed_of_sound);
    for (std::size_t n = 0; n < mics.num_frames(); ++n) {
      const cdouble front = mics.at(0, k, n);
      const cdouble back = mics.at(1, k, n);
      out.at(0, k, n) = h * (front - internal_delay * back);
      out.at(1, k, n) = h * (back - internal_delay * front);
    }
  }
  return out;
}

Spectrogram foa_planar_encode(const Spectrogram& mics, double spacing_x, double spacing_y,
                              double speed_of_sound, double max_gain_db) {
  RequireChannels(mics, 4, "foa_planar_encode");
  const auto eq_x = FigureEightEqualizer(spacing_x, speed_of_sound, max_gain_db,
                                         mics.sample_rate(), mics.fft_size());
  const auto eq_y = FigureEightEqualizer(spacing_y, speed_of_sound, max_gain_db,
                                         mics.sample_rate(), mics.fft_size());
  Spectrogram out = Spectrogram::ZerosLike(mics, 3);
  for (std::size_t k = 0; k < mics.num_bins(); ++k) {
    const cdouble hx = eq_x.bin_gains()[k];
    const cdouble hy = eq_y.bin_gains()[k];
    for (std::size_t n = 0; n < mics.num_frames(); ++n) {
      const cdouble px = mics.at(0, k, n), mx = mics.at(1, k, n);
      const cdouble py = mics.at(2, k, n), my = mics.at(3, k, n);
      out.at(0, k, n) = 0.25 * (px + mx + py + my);
      out.at(1, k, n) = hx * (px - mx);
      out.at(2, k, n) = hy * (py - my);
    }
  }
  return out;
}

Spectrogram Beamform(const BeamformerConfig& config, const Spectrogram& mics) {
  RequireChannels(mics, 4, "Beamform");
  if (config.kind == BeamformerKind::kCardioidPair) {
    const std::array<std::size_t, 2> x_pair{0, 1};
    return gradient_cardioid_pair(mics.SelectChannels(x_pair), config.spacing_x,
                                  config.speed_of_sound, config.max_gain_db);
  }
  return foa_planar_encode(mics, config.spacing_x, config.spacing_y, config.speed_of_sound,
                           config.max_gain_db);
}

namespace {

EqualizerProfile XEqualizer(const BeamformerConfig& c) {
  return c.kind == BeamformerKind::kCardioidPair
             ? CardioidEqualizer(c.spacing_x, c.speed_of_sound, c.max_gain_db, c.sample_rate,
                                 c.fft_size)
             : FigureEightEqualizer(c.spacing_x, c.speed_of_sound, c.max_gain_db, c.sample_rate,
                                    c.fft_size);
}

}  // namespace

SteeringModel::SteeringModel(const BeamformerConfig& config)
    : config_(config),
      eq_x_(XEqualizer(config)),
      eq_y_(FigureEightEqualizer(config.spacing_y, config.speed_of_sound, config.max_gain_db,
                                 config.sample_rate, config.fft_size)) {}

std::vector<cdouble> SteeringModel::Response(const Direction& direction, double frequency) const {
  const double c = config_.speed_of_sound;
  auto capsule = [&](double x, double y) {
    return std::polar(1.0, 2.0 * kPi * frequency * (x * direction.ux() + y * direction.uy()) / c);
  };
  const double hx = config_.spacing_x / 2.0, hy = config_.spacing_y / 2.0;
  const cdouble px = capsule(hx, 0.0), mx = capsule(-hx, 0.0);
  if (config_.kind == BeamformerKind::kCardioidPair) {
    const cdouble h = eq_x_.gain(frequency);
    const cdouble internal_delay = std::polar(1.0, -2.0 * kPi * frequency * config_.spacing_x / c);
    return {h * (px - internal_delay * mx), h * (mx - internal_delay * px)};
  }
  const cdouble py = capsule(0.0, hy), my = capsule(0.0, -hy);
  return {0.25 * (px + mx + py + my), eq_x_.gain(frequency) * (px - mx),
          eq_y_.gain(frequency) * (py - my)};
}

std::vector<cdouble> steering_response(const BeamformerConfig& config, const Direction& direction,
                                       double frequency) {
  return SteeringModel(config).Response(direction, frequency);
}

double IdealVirtualMicPattern(BeamformerKind kind, std::size_t channel,
                              const Direction& direction) {
  if (kind == BeamformerKind::kCardioidPair) {
    return channel == 0 ? 0.5 + 0.5 * direction.ux() : 0.5 - 0.5 * direction.ux();
  }
  switch (channel) {
    case 0: return 1.0;
    case 1: return std::abs(direction.ux());
    default: return std::abs(direction.uy());
  }
}

}  // namespace dealias
