#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "dealias/core.hpp"

namespace dealias {

enum class BeamformerKind {
  kCardioidPair,  // outputs (right-facing, left-facing) from the x-axis pair
  kPlanarFoa,     // outputs (W, X, Y) from all four capsules
};

struct BeamformerConfig {
  BeamformerKind kind = BeamformerKind::kCardioidPair;
  double spacing_x = 0.03;
  double spacing_y = 0.03;
  double speed_of_sound = kDefaultSpeedOfSound;
  double max_gain_db = 30.0;
  double sample_rate = 16000.0;
  std::size_t fft_size = 1024;

  std::size_t num_outputs() const { return kind == BeamformerKind::kCardioidPair ? 2 : 3; }
};

// Tikhonov-regularized inverse of a raw on-axis gradient response:
//   H(f) = conj(R(f)) / (|R(f)|^2 + lambda),  lambda = 10^(-G/10) max_k |R(f_k)|^2
// with the maximum taken over the STFT bin grid. |H| <= 10^(G/20) everywhere.
class EqualizerProfile {
 public:
  using RawResponse = std::function<cdouble(double)>;

  EqualizerProfile(RawResponse raw, double max_gain_db, double sample_rate, std::size_t fft_size);

  cdouble raw(double f) const { return raw_(f); }
  cdouble gain(double f) const;
  double lambda() const { return lambda_; }
  double max_gain_db() const { return max_gain_db_; }
  // Realized equalizer on the bin grid.
  const std::vector<cdouble>& bin_gains() const { return bin_gains_; }

 private:
  RawResponse raw_;
  double max_gain_db_;
  double lambda_ = 0.0;
  std::vector<cdouble> bin_gains_;
};

// R(f) = 2j sin(2 pi f d / c) exp(-j pi f d / c)
EqualizerProfile CardioidEqualizer(double spacing, double speed_of_sound, double max_gain_db,
                                   double sample_rate, std::size_t fft_size);
// R(f) = 2j sin(pi f d / c)
EqualizerProfile FigureEightEqualizer(double spacing, double speed_of_sound, double max_gain_db,
                                      double sample_rate, std::size_t fft_size);

// Input channels (+x, -x); output (right-facing, left-facing).
Spectrogram gradient_cardioid_pair(const Spectrogram& mics, double spacing,
                                   double speed_of_sound = kDefaultSpeedOfSound,
                                   double max_gain_db = 30.0);

// Input channels (+x, -x, +y, -y); output (W, X, Y).
Spectrogram foa_planar_encode(const Spectrogram& mics, double spacing_x, double spacing_y,
                              double speed_of_sound = kDefaultSpeedOfSound,
                              double max_gain_db = 30.0);

// Runs the configured beamformer on a 4-channel cross-array spectrogram.
Spectrogram Beamform(const BeamformerConfig& config, const Spectrogram& mics);

// Analytic virtual-microphone response a(theta, f) with the equalizers built once.
class SteeringModel {
 public:
  explicit SteeringModel(const BeamformerConfig& config);

  const BeamformerConfig& config() const { return config_; }
  std::vector<cdouble> Response(const Direction& direction, double frequency) const;

 private:
  BeamformerConfig config_;
  EqualizerProfile eq_x_;
  EqualizerProfile eq_y_;
};

// Exact response of each virtual microphone to a unit plane wave.
std::vector<cdouble> steering_response(const BeamformerConfig& config, const Direction& direction,
                                       double frequency);

// Alias-free first-order magnitude pattern of output `channel` (unit on axis).
double IdealVirtualMicPattern(BeamformerKind kind, std::size_t channel, const Direction& direction);

}  // namespace dealias
