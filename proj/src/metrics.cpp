#include "dealias/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "dealias/parallel.hpp"
#include "dealias/rng.hpp"

namespace dealias {

SiSnrResult c_si_snr(const Spectrogram& estimate, const Spectrogram& target) {
  if (estimate.num_channels() != target.num_channels() || !estimate.SameGrid(target)) {
    throw InvalidArgument("c_si_snr: estimate and target shapes differ");
  }
  SiSnrResult result;
  for (std::size_t c = 0; c < target.num_channels(); ++c) {
    const auto x_hat = estimate.channel(c);
    const auto x = target.channel(c);
    cdouble cross{};
    double target_energy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      cross += x_hat[i] * std::conj(x[i]);
      target_energy += std::norm(x[i]);
    }
    if (target_energy == 0.0) {
      throw UndefinedMetric("c_si_snr: target channel " + std::to_string(c) + " is all zero");
    }
    const cdouble a = cross / target_energy;
    double signal = 0.0, error = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const cdouble s = a * x[i];
      signal += std::norm(s);
      error += std::norm(x_hat[i] - s);
    }
    double value = -kSiSnrCapDb;
    if (signal > 0.0) value = 10.0 * std::log10(signal / (error + 1e-12 * signal));
    result.per_channel_db.push_back(std::max(value, -kSiSnrCapDb));
  }
  double sum = 0.0;
  for (double v : result.per_channel_db) sum += v;
  result.mean_db = result.per_channel_db.empty()
                       ? 0.0
                       : sum / static_cast<double>(result.per_channel_db.size());
  return result;
}

double phasen_loss(const Spectrogram& estimate, const Spectrogram& target, double compression) {
  if (estimate.num_channels() != target.num_channels() || !estimate.SameGrid(target)) {
    throw InvalidArgument("phasen_loss: estimate and target shapes differ");
  }
  if (target.num_channels() == 0) return 0.0;
  auto compress = [compression](cdouble z) {
    const double mag = std::abs(z);
    return mag == 0.0 ? cdouble{} : std::polar(std::pow(mag, compression), std::arg(z));
  };
  double total = 0.0;
  for (std::size_t c = 0; c < target.num_channels(); ++c) {
    const auto y = estimate.channel(c);
    const auto t = target.channel(c);
    double amp = 0.0, phase = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const cdouble tc = compress(t[i]);
      const cdouble yc = compress(y[i]);
      const double d = std::abs(tc) - std::abs(yc);
      amp += d * d;
      phase += std::norm(tc - yc);
    }
    const auto n = static_cast<double>(std::max<std::size_t>(1, t.size()));
    total += 0.5 * amp / n + 0.5 * phase / n;
  }
  return total / static_cast<double>(target.num_channels());
}

std::vector<Band> band_partition(double f_alias, double sample_rate) {
  const double nyquist = sample_rate / 2.0;
  if (!(f_alias > 0.0) || !(f_alias < nyquist)) {
    throw InvalidArgument("band_partition: aliasing frequency must lie in (0, fs/2)");
  }
  const double edges[5] = {0.0, f_alias, 2.0 * f_alias, 4.0 * f_alias, nyquist};
  std::vector<Band> bands;
  for (int i = 0; i < 4; ++i) {
    const double lo = std::min(edges[i], nyquist);
    const double hi = std::min(edges[i + 1], nyquist);
    if (hi > lo) bands.push_back({lo, hi});
  }
  return bands;
}

std::vector<std::size_t> BandBins(const Band& band, double sample_rate, std::size_t fft_size) {
  const double nyquist = sample_rate / 2.0;
  const bool closed = band.hi >= nyquist;
  std::vector<std::size_t> bins;
  for (std::size_t k = 0; k <= fft_size / 2; ++k) {
    const double f = static_cast<double>(k) * sample_rate / static_cast<double>(fft_size);
    if (f >= band.lo && (f < band.hi || (closed && f <= band.hi))) bins.push_back(k);
  }
  return bins;
}

std::string PolarResponse::ToCsv() const {
  std::string out = "band_lo_hz,band_hi_hz,channel,azimuth_deg,magnitude\n";
  char line[160];
  for (std::size_t b = 0; b < bands.size(); ++b) {
    for (std::size_t c = 0; c < num_channels; ++c) {
      for (std::size_t a = 0; a < azimuths_deg.size(); ++a) {
        std::snprintf(line, sizeof(line), "%.6f,%.6f,%zu,%.6f,%.9g\n", bands[b].lo, bands[b].hi, c,
                      azimuths_deg[a], magnitudes[b][c][a]);
        out += line;
      }
    }
  }
  return out;
}

double PatternDeviationDb(double measured, double ideal, double floor_db) {
  const double floor_lin = std::pow(10.0, floor_db / 20.0);
  return 20.0 * std::log10(std::max(std::abs(measured), floor_lin)) -
         20.0 * std::log10(std::max(std::abs(ideal), floor_lin));
}

std::vector<double> UniformAzimuthsDeg(std::size_t n) {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = 360.0 * static_cast<double>(i) / static_cast<double>(n);
  return out;
}

PolarResponse spatial_sweep(const SweepPipeline& pipeline, const SweepConfig& config) {
  if (config.azimuths_deg.empty()) throw InvalidArgument("spatial_sweep: empty grid");
  if (config.bands.empty()) throw InvalidArgument("spatial_sweep: no bands");
  if (config.n_signals == 0) throw InvalidArgument("spatial_sweep: n_signals must be >= 1");
  for (const auto& b : config.bands) {
    if (!(b.hi > b.lo) || b.lo < 0.0 || b.hi > config.sample_rate / 2.0) {
      throw InvalidArgument("spatial_sweep: band outside (0, fs/2]");
    }
  }

  const std::size_t n_az = config.azimuths_deg.size();
  const std::size_t n_bands = config.bands.size();
  // raw[az][band][channel], averaged over signals
  std::vector<std::vector<std::vector<double>>> raw(n_az);
  ParallelFor(n_az, config.threads, [&](std::size_t a) {
    std::vector<std::vector<double>> acc;
    std::vector<std::vector<std::size_t>> band_bins;
    for (std::size_t s = 0; s < config.n_signals; ++s) {
      SourceScene scene;
      scene.sample_rate = config.sample_rate;
      scene.duration = config.duration;
      scene.spacing_x = config.spacing_x;
      scene.spacing_y = config.spacing_y;
      scene.seed = DeriveSeed(config.seed, a * config.n_signals + s);
      SceneSource src;
      src.direction = Direction::FromAzimuth(config.azimuths_deg[a]);
      src.kind = SourceKind::kWhite;
      src.seed = scene.seed;
      scene.sources.push_back(src);
      const std::vector<MonoSignal> sources{
          synth_source(SourceKind::kWhite, config.duration, config.sample_rate, src.seed)};

      Spectrogram out;
      try {
        out = pipeline(scene, sources);
      } catch (const Error& e) {
        throw Error(e.kind(), "spatial_sweep at azimuth " + std::to_string(config.azimuths_deg[a]) +
                                  ": " + e.what());
      }
      if (acc.empty()) {
        acc.assign(n_bands, std::vector<double>(out.num_channels(), 0.0));
        for (const auto& b : config.bands) {
          band_bins.push_back(BandBins(b, out.sample_rate(), out.fft_size()));
        }
      }
      for (std::size_t b = 0; b < n_bands; ++b) {
        for (std::size_t c = 0; c < out.num_channels(); ++c) {
          double energy = 0.0;
          for (std::size_t k : band_bins[b]) {
            for (std::size_t n = 0; n < out.num_frames(); ++n) energy += std::norm(out.at(c, k, n));
          }
          const double count = static_cast<double>(band_bins[b].size() * out.num_frames());
          acc[b][c] += count > 0.0 ? std::sqrt(energy / count) : 0.0;
        }
      }
    }
    for (auto& per_band : acc) {
      for (double& v : per_band) v /= static_cast<double>(config.n_signals);
    }
    raw[a] = std::move(acc);
  });

  PolarResponse response;
  response.bands = config.bands;
  response.azimuths_deg = config.azimuths_deg;
  response.num_channels = raw.front().front().size();
  response.magnitudes.assign(n_bands, std::vector<std::vector<double>>(
                                          response.num_channels, std::vector<double>(n_az, 0.0)));
  for (std::size_t b = 0; b < n_bands; ++b) {
    for (std::size_t c = 0; c < response.num_channels; ++c) {
      double peak = 0.0;
      for (std::size_t a = 0; a < n_az; ++a) peak = std::max(peak, raw[a][b][c]);
      for (std::size_t a = 0; a < n_az; ++a) {
        response.magnitudes[b][c][a] = peak > 0.0 ? raw[a][b][c] / peak : 0.0;
      }
    }
  }
  return response;
}

}  // namespace dealias
