#include "dealias/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include "json.hpp"
#include <sstream>

#include "dealias/fft.hpp"
#include "dealias/parallel.hpp"
#include "dealias/rng.hpp"
#include "dealias/wav.hpp"

namespace dealias {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kSourceRms = 0.1;

void NormalizeZeroMeanRms(std::vector<double>& x, double target_rms) {
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double energy = 0.0;
  for (double& v : x) {
    v -= mean;
    energy += v * v;
  }
  const double rms = std::sqrt(energy / static_cast<double>(x.size()));
  if (rms <= 0.0) return;
  const double g = target_rms / rms;
  for (double& v : x) v *= g;
}

std::vector<double> WhiteNoise(Xoshiro256pp& rng, std::size_t n) {
  std::vector<double> x(n);
  for (double& v : x) v = rng.Normal();
  return x;
}

std::vector<double> PinkNoise(Xoshiro256pp& rng, std::size_t n) {
  auto x = WhiteNoise(rng, n);
  RealFft fft(n);
  std::vector<cdouble> spec(fft.num_bins());
  fft.Forward(x, spec);
  spec[0] = 0.0;
  for (std::size_t k = 1; k < spec.size(); ++k) spec[k] /= std::sqrt(static_cast<double>(k));
  fft.Inverse(spec, x);
  return x;
}

std::vector<double> AmNoise(Xoshiro256pp& rng, std::size_t n, double fs) {
  auto x = WhiteNoise(rng, n);
  const double rate = rng.Uniform(1.0, 8.0);
  const double phase = rng.Uniform(0.0, 2.0 * kPi);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] *= 1.0 + 0.9 * std::sin(2.0 * kPi * rate * static_cast<double>(i) / fs + phase);
  }
  return x;
}

std::vector<double> ExpChirp(Xoshiro256pp& rng, std::size_t n, double fs) {
  const double f0 = rng.Uniform(40.0, 120.0);
  const double f1 = rng.Uniform(0.35, 0.45) * fs;
  const double phase0 = rng.Uniform(0.0, 2.0 * kPi);
  const double span = static_cast<double>(n) / fs;
  const double k = std::log(f1 / f0) / span;
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / fs;
    x[i] = std::sin(phase0 + 2.0 * kPi * f0 * (std::exp(k * t) - 1.0) / k);
  }
  return x;
}

std::vector<double> Multitone(Xoshiro256pp& rng, std::size_t n, double fs) {
  std::vector<double> x(n, 0.0);
  const double lo = std::log(80.0);
  const double hi = std::log(0.45 * fs);
  for (int tone = 0; tone < 8; ++tone) {
    const double f = std::exp(rng.Uniform(lo, hi));
    const double amp = rng.Uniform(0.5, 1.0);
    const double phase = rng.Uniform(0.0, 2.0 * kPi);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += amp * std::sin(2.0 * kPi * f * static_cast<double>(i) / fs + phase);
    }
  }
  return x;
}

std::string SceneDirName(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "scene_%04zu", index);
  return buf;
}

json RecordToJson(const ManifestRecord& r) {
  return json{{"scene_id", r.scene_id},          {"spacing_x", r.spacing_x},
              {"spacing_y", r.spacing_y},        {"azimuths_deg", r.azimuths_deg},
              {"source_kinds", r.source_kinds},  {"source_paths", r.source_paths},
              {"mixture_path", r.mixture_path},  {"seed", r.seed},
              {"sample_rate", r.sample_rate},    {"duration", r.duration}};
}

ManifestRecord RecordFromJson(const json& j) {
  ManifestRecord r;
  j.at("scene_id").get_to(r.scene_id);
  j.at("spacing_x").get_to(r.spacing_x);
  j.at("spacing_y").get_to(r.spacing_y);
  j.at("azimuths_deg").get_to(r.azimuths_deg);
  j.at("source_paths").get_to(r.source_paths);
  j.at("mixture_path").get_to(r.mixture_path);
  j.at("seed").get_to(r.seed);
  if (j.contains("source_kinds")) j.at("source_kinds").get_to(r.source_kinds);
  if (j.contains("sample_rate")) j.at("sample_rate").get_to(r.sample_rate);
  if (j.contains("duration")) j.at("duration").get_to(r.duration);
  if (r.azimuths_deg.size() != r.source_paths.size()) {
    throw InvalidArgument("manifest record " + r.scene_id + ": azimuth/source count mismatch");
  }
  return r;
}

}  // namespace

std::string_view SourceKindName(SourceKind kind) {
  switch (kind) {
    case SourceKind::kWhite: return "white";
    case SourceKind::kPink: return "pink";
    case SourceKind::kAmNoise: return "am_noise";
    case SourceKind::kChirp: return "chirp";
    case SourceKind::kMultitone: return "multitone";
  }
  return "white";
}

SourceKind ParseSourceKind(std::string_view name) {
  for (SourceKind k : AllSourceKinds()) {
    if (SourceKindName(k) == name) return k;
  }
  throw InvalidArgument("unknown source kind '" + std::string(name) + "'");
}

std::vector<SourceKind> AllSourceKinds() {
  return {SourceKind::kWhite, SourceKind::kPink, SourceKind::kAmNoise, SourceKind::kChirp,
          SourceKind::kMultitone};
}

std::size_t SourceScene::num_samples() const {
  return static_cast<std::size_t>(std::llround(duration * sample_rate));
}

SourceScene sample_scene(std::uint64_t seed, const SceneConfig& config) {
  Xoshiro256pp rng(seed);
  SourceScene scene;
  scene.seed = seed;
  scene.sample_rate = config.sample_rate;
  scene.duration = config.duration;
  const auto count = config.n_sources > 0 ? static_cast<std::size_t>(config.n_sources)
                                          : static_cast<std::size_t>(1 + rng.Below(4));
  if (config.spacing_mode == SpacingMode::kFixed) {
    scene.spacing_x = scene.spacing_y = config.fixed_spacing;
  } else {
    scene.spacing_x = rng.Uniform(config.min_spacing, config.max_spacing);
    scene.spacing_y = rng.Uniform(config.min_spacing, config.max_spacing);
  }
  const auto& kinds = config.kinds.empty() ? AllSourceKinds() : config.kinds;
  for (std::size_t k = 0; k < count; ++k) {
    SceneSource src;
    src.direction = Direction::FromAzimuth(rng.Uniform(0.0, 360.0));
    src.source_id = static_cast<std::uint32_t>(k);
    src.kind = kinds[rng.Below(kinds.size())];
    src.seed = rng();
    scene.sources.push_back(src);
  }
  return scene;
}

MonoSignal synth_source(SourceKind kind, double duration, double sample_rate,
                        std::uint64_t seed) {
  if (!(duration > 0.0) || !(sample_rate > 0.0)) {
    throw InvalidArgument("synth_source: duration and sample rate must be positive");
  }
  const auto n = static_cast<std::size_t>(std::llround(duration * sample_rate));
  if (n < 2) throw InvalidArgument("synth_source: duration too short");
  Xoshiro256pp rng(seed);
  MonoSignal out;
  out.sample_rate = sample_rate;
  switch (kind) {
    case SourceKind::kWhite: out.samples = WhiteNoise(rng, n); break;
    case SourceKind::kPink: out.samples = PinkNoise(rng, n); break;
    case SourceKind::kAmNoise: out.samples = AmNoise(rng, n, sample_rate); break;
    case SourceKind::kChirp: out.samples = ExpChirp(rng, n, sample_rate); break;
    case SourceKind::kMultitone: out.samples = Multitone(rng, n, sample_rate); break;
  }
  NormalizeZeroMeanRms(out.samples, kSourceRms);
  return out;
}

std::vector<MonoSignal> SynthesizeSources(const SourceScene& scene) {
  std::vector<MonoSignal> out;
  out.reserve(scene.sources.size());
  for (const auto& src : scene.sources) {
    out.push_back(synth_source(src.kind, scene.duration, scene.sample_rate, src.seed));
  }
  return out;
}

MultichannelSignal render_array(const SourceScene& scene, std::span<const MonoSignal> signals,
                                const ArrayGeometry& geometry, double speed_of_sound) {
  if (signals.size() != scene.sources.size()) {
    throw InvalidArgument("render_array: need one signal per scene source");
  }
  if (signals.empty()) throw InvalidArgument("render_array: scene has no sources");
  const std::size_t length = signals.front().size();
  const double fs = signals.front().sample_rate;
  for (const auto& s : signals) {
    if (s.size() != length) throw InvalidArgument("render_array: source lengths differ");
  }

  const auto& mics = geometry.positions();
  // delays[m][k] in seconds; negative means the wavefront reaches mic m early.
  std::vector<std::vector<double>> delays(mics.size(), std::vector<double>(signals.size()));
  double max_delay = 0.0;
  for (std::size_t m = 0; m < mics.size(); ++m) {
    for (std::size_t k = 0; k < signals.size(); ++k) {
      const auto& u = scene.sources[k].direction;
      delays[m][k] = -(mics[m].x * u.ux() + mics[m].y * u.uy()) / speed_of_sound;
      max_delay = std::max(max_delay, std::abs(delays[m][k]));
    }
  }
  const auto pad = static_cast<std::size_t>(std::ceil(max_delay * fs)) + 2048;
  const std::size_t n = NextFastLength(length + 2 * pad);
  RealFft fft(n);
  const std::size_t bins = fft.num_bins();

  std::vector<std::vector<cdouble>> source_spectra(signals.size(), std::vector<cdouble>(bins));
  std::vector<double> buffer(n);
  for (std::size_t k = 0; k < signals.size(); ++k) {
    std::fill(buffer.begin(), buffer.end(), 0.0);
    std::copy(signals[k].samples.begin(), signals[k].samples.end(), buffer.begin() + pad);
    fft.Forward(buffer, source_spectra[k]);
  }

  MultichannelSignal out(mics.size(), length, fs);
  std::vector<cdouble> acc(bins);
  const bool has_nyquist = n % 2 == 0;
  for (std::size_t m = 0; m < mics.size(); ++m) {
    std::fill(acc.begin(), acc.end(), cdouble{});
    for (std::size_t k = 0; k < signals.size(); ++k) {
      const double tau = delays[m][k];
      for (std::size_t b = 0; b < bins; ++b) {
        const double f = static_cast<double>(b) * fs / static_cast<double>(n);
        const double phi = -2.0 * kPi * f * tau;
        // The Nyquist bin must stay real for a real-valued result.
        const cdouble ramp = (has_nyquist && b == bins - 1) ? cdouble(std::cos(phi), 0.0)
                                                            : std::polar(1.0, phi);
        acc[b] += source_spectra[k][b] * ramp;
      }
    }
    fft.Inverse(acc, buffer);
    auto y = out.channel(m);
    const double scale = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < length; ++i) y[i] = buffer[pad + i] * scale;
  }
  return out;
}

SourceScene ManifestRecord::ToScene() const {
  SourceScene scene;
  scene.spacing_x = spacing_x;
  scene.spacing_y = spacing_y;
  scene.sample_rate = sample_rate;
  scene.duration = duration;
  scene.seed = seed;
  for (std::size_t k = 0; k < azimuths_deg.size(); ++k) {
    SceneSource src;
    src.direction = Direction::FromAzimuth(azimuths_deg[k]);
    src.source_id = static_cast<std::uint32_t>(k);
    if (k < source_kinds.size()) src.kind = ParseSourceKind(source_kinds[k]);
    scene.sources.push_back(src);
  }
  return scene;
}

std::string DatasetManifest::ToJsonLines() const {
  std::string out;
  for (const auto& r : records) {
    out += RecordToJson(r).dump();
    out += '\n';
  }
  return out;
}

DatasetManifest DatasetManifest::FromJsonLines(std::string_view text) {
  DatasetManifest manifest;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      manifest.records.push_back(RecordFromJson(json::parse(line)));
    } catch (const json::exception& e) {
      throw InvalidArgument("manifest line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return manifest;
}

DatasetManifest generate_dataset(const DatasetConfig& config, const fs::path& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  DatasetManifest manifest;
  manifest.records.resize(config.n_scenes);
  ParallelFor(config.n_scenes, config.threads, [&](std::size_t i) {
    const std::uint64_t seed = DeriveSeed(config.master_seed, i);
    const SourceScene scene = sample_scene(seed, config.scene);
    const auto signals = SynthesizeSources(scene);
    const auto mix = render_array(scene, signals, scene.geometry());

    ManifestRecord& r = manifest.records[i];
    r.scene_id = SceneDirName(i);
    r.spacing_x = scene.spacing_x;
    r.spacing_y = scene.spacing_y;
    r.seed = seed;
    r.sample_rate = scene.sample_rate;
    r.duration = scene.duration;
    const fs::path scene_dir = out_dir / r.scene_id;
    fs::create_directories(scene_dir, ec);
    for (std::size_t k = 0; k < signals.size(); ++k) {
      r.azimuths_deg.push_back(scene.sources[k].direction.azimuth());
      r.source_kinds.emplace_back(SourceKindName(scene.sources[k].kind));
      const std::string rel = r.scene_id + "/src_" + std::to_string(k) + ".wav";
      WriteWav(out_dir / rel, signals[k]);
      r.source_paths.push_back(rel);
    }
    r.mixture_path = r.scene_id + "/mix.wav";
    WriteWav(out_dir / r.mixture_path, mix);
  });

  const fs::path manifest_path = out_dir / kManifestFileName;
  std::ofstream out(manifest_path, std::ios::binary);
  if (!out) throw IoError("cannot write " + manifest_path.string());
  out << manifest.ToJsonLines();
  return manifest;
}

DatasetManifest ReadDataset(const fs::path& dir) {
  const fs::path manifest_path = dir / kManifestFileName;
  std::ifstream in(manifest_path, std::ios::binary);
  if (!in) throw IoError("cannot open " + manifest_path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  DatasetManifest manifest = DatasetManifest::FromJsonLines(ss.str());
  for (const auto& r : manifest.records) {
    std::vector<std::string> paths = r.source_paths;
    paths.push_back(r.mixture_path);
    for (const auto& p : paths) {
      if (!fs::exists(dir / p)) throw IoError("dataset file missing: " + (dir / p).string());
    }
  }
  return manifest;
}

}  // namespace dealias
