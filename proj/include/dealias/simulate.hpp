#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dealias/core.hpp"

namespace dealias {

enum class SpacingMode { kFixed, kVarying };

enum class SourceKind { kWhite, kPink, kAmNoise, kChirp, kMultitone };

std::string_view SourceKindName(SourceKind kind);
SourceKind ParseSourceKind(std::string_view name);
std::vector<SourceKind> AllSourceKinds();

struct SceneConfig {
  SpacingMode spacing_mode = SpacingMode::kFixed;
  double fixed_spacing = 0.03;
  double min_spacing = 0.01;
  double max_spacing = 0.10;
  // 0 draws the source count uniformly from {1, 2, 3, 4}.
  int n_sources = 0;
  double duration = 2.0;
  double sample_rate = 16000.0;
  std::vector<SourceKind> kinds = AllSourceKinds();
};

struct SceneSource {
  Direction direction;
  std::uint32_t source_id = 0;
  SourceKind kind = SourceKind::kWhite;
  std::uint64_t seed = 0;
};

struct SourceScene {
  std::vector<SceneSource> sources;
  double spacing_x = 0.03;
  double spacing_y = 0.03;
  double sample_rate = 16000.0;
  double duration = 2.0;
  std::uint64_t seed = 0;

  ArrayGeometry geometry() const { return ArrayGeometry::Cross(spacing_x, spacing_y); }
  std::size_t num_samples() const;
};

SourceScene sample_scene(std::uint64_t seed, const SceneConfig& config);

// Zero-mean source with RMS exactly 0.1, deterministic in (kind, seed).
MonoSignal synth_source(SourceKind kind, double duration, double sample_rate, std::uint64_t seed);

// One signal per scene source, generated from the per-source kind and seed.
std::vector<MonoSignal> SynthesizeSources(const SourceScene& scene);

// Anechoic far-field capture: mic m = sum_k s_k(t + p_m . u_k / c). Fractional
// delays are exact phase ramps on a zero-padded DFT of the whole signal.
MultichannelSignal render_array(const SourceScene& scene, std::span<const MonoSignal> signals,
                                const ArrayGeometry& geometry,
                                double speed_of_sound = kDefaultSpeedOfSound);

struct ManifestRecord {
  std::string scene_id;
  double spacing_x = 0.0;
  double spacing_y = 0.0;
  std::vector<double> azimuths_deg;
  std::vector<std::string> source_kinds;
  std::vector<std::string> source_paths;  // relative to the dataset directory
  std::string mixture_path;
  std::uint64_t seed = 0;
  double sample_rate = 0.0;
  double duration = 0.0;

  SourceScene ToScene() const;
};

struct DatasetManifest {
  std::vector<ManifestRecord> records;

  std::string ToJsonLines() const;
  static DatasetManifest FromJsonLines(std::string_view text);
};

struct DatasetConfig {
  SceneConfig scene;
  std::size_t n_scenes = 1;
  std::uint64_t master_seed = 0;
  std::size_t threads = 1;
};

inline constexpr const char* kManifestFileName = "manifest.jsonl";

// Writes scene_NNNN/{mix.wav, src_K.wav} and manifest.jsonl under out_dir.
DatasetManifest generate_dataset(const DatasetConfig& config,
                                 const std::filesystem::path& out_dir);

// Reads <dir>/manifest.jsonl and checks every referenced file.
DatasetManifest ReadDataset(const std::filesystem::path& dir);

}  // namespace dealias
