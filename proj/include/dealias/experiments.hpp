#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dealias/beamform.hpp"
#include "dealias/core.hpp"
#include "dealias/metrics.hpp"
#include "dealias/nnmask.hpp"
#include "dealias/simulate.hpp"
#include "dealias/spatial_codec.hpp"

namespace dealias {

enum class PresetScale { kPaper, kDesk };

std::string_view PresetScaleName(PresetScale scale);
PresetScale ParsePresetScale(std::string_view name);

struct PipelineConfig {
  std::string name = "i_fix";
  PresetScale scale = PresetScale::kDesk;
  BeamformerKind beamformer = BeamformerKind::kCardioidPair;
  // Target directions; for the FOA experiment also the decoder directions.
  std::vector<Direction> decode_directions;
  double alpha = 0.5;
  SceneConfig scene;
  std::size_t fft_size = 1024;
  std::size_t hop = 512;
  double speed_of_sound = kDefaultSpeedOfSound;
  double max_gain_db = 30.0;
  // Direction grid of the static least-squares baseline.
  std::size_t lti_grid = 360;

  std::size_t num_vmics() const { return beamformer == BeamformerKind::kCardioidPair ? 2 : 3; }
  std::size_t num_outputs() const { return decode_directions.size(); }
  DecoderMatrix decoder() const;
  BeamformerConfig beamformer_for(double spacing_x, double spacing_y) const;
  BeamformerConfig beamformer_for(const SourceScene& scene) const {
    return beamformer_for(scene.spacing_x, scene.spacing_y);
  }
  // Aliasing frequency of the fixed spacing.
  double fixed_alias_frequency() const { return aliasing_frequency(scene.fixed_spacing, speed_of_sound); }

  std::string ToJson() const;
  // Applies the keys present in a JSON object on top of this config.
  void ApplyJson(std::string_view json_text);
};

// i_fix, i_var, ii_fix or ii_var at paper (44.1 kHz, 2048/1024, 3 cm) or desk
// (16 kHz, 1024/512, 6 cm) scale.
PipelineConfig preset(std::string_view name, PresetScale scale);

enum class FilterKind { kIdentity, kOracleDiag, kOracleFull, kLti, kNeural };

struct FilterSpec {
  FilterKind kind = FilterKind::kIdentity;
  std::filesystem::path weights;
  std::shared_ptr<const WeightBundle> bundle;

  // identity, oracle_diag, oracle_full, lti, nn or nn:<path>; '-' and '_'
  // are interchangeable.
  static FilterSpec Parse(std::string_view text);
  static FilterSpec Neural(std::shared_ptr<const WeightBundle> bundle);
  std::string Name() const;
  bool NeedsTargets() const { return kind == FilterKind::kOracleDiag || kind == FilterKind::kOracleFull; }
  // Loads the bundle for the neural kind; ConfigurationError when none is given.
  void Resolve();
};

struct SceneInput {
  std::string id;
  SourceScene scene;
  std::vector<MonoSignal> sources;
  MultichannelSignal mixture;
};

SceneInput RenderScene(const PipelineConfig& config, const SourceScene& scene, std::string id = {});
// Scene i uses sample_scene(DeriveSeed(seed, i), config.scene).
std::vector<SceneInput> GenerateScenes(const PipelineConfig& config, std::size_t n_scenes,
                                       std::uint64_t seed, std::size_t threads = 1);
// Mixtures and dry sources from a dataset directory written by generate_dataset.
std::vector<SceneInput> LoadDatasetScenes(const std::filesystem::path& dir);

struct SceneOutput {
  Spectrogram vmics;
  Spectrogram targets;
  Spectrogram decoded;
};

// Target spectrogram of a scene: decode-direction first-order patterns applied
// to the dry sources.
Spectrogram SceneTargets(const PipelineConfig& config, const SourceScene& scene,
                         std::span<const MonoSignal> sources);

// Filter field for the given virtual mics. `targets` is required for the
// oracle kinds.
FilterField ComputeFilter(const PipelineConfig& config, const FilterSpec& filter,
                          const BeamformerConfig& beamformer, const Spectrogram& vmics,
                          const Spectrogram* targets);

SceneOutput ProcessScene(const PipelineConfig& config, const FilterSpec& filter,
                         const SourceScene& scene, std::span<const MonoSignal> sources,
                         const MultichannelSignal& mixture);

// C-Si-SNR of decoded output against targets over bins k >= 1. The DC bin is
// excluded because every gradient beamformer output is exactly zero there.
SiSnrResult PipelineSiSnr(const Spectrogram& decoded, const Spectrogram& targets);

struct SceneMetrics {
  std::string scene_id;
  std::size_t n_sources = 0;
  double spacing_x = 0.0;
  double spacing_y = 0.0;
  std::vector<double> per_channel_db;
  double c_si_snr_db = 0.0;
  double identity_db = 0.0;
  double improvement_db = 0.0;
};

struct PipelineReport {
  std::string preset;
  std::string scale;
  std::string filter_kind;
  std::size_t n_scenes = 0;
  double mean_db = 0.0;
  double std_db = 0.0;  // population std over scenes
  double identity_mean_db = 0.0;
  double improvement_db = 0.0;
  std::vector<SceneMetrics> per_scene;

  std::string ToJson() const;
};

PipelineReport run_pipeline(const PipelineConfig& config, const FilterSpec& filter,
                            std::span<const SceneInput> scenes, std::size_t threads = 1);

// Sweep pipeline: render a single-source scene, beamform, filter, decode.
SweepPipeline MakeSweepPipeline(const PipelineConfig& config, const FilterSpec& filter);

// Sweep at the fixed spacing with the default band partition.
SweepConfig DefaultSweepConfig(const PipelineConfig& config, std::size_t grid,
                               std::size_t n_signals, std::uint64_t seed);

}  // namespace dealias
