#include "dealias/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>

#include "dealias/filters.hpp"
#include "dealias/parallel.hpp"
#include "dealias/rng.hpp"
#include "dealias/stft.hpp"
#include "dealias/wav.hpp"
#include "json.hpp"

namespace dealias {
namespace {

using json = nlohmann::json;

std::string Normalize(std::string_view text) {
  std::string s(text);
  std::replace(s.begin(), s.end(), '-', '_');
  return s;
}

}  // namespace

std::string_view PresetScaleName(PresetScale scale) {
  return scale == PresetScale::kPaper ? "paper" : "desk";
}

PresetScale ParsePresetScale(std::string_view name) {
  if (name == "paper") return PresetScale::kPaper;
  if (name == "desk") return PresetScale::kDesk;
  throw InvalidArgument("unknown scale '" + std::string(name) + "' (expected paper or desk)");
}

DecoderMatrix PipelineConfig::decoder() const {
  if (beamformer == BeamformerKind::kCardioidPair) return identity_decoder(2);
  return cardioid_fan_decoder(decode_directions);
}

BeamformerConfig PipelineConfig::beamformer_for(double spacing_x, double spacing_y) const {
  BeamformerConfig bf;
  bf.kind = beamformer;
  bf.spacing_x = spacing_x;
  bf.spacing_y = spacing_y;
  bf.speed_of_sound = speed_of_sound;
  bf.max_gain_db = max_gain_db;
  bf.sample_rate = scene.sample_rate;
  bf.fft_size = fft_size;
  return bf;
}

PipelineConfig preset(std::string_view name, PresetScale scale) {
  PipelineConfig c;
  c.name = std::string(name);
  c.scale = scale;
  std::string experiment, regime;
  if (name == "i_fix" || name == "i_var") {
    experiment = "i";
  } else if (name == "ii_fix" || name == "ii_var") {
    experiment = "ii";
  } else {
    throw InvalidArgument("unknown preset '" + std::string(name) +
                          "' (expected i_fix, i_var, ii_fix or ii_var)");
  }
  regime = std::string(name.substr(name.find('_') + 1));

  if (experiment == "i") {
    c.beamformer = BeamformerKind::kCardioidPair;
    c.decode_directions = {Direction::FromAzimuth(0.0), Direction::FromAzimuth(180.0)};
  } else {
    c.beamformer = BeamformerKind::kPlanarFoa;
    c.decode_directions = {Direction::FromAzimuth(0.0), Direction::FromAzimuth(180.0),
                           Direction::FromAzimuth(90.0), Direction::FromAzimuth(270.0)};
  }
  c.alpha = 0.5;
  c.scene.spacing_mode = regime == "fix" ? SpacingMode::kFixed : SpacingMode::kVarying;
  c.scene.min_spacing = 0.01;
  c.scene.max_spacing = 0.10;
  if (scale == PresetScale::kPaper) {
    c.scene.sample_rate = 44100.0;
    c.fft_size = 2048;
    c.hop = 1024;
    c.scene.duration = 5.0;
    c.scene.fixed_spacing = 0.03;
  } else {
    c.scene.sample_rate = 16000.0;
    c.fft_size = 1024;
    c.hop = 512;
    c.scene.duration = 2.0;
    c.scene.fixed_spacing = 0.06;
  }
  return c;
}

std::string PipelineConfig::ToJson() const {
  json dirs = json::array();
  for (const auto& d : decode_directions) dirs.push_back(d.azimuth());
  json kinds = json::array();
  for (auto k : scene.kinds) kinds.push_back(std::string(SourceKindName(k)));
  const json j = {
      {"preset", name},
      {"scale", std::string(PresetScaleName(scale))},
      {"beamformer", beamformer == BeamformerKind::kCardioidPair ? "cardioid_pair" : "planar_foa"},
      {"decode_directions_deg", dirs},
      {"alpha", alpha},
      {"spacing_mode", scene.spacing_mode == SpacingMode::kFixed ? "fixed" : "varying"},
      {"fixed_spacing", scene.fixed_spacing},
      {"min_spacing", scene.min_spacing},
      {"max_spacing", scene.max_spacing},
      {"n_sources", scene.n_sources},
      {"duration", scene.duration},
      {"sample_rate", scene.sample_rate},
      {"source_kinds", kinds},
      {"fft_size", fft_size},
      {"hop", hop},
      {"speed_of_sound", speed_of_sound},
      {"max_gain_db", max_gain_db},
      {"lti_grid", lti_grid},
  };
  return j.dump(2);
}

void PipelineConfig::ApplyJson(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigurationError(std::string("config: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigurationError("config: top level must be an object");
  try {
    if (j.contains("alpha")) alpha = j["alpha"].get<double>();
    if (j.contains("spacing_mode")) {
      const auto m = j["spacing_mode"].get<std::string>();
      if (m == "fixed" || m == "fix") {
        scene.spacing_mode = SpacingMode::kFixed;
      } else if (m == "varying" || m == "var") {
        scene.spacing_mode = SpacingMode::kVarying;
      } else {
        throw ConfigurationError("config: unknown spacing_mode '" + m + "'");
      }
    }
    if (j.contains("fixed_spacing")) scene.fixed_spacing = j["fixed_spacing"].get<double>();
    if (j.contains("min_spacing")) scene.min_spacing = j["min_spacing"].get<double>();
    if (j.contains("max_spacing")) scene.max_spacing = j["max_spacing"].get<double>();
    if (j.contains("n_sources")) scene.n_sources = j["n_sources"].get<int>();
    if (j.contains("duration")) scene.duration = j["duration"].get<double>();
    if (j.contains("sample_rate")) scene.sample_rate = j["sample_rate"].get<double>();
    if (j.contains("source_kinds")) {
      scene.kinds.clear();
      for (const auto& k : j["source_kinds"]) scene.kinds.push_back(ParseSourceKind(k.get<std::string>()));
    }
    if (j.contains("fft_size")) fft_size = j["fft_size"].get<std::size_t>();
    if (j.contains("hop")) hop = j["hop"].get<std::size_t>();
    if (j.contains("speed_of_sound")) speed_of_sound = j["speed_of_sound"].get<double>();
    if (j.contains("max_gain_db")) max_gain_db = j["max_gain_db"].get<double>();
    if (j.contains("lti_grid")) lti_grid = j["lti_grid"].get<std::size_t>();
  } catch (const json::exception& e) {
    throw ConfigurationError(std::string("config: ") + e.what());
  }
}

FilterSpec FilterSpec::Parse(std::string_view text) {
  const std::string s = Normalize(text);
  FilterSpec spec;
  if (s == "identity") {
    spec.kind = FilterKind::kIdentity;
  } else if (s == "oracle_diag") {
    spec.kind = FilterKind::kOracleDiag;
  } else if (s == "oracle_full") {
    spec.kind = FilterKind::kOracleFull;
  } else if (s == "lti") {
    spec.kind = FilterKind::kLti;
  } else if (s == "nn") {
    spec.kind = FilterKind::kNeural;
  } else if (s.rfind("nn:", 0) == 0) {
    spec.kind = FilterKind::kNeural;
    // Path taken from the original text so underscores/dashes survive.
    spec.weights = std::string(text.substr(3));
  } else {
    throw InvalidArgument("unknown filter '" + std::string(text) +
                          "' (expected identity, oracle_diag, oracle_full, lti or nn:<bundle>)");
  }
  return spec;
}

FilterSpec FilterSpec::Neural(std::shared_ptr<const WeightBundle> bundle) {
  FilterSpec spec;
  spec.kind = FilterKind::kNeural;
  spec.bundle = std::move(bundle);
  return spec;
}

std::string FilterSpec::Name() const {
  switch (kind) {
    case FilterKind::kIdentity: return "identity";
    case FilterKind::kOracleDiag: return "oracle_diag";
    case FilterKind::kOracleFull: return "oracle_full";
    case FilterKind::kLti: return "lti";
    case FilterKind::kNeural: return weights.empty() ? "nn" : "nn:" + weights.string();
  }
  return "unknown";
}

void FilterSpec::Resolve() {
  if (kind != FilterKind::kNeural || bundle) return;
  if (weights.empty()) throw ConfigurationError("filter nn needs a weight bundle (nn:<path> or --weights)");
  bundle = std::make_shared<const WeightBundle>(load_weights(weights));
}

SceneInput RenderScene(const PipelineConfig& config, const SourceScene& scene, std::string id) {
  SceneInput in;
  in.id = std::move(id);
  in.scene = scene;
  in.sources = SynthesizeSources(scene);
  in.mixture = render_array(scene, in.sources, scene.geometry(), config.speed_of_sound);
  return in;
}

std::vector<SceneInput> GenerateScenes(const PipelineConfig& config, std::size_t n_scenes,
                                       std::uint64_t seed, std::size_t threads) {
  std::vector<SceneInput> scenes(n_scenes);
  ParallelFor(n_scenes, threads, [&](std::size_t i) {
    char id[32];
    std::snprintf(id, sizeof(id), "scene_%04zu", i);
    scenes[i] = RenderScene(config, sample_scene(DeriveSeed(seed, i), config.scene), id);
  });
  return scenes;
}

std::vector<SceneInput> LoadDatasetScenes(const std::filesystem::path& dir) {
  const DatasetManifest manifest = ReadDataset(dir);
  std::vector<SceneInput> scenes;
  for (const auto& record : manifest.records) {
    SceneInput in;
    in.id = record.scene_id;
    in.scene = record.ToScene();
    in.mixture = ReadWav(dir / record.mixture_path);
    if (in.mixture.num_channels() != 4) {
      throw InvalidArgument(record.mixture_path + ": expected 4 channels");
    }
    for (const auto& p : record.source_paths) {
      const MultichannelSignal s = ReadWav(dir / p);
      const auto ch = s.channel(0);
      in.sources.push_back({std::vector<double>(ch.begin(), ch.end()), s.sample_rate()});
    }
    scenes.push_back(std::move(in));
  }
  return scenes;
}

Spectrogram SceneTargets(const PipelineConfig& config, const SourceScene& scene,
                         std::span<const MonoSignal> sources) {
  std::vector<std::vector<double>> channels;
  std::vector<Direction> dirs;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    channels.push_back(sources[i].samples);
    dirs.push_back(scene.sources.at(i).direction);
  }
  const auto dry = MultichannelSignal::FromChannels(std::move(channels), scene.sample_rate);
  const Spectrogram s = stft_forward(dry, config.fft_size, config.hop);
  return make_targets(target_encoder(config.decode_directions, dirs, config.alpha), s);
}

FilterField ComputeFilter(const PipelineConfig& config, const FilterSpec& filter,
                          const BeamformerConfig& beamformer, const Spectrogram& vmics,
                          const Spectrogram* targets) {
  const std::size_t v = vmics.num_channels();
  switch (filter.kind) {
    case FilterKind::kIdentity:
      return FilterField::Identity(FilterMode::kDiag, vmics.num_frames(), vmics.num_bins(), v);
    case FilterKind::kOracleDiag:
    case FilterKind::kOracleFull: {
      if (targets == nullptr) {
        throw ConfigurationError("oracle filters need ground-truth targets (scene description)");
      }
      return OracleFilterField(config.decoder(), vmics, *targets,
                               filter.kind == FilterKind::kOracleDiag ? FilterMode::kDiag
                                                                      : FilterMode::kFull);
    }
    case FilterKind::kLti: {
      LtiProblem problem{beamformer, config.decode_directions, config.alpha,
                         UniformAzimuthGrid(config.lti_grid)};
      std::vector<double> freqs(vmics.num_bins());
      for (std::size_t k = 0; k < freqs.size(); ++k) freqs[k] = vmics.BinFrequency(k);
      const auto per_bin = lti_ls_filter(problem, config.decoder(), freqs);
      return LtiFilterField(per_bin, vmics.num_frames());
    }
    case FilterKind::kNeural: {
      if (!filter.bundle) throw ConfigurationError("filter nn has no loaded weight bundle");
      return PredictFilters(*filter.bundle, vmics);
    }
  }
  throw InvalidArgument("ComputeFilter: unknown filter kind");
}

SceneOutput ProcessScene(const PipelineConfig& config, const FilterSpec& filter,
                         const SourceScene& scene, std::span<const MonoSignal> sources,
                         const MultichannelSignal& mixture) {
  if (scene.sample_rate != config.scene.sample_rate) {
    throw InvalidArgument("scene sample rate differs from the preset");
  }
  SceneOutput out;
  const BeamformerConfig bf = config.beamformer_for(scene);
  out.vmics = Beamform(bf, stft_forward(mixture, config.fft_size, config.hop));
  out.targets = SceneTargets(config, scene, sources);
  if (!out.targets.SameGrid(out.vmics)) {
    throw InvalidArgument("dry sources and mixture have different lengths");
  }
  const FilterField field = ComputeFilter(config, filter, bf, out.vmics, &out.targets);
  out.decoded = apply_filter(config.decoder(), field, out.vmics);
  if (!out.decoded.AllFinite()) throw NumericError("decoded output contains non-finite values");
  return out;
}

SiSnrResult PipelineSiSnr(const Spectrogram& decoded, const Spectrogram& targets) {
  Spectrogram est = decoded, tgt = targets;
  for (std::size_t c = 0; c < est.num_channels(); ++c) {
    for (std::size_t n = 0; n < est.num_frames(); ++n) {
      est.at(c, 0, n) = 0.0;
      tgt.at(c, 0, n) = 0.0;
    }
  }
  return c_si_snr(est, tgt);
}

std::string PipelineReport::ToJson() const {
  json scenes = json::array();
  for (const auto& s : per_scene) {
    scenes.push_back({{"scene_id", s.scene_id},
                      {"n_sources", s.n_sources},
                      {"spacing_x", s.spacing_x},
                      {"spacing_y", s.spacing_y},
                      {"c_si_snr_db", s.c_si_snr_db},
                      {"per_channel_db", s.per_channel_db},
                      {"identity_db", s.identity_db},
                      {"improvement_db", s.improvement_db}});
  }
  const json j = {{"preset", preset},
                  {"scale", scale},
                  {"filter_kind", filter_kind},
                  {"n_scenes", n_scenes},
                  {"mean_db", mean_db},
                  {"std_db", std_db},
                  {"identity_mean_db", identity_mean_db},
                  {"improvement_db", improvement_db},
                  {"per_scene", scenes}};
  return j.dump(2);
}

PipelineReport run_pipeline(const PipelineConfig& config, const FilterSpec& filter_in,
                            std::span<const SceneInput> scenes, std::size_t threads) {
  FilterSpec filter = filter_in;
  filter.Resolve();
  if (scenes.empty()) throw InvalidArgument("run_pipeline: no scenes");

  std::vector<SceneMetrics> metrics(scenes.size());
  ParallelFor(scenes.size(), threads, [&](std::size_t i) {
    const SceneInput& in = scenes[i];
    const SceneOutput out = ProcessScene(config, filter, in.scene, in.sources, in.mixture);
    const SiSnrResult value = PipelineSiSnr(out.decoded, out.targets);
    double identity = value.mean_db;
    if (filter.kind != FilterKind::kIdentity) {
      const Spectrogram baseline = Decode(config.decoder(), out.vmics);
      identity = PipelineSiSnr(baseline, out.targets).mean_db;
    }
    SceneMetrics& m = metrics[i];
    m.scene_id = in.id;
    m.n_sources = in.scene.sources.size();
    m.spacing_x = in.scene.spacing_x;
    m.spacing_y = in.scene.spacing_y;
    m.per_channel_db = value.per_channel_db;
    m.c_si_snr_db = value.mean_db;
    m.identity_db = identity;
    m.improvement_db = value.mean_db - identity;
  });

  PipelineReport report;
  report.preset = config.name;
  report.scale = std::string(PresetScaleName(config.scale));
  report.filter_kind = filter.Name();
  report.n_scenes = metrics.size();
  const double n = static_cast<double>(metrics.size());
  double sum = 0.0, sum_id = 0.0;
  for (const auto& m : metrics) {
    sum += m.c_si_snr_db;
    sum_id += m.identity_db;
  }
  report.mean_db = sum / n;
  report.identity_mean_db = sum_id / n;
  report.improvement_db = report.mean_db - report.identity_mean_db;
  double var = 0.0;
  for (const auto& m : metrics) var += (m.c_si_snr_db - report.mean_db) * (m.c_si_snr_db - report.mean_db);
  report.std_db = std::sqrt(var / n);
  report.per_scene = std::move(metrics);
  return report;
}

SweepPipeline MakeSweepPipeline(const PipelineConfig& config, const FilterSpec& filter_in) {
  FilterSpec filter = filter_in;
  filter.Resolve();
  if (filter.kind != FilterKind::kLti) {
    return [config, filter](const SourceScene& scene, std::span<const MonoSignal> sources) {
      const MultichannelSignal mix =
          render_array(scene, sources, scene.geometry(), config.speed_of_sound);
      return ProcessScene(config, filter, scene, sources, mix).decoded;
    };
  }
  // The static filter depends only on the geometry; fit it once per spacing.
  struct Cache {
    std::mutex mutex;
    std::map<std::pair<double, double>, std::shared_ptr<const FilterField>> fields;
  };
  auto cache = std::make_shared<Cache>();
  return [config, filter, cache](const SourceScene& scene, std::span<const MonoSignal> sources) {
    const MultichannelSignal mix =
        render_array(scene, sources, scene.geometry(), config.speed_of_sound);
    const BeamformerConfig bf = config.beamformer_for(scene);
    const Spectrogram vmics = Beamform(bf, stft_forward(mix, config.fft_size, config.hop));
    std::shared_ptr<const FilterField> field;
    {
      std::lock_guard lock(cache->mutex);
      auto& slot = cache->fields[{scene.spacing_x, scene.spacing_y}];
      if (!slot || slot->num_frames() != vmics.num_frames()) {
        slot = std::make_shared<const FilterField>(ComputeFilter(config, filter, bf, vmics, nullptr));
      }
      field = slot;
    }
    return apply_filter(config.decoder(), *field, vmics);
  };
}

SweepConfig DefaultSweepConfig(const PipelineConfig& config, std::size_t grid,
                               std::size_t n_signals, std::uint64_t seed) {
  SweepConfig s;
  s.azimuths_deg = UniformAzimuthsDeg(grid);
  s.n_signals = n_signals;
  s.bands = band_partition(config.fixed_alias_frequency(), config.scene.sample_rate);
  s.seed = seed;
  s.sample_rate = config.scene.sample_rate;
  s.duration = 0.5;
  s.spacing_x = config.scene.fixed_spacing;
  s.spacing_y = config.scene.fixed_spacing;
  return s;
}

}  // namespace dealias
