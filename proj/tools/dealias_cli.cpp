// dealias: command-line front end to the library.
//
// Virtual-mic channel order: cardioid pair (right, left); planar FOA (W, X, Y).
// Exit codes: 0 ok, 2 usage or configuration, 3 data or format, 4 numeric.
#include <CLI11.hpp>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "dealias/experiments.hpp"
#include "dealias/parallel.hpp"
#include "dealias/stft.hpp"
#include "dealias/wav.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace dealias;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

int ExitCodeFor(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument:
    case ErrorKind::kUnsupportedConfiguration:
    case ErrorKind::kConfiguration:
      return kExitUsage;
    case ErrorKind::kNotAWeightFile:
    case ErrorKind::kCorruptWeights:
    case ErrorKind::kIo:
      return kExitData;
    case ErrorKind::kUndefinedMetric:
    case ErrorKind::kNumeric:
      return kExitNumeric;
  }
  return kExitData;
}

std::string ReadText(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteText(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!text.empty() && text.back() != '\n') out << '\n';
}

// Spectrogram container: "DASP", u32 version, u64 channels, bins, frames,
// fft_size, hop, signal_length, f64 sample_rate, then complex128 [c][k][n]
// little-endian.
constexpr char kSpecMagic[4] = {'D', 'A', 'S', 'P'};
constexpr std::uint32_t kSpecVersion = 1;

void SaveSpectrogram(const Spectrogram& s, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(kSpecMagic, 4);
  out.write(reinterpret_cast<const char*>(&kSpecVersion), 4);
  for (std::uint64_t v : {std::uint64_t{s.num_channels()}, std::uint64_t{s.num_bins()},
                          std::uint64_t{s.num_frames()}, std::uint64_t{s.fft_size()},
                          std::uint64_t{s.hop()}, std::uint64_t{s.signal_length()}}) {
    out.write(reinterpret_cast<const char*>(&v), 8);
  }
  const double fs_hz = s.sample_rate();
  out.write(reinterpret_cast<const char*>(&fs_hz), 8);
  out.write(reinterpret_cast<const char*>(s.data().data()),
            static_cast<std::streamsize>(s.data().size() * sizeof(cdouble)));
  if (!out) throw IoError("short write to " + path.string());
}

Spectrogram LoadSpectrogram(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[4];
  std::uint32_t version = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&version), 4);
  if (!in || std::memcmp(magic, kSpecMagic, 4) != 0) throw IoError(path.string() + ": not a spectrogram file");
  if (version != kSpecVersion) throw IoError(path.string() + ": unsupported spectrogram version");
  std::uint64_t h[6];
  double fs_hz = 0.0;
  in.read(reinterpret_cast<char*>(h), sizeof(h));
  in.read(reinterpret_cast<char*>(&fs_hz), 8);
  if (!in || h[0] == 0 || h[0] > 64 || h[3] == 0 || h[1] != h[3] / 2 + 1 || h[2] > (1u << 24)) {
    throw IoError(path.string() + ": corrupt spectrogram header");
  }
  Spectrogram s(h[0], h[1], h[2], fs_hz, h[3], h[4], h[5]);
  in.read(reinterpret_cast<char*>(s.data().data()), static_cast<std::streamsize>(s.data().size() * sizeof(cdouble)));
  if (!in) throw IoError(path.string() + ": truncated spectrogram data");
  return s;
}

bool HasExtension(const fs::path& p, const char* ext) { return p.extension() == ext; }

// Options shared by every preset-driven subcommand.
struct CommonOptions {
  std::string preset_name = "i_fix";
  std::string scale = "desk";
  std::string config_path;
  std::optional<double> alpha;
  std::optional<double> duration;
  std::optional<int> sources;
  std::optional<std::size_t> threads;

  void Add(CLI::App* cmd) {
    cmd->add_option("--preset", preset_name, "i_fix, i_var, ii_fix or ii_var")
        ->check(CLI::IsMember({"i_fix", "i_var", "ii_fix", "ii_var"}));
    cmd->add_option("--scale", scale, "desk or paper")->check(CLI::IsMember({"desk", "paper"}));
    cmd->add_option("--config", config_path, "JSON config applied on top of the preset; flags win")
        ->check(CLI::ExistingFile);
    cmd->add_option("--alpha", alpha, "target pattern parameter in [0, 1]");
    cmd->add_option("--duration", duration, "scene length in seconds");
    cmd->add_option("--sources", sources, "sources per scene (0 draws 1 to 4)");
    cmd->add_option("--threads", threads, "worker threads (default DEALIAS_THREADS or all cores)");
  }

  PipelineConfig Config() const {
    PipelineConfig cfg = preset(preset_name, ParsePresetScale(scale));
    if (!config_path.empty()) cfg.ApplyJson(ReadText(config_path));
    if (alpha) cfg.alpha = *alpha;
    if (duration) cfg.scene.duration = *duration;
    if (sources) cfg.scene.n_sources = *sources;
    return cfg;
  }

  std::size_t Threads() const { return threads && *threads > 0 ? *threads : DefaultThreadCount(); }
};

// --- dataset gen -----------------------------------------------------------

struct DatasetGen {
  CommonOptions common;
  std::size_t scenes = 8;
  std::uint64_t seed = 0;
  std::string out;

  int Run() const {
    const PipelineConfig cfg = common.Config();
    DatasetConfig ds;
    ds.scene = cfg.scene;
    ds.n_scenes = scenes;
    ds.master_seed = seed;
    ds.threads = common.Threads();
    const auto manifest = generate_dataset(ds, out);
    WriteText(fs::path(out) / "config.json", cfg.ToJson());
    std::printf("wrote %zu scenes to %s\n", manifest.records.size(), out.c_str());
    return kExitOk;
  }
};

// --- beamform ----------------------------------------------------------------

struct BeamformCmd {
  CommonOptions common;
  std::string in, out;
  std::optional<double> spacing, spacing_y;

  int Run() const {
    const PipelineConfig cfg = common.Config();
    const MultichannelSignal mix = ReadWav(in);
    if (mix.sample_rate() != cfg.scene.sample_rate) {
      throw InvalidArgument(in + ": sample rate " + std::to_string(mix.sample_rate()) + " differs from the preset");
    }
    const double dx = spacing.value_or(cfg.scene.fixed_spacing);
    const double dy = spacing_y.value_or(dx);
    const Spectrogram v = Beamform(cfg.beamformer_for(dx, dy), stft_forward(mix, cfg.fft_size, cfg.hop));
    if (!v.AllFinite()) throw NumericError("beamformer output contains non-finite values");
    if (HasExtension(out, ".spec")) {
      SaveSpectrogram(v, out);
    } else {
      WriteWav(out, stft_inverse(v));
    }
    std::printf("wrote %zu virtual microphones to %s\n", v.num_channels(), out.c_str());
    return kExitOk;
  }
};

// --- dealias -----------------------------------------------------------------

// A scene description: one manifest record as a JSON object, or a
// manifest.jsonl with --scene-id. Relative source paths resolve against the
// file's directory.
SceneInput LoadSceneDescription(const fs::path& path, const std::string& scene_id) {
  const std::string text = ReadText(path);
  DatasetManifest manifest;
  if (HasExtension(path, ".jsonl")) {
    manifest = DatasetManifest::FromJsonLines(text);
  } else {
    json j;
    try {
      j = json::parse(text);
    } catch (const json::exception& e) {
      throw ConfigurationError(path.string() + ": invalid JSON: " + e.what());
    }
    manifest = DatasetManifest::FromJsonLines(j.dump());
  }
  const ManifestRecord* record = nullptr;
  for (const auto& r : manifest.records) {
    if (scene_id.empty() ? manifest.records.size() == 1 : r.scene_id == scene_id) record = &r;
  }
  if (record == nullptr) {
    throw ConfigurationError(path.string() + (scene_id.empty() ? ": several scenes, pass --scene-id"
                                                                : ": no scene '" + scene_id + "'"));
  }
  SceneInput in;
  in.id = record->scene_id;
  in.scene = record->ToScene();
  const fs::path base = path.parent_path();
  for (const auto& p : record->source_paths) {
    const MultichannelSignal s = ReadWav(base / p);
    const auto ch = s.channel(0);
    in.sources.push_back({std::vector<double>(ch.begin(), ch.end()), s.sample_rate()});
  }
  return in;
}

struct DealiasCmd {
  CommonOptions common;
  std::string in, filter = "identity", weights, scene, scene_id, out, report;
  std::optional<double> spacing, spacing_y;

  int Run() const {
    const PipelineConfig cfg = common.Config();
    FilterSpec spec = FilterSpec::Parse(filter);
    if (!weights.empty()) spec.weights = weights;
    if (spec.NeedsTargets() && scene.empty()) {
      throw ConfigurationError("filter " + spec.Name() + " needs ground truth; pass --scene");
    }
    spec.Resolve();

    std::optional<SceneInput> truth;
    if (!scene.empty()) truth = LoadSceneDescription(scene, scene_id);
    double dx = spacing.value_or(truth ? truth->scene.spacing_x : cfg.scene.fixed_spacing);
    double dy = spacing_y.value_or(truth ? truth->scene.spacing_y : dx);

    Spectrogram vmics;
    if (HasExtension(in, ".spec")) {
      vmics = LoadSpectrogram(in);
      if (vmics.fft_size() != cfg.fft_size || vmics.hop() != cfg.hop) {
        throw InvalidArgument(in + ": STFT geometry differs from the preset");
      }
    } else {
      const MultichannelSignal sig = ReadWav(in);
      if (sig.sample_rate() != cfg.scene.sample_rate) throw InvalidArgument(in + ": sample rate differs from the preset");
      vmics = stft_forward(sig, cfg.fft_size, cfg.hop);
    }
    if (vmics.num_channels() != cfg.num_vmics()) {
      throw InvalidArgument(in + ": expected " + std::to_string(cfg.num_vmics()) + " virtual microphones, got " +
                            std::to_string(vmics.num_channels()));
    }

    std::optional<Spectrogram> targets;
    if (truth) {
      targets = SceneTargets(cfg, truth->scene, truth->sources);
      if (!targets->SameGrid(vmics)) throw InvalidArgument("scene sources and input have different lengths");
    }
    const BeamformerConfig bf = cfg.beamformer_for(dx, dy);
    const FilterField field = ComputeFilter(cfg, spec, bf, vmics, targets ? &*targets : nullptr);
    const Spectrogram decoded = apply_filter(cfg.decoder(), field, vmics);
    if (!decoded.AllFinite()) throw NumericError("decoded output contains non-finite values");
    WriteWav(out, stft_inverse(decoded));

    json rep = {{"preset", cfg.name},
                {"scale", std::string(PresetScaleName(cfg.scale))},
                {"filter_kind", spec.Name()},
                {"input", in},
                {"output", out},
                {"spacing_x", dx},
                {"spacing_y", dy}};
    if (targets) {
      const SiSnrResult value = PipelineSiSnr(decoded, *targets);
      const SiSnrResult identity = PipelineSiSnr(Decode(cfg.decoder(), vmics), *targets);
      rep["scene_id"] = truth->id;
      rep["c_si_snr_db"] = value.mean_db;
      rep["per_channel_db"] = value.per_channel_db;
      rep["identity_db"] = identity.mean_db;
      rep["improvement_db"] = value.mean_db - identity.mean_db;
      std::printf("C-Si-SNR %.2f dB (identity %.2f dB, improvement %+.2f dB)\n", value.mean_db, identity.mean_db,
                  value.mean_db - identity.mean_db);
    }
    if (!report.empty()) WriteText(report, rep.dump(2));
    std::printf("wrote %zu decoded channels to %s\n", decoded.num_channels(), out.c_str());
    return kExitOk;
  }
};

// --- eval --------------------------------------------------------------------

struct EvalCmd {
  CommonOptions common;
  std::string dataset, filter = "identity", weights, report;
  std::size_t scenes = 8;
  std::uint64_t seed = 0;

  int Run() const {
    const PipelineConfig cfg = common.Config();
    FilterSpec spec = FilterSpec::Parse(filter);
    if (!weights.empty()) spec.weights = weights;
    spec.Resolve();
    const auto inputs = dataset.empty() ? GenerateScenes(cfg, scenes, seed, common.Threads())
                                        : LoadDatasetScenes(dataset);
    const PipelineReport r = run_pipeline(cfg, spec, inputs, common.Threads());
    if (!report.empty()) WriteText(report, r.ToJson());
    std::printf("%s %s %s: %zu scenes, C-Si-SNR %.2f +- %.2f dB, identity %.2f dB, improvement %+.2f dB\n",
                r.preset.c_str(), r.scale.c_str(), r.filter_kind.c_str(), r.n_scenes, r.mean_db, r.std_db,
                r.identity_mean_db, r.improvement_db);
    return kExitOk;
  }
};

// --- sweep -------------------------------------------------------------------

struct SweepCmd {
  CommonOptions common;
  std::string filter = "identity", weights, out;
  std::size_t grid = 360, signals = 16;
  std::uint64_t seed = 0;

  int Run() const {
    const PipelineConfig cfg = common.Config();
    FilterSpec spec = FilterSpec::Parse(filter);
    if (!weights.empty()) spec.weights = weights;
    spec.Resolve();
    SweepConfig sc = DefaultSweepConfig(cfg, grid, signals, seed);
    sc.threads = common.Threads();
    const PolarResponse resp = spatial_sweep(MakeSweepPipeline(cfg, spec), sc);
    WriteText(out, resp.ToCsv());
    json bands = json::array();
    for (const auto& b : resp.bands) bands.push_back({b.lo, b.hi});
    const json meta = {{"preset", cfg.name},
                       {"scale", std::string(PresetScaleName(cfg.scale))},
                       {"filter_kind", spec.Name()},
                       {"grid", grid},
                       {"signals", signals},
                       {"seed", seed},
                       {"spacing", cfg.scene.fixed_spacing},
                       {"f_alias_hz", cfg.fixed_alias_frequency()},
                       {"bands_hz", bands},
                       {"burst_seconds", sc.duration},
                       {"config", json::parse(cfg.ToJson())}};
    fs::path meta_path = out;
    meta_path.replace_extension(".json");
    WriteText(meta_path, meta.dump(2));
    std::printf("wrote %zu bands x %zu channels x %zu directions to %s\n", resp.bands.size(), resp.num_channels,
                resp.azimuths_deg.size(), out.c_str());
    return kExitOk;
  }
};

// --- inspect weights ------------------------------------------------------------

int InspectWeights(const std::string& path) {
  const DalwContents c = ReadDalw(path);
  const auto& d = c.descriptor;
  std::printf("descriptor: vmics=%zu mode=%s depth=%zu base_channels=%zu in_channels=%zu out_channels=%zu\n",
              d.vmics, std::string(FilterModeName(d.mode)).c_str(), d.depth, d.base_channels, d.in_channels(),
              d.out_channels());
  std::size_t total = 0;
  std::printf("%-24s %-18s %10s\n", "tensor", "shape", "elements");
  for (const auto& t : c.tensors) {
    std::string shape = "[";
    for (std::size_t i = 0; i < t.shape.size(); ++i) shape += (i ? ", " : "") + std::to_string(t.shape[i]);
    shape += "]";
    std::printf("%-24s %-18s %10zu\n", t.name.c_str(), shape.c_str(), t.numel());
    total += t.numel();
  }
  std::vector<Tensor> weights;
  bool fixture = false;
  for (const auto& t : c.tensors) {
    if (t.name == kFixtureInputName || t.name == kFixtureOutputName) {
      fixture = true;
    } else {
      weights.push_back(t);
    }
  }
  std::printf("%zu tensors, %zu elements%s\n", c.tensors.size(), total, fixture ? " (parity fixture)" : "");
  // Layout mismatches are reported after the table so the file can still be read.
  WeightBundle(d, std::move(weights)).Validate();
  std::printf("layout: ok\n");
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatial de-aliasing lab"};
  app.require_subcommand(1);

  auto* dataset = app.add_subcommand("dataset", "dataset tools");
  dataset->require_subcommand(1);
  DatasetGen gen;
  auto* gen_cmd = dataset->add_subcommand("gen", "render a synthetic dataset");
  gen.common.Add(gen_cmd);
  gen_cmd->add_option("--scenes", gen.scenes, "number of scenes");
  gen_cmd->add_option("--seed", gen.seed, "master seed");
  gen_cmd->add_option("--out", gen.out, "output directory")->required();

  BeamformCmd bfc;
  auto* bf_cmd = app.add_subcommand("beamform", "form virtual microphones from a 4-channel mixture");
  bfc.common.Add(bf_cmd);
  bf_cmd->add_option("--in", bfc.in, "mixture WAV (+x, -x, +y, -y)")->required()->check(CLI::ExistingFile);
  bf_cmd->add_option("--out", bfc.out, "virtual microphones (.wav or .spec)")->required();
  bf_cmd->add_option("--spacing", bfc.spacing, "x-pair spacing in meters (default: preset)");
  bf_cmd->add_option("--spacing-y", bfc.spacing_y, "y-pair spacing in meters (default: --spacing)");

  DealiasCmd dc;
  auto* dc_cmd = app.add_subcommand("dealias", "filter and decode virtual microphones");
  dc.common.Add(dc_cmd);
  dc_cmd->add_option("--in", dc.in, "virtual microphones (.wav or .spec)")->required()->check(CLI::ExistingFile);
  dc_cmd->add_option("--filter", dc.filter, "identity, oracle-diag, oracle-full, lti or nn");
  dc_cmd->add_option("--weights", dc.weights, "DALW weight bundle for nn")->check(CLI::ExistingFile);
  dc_cmd->add_option("--scene", dc.scene, "scene record (.json) or manifest (.jsonl)")->check(CLI::ExistingFile);
  dc_cmd->add_option("--scene-id", dc.scene_id, "scene to pick from a manifest");
  dc_cmd->add_option("--spacing", dc.spacing, "x-pair spacing in meters (default: scene, then preset)");
  dc_cmd->add_option("--spacing-y", dc.spacing_y, "y-pair spacing in meters");
  dc_cmd->add_option("--out", dc.out, "decoded WAV")->required();
  dc_cmd->add_option("--report", dc.report, "JSON report");

  EvalCmd ec;
  auto* ev_cmd = app.add_subcommand("eval", "C-Si-SNR report over a dataset");
  ec.common.Add(ev_cmd);
  ev_cmd->add_option("--dataset", ec.dataset, "dataset directory (default: render --scenes on the fly)")
      ->check(CLI::ExistingDirectory);
  ev_cmd->add_option("--scenes", ec.scenes, "scenes to render when no dataset is given");
  ev_cmd->add_option("--seed", ec.seed, "seed for rendered scenes");
  ev_cmd->add_option("--filter", ec.filter, "identity, oracle-diag, oracle-full, lti or nn");
  ev_cmd->add_option("--weights", ec.weights, "DALW weight bundle for nn")->check(CLI::ExistingFile);
  ev_cmd->add_option("--report", ec.report, "JSON report");

  SweepCmd sc;
  auto* sw_cmd = app.add_subcommand("sweep", "band-wise polar response over a direction grid");
  sc.common.Add(sw_cmd);
  sw_cmd->add_option("--filter", sc.filter, "identity, oracle-diag, oracle-full, lti or nn");
  sw_cmd->add_option("--weights", sc.weights, "DALW weight bundle for nn")->check(CLI::ExistingFile);
  sw_cmd->add_option("--grid", sc.grid, "number of azimuths")->check(CLI::PositiveNumber);
  sw_cmd->add_option("--signals", sc.signals, "noise bursts per azimuth")->check(CLI::PositiveNumber);
  sw_cmd->add_option("--seed", sc.seed, "seed");
  sw_cmd->add_option("--out", sc.out, "CSV output; metadata goes to the same path with .json")->required();

  auto* inspect = app.add_subcommand("inspect", "inspect files");
  inspect->require_subcommand(1);
  std::string weights_path;
  auto* iw = inspect->add_subcommand("weights", "print the descriptor and tensor table of a DALW file");
  iw->add_option("file", weights_path, "DALW file")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (gen_cmd->parsed()) return gen.Run();
    if (bf_cmd->parsed()) return bfc.Run();
    if (dc_cmd->parsed()) return dc.Run();
    if (ev_cmd->parsed()) return ec.Run();
    if (sw_cmd->parsed()) return sc.Run();
    if (iw->parsed()) return InspectWeights(weights_path);
  } catch (const Error& e) {
    std::fprintf(stderr, "dealias: %s: %s\n", ErrorKindName(e.kind()), e.what());
    return ExitCodeFor(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "dealias: error: %s\n", e.what());
    return kExitData;
  }
  return kExitUsage;
}
