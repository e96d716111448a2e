// Python bindings. Spectrograms cross the boundary as complex128 arrays
// [channel, bin, frame]; time signals as float64 arrays [channel, sample].
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>

#include "dealias/experiments.hpp"
#include "dealias/filters.hpp"
#include "dealias/stft.hpp"
#include "json.hpp"

namespace py = pybind11;
using namespace dealias;

namespace {

using ComplexArray = py::array_t<cdouble, py::array::c_style | py::array::forcecast>;
using RealArray = py::array_t<double, py::array::c_style | py::array::forcecast>;
using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

PyObject* g_exceptions[8] = {};

PyObject* ExceptionFor(ErrorKind kind) { return g_exceptions[static_cast<int>(kind)]; }

ComplexArray ToNumpy(const Spectrogram& s) {
  ComplexArray out({s.num_channels(), s.num_bins(), s.num_frames()});
  std::memcpy(out.mutable_data(), s.data().data(), s.data().size() * sizeof(cdouble));
  return out;
}

Spectrogram FromNumpy(const ComplexArray& a, double sample_rate, std::size_t fft_size, std::size_t hop) {
  if (a.ndim() != 3) throw InvalidArgument("spectrogram array must be [channel, bin, frame]");
  const auto c = static_cast<std::size_t>(a.shape(0)), k = static_cast<std::size_t>(a.shape(1)),
             n = static_cast<std::size_t>(a.shape(2));
  if (k != fft_size / 2 + 1) throw InvalidArgument("bin count does not match fft_size / 2 + 1");
  Spectrogram s(c, k, n, sample_rate, fft_size, hop);
  std::memcpy(s.data().data(), a.data(), s.data().size() * sizeof(cdouble));
  return s;
}

RealArray ToNumpy(const MultichannelSignal& sig) {
  RealArray out({sig.num_channels(), sig.length()});
  for (std::size_t c = 0; c < sig.num_channels(); ++c) {
    std::memcpy(out.mutable_data(c, 0), sig.channel(c).data(), sig.length() * sizeof(double));
  }
  return out;
}

MultichannelSignal SignalFromNumpy(const RealArray& a, double sample_rate) {
  if (a.ndim() != 2) throw InvalidArgument("signal array must be [channel, sample]");
  std::vector<std::vector<double>> ch(static_cast<std::size_t>(a.shape(0)));
  for (std::size_t c = 0; c < ch.size(); ++c) ch[c].assign(a.data(c, 0), a.data(c, 0) + a.shape(1));
  return MultichannelSignal::FromChannels(std::move(ch), sample_rate);
}

std::vector<Direction> Azimuths(const std::vector<double>& deg) {
  std::vector<Direction> out;
  for (double a : deg) out.push_back(Direction::FromAzimuth(a));
  return out;
}

py::object JsonToPython(const std::string& text) { return py::module_::import("json").attr("loads")(text); }

PipelineConfig ConfigFrom(const std::string& name, const std::string& scale, const py::object& overrides) {
  PipelineConfig cfg = preset(name, ParsePresetScale(scale));
  if (!overrides.is_none()) {
    cfg.ApplyJson(py::module_::import("json").attr("dumps")(overrides).cast<std::string>());
  }
  return cfg;
}

WeightBundle BundleFrom(const py::dict& descriptor, const py::dict& tensors) {
  ArchitectureDescriptor d;
  d.vmics = descriptor["vmics"].cast<std::size_t>();
  d.mode = ParseFilterMode(descriptor["mode"].cast<std::string>());
  d.depth = descriptor["depth"].cast<std::size_t>();
  d.base_channels = descriptor["base_channels"].cast<std::size_t>();
  std::vector<Tensor> list;
  for (auto item : tensors) {
    Tensor t;
    t.name = item.first.cast<std::string>();
    const auto arr = item.second.cast<FloatArray>();
    for (py::ssize_t i = 0; i < arr.ndim(); ++i) t.shape.push_back(static_cast<std::size_t>(arr.shape(i)));
    t.data.assign(arr.data(), arr.data() + arr.size());
    list.push_back(std::move(t));
  }
  return WeightBundle(d, std::move(list));
}

py::tuple BundleToPython(const WeightBundle& b) {
  const auto& d = b.descriptor();
  py::dict desc;
  desc["vmics"] = d.vmics;
  desc["mode"] = std::string(FilterModeName(d.mode));
  desc["depth"] = d.depth;
  desc["base_channels"] = d.base_channels;
  py::dict tensors;
  for (const auto& t : b.tensors()) {
    FloatArray arr(std::vector<py::ssize_t>(t.shape.begin(), t.shape.end()));
    std::memcpy(arr.mutable_data(), t.data.data(), t.data.size() * sizeof(float));
    tensors[py::str(t.name)] = arr;
  }
  return py::make_tuple(desc, tensors);
}

}  // namespace

PYBIND11_MODULE(_dealias, m) {
  m.doc() = "Spatial de-aliasing lab core";

  PyObject* base = PyErr_NewException("dealias.DealiasError", PyExc_RuntimeError, nullptr);
  m.add_object("DealiasError", py::handle(base));
  const std::pair<ErrorKind, const char*> kinds[] = {
      {ErrorKind::kInvalidArgument, "InvalidArgument"},
      {ErrorKind::kUnsupportedConfiguration, "UnsupportedConfiguration"},
      {ErrorKind::kConfiguration, "ConfigurationError"},
      {ErrorKind::kNotAWeightFile, "NotAWeightFile"},
      {ErrorKind::kCorruptWeights, "CorruptWeights"},
      {ErrorKind::kUndefinedMetric, "UndefinedMetric"},
      {ErrorKind::kIo, "IoError"},
      {ErrorKind::kNumeric, "NumericError"},
  };
  for (const auto& [kind, name] : kinds) {
    PyObject* exc = PyErr_NewException(("dealias." + std::string(name)).c_str(), base, nullptr);
    g_exceptions[static_cast<int>(kind)] = exc;
    m.add_object(name, py::handle(exc));
  }
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      PyErr_SetString(ExceptionFor(e.kind()), e.what());
    }
  });

  m.def("aliasing_frequency", [](double d, double c) { return aliasing_frequency(d, c); }, py::arg("spacing"),
        py::arg("speed_of_sound") = kDefaultSpeedOfSound);

  m.def(
      "stft",
      [](const RealArray& x, double sample_rate, std::size_t fft_size, std::size_t hop) {
        return ToNumpy(stft_forward(SignalFromNumpy(x, sample_rate), fft_size, hop));
      },
      py::arg("signal"), py::arg("sample_rate"), py::arg("fft_size"), py::arg("hop"),
      "Hann STFT of a [channel, sample] array.");
  m.def(
      "istft",
      [](const ComplexArray& s, double sample_rate, std::size_t fft_size, std::size_t hop, std::size_t length) {
        auto spec = FromNumpy(s, sample_rate, fft_size, hop);
        spec.set_signal_length(length);
        return ToNumpy(stft_inverse(spec));
      },
      py::arg("spec"), py::arg("sample_rate"), py::arg("fft_size"), py::arg("hop"), py::arg("length"));

  m.def(
      "target_encoder",
      [](const std::vector<double>& decode_az, const std::vector<double>& source_az, double alpha) {
        const auto e = target_encoder(Azimuths(decode_az), Azimuths(source_az), alpha).entries();
        RealArray out({e.rows(), e.cols()});
        for (Eigen::Index r = 0; r < e.rows(); ++r) {
          for (Eigen::Index c = 0; c < e.cols(); ++c) *out.mutable_data(r, c) = e(r, c);
        }
        return out;
      },
      py::arg("decode_azimuths"), py::arg("source_azimuths"), py::arg("alpha"));

  m.def(
      "c_si_snr",
      [](const ComplexArray& est, const ComplexArray& tgt) {
        const auto e = FromNumpy(est, 1.0, 2 * (est.shape(1) - 1), 1);
        const auto t = FromNumpy(tgt, 1.0, 2 * (tgt.shape(1) - 1), 1);
        return c_si_snr(e, t).per_channel_db;
      },
      py::arg("estimate"), py::arg("target"), "Per-channel complex scale-invariant SNR in dB.");
  m.def(
      "phasen_loss",
      [](const ComplexArray& est, const ComplexArray& tgt, double p) {
        const auto e = FromNumpy(est, 1.0, 2 * (est.shape(1) - 1), 1);
        const auto t = FromNumpy(tgt, 1.0, 2 * (tgt.shape(1) - 1), 1);
        return phasen_loss(e, t, p);
      },
      py::arg("estimate"), py::arg("target"), py::arg("compression") = 0.3);

  m.def(
      "preset_config",
      [](const std::string& name, const std::string& scale, const py::object& overrides) {
        return JsonToPython(ConfigFrom(name, scale, overrides).ToJson());
      },
      py::arg("preset"), py::arg("scale") = "desk", py::arg("overrides") = py::none());

  m.def(
      "render_scenes",
      [](const std::string& name, const std::string& scale, std::size_t n, std::uint64_t seed,
         const py::object& overrides, std::size_t threads) {
        const auto cfg = ConfigFrom(name, scale, overrides);
        std::vector<SceneInput> scenes;
        {
          py::gil_scoped_release release;
          scenes = GenerateScenes(cfg, n, seed, threads);
        }
        py::list out;
        for (const auto& s : scenes) {
          py::dict d;
          d["id"] = s.id;
          d["mixture"] = ToNumpy(s.mixture);
          std::vector<std::vector<double>> dry;
          std::vector<double> az;
          for (std::size_t i = 0; i < s.sources.size(); ++i) {
            dry.push_back(s.sources[i].samples);
            az.push_back(s.scene.sources[i].direction.azimuth());
          }
          d["sources"] = ToNumpy(MultichannelSignal::FromChannels(std::move(dry), s.scene.sample_rate));
          d["azimuths_deg"] = az;
          d["spacing"] = py::make_tuple(s.scene.spacing_x, s.scene.spacing_y);
          d["sample_rate"] = s.scene.sample_rate;
          out.append(d);
        }
        return out;
      },
      py::arg("preset"), py::arg("scale") = "desk", py::arg("n_scenes") = 1, py::arg("seed") = 0,
      py::arg("overrides") = py::none(), py::arg("threads") = 1,
      "Synthetic scenes: 4-channel mixture, dry sources and geometry.");

  m.def(
      "beamform",
      [](const std::string& name, const std::string& scale, const RealArray& mixture, double spacing_x,
         double spacing_y) {
        const auto cfg = ConfigFrom(name, scale, py::none());
        const auto mics = stft_forward(SignalFromNumpy(mixture, cfg.scene.sample_rate), cfg.fft_size, cfg.hop);
        return ToNumpy(Beamform(cfg.beamformer_for(spacing_x, spacing_y), mics));
      },
      py::arg("preset"), py::arg("scale"), py::arg("mixture"), py::arg("spacing_x"), py::arg("spacing_y"),
      "Virtual-microphone spectrogram of a 4-channel mixture.");

  m.def(
      "targets",
      [](const std::string& name, const std::string& scale, const RealArray& sources,
         const std::vector<double>& azimuths) {
        const auto cfg = ConfigFrom(name, scale, py::none());
        const auto dry = stft_forward(SignalFromNumpy(sources, cfg.scene.sample_rate), cfg.fft_size, cfg.hop);
        return ToNumpy(make_targets(target_encoder(cfg.decode_directions, Azimuths(azimuths), cfg.alpha), dry));
      },
      py::arg("preset"), py::arg("scale"), py::arg("sources"), py::arg("azimuths_deg"));

  m.def(
      "run_pipeline",
      [](const std::string& name, const std::string& scale, const std::string& filter, std::size_t n,
         std::uint64_t seed, const py::object& overrides, std::size_t threads) {
        const auto cfg = ConfigFrom(name, scale, overrides);
        std::string report;
        {
          py::gil_scoped_release release;
          const auto scenes = GenerateScenes(cfg, n, seed, threads);
          report = run_pipeline(cfg, FilterSpec::Parse(filter), scenes, threads).ToJson();
        }
        return JsonToPython(report);
      },
      py::arg("preset"), py::arg("scale") = "desk", py::arg("filter") = "identity", py::arg("n_scenes") = 1,
      py::arg("seed") = 0, py::arg("overrides") = py::none(), py::arg("threads") = 1,
      "Renders scenes and returns the C-Si-SNR report as a dict.");

  m.def(
      "features_from_vmics",
      [](const ComplexArray& vmics, std::size_t depth) {
        const auto f = features_from_vmics(FromNumpy(vmics, 1.0, 2 * (vmics.shape(1) - 1), 1), depth);
        FloatArray out({f.channels, f.bins, f.frames});
        std::memcpy(out.mutable_data(), f.data.data(), f.data.size() * sizeof(float));
        return py::make_tuple(out, f.scale);
      },
      py::arg("vmics"), py::arg("depth"), "Network input [2V, F', T'] and its scale g.");

  m.def(
      "unet_forward",
      [](const py::dict& descriptor, const py::dict& tensors, const FloatArray& x) {
        const WeightBundle bundle = BundleFrom(descriptor, tensors);
        bundle.Validate();
        if (x.ndim() != 3) throw InvalidArgument("features must be [channel, bin, frame]");
        FeatureTensor f;
        f.channels = static_cast<std::size_t>(x.shape(0));
        f.bins = f.original_bins = static_cast<std::size_t>(x.shape(1));
        f.frames = f.original_frames = static_cast<std::size_t>(x.shape(2));
        f.data.assign(x.data(), x.data() + x.size());
        const MaskTensor y = unet_forward(bundle, f);
        FloatArray out({y.channels, y.bins, y.frames});
        std::memcpy(out.mutable_data(), y.data.data(), y.data.size() * sizeof(float));
        return out;
      },
      py::arg("descriptor"), py::arg("tensors"), py::arg("features"));

  m.def(
      "load_weights", [](const std::filesystem::path& path) { return BundleToPython(load_weights(path)); },
      py::arg("path"), "Reads a DALW bundle as (descriptor dict, {name: float32 array}).");
  m.def(
      "save_weights",
      [](const std::filesystem::path& path, const py::dict& descriptor, const py::dict& tensors) {
        save_weights(BundleFrom(descriptor, tensors), path);
      },
      py::arg("path"), py::arg("descriptor"), py::arg("tensors"));
  m.def(
      "read_dalw",
      [](const std::filesystem::path& path) {
        const DalwContents c = ReadDalw(path);
        return BundleToPython(WeightBundle(c.descriptor, c.tensors));
      },
      py::arg("path"), "Reads any DALW container, including parity fixtures, without layout checks.");
}
