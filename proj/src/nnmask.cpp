#include "dealias/nnmask.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <unordered_map>

#include "dealias/rng.hpp"
#include "json.hpp"

namespace dealias {

static_assert(std::endian::native == std::endian::little,
              "DALW I/O assumes a little-endian host");

namespace {

using json = nlohmann::json;

std::string ShapeString(const std::vector<std::size_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

void AddConv(std::vector<TensorSpec>& out, const std::string& prefix, std::size_t cout,
             std::size_t cin, std::size_t k) {
  out.push_back({prefix + ".weight", {cout, cin, k, k}});
  out.push_back({prefix + ".bias", {cout}});
}

}  // namespace

std::size_t Tensor::numel() const {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::vector<TensorSpec> ExpectedTensorLayout(const ArchitectureDescriptor& desc) {
  if (desc.vmics == 0) throw InvalidArgument("architecture: vmics must be >= 1");
  if (desc.depth > 0 && desc.base_channels == 0) {
    throw InvalidArgument("architecture: base_channels must be >= 1");
  }
  std::vector<TensorSpec> out;
  const std::size_t l_max = desc.depth, b = desc.base_channels;
  if (l_max == 0) {
    AddConv(out, "head", desc.out_channels(), desc.in_channels(), 1);
    return out;
  }
  std::size_t cin = desc.in_channels();
  for (std::size_t l = 0; l < l_max; ++l) {
    const std::size_t w = b << l;
    AddConv(out, "enc" + std::to_string(l) + ".conv1", w, cin, 3);
    AddConv(out, "enc" + std::to_string(l) + ".conv2", w, w, 3);
    cin = w;
  }
  const std::size_t wb = b << l_max;
  AddConv(out, "bottleneck.conv1", wb, cin, 3);
  AddConv(out, "bottleneck.conv2", wb, wb, 3);
  for (std::size_t i = l_max; i-- > 0;) {
    const std::size_t w = b << i;
    const std::string p = "dec" + std::to_string(i);
    AddConv(out, p + ".up", w, 2 * w, 3);
    AddConv(out, p + ".conv1", w, 2 * w, 3);
    AddConv(out, p + ".conv2", w, w, 3);
  }
  AddConv(out, "head", desc.out_channels(), b, 1);
  return out;
}

WeightBundle::WeightBundle(ArchitectureDescriptor descriptor, std::vector<Tensor> tensors)
    : descriptor_(descriptor), tensors_(std::move(tensors)) {}

const Tensor& WeightBundle::Get(const std::string& name) const {
  for (const auto& t : tensors_) {
    if (t.name == name) return t;
  }
  throw CorruptWeights("weight bundle: missing tensor '" + name + "'");
}

void WeightBundle::Validate() const {
  const auto layout = ExpectedTensorLayout(descriptor_);
  std::unordered_map<std::string, const Tensor*> by_name;
  for (const auto& t : tensors_) {
    if (!by_name.emplace(t.name, &t).second) {
      throw CorruptWeights("weight bundle: duplicate tensor '" + t.name + "'");
    }
  }
  for (const auto& spec : layout) {
    auto it = by_name.find(spec.name);
    if (it == by_name.end()) throw CorruptWeights("weight bundle: missing tensor '" + spec.name + "'");
    const Tensor& t = *it->second;
    if (t.shape != spec.shape) {
      throw CorruptWeights("weight bundle: tensor '" + spec.name + "' has shape " +
                           ShapeString(t.shape) + ", expected " + ShapeString(spec.shape));
    }
    if (t.data.size() != t.numel()) {
      throw CorruptWeights("weight bundle: tensor '" + spec.name + "' data size mismatch");
    }
    for (float x : t.data) {
      if (!std::isfinite(x)) {
        throw CorruptWeights("weight bundle: tensor '" + spec.name + "' has non-finite data");
      }
    }
    by_name.erase(it);
  }
  if (!by_name.empty()) {
    throw CorruptWeights("weight bundle: unexpected tensor '" + by_name.begin()->first + "'");
  }
}

WeightBundle WeightBundle::Zeros(const ArchitectureDescriptor& descriptor) {
  std::vector<Tensor> tensors;
  for (auto& spec : ExpectedTensorLayout(descriptor)) {
    Tensor t{spec.name, spec.shape, {}};
    t.data.assign(t.numel(), 0.0f);
    tensors.push_back(std::move(t));
  }
  return WeightBundle(descriptor, std::move(tensors));
}

WeightBundle WeightBundle::Random(const ArchitectureDescriptor& descriptor, std::uint64_t seed) {
  WeightBundle bundle = Zeros(descriptor);
  Xoshiro256pp rng(seed);
  for (auto& t : bundle.tensors_) {
    if (t.shape.size() != 4) continue;
    const double fan_in = static_cast<double>(t.shape[1] * t.shape[2] * t.shape[3]);
    const double bound = std::sqrt(6.0 / fan_in);
    for (float& x : t.data) x = static_cast<float>(rng.Uniform(-bound, bound));
  }
  return bundle;
}

WeightBundle WeightBundle::PassThrough(const ArchitectureDescriptor& descriptor) {
  WeightBundle bundle = Zeros(descriptor);
  for (auto& t : bundle.tensors_) {
    if (t.name != "head.bias") continue;
    const std::size_t v = descriptor.vmics;
    for (std::size_t i = 0; i < v; ++i) {
      const std::size_t entry = descriptor.mode == FilterMode::kFull ? i * v + i : i;
      t.data[2 * entry] = 1.0f;
    }
  }
  return bundle;
}

DalwContents ReadDalw(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open weight file " + path.string());
  const std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "DALW", 4) != 0) {
    throw NotAWeightFile(path.string() + ": missing DALW magic");
  }
  if (bytes.size() < 16) throw CorruptWeights(path.string() + ": truncated header");
  std::uint32_t version = 0;
  std::uint64_t header_len = 0;
  std::memcpy(&version, bytes.data() + 4, 4);
  std::memcpy(&header_len, bytes.data() + 8, 8);
  if (version != kDalwVersion) {
    throw CorruptWeights(path.string() + ": unsupported DALW version " + std::to_string(version));
  }
  if (header_len > bytes.size() - 16) throw CorruptWeights(path.string() + ": truncated header");
  const std::size_t data_start = 16 + static_cast<std::size_t>(header_len);
  const std::size_t data_size = bytes.size() - data_start;

  DalwContents out;
  try {
    const json header = json::parse(bytes.begin() + 16, bytes.begin() + static_cast<long>(data_start));
    const json& d = header.at("descriptor");
    out.descriptor.vmics = d.at("vmics").get<std::size_t>();
    out.descriptor.mode = ParseFilterMode(d.at("mode").get<std::string>());
    out.descriptor.depth = d.at("depth").get<std::size_t>();
    out.descriptor.base_channels = d.at("base_channels").get<std::size_t>();
    for (const json& entry : header.at("tensors")) {
      Tensor t;
      t.name = entry.at("name").get<std::string>();
      t.shape = entry.at("shape").get<std::vector<std::size_t>>();
      const auto offset = entry.at("offset").get<std::size_t>();
      const std::size_t nbytes = t.numel() * sizeof(float);
      if (offset > data_size || nbytes > data_size - offset) {
        throw CorruptWeights(path.string() + ": tensor '" + t.name +
                             "' extends past the end of the data section");
      }
      t.data.resize(t.numel());
      std::memcpy(t.data.data(), bytes.data() + data_start + offset, nbytes);
      out.tensors.push_back(std::move(t));
    }
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kCorruptWeights) throw;
    throw CorruptWeights(path.string() + ": bad header: " + e.what());
  } catch (const json::exception& e) {
    throw CorruptWeights(path.string() + ": bad header: " + e.what());
  }
  return out;
}

void WriteDalw(const DalwContents& contents, const std::filesystem::path& path) {
  json tensors = json::array();
  std::size_t offset = 0;
  for (const auto& t : contents.tensors) {
    if (t.data.size() != t.numel()) {
      throw InvalidArgument("save_weights: tensor '" + t.name + "' data size mismatch");
    }
    tensors.push_back({{"name", t.name}, {"shape", t.shape}, {"offset", offset}});
    offset += t.data.size() * sizeof(float);
  }
  const json header = {
      {"descriptor",
       {{"vmics", contents.descriptor.vmics},
        {"mode", std::string(FilterModeName(contents.descriptor.mode))},
        {"depth", contents.descriptor.depth},
        {"base_channels", contents.descriptor.base_channels}}},
      {"tensors", tensors}};
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write weight file " + path.string());
  const std::uint32_t version = kDalwVersion;
  const std::uint64_t header_len = text.size();
  out.write("DALW", 4);
  out.write(reinterpret_cast<const char*>(&version), 4);
  out.write(reinterpret_cast<const char*>(&header_len), 8);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& t : contents.tensors) {
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * sizeof(float)));
  }
  if (!out) throw IoError("failed writing weight file " + path.string());
}

WeightBundle load_weights(const std::filesystem::path& path) {
  DalwContents contents = ReadDalw(path);
  WeightBundle bundle(contents.descriptor, std::move(contents.tensors));
  bundle.Validate();
  return bundle;
}

void save_weights(const WeightBundle& bundle, const std::filesystem::path& path) {
  WriteDalw({bundle.descriptor(), bundle.tensors()}, path);
}

ParityFixture LoadParityFixture(const std::filesystem::path& path) {
  DalwContents contents = ReadDalw(path);
  ParityFixture fixture;
  std::vector<Tensor> weights;
  bool have_in = false, have_out = false;
  for (auto& t : contents.tensors) {
    if (t.name == kFixtureInputName) {
      fixture.input = std::move(t);
      have_in = true;
    } else if (t.name == kFixtureOutputName) {
      fixture.output = std::move(t);
      have_out = true;
    } else {
      weights.push_back(std::move(t));
    }
  }
  if (!have_in || !have_out) {
    throw CorruptWeights(path.string() + ": parity fixture lacks '" +
                         (have_in ? kFixtureOutputName : kFixtureInputName) + "'");
  }
  if (fixture.input.shape.size() != 3 || fixture.output.shape.size() != 3) {
    throw CorruptWeights(path.string() + ": fixture tensors must be [C, F, T]");
  }
  fixture.bundle = WeightBundle(contents.descriptor, std::move(weights));
  fixture.bundle.Validate();
  return fixture;
}

void SaveParityFixture(const WeightBundle& bundle, const FeatureTensor& input,
                       const MaskTensor& output, const std::filesystem::path& path) {
  DalwContents contents{bundle.descriptor(), bundle.tensors()};
  contents.tensors.push_back(
      {kFixtureInputName, {input.channels, input.bins, input.frames}, input.data});
  contents.tensors.push_back(
      {kFixtureOutputName, {output.channels, output.bins, output.frames}, output.data});
  WriteDalw(contents, path);
}

FeatureTensor features_from_vmics(const Spectrogram& vmics, std::size_t depth) {
  const std::size_t unit = std::size_t{1} << depth;
  const std::size_t f = vmics.num_bins(), t = vmics.num_frames();
  if (f < unit) {
    throw InvalidArgument("features_from_vmics: " + std::to_string(f) + " bins < 2^L = " +
                          std::to_string(unit));
  }
  if (t == 0) throw InvalidArgument("features_from_vmics: no frames");
  FeatureTensor x;
  x.channels = 2 * vmics.num_channels();
  x.bins = (f / unit) * unit;
  x.frames = (t + unit - 1) / unit * unit;
  x.original_bins = f;
  x.original_frames = t;

  double energy = 0.0;
  for (const auto& z : vmics.data()) energy += std::norm(z);
  const double count = static_cast<double>(std::max<std::size_t>(1, vmics.data().size()));
  x.scale = 1.0 / std::max(std::sqrt(energy / count), 1e-8);

  x.data.assign(x.channels * x.bins * x.frames, 0.0f);
  for (std::size_t i = 0; i < vmics.num_channels(); ++i) {
    for (std::size_t k = 0; k < x.bins; ++k) {
      float* re = x.data.data() + ((2 * i) * x.bins + k) * x.frames;
      float* im = x.data.data() + ((2 * i + 1) * x.bins + k) * x.frames;
      for (std::size_t n = 0; n < t; ++n) {
        const cdouble z = vmics.at(i, k, n) * x.scale;
        re[n] = static_cast<float>(z.real());
        im[n] = static_cast<float>(z.imag());
      }
    }
  }
  return x;
}

namespace {

struct Activation {
  std::size_t channels = 0, height = 0, width = 0;
  std::vector<float> data;

  float* plane(std::size_t c) { return data.data() + c * height * width; }
  const float* plane(std::size_t c) const { return data.data() + c * height * width; }
};

Activation Conv(const Activation& in, const WeightBundle& w, const std::string& name, bool relu) {
  const Tensor& weight = w.Get(name + ".weight");
  const Tensor& bias = w.Get(name + ".bias");
  if (weight.shape.size() != 4 || weight.shape[1] != in.channels ||
      weight.shape[2] != weight.shape[3] || weight.shape[2] % 2 == 0 ||
      bias.shape != std::vector<std::size_t>{weight.shape[0]}) {
    throw CorruptWeights("unet_forward: tensor '" + name + ".weight' shape " +
                         ShapeString(weight.shape) + " does not fit " +
                         std::to_string(in.channels) + " input channels");
  }
  const std::size_t cout = weight.shape[0], k = weight.shape[2];
  const auto r = static_cast<std::ptrdiff_t>(k / 2);
  const auto h = static_cast<std::ptrdiff_t>(in.height), wd = static_cast<std::ptrdiff_t>(in.width);
  Activation out{cout, in.height, in.width, {}};
  out.data.resize(cout * in.height * in.width);
  for (std::size_t co = 0; co < cout; ++co) {
    float* dst_plane = out.plane(co);
    std::fill(dst_plane, dst_plane + in.height * in.width, bias.data[co]);
    for (std::size_t ci = 0; ci < in.channels; ++ci) {
      const float* src_plane = in.plane(ci);
      const float* wk = weight.data.data() + (co * in.channels + ci) * k * k;
      for (std::ptrdiff_t ky = 0; ky < static_cast<std::ptrdiff_t>(k); ++ky) {
        const std::ptrdiff_t dy = ky - r;
        const std::ptrdiff_t y0 = std::max<std::ptrdiff_t>(0, -dy);
        const std::ptrdiff_t y1 = std::min(h, h - dy);
        for (std::ptrdiff_t kx = 0; kx < static_cast<std::ptrdiff_t>(k); ++kx) {
          const std::ptrdiff_t dx = kx - r;
          const float wv = wk[ky * static_cast<std::ptrdiff_t>(k) + kx];
          if (wv == 0.0f) continue;
          const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -dx);
          const std::ptrdiff_t x1 = std::min(wd, wd - dx);
          for (std::ptrdiff_t y = y0; y < y1; ++y) {
            float* dst = dst_plane + y * wd;
            const float* src = src_plane + (y + dy) * wd + dx;
            for (std::ptrdiff_t x = x0; x < x1; ++x) dst[x] += wv * src[x];
          }
        }
      }
    }
    if (relu) {
      for (std::size_t i = 0; i < in.height * in.width; ++i) dst_plane[i] = std::max(dst_plane[i], 0.0f);
    }
  }
  return out;
}

Activation MaxPool2(const Activation& in) {
  Activation out{in.channels, in.height / 2, in.width / 2, {}};
  out.data.resize(out.channels * out.height * out.width);
  for (std::size_t c = 0; c < in.channels; ++c) {
    const float* src = in.plane(c);
    float* dst = out.plane(c);
    for (std::size_t y = 0; y < out.height; ++y) {
      for (std::size_t x = 0; x < out.width; ++x) {
        const float* p = src + 2 * y * in.width + 2 * x;
        dst[y * out.width + x] = std::max(std::max(p[0], p[1]), std::max(p[in.width], p[in.width + 1]));
      }
    }
  }
  return out;
}

Activation Upsample2(const Activation& in) {
  Activation out{in.channels, in.height * 2, in.width * 2, {}};
  out.data.resize(out.channels * out.height * out.width);
  for (std::size_t c = 0; c < in.channels; ++c) {
    const float* src = in.plane(c);
    float* dst = out.plane(c);
    for (std::size_t y = 0; y < out.height; ++y) {
      for (std::size_t x = 0; x < out.width; ++x) dst[y * out.width + x] = src[(y / 2) * in.width + x / 2];
    }
  }
  return out;
}

Activation Concat(const Activation& a, const Activation& b) {
  Activation out{a.channels + b.channels, a.height, a.width, a.data};
  out.data.insert(out.data.end(), b.data.begin(), b.data.end());
  return out;
}

}  // namespace

MaskTensor unet_forward(const WeightBundle& weights, const FeatureTensor& x) {
  const auto& desc = weights.descriptor();
  if (x.channels != desc.in_channels()) {
    throw InvalidArgument("unet_forward: input has " + std::to_string(x.channels) +
                          " channels, descriptor expects " + std::to_string(desc.in_channels()));
  }
  const std::size_t unit = std::size_t{1} << desc.depth;
  if (x.bins == 0 || x.frames == 0 || x.bins % unit != 0 || x.frames % unit != 0) {
    throw InvalidArgument("unet_forward: spatial dims must be positive multiples of 2^L");
  }
  if (x.data.size() != x.channels * x.bins * x.frames) {
    throw InvalidArgument("unet_forward: input data size mismatch");
  }
  Activation a{x.channels, x.bins, x.frames, x.data};
  std::vector<Activation> skips;
  for (std::size_t l = 0; l < desc.depth; ++l) {
    const std::string p = "enc" + std::to_string(l);
    a = Conv(Conv(a, weights, p + ".conv1", true), weights, p + ".conv2", true);
    skips.push_back(a);
    a = MaxPool2(a);
  }
  if (desc.depth > 0) {
    a = Conv(Conv(a, weights, "bottleneck.conv1", true), weights, "bottleneck.conv2", true);
  }
  for (std::size_t l = desc.depth; l-- > 0;) {
    const std::string p = "dec" + std::to_string(l);
    a = Conv(Upsample2(a), weights, p + ".up", true);
    a = Concat(skips[l], a);
    a = Conv(Conv(a, weights, p + ".conv1", true), weights, p + ".conv2", true);
  }
  a = Conv(a, weights, "head", false);
  if (a.channels != desc.out_channels()) {
    throw CorruptWeights("unet_forward: tensor 'head.weight' yields " + std::to_string(a.channels) +
                         " channels, descriptor expects " + std::to_string(desc.out_channels()));
  }
  return MaskTensor{a.channels, a.height, a.width, std::move(a.data)};
}

FilterField masks_to_filters(const MaskTensor& masks, FilterMode mode, std::size_t vmics,
                             std::size_t original_bins, std::size_t original_frames) {
  const std::size_t entries = mode == FilterMode::kFull ? vmics * vmics : vmics;
  if (masks.channels != 2 * entries) {
    throw InvalidArgument("masks_to_filters: " + std::to_string(masks.channels) +
                          " mask channels, mode " + std::string(FilterModeName(mode)) +
                          " with V = " + std::to_string(vmics) + " needs " +
                          std::to_string(2 * entries));
  }
  if (masks.bins > original_bins || masks.frames < original_frames) {
    throw InvalidArgument("masks_to_filters: mask grid does not cover the original frames");
  }
  FilterField field = FilterField::Identity(mode, original_frames, original_bins, vmics);
  for (std::size_t n = 0; n < original_frames; ++n) {
    for (std::size_t k = 0; k < masks.bins; ++k) {
      auto tile = field.tile(n, k);
      for (std::size_t e = 0; e < entries; ++e) {
        tile[e] = cdouble(masks.at(2 * e, k, n), masks.at(2 * e + 1, k, n));
      }
    }
  }
  return field;
}

MaskTensor filters_to_masks(const FilterField& field, std::size_t depth) {
  const std::size_t unit = std::size_t{1} << depth;
  if (field.num_bins() < unit || field.num_frames() == 0) {
    throw InvalidArgument("filters_to_masks: field smaller than one 2^L block");
  }
  MaskTensor m;
  m.channels = 2 * field.tile_size();
  m.bins = field.num_bins() / unit * unit;
  m.frames = (field.num_frames() + unit - 1) / unit * unit;
  m.data.assign(m.channels * m.bins * m.frames, 0.0f);
  for (std::size_t n = 0; n < field.num_frames(); ++n) {
    for (std::size_t k = 0; k < m.bins; ++k) {
      const auto tile = field.tile(n, k);
      for (std::size_t e = 0; e < tile.size(); ++e) {
        m.data[((2 * e) * m.bins + k) * m.frames + n] = static_cast<float>(tile[e].real());
        m.data[((2 * e + 1) * m.bins + k) * m.frames + n] = static_cast<float>(tile[e].imag());
      }
    }
  }
  return m;
}

FilterField PredictFilters(const WeightBundle& weights, const Spectrogram& vmics) {
  const auto& desc = weights.descriptor();
  if (vmics.num_channels() != desc.vmics) {
    throw InvalidArgument("PredictFilters: bundle expects " + std::to_string(desc.vmics) +
                          " virtual mics, got " + std::to_string(vmics.num_channels()));
  }
  const FeatureTensor x = features_from_vmics(vmics, desc.depth);
  const MaskTensor m = unet_forward(weights, x);
  return masks_to_filters(m, desc.mode, desc.vmics, x.original_bins, x.original_frames);
}

}  // namespace dealias
