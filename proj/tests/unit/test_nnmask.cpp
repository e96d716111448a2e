#include <cmath>
#include <fstream>

#include "dealias/nnmask.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace dealias;

namespace {

const std::filesystem::path kFixtures = DEALIAS_FIXTURE_DIR;

ArchitectureDescriptor Desc(std::size_t v, FilterMode mode, std::size_t depth, std::size_t base) {
  ArchitectureDescriptor d;
  d.vmics = v;
  d.mode = mode;
  d.depth = depth;
  d.base_channels = base;
  return d;
}

FeatureTensor RandomFeatures(std::size_t c, std::size_t f, std::size_t t, std::uint64_t seed) {
  FeatureTensor x;
  x.channels = c;
  x.bins = x.original_bins = f;
  x.frames = x.original_frames = t;
  Xoshiro256pp rng(seed);
  x.data.resize(c * f * t);
  for (auto& v : x.data) v = static_cast<float>(rng.Normal());
  return x;
}

std::string ErrorMessage(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("feature tensor shape, scaling and interleaving") {
  const auto v = testutil::RandomSpectrogram(2, 1024, 101, 1);
  const auto x = features_from_vmics(v, 3);
  CHECK(x.channels == 4);
  CHECK(x.bins == 512);
  CHECK(x.frames == 104);
  CHECK(x.original_bins == 513);
  CHECK(x.original_frames == 101);
  // Scaled spectrogram has unit RMS over the kept region up to the crop.
  double energy = 0.0;
  for (const auto& z : v.data()) energy += std::norm(z);
  CHECK(x.scale == doctest::Approx(1.0 / std::sqrt(energy / static_cast<double>(v.data().size()))));
  CHECK(x.at(2, 7, 9) == static_cast<float>(v.at(1, 7, 9).real() * x.scale));
  CHECK(x.at(3, 7, 9) == static_cast<float>(v.at(1, 7, 9).imag() * x.scale));
  for (std::size_t c = 0; c < 4; ++c) CHECK(x.at(c, 100, 103) == 0.0f);

  Spectrogram one(1, 9, 3, 16000.0, 16, 8);
  for (auto& z : one.data()) z = cdouble(1.0, 2.0);
  const auto y = features_from_vmics(one, 1);
  CHECK(y.bins == 8);
  CHECK(y.frames == 4);
  CHECK(y.scale == doctest::Approx(1.0 / std::sqrt(5.0)));
  CHECK(y.at(1, 0, 0) / y.at(0, 0, 0) == doctest::Approx(2.0));

  Spectrogram zeros(2, 33, 4, 16000.0, 64, 32);
  const auto z = features_from_vmics(zeros, 2);
  CHECK(z.scale == doctest::Approx(1e8));
  for (float f : z.data) CHECK(f == 0.0f);
  CHECK_THROWS_AS(features_from_vmics(zeros, 6), InvalidArgument);
}

TEST_CASE("layout follows the documented table") {
  const auto layout = ExpectedTensorLayout(Desc(2, FilterMode::kDiag, 2, 8));
  std::vector<std::string> names;
  for (const auto& s : layout) names.push_back(s.name);
  const std::vector<std::string> expected = {
      "enc0.conv1.weight", "enc0.conv1.bias", "enc0.conv2.weight", "enc0.conv2.bias",
      "enc1.conv1.weight", "enc1.conv1.bias", "enc1.conv2.weight", "enc1.conv2.bias",
      "bottleneck.conv1.weight", "bottleneck.conv1.bias", "bottleneck.conv2.weight", "bottleneck.conv2.bias",
      "dec1.up.weight", "dec1.up.bias", "dec1.conv1.weight", "dec1.conv1.bias",
      "dec1.conv2.weight", "dec1.conv2.bias", "dec0.up.weight", "dec0.up.bias",
      "dec0.conv1.weight", "dec0.conv1.bias", "dec0.conv2.weight", "dec0.conv2.bias",
      "head.weight", "head.bias"};
  CHECK(names == expected);
  CHECK(layout[0].shape == std::vector<std::size_t>{8, 4, 3, 3});
  CHECK(layout[8].shape == std::vector<std::size_t>{32, 16, 3, 3});
  CHECK(layout[12].shape == std::vector<std::size_t>{16, 32, 3, 3});
  CHECK(layout[24].shape == std::vector<std::size_t>{4, 8, 1, 1});
  const auto head_only = ExpectedTensorLayout(Desc(3, FilterMode::kFull, 0, 8));
  REQUIRE(head_only.size() == 2);
  CHECK(head_only[0].shape == std::vector<std::size_t>{18, 6, 1, 1});
}

TEST_CASE("output shape law and zero weights") {
  for (std::size_t depth : {0u, 1u, 3u}) {
    for (auto mode : {FilterMode::kDiag, FilterMode::kFull}) {
      const auto desc = Desc(3, mode, depth, 4);
      const auto x = RandomFeatures(6, 16, 8, depth + 1);
      const auto y = unet_forward(WeightBundle::Zeros(desc), x);
      CHECK(y.channels == desc.out_channels());
      CHECK(y.bins == 16);
      CHECK(y.frames == 8);
      for (float v : y.data) CHECK(v == 0.0f);
      const auto r = unet_forward(WeightBundle::Random(desc, 9), x);
      CHECK(r.channels == desc.out_channels());
    }
  }
  const auto x = RandomFeatures(6, 12, 8, 1);
  CHECK_THROWS_AS(unet_forward(WeightBundle::Zeros(Desc(3, FilterMode::kDiag, 3, 4)), x), InvalidArgument);
  CHECK_THROWS_AS(unet_forward(WeightBundle::Zeros(Desc(2, FilterMode::kDiag, 1, 4)), x), InvalidArgument);
}

TEST_CASE("identity head passes the input through") {
  auto bundle = WeightBundle::Zeros(Desc(2, FilterMode::kDiag, 0, 4));
  auto& w = bundle.mutable_tensors()[0];
  for (std::size_t i = 0; i < 4; ++i) w.data[i * 4 + i] = 1.0f;
  const auto x = RandomFeatures(4, 8, 8, 3);
  const auto y = unet_forward(bundle, x);
  CHECK(y.data == x.data);
}

TEST_CASE("forward pass is deterministic") {
  const auto desc = Desc(2, FilterMode::kFull, 2, 4);
  const auto b = WeightBundle::Random(desc, 11);
  const auto x = RandomFeatures(4, 16, 12, 12);
  CHECK(unet_forward(b, x).data == unet_forward(b, x).data);
  CHECK(WeightBundle::Random(desc, 11).tensors()[0].data == b.tensors()[0].data);
  CHECK(WeightBundle::Random(desc, 12).tensors()[0].data != b.tensors()[0].data);
}

TEST_CASE("forward pass matches the PyTorch reference fixtures") {
  for (const char* name : {"unet_diag_v2_l3.dalw", "unet_full_v3_l2.dalw", "unet_diag_v3_l0.dalw"}) {
    CAPTURE(name);
    const auto fixture = LoadParityFixture(kFixtures / name);
    FeatureTensor x;
    x.channels = fixture.input.shape[0];
    x.bins = fixture.input.shape[1];
    x.frames = fixture.input.shape[2];
    x.data = fixture.input.data;
    const auto y = unet_forward(fixture.bundle, x);
    REQUIRE(y.data.size() == fixture.output.data.size());
    CHECK(y.channels == fixture.output.shape[0]);
    double worst = 0.0;
    for (std::size_t i = 0; i < y.data.size(); ++i) {
      worst = std::max(worst, static_cast<double>(std::abs(y.data[i] - fixture.output.data[i])));
    }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("DALW round trip is bit-identical") {
  const auto dir = testutil::ScratchDir("dalw");
  const auto b = WeightBundle::Random(Desc(3, FilterMode::kFull, 2, 4), 5);
  save_weights(b, dir / "a.dalw");
  const auto back = load_weights(dir / "a.dalw");
  CHECK(back.descriptor() == b.descriptor());
  REQUIRE(back.tensors().size() == b.tensors().size());
  for (std::size_t i = 0; i < b.tensors().size(); ++i) {
    CHECK(back.tensors()[i].name == b.tensors()[i].name);
    CHECK(back.tensors()[i].shape == b.tensors()[i].shape);
    CHECK(std::memcmp(back.tensors()[i].data.data(), b.tensors()[i].data.data(),
                      b.tensors()[i].data.size() * sizeof(float)) == 0);
  }
  save_weights(back, dir / "b.dalw");
  CHECK(testutil::ReadFileBytes(dir / "a.dalw") == testutil::ReadFileBytes(dir / "b.dalw"));

  // Fixture container written by C++ loads back as a fixture.
  const auto x = RandomFeatures(6, 8, 4, 2);
  const auto y = unet_forward(b, x);
  SaveParityFixture(b, x, y, dir / "fx.dalw");
  const auto fx = LoadParityFixture(dir / "fx.dalw");
  CHECK(fx.input.data == x.data);
  CHECK(fx.output.data == y.data);
}

TEST_CASE("malformed weight files are classified") {
  const auto dir = testutil::ScratchDir("dalw_bad");
  const auto good = dir / "good.dalw";
  save_weights(WeightBundle::Random(Desc(2, FilterMode::kDiag, 1, 4), 1), good);
  const std::string bytes = testutil::ReadFileBytes(good);
  auto write = [&](const std::string& name, const std::string& content) {
    std::ofstream(dir / name, std::ios::binary) << content;
    return dir / name;
  };

  CHECK_THROWS_AS(load_weights(write("magic.dalw", "XXXX" + bytes.substr(4))), NotAWeightFile);
  CHECK_THROWS_AS(load_weights(write("short.dalw", "DA")), NotAWeightFile);
  CHECK_THROWS_AS(load_weights(dir / "absent.dalw"), IoError);

  const std::string truncated_msg =
      ErrorMessage([&] { load_weights(write("trunc.dalw", bytes.substr(0, bytes.size() - 10))); });
  CHECK(truncated_msg.find("head.bias") != std::string::npos);
  CHECK_THROWS_AS(load_weights(dir / "trunc.dalw"), CorruptWeights);

  auto version = bytes;
  version[4] = 7;
  CHECK_THROWS_AS(load_weights(write("version.dalw", version)), CorruptWeights);

  // Drop a tensor from the table but keep the file well formed.
  auto contents = ReadDalw(good);
  contents.tensors.erase(contents.tensors.begin() + 2);
  WriteDalw(contents, dir / "missing.dalw");
  const std::string missing_msg = ErrorMessage([&] { load_weights(dir / "missing.dalw"); });
  CHECK(missing_msg.find("enc0.conv2.weight") != std::string::npos);
  CHECK_THROWS_AS(load_weights(dir / "missing.dalw"), CorruptWeights);

  auto wrong_shape = ReadDalw(good);
  wrong_shape.tensors[0].shape = {4, 4, 1, 9};
  WriteDalw(wrong_shape, dir / "shape.dalw");
  const std::string shape_msg = ErrorMessage([&] { load_weights(dir / "shape.dalw"); });
  CHECK(shape_msg.find("enc0.conv1.weight") != std::string::npos);

  auto nan = ReadDalw(good);
  nan.tensors[3].data[0] = NAN;
  WriteDalw(nan, dir / "nan.dalw");
  CHECK_THROWS_AS(load_weights(dir / "nan.dalw"), CorruptWeights);

  CHECK_THROWS_AS(LoadParityFixture(good), CorruptWeights);
  CHECK_THROWS_AS(WeightBundle::Zeros(Desc(2, FilterMode::kDiag, 1, 4)).Get("nope"), CorruptWeights);
}

TEST_CASE("masks map to filters and back") {
  MaskTensor m;
  m.channels = 4;
  m.bins = 4;
  m.frames = 4;
  m.data.resize(64);
  for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = static_cast<float>(i);
  const auto field = masks_to_filters(m, FilterMode::kDiag, 2, 5, 3);
  CHECK(field.num_bins() == 5);
  CHECK(field.num_frames() == 3);
  CHECK(field.tile(2, 1)[1] == cdouble(m.at(2, 1, 2), m.at(3, 1, 2)));
  // Cropped top bin keeps the identity.
  CHECK(field.tile(0, 4)[0] == cdouble(1.0, 0.0));
  CHECK(field.tile(0, 4)[1] == cdouble(1.0, 0.0));
  CHECK_THROWS_AS(masks_to_filters(m, FilterMode::kFull, 2, 5, 3), InvalidArgument);
  CHECK_THROWS_AS(masks_to_filters(m, FilterMode::kDiag, 2, 5, 5), InvalidArgument);

  FilterField full(FilterMode::kFull, 3, 9, 3);
  Xoshiro256pp rng(4);
  for (auto& z : full.data()) z = {static_cast<float>(rng.Normal()), static_cast<float>(rng.Normal())};
  const auto masks = filters_to_masks(full, 2);
  CHECK(masks.channels == 18);
  CHECK(masks.bins == 8);
  CHECK(masks.frames == 4);
  const auto back = masks_to_filters(masks, FilterMode::kFull, 3, 9, 3);
  for (std::size_t n = 0; n < 3; ++n) {
    for (std::size_t k = 0; k < 8; ++k) {
      for (std::size_t r = 0; r < 3; ++r) {
        for (std::size_t c = 0; c < 3; ++c) CHECK(back.entry(n, k, r, c) == full.entry(n, k, r, c));
      }
    }
  }
}

TEST_CASE("pass-through bundle predicts identity filters end to end") {
  for (auto mode : {FilterMode::kDiag, FilterMode::kFull}) {
    const auto desc = Desc(3, mode, 2, 4);
    const auto v = testutil::RandomSpectrogram(3, 64, 10, 6);
    const auto field = PredictFilters(WeightBundle::PassThrough(desc), v);
    CHECK(field.mode() == mode);
    CHECK(field.num_frames() == 10);
    CHECK(field.num_bins() == 33);
    const auto id = FilterField::Identity(mode, 10, 33, 3);
    CHECK(std::equal(field.data().begin(), field.data().end(), id.data().begin()));
    const auto dec = cardioid_fan_decoder(std::vector<Direction>{Direction::FromAzimuth(0.0), Direction::FromAzimuth(180.0)});
    const auto y = apply_filter(dec, field, v), d = Decode(dec, v);
    for (std::size_t i = 0; i < y.data().size(); ++i) CHECK(std::abs(y.data()[i] - d.data()[i]) < 1e-12);
  }
  const auto v2 = testutil::RandomSpectrogram(2, 64, 10, 6);
  CHECK_THROWS_AS(PredictFilters(WeightBundle::PassThrough(Desc(3, FilterMode::kDiag, 1, 4)), v2), InvalidArgument);
  const auto random = PredictFilters(WeightBundle::Random(Desc(2, FilterMode::kFull, 3, 4), 2), v2);
  CHECK(random.num_bins() == 33);
  CHECK(random.AllFinite());
}
