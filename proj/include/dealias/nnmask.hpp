#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dealias/core.hpp"
#include "dealias/spatial_codec.hpp"

namespace dealias {

// Fixed U-Net architecture: depth L, base width B, input 2V channels, output
// 2V (diag) or 2V^2 (full) channels.
struct ArchitectureDescriptor {
  std::size_t vmics = 2;
  FilterMode mode = FilterMode::kDiag;
  std::size_t depth = 3;
  std::size_t base_channels = 16;

  std::size_t in_channels() const { return 2 * vmics; }
  std::size_t out_channels() const {
    return mode == FilterMode::kFull ? 2 * vmics * vmics : 2 * vmics;
  }
  bool operator==(const ArchitectureDescriptor&) const = default;
};

struct Tensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<float> data;

  std::size_t numel() const;
};

struct TensorSpec {
  std::string name;
  std::vector<std::size_t> shape;
};

// Names and shapes, in canonical table order, for a descriptor:
//   enc{l}.conv{1,2}.{weight,bias}        l = 0 .. L-1, width B 2^l
//   bottleneck.conv{1,2}.{weight,bias}    width B 2^L
//   dec{l}.up.{weight,bias}               l = L-1 .. 0, B 2^(l+1) -> B 2^l
//   dec{l}.conv{1,2}.{weight,bias}        conv1 takes [skip, up] = 2 B 2^l
//   head.{weight,bias}                    1x1, B -> C_out (C_in -> C_out when L = 0)
// Weights are [out, in, kh, kw].
std::vector<TensorSpec> ExpectedTensorLayout(const ArchitectureDescriptor& descriptor);

class WeightBundle {
 public:
  WeightBundle() = default;
  WeightBundle(ArchitectureDescriptor descriptor, std::vector<Tensor> tensors);

  const ArchitectureDescriptor& descriptor() const { return descriptor_; }
  const std::vector<Tensor>& tensors() const { return tensors_; }
  std::vector<Tensor>& mutable_tensors() { return tensors_; }

  // Throws CorruptWeights naming the tensor when absent.
  const Tensor& Get(const std::string& name) const;

  // Tensor set exactly matches the descriptor and all data is finite;
  // CorruptWeights otherwise.
  void Validate() const;

  // All-zero bundle of the canonical layout.
  static WeightBundle Zeros(const ArchitectureDescriptor& descriptor);
  // He-uniform weights and zero biases from a seeded generator.
  static WeightBundle Random(const ArchitectureDescriptor& descriptor, std::uint64_t seed);
  // Zero weights with a head bias of 1 on every real channel of an identity
  // filter: predicts M = I on every tile, whatever the input.
  static WeightBundle PassThrough(const ArchitectureDescriptor& descriptor);

 private:
  ArchitectureDescriptor descriptor_;
  std::vector<Tensor> tensors_;
};

// DALW container: "DALW", u32 version, u64 header length, UTF-8 JSON header
// {"descriptor": {...}, "tensors": [{"name", "shape", "offset"}]} with byte
// offsets into the data section, then float32 little-endian row-major data in
// table order.
inline constexpr std::uint32_t kDalwVersion = 1;

WeightBundle load_weights(const std::filesystem::path& path);
void save_weights(const WeightBundle& bundle, const std::filesystem::path& path);

// Descriptor and raw tensor table without validating against the layout.
struct DalwContents {
  ArchitectureDescriptor descriptor;
  std::vector<Tensor> tensors;
};
DalwContents ReadDalw(const std::filesystem::path& path);
void WriteDalw(const DalwContents& contents, const std::filesystem::path& path);

// Parity fixture: a bundle plus "fixture.input" [C_in, F', T'] and
// "fixture.output" [C_out, F', T'] in one DALW container.
inline constexpr const char* kFixtureInputName = "fixture.input";
inline constexpr const char* kFixtureOutputName = "fixture.output";

struct FeatureTensor;
struct MaskTensor;

struct ParityFixture {
  WeightBundle bundle;
  Tensor input;
  Tensor output;
};
ParityFixture LoadParityFixture(const std::filesystem::path& path);
void SaveParityFixture(const WeightBundle& bundle, const FeatureTensor& input,
                       const MaskTensor& output, const std::filesystem::path& path);

// Real network input [2V, F', T'] laid out channel-major, then frequency.
struct FeatureTensor {
  std::size_t channels = 0;
  std::size_t bins = 0;
  std::size_t frames = 0;
  std::vector<float> data;
  std::size_t original_bins = 0;
  std::size_t original_frames = 0;
  double scale = 1.0;  // g

  float at(std::size_t c, std::size_t f, std::size_t t) const {
    return data[(c * bins + f) * frames + t];
  }
};

struct MaskTensor {
  std::size_t channels = 0;
  std::size_t bins = 0;
  std::size_t frames = 0;
  std::vector<float> data;

  float at(std::size_t c, std::size_t f, std::size_t t) const {
    return data[(c * bins + f) * frames + t];
  }
};

// Crops F to the largest multiple of 2^L, zero-pads T up to one and scales by
// g = 1 / max(RMS |v|, 1e-8). Channel 2i is Re v_i, 2i+1 is Im v_i.
FeatureTensor features_from_vmics(const Spectrogram& vmics, std::size_t depth);

// Forward pass of the fixed U-Net. Skip concatenation order is [skip, up].
MaskTensor unet_forward(const WeightBundle& weights, const FeatureTensor& x);

// Reshapes masks into a filter field on the original (F, T) grid. Entry (r, c)
// reads channels 2(rV + c), 2(rV + c) + 1 (diag: entry i reads 2i, 2i + 1).
// Padded frames are dropped, cropped top bins get identity filters. The
// feature scaling g needs no correction because masks act on unscaled v.
FilterField masks_to_filters(const MaskTensor& masks, FilterMode mode, std::size_t vmics,
                             std::size_t original_bins, std::size_t original_frames);

// Inverse of masks_to_filters on the kept region, for building training
// targets and fixtures.
MaskTensor filters_to_masks(const FilterField& field, std::size_t depth);

// features -> unet -> masks -> filters for one utterance.
FilterField PredictFilters(const WeightBundle& weights, const Spectrogram& vmics);

}  // namespace dealias
