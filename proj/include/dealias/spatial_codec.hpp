#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "dealias/core.hpp"

namespace dealias {

// Real, frequency-independent Q x V decoder.
class DecoderMatrix {
 public:
  DecoderMatrix(Eigen::MatrixXd entries, std::vector<Direction> directions);

  const Eigen::MatrixXd& entries() const { return entries_; }
  const std::vector<Direction>& directions() const { return directions_; }
  std::size_t num_outputs() const { return static_cast<std::size_t>(entries_.rows()); }
  std::size_t num_inputs() const { return static_cast<std::size_t>(entries_.cols()); }

 private:
  Eigen::MatrixXd entries_;
  std::vector<Direction> directions_;
};

DecoderMatrix identity_decoder(std::size_t num_vmics);

// In-phase first-order decoder of planar (W, X, Y): one cardioid per direction,
// row q = [0.5, 0.5 cos phi_q, 0.5 sin phi_q].
DecoderMatrix cardioid_fan_decoder(std::span<const Direction> directions);

// Alias-free first-order target encoder, [E]_qk = alpha + (1 - alpha) u_q . u_k.
class EncoderMatrix {
 public:
  EncoderMatrix(Eigen::MatrixXd entries, double alpha) : entries_(std::move(entries)), alpha_(alpha) {}

  const Eigen::MatrixXd& entries() const { return entries_; }
  double alpha() const { return alpha_; }

 private:
  Eigen::MatrixXd entries_;
  double alpha_;
};

EncoderMatrix target_encoder(std::span<const Direction> decode_directions,
                             std::span<const Direction> source_directions, double alpha);

// t(n, k) = E s(n, k) per tile. `sources` holds one channel per source.
Spectrogram make_targets(const EncoderMatrix& encoder, const Spectrogram& sources);

enum class FilterMode { kDiag, kFull };

std::string_view FilterModeName(FilterMode mode);
FilterMode ParseFilterMode(std::string_view name);

// Per-tile de-aliasing filter M(n, k). Full mode stores V x V row-major per
// tile, diag mode stores the V diagonal entries.
class FilterField {
 public:
  FilterField() = default;
  FilterField(FilterMode mode, std::size_t frames, std::size_t bins, std::size_t vmics);

  static FilterField Identity(FilterMode mode, std::size_t frames, std::size_t bins,
                              std::size_t vmics);

  FilterMode mode() const { return mode_; }
  std::size_t num_frames() const { return frames_; }
  std::size_t num_bins() const { return bins_; }
  std::size_t num_vmics() const { return vmics_; }
  std::size_t tile_size() const { return mode_ == FilterMode::kFull ? vmics_ * vmics_ : vmics_; }

  // Entries of tile (n, k); length tile_size().
  std::span<cdouble> tile(std::size_t n, std::size_t k) {
    return {data_.data() + (n * bins_ + k) * tile_size(), tile_size()};
  }
  std::span<const cdouble> tile(std::size_t n, std::size_t k) const {
    return {data_.data() + (n * bins_ + k) * tile_size(), tile_size()};
  }
  // Matrix entry (r, c) of tile (n, k); zero off the diagonal in diag mode.
  cdouble entry(std::size_t n, std::size_t k, std::size_t r, std::size_t c) const;

  std::span<const cdouble> data() const { return data_; }
  std::span<cdouble> data() { return data_; }

  bool AllFinite() const;
  // Full-mode copy (off-diagonals zero when this is diag).
  FilterField ToFull() const;

  // Binary container: "DAFF", u32 version, u32 mode (0 diag, 1 full),
  // u32 T, u32 F, u32 V, then complex entries as interleaved float32, all
  // little-endian.
  void Save(const std::filesystem::path& path) const;
  static FilterField Load(const std::filesystem::path& path);

 private:
  FilterMode mode_ = FilterMode::kDiag;
  std::size_t frames_ = 0;
  std::size_t bins_ = 0;
  std::size_t vmics_ = 0;
  std::vector<cdouble> data_;
};

// y(n, k) = D M(n, k) v(n, k).
Spectrogram apply_filter(const DecoderMatrix& decoder, const FilterField& filter,
                         const Spectrogram& vmics);

// y(n, k) = D v(n, k).
Spectrogram Decode(const DecoderMatrix& decoder, const Spectrogram& vmics);

}  // namespace dealias
