#include "dealias/spatial_codec.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

namespace dealias {
namespace {

constexpr char kFilterMagic[4] = {'D', 'A', 'F', 'F'};
constexpr std::uint32_t kFilterVersion = 1;

void PutU32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }

std::uint32_t GetU32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 4);
  return v;
}

}  // namespace

DecoderMatrix::DecoderMatrix(Eigen::MatrixXd entries, std::vector<Direction> directions)
    : entries_(std::move(entries)), directions_(std::move(directions)) {
  if (entries_.rows() < 1 || entries_.cols() < 1) {
    throw InvalidArgument("DecoderMatrix: needs at least one row and one column");
  }
  if (!entries_.allFinite()) throw InvalidArgument("DecoderMatrix: non-finite entry");
  if (!directions_.empty() && directions_.size() != num_outputs()) {
    throw InvalidArgument("DecoderMatrix: one direction per output row expected");
  }
}

DecoderMatrix identity_decoder(std::size_t num_vmics) {
  if (num_vmics < 1) throw InvalidArgument("identity_decoder: V must be >= 1");
  const auto v = static_cast<Eigen::Index>(num_vmics);
  return DecoderMatrix(Eigen::MatrixXd::Identity(v, v), {});
}

DecoderMatrix cardioid_fan_decoder(std::span<const Direction> directions) {
  if (directions.empty()) throw InvalidArgument("cardioid_fan_decoder: needs >= 1 direction");
  Eigen::MatrixXd d(static_cast<Eigen::Index>(directions.size()), 3);
  for (std::size_t q = 0; q < directions.size(); ++q) {
    const auto row = static_cast<Eigen::Index>(q);
    d(row, 0) = 0.5;
    d(row, 1) = 0.5 * directions[q].ux();
    d(row, 2) = 0.5 * directions[q].uy();
  }
  return DecoderMatrix(std::move(d), {directions.begin(), directions.end()});
}

EncoderMatrix target_encoder(std::span<const Direction> decode_directions,
                             std::span<const Direction> source_directions, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw InvalidArgument("target_encoder: shape coefficient must lie in [0, 1]");
  }
  Eigen::MatrixXd e(static_cast<Eigen::Index>(decode_directions.size()),
                    static_cast<Eigen::Index>(source_directions.size()));
  for (std::size_t q = 0; q < decode_directions.size(); ++q) {
    for (std::size_t k = 0; k < source_directions.size(); ++k) {
      e(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(k)) =
          alpha + (1.0 - alpha) * decode_directions[q].Dot(source_directions[k]);
    }
  }
  return EncoderMatrix(std::move(e), alpha);
}

Spectrogram make_targets(const EncoderMatrix& encoder, const Spectrogram& sources) {
  const auto& e = encoder.entries();
  if (static_cast<std::size_t>(e.cols()) != sources.num_channels()) {
    throw InvalidArgument("make_targets: encoder has " + std::to_string(e.cols()) +
                          " columns but " + std::to_string(sources.num_channels()) + " sources");
  }
  Spectrogram out = Spectrogram::ZerosLike(sources, static_cast<std::size_t>(e.rows()));
  const std::size_t tiles = sources.num_bins() * sources.num_frames();
  for (Eigen::Index q = 0; q < e.rows(); ++q) {
    auto dst = out.channel(static_cast<std::size_t>(q));
    for (Eigen::Index k = 0; k < e.cols(); ++k) {
      const double w = e(q, k);
      if (w == 0.0) continue;
      auto src = sources.channel(static_cast<std::size_t>(k));
      for (std::size_t i = 0; i < tiles; ++i) dst[i] += w * src[i];
    }
  }
  return out;
}

std::string_view FilterModeName(FilterMode mode) {
  return mode == FilterMode::kFull ? "full" : "diag";
}

FilterMode ParseFilterMode(std::string_view name) {
  if (name == "diag") return FilterMode::kDiag;
  if (name == "full") return FilterMode::kFull;
  throw InvalidArgument("unknown filter mode '" + std::string(name) + "'");
}

FilterField::FilterField(FilterMode mode, std::size_t frames, std::size_t bins, std::size_t vmics)
    : mode_(mode), frames_(frames), bins_(bins), vmics_(vmics) {
  data_.assign(frames * bins * tile_size(), cdouble{});
}

FilterField FilterField::Identity(FilterMode mode, std::size_t frames, std::size_t bins,
                                  std::size_t vmics) {
  FilterField f(mode, frames, bins, vmics);
  for (std::size_t n = 0; n < frames; ++n) {
    for (std::size_t k = 0; k < bins; ++k) {
      auto t = f.tile(n, k);
      for (std::size_t i = 0; i < vmics; ++i) t[mode == FilterMode::kFull ? i * vmics + i : i] = 1.0;
    }
  }
  return f;
}

cdouble FilterField::entry(std::size_t n, std::size_t k, std::size_t r, std::size_t c) const {
  const auto t = tile(n, k);
  if (mode_ == FilterMode::kFull) return t[r * vmics_ + c];
  return r == c ? t[r] : cdouble{};
}

bool FilterField::AllFinite() const {
  for (const auto& z : data_) {
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
  }
  return true;
}

FilterField FilterField::ToFull() const {
  if (mode_ == FilterMode::kFull) return *this;
  FilterField out(FilterMode::kFull, frames_, bins_, vmics_);
  for (std::size_t n = 0; n < frames_; ++n) {
    for (std::size_t k = 0; k < bins_; ++k) {
      const auto src = tile(n, k);
      auto dst = out.tile(n, k);
      for (std::size_t i = 0; i < vmics_; ++i) dst[i * vmics_ + i] = src[i];
    }
  }
  return out;
}

void FilterField::Save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.write(kFilterMagic, 4);
  PutU32(out, kFilterVersion);
  PutU32(out, mode_ == FilterMode::kFull ? 1u : 0u);
  PutU32(out, static_cast<std::uint32_t>(frames_));
  PutU32(out, static_cast<std::uint32_t>(bins_));
  PutU32(out, static_cast<std::uint32_t>(vmics_));
  std::vector<float> buf;
  buf.reserve(data_.size() * 2);
  for (const auto& z : data_) {
    buf.push_back(static_cast<float>(z.real()));
    buf.push_back(static_cast<float>(z.imag()));
  }
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!out) throw IoError("write failed: " + path.string());
}

FilterField FilterField::Load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kFilterMagic, 4) != 0) {
    throw IoError(path.string() + ": not a filter-field file");
  }
  const std::uint32_t version = GetU32(in);
  const std::uint32_t mode = GetU32(in);
  const std::uint32_t frames = GetU32(in), bins = GetU32(in), vmics = GetU32(in);
  if (!in || version != kFilterVersion || mode > 1) {
    throw IoError(path.string() + ": bad filter-field header");
  }
  FilterField f(mode == 1 ? FilterMode::kFull : FilterMode::kDiag, frames, bins, vmics);
  std::vector<float> buf(f.data_.size() * 2);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * 4));
  if (!in) throw IoError(path.string() + ": truncated filter-field data");
  for (std::size_t i = 0; i < f.data_.size(); ++i) f.data_[i] = {buf[2 * i], buf[2 * i + 1]};
  return f;
}

Spectrogram apply_filter(const DecoderMatrix& decoder, const FilterField& filter,
                         const Spectrogram& vmics) {
  const std::size_t v = vmics.num_channels();
  if (decoder.num_inputs() != v || filter.num_vmics() != v ||
      filter.num_frames() != vmics.num_frames() || filter.num_bins() != vmics.num_bins()) {
    throw InvalidArgument("apply_filter: decoder, filter and virtual-mic dimensions disagree");
  }
  const auto& d = decoder.entries();
  const std::size_t q_count = decoder.num_outputs();
  Spectrogram out = Spectrogram::ZerosLike(vmics, q_count);
  std::vector<cdouble> in(v), filtered(v);
  const bool full = filter.mode() == FilterMode::kFull;
  for (std::size_t k = 0; k < vmics.num_bins(); ++k) {
    for (std::size_t n = 0; n < vmics.num_frames(); ++n) {
      for (std::size_t i = 0; i < v; ++i) in[i] = vmics.at(i, k, n);
      const auto m = filter.tile(n, k);
      for (std::size_t r = 0; r < v; ++r) {
        if (full) {
          cdouble acc{};
          for (std::size_t c = 0; c < v; ++c) acc += m[r * v + c] * in[c];
          filtered[r] = acc;
        } else {
          filtered[r] = m[r] * in[r];
        }
      }
      for (std::size_t q = 0; q < q_count; ++q) {
        cdouble acc{};
        for (std::size_t i = 0; i < v; ++i) {
          acc += d(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(i)) * filtered[i];
        }
        out.at(q, k, n) = acc;
      }
    }
  }
  return out;
}

Spectrogram Decode(const DecoderMatrix& decoder, const Spectrogram& vmics) {
  return apply_filter(decoder,
                      FilterField::Identity(FilterMode::kDiag, vmics.num_frames(),
                                            vmics.num_bins(), vmics.num_channels()),
                      vmics);
}

}  // namespace dealias
