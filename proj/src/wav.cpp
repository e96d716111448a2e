#include "dealias/wav.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

namespace dealias {
namespace {

static_assert(std::endian::native == std::endian::little, "little-endian host required");

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

template <typename T>
void Put(std::vector<char>& buf, T value) {
  const auto* p = reinterpret_cast<const char*>(&value);
  buf.insert(buf.end(), p, p + sizeof(T));
}

template <typename T>
T Get(const std::vector<char>& buf, std::size_t offset) {
  T value;
  std::memcpy(&value, buf.data() + offset, sizeof(T));
  return value;
}

}  // namespace

void WriteWav(const std::filesystem::path& path, const MultichannelSignal& signal) {
  const auto channels = static_cast<std::uint16_t>(signal.num_channels());
  const auto rate = static_cast<std::uint32_t>(std::lround(signal.sample_rate()));
  const std::size_t frames = signal.length();
  const auto data_bytes = static_cast<std::uint32_t>(frames * channels * 4);

  std::vector<char> buf;
  buf.reserve(44 + data_bytes);
  buf.insert(buf.end(), {'R', 'I', 'F', 'F'});
  Put<std::uint32_t>(buf, 36 + data_bytes);
  buf.insert(buf.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  Put<std::uint32_t>(buf, 16);
  Put<std::uint16_t>(buf, kFormatFloat);
  Put<std::uint16_t>(buf, channels);
  Put<std::uint32_t>(buf, rate);
  Put<std::uint32_t>(buf, rate * channels * 4);
  Put<std::uint16_t>(buf, static_cast<std::uint16_t>(channels * 4));
  Put<std::uint16_t>(buf, 32);
  buf.insert(buf.end(), {'d', 'a', 't', 'a'});
  Put<std::uint32_t>(buf, data_bytes);
  for (std::size_t i = 0; i < frames; ++i) {
    for (std::size_t c = 0; c < channels; ++c) {
      Put<float>(buf, static_cast<float>(signal.channel(c)[i]));
    }
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

void WriteWav(const std::filesystem::path& path, const MonoSignal& signal) {
  WriteWav(path, MultichannelSignal::FromChannels({signal.samples}, signal.sample_rate));
}

MultichannelSignal ReadWav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  auto fail = [&](const std::string& why) { return IoError(path.string() + ": " + why); };
  if (buf.size() < 12 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
      std::memcmp(buf.data() + 8, "WAVE", 4) != 0) {
    throw fail("not a RIFF/WAVE file");
  }

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= buf.size()) {
    const std::string id(buf.data() + pos, 4);
    const auto size = Get<std::uint32_t>(buf, pos + 4);
    const std::size_t body = pos + 8;
    if (body + size > buf.size()) throw fail("truncated chunk '" + id + "'");
    if (id == "fmt ") {
      if (size < 16) throw fail("short fmt chunk");
      format = Get<std::uint16_t>(buf, body);
      channels = Get<std::uint16_t>(buf, body + 2);
      rate = Get<std::uint32_t>(buf, body + 4);
      bits = Get<std::uint16_t>(buf, body + 14);
      if (format == kFormatExtensible && size >= 26) format = Get<std::uint16_t>(buf, body + 24);
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw fail("data chunk before fmt chunk");
      if (channels == 0) throw fail("zero channels");
      const bool is_float = format == kFormatFloat && bits == 32;
      const bool is_pcm16 = format == kFormatPcm && bits == 16;
      if (!is_float && !is_pcm16) throw fail("unsupported sample format");
      const std::size_t bytes = bits / 8;
      const std::size_t frames = size / (bytes * channels);
      MultichannelSignal out(channels, frames, static_cast<double>(rate));
      for (std::size_t i = 0; i < frames; ++i) {
        for (std::size_t c = 0; c < channels; ++c) {
          const std::size_t off = body + (i * channels + c) * bytes;
          out.channel(c)[i] = is_float ? static_cast<double>(Get<float>(buf, off))
                                       : static_cast<double>(Get<std::int16_t>(buf, off)) / 32768.0;
        }
      }
      return out;
    }
    pos = body + size + (size & 1u);
  }
  throw fail("no data chunk");
}

}  // namespace dealias
