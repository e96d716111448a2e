#include <cmath>

#include "dealias/stft.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace dealias;

namespace {

double RelativeL2(std::span<const double> a, std::span<const double> b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num / den);
}

}  // namespace

TEST_CASE("periodic Hann") {
  const auto w = PeriodicHann(8);
  CHECK(w[0] == 0.0);
  CHECK(w[4] == doctest::Approx(1.0));
  CHECK(w[2] == doctest::Approx(0.5));
  CHECK(w[6] == doctest::Approx(0.5));
}

TEST_CASE("zero signal gives a zero spectrogram and back") {
  MultichannelSignal x(2, 3000, 16000.0);
  const auto s = stft_forward(x, 1024, 512);
  for (const auto& z : s.data()) CHECK(z == cdouble{});
  const auto y = stft_inverse(s);
  CHECK(y.length() == 3000);
  for (std::size_t c = 0; c < 2; ++c) {
    for (double v : y.channel(c)) CHECK(v == 0.0);
  }
}

TEST_CASE("frame count and grid") {
  MultichannelSignal x(1, 1000, 16000.0);
  const auto s = stft_forward(x, 256, 128);
  CHECK(s.num_bins() == 129);
  CHECK(s.num_frames() == 1 + (1000 + 127) / 128);
  CHECK(s.num_frames() == StftFrameCount(1000, 128));
  CHECK(s.signal_length() == 1000);
}

TEST_CASE("only 50 percent overlap is supported") {
  MultichannelSignal x(1, 4096, 16000.0);
  CHECK_THROWS_AS(stft_forward(x, 1024, 256), UnsupportedConfiguration);
  CHECK_THROWS_AS(stft_forward(x, 1024, 1024), UnsupportedConfiguration);
  MultichannelSignal short_x(1, 100, 16000.0);
  CHECK_THROWS_AS(stft_forward(short_x, 1024, 512), InvalidArgument);
}

TEST_CASE("bin-centred sine peaks at its bin and matches a direct DFT") {
  const std::size_t n = 256, k0 = 19, length = 4096;
  const double fs = 16000.0;
  std::vector<double> sig(length);
  for (std::size_t i = 0; i < length; ++i) {
    sig[i] = std::sin(2.0 * kPi * static_cast<double>(k0 * i) / static_cast<double>(n));
  }
  const auto s = stft_forward(MultichannelSignal::FromChannels({sig}, fs), n, n / 2);
  const auto w = PeriodicHann(n);
  for (std::size_t frame = 2; frame + 2 < s.num_frames(); ++frame) {
    std::size_t best = 0;
    for (std::size_t k = 0; k < s.num_bins(); ++k) {
      if (std::abs(s.at(0, k, frame)) > std::abs(s.at(0, best, frame))) best = k;
    }
    CHECK(best == k0);
  }
  // Oracle for one interior frame: frame start = frame*hop - n/2 in the signal.
  const std::size_t frame = 5, start = frame * (n / 2) - n / 2;
  std::vector<double> seg(n);
  for (std::size_t i = 0; i < n; ++i) seg[i] = sig[start + i] * w[i];
  const auto ref = testutil::DirectDft(seg);
  for (std::size_t k = 0; k < s.num_bins(); ++k) CHECK(std::abs(s.at(0, k, frame) - ref[k]) < 1e-9);
  CHECK(std::abs(s.at(0, k0, frame)) == doctest::Approx(n / 4.0).epsilon(1e-9));
}

TEST_CASE("channels are transformed independently") {
  const auto a = testutil::RandomNormal(5000, 1);
  const auto b = testutil::RandomNormal(5000, 2);
  const auto both = stft_forward(MultichannelSignal::FromChannels({a, b}, 16000.0), 512, 256);
  const auto sa = stft_forward(MultichannelSignal::FromChannels({a}, 16000.0), 512, 256);
  const auto sb = stft_forward(MultichannelSignal::FromChannels({b}, 16000.0), 512, 256);
  for (std::size_t i = 0; i < sa.channel(0).size(); ++i) {
    CHECK(both.channel(0)[i] == sa.channel(0)[i]);
    CHECK(both.channel(1)[i] == sb.channel(0)[i]);
  }
}

TEST_CASE("round trip reconstructs random signals of various lengths") {
  for (std::size_t length : {1024u, 1025u, 1500u, 4097u, 32000u}) {
    const auto a = testutil::RandomNormal(length, length);
    const auto b = testutil::RandomNormal(length, length + 1);
    const auto x = MultichannelSignal::FromChannels({a, b}, 16000.0);
    const auto y = stft_inverse(stft_forward(x, 1024, 512));
    REQUIRE(y.length() == length);
    CHECK(RelativeL2(y.channel(0), x.channel(0)) < 1e-7);
    CHECK(RelativeL2(y.channel(1), x.channel(1)) < 1e-7);
  }
}

TEST_CASE("per-frame Parseval") {
  const std::size_t n = 512;
  const auto x = testutil::RandomNormal(6000, 3);
  const auto s = stft_forward(MultichannelSignal::FromChannels({x}, 16000.0), n, n / 2);
  const auto w = PeriodicHann(n);
  for (std::size_t frame = 0; frame < s.num_frames(); ++frame) {
    double time_energy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto pos = static_cast<std::ptrdiff_t>(frame * n / 2 + i) - static_cast<std::ptrdiff_t>(n / 2);
      if (pos >= 0 && pos < static_cast<std::ptrdiff_t>(x.size())) {
        const double v = x[static_cast<std::size_t>(pos)] * w[i];
        time_energy += v * v;
      }
    }
    double freq_energy = std::norm(s.at(0, 0, frame)) + std::norm(s.at(0, n / 2, frame));
    for (std::size_t k = 1; k < n / 2; ++k) freq_energy += 2.0 * std::norm(s.at(0, k, frame));
    freq_energy /= static_cast<double>(n);
    CHECK(std::abs(freq_energy - time_energy) <= 1e-9 * std::max(time_energy, 1e-300));
  }
}

TEST_CASE("inverse rejects inconsistent grids") {
  Spectrogram s(1, 513, 10, 16000.0, 1024, 512, 5000);
  CHECK_THROWS_AS(stft_inverse(s), InvalidArgument);
  Spectrogram bad_hop(1, 513, 10, 16000.0, 1024, 256);
  CHECK_THROWS_AS(stft_inverse(bad_hop), UnsupportedConfiguration);
}
