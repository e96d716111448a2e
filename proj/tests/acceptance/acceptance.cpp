// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.
#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "dealias/experiments.hpp"
#include "dealias/filters.hpp"
#include "dealias/metrics.hpp"
#include "dealias/rng.hpp"
#include "dealias/stft.hpp"

using namespace dealias;

namespace {

struct Outcome {
  bool ok = false;
  std::string detail;
};

std::size_t Threads() { return std::max(1u, std::thread::hardware_concurrency()); }

int g_failures = 0;

void Run(const char* name, double budget_s, const std::function<Outcome()>& check) {
  const auto start = std::chrono::steady_clock::now();
  Outcome out;
  try {
    out = check();
  } catch (const std::exception& e) {
    out = {false, std::string("exception: ") + e.what()};
  }
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool in_time = budget_s <= 0.0 || elapsed < budget_s;
  const bool pass = out.ok && in_time;
  if (!pass) ++g_failures;
  std::printf("%s  %-22s %s; %.2f s", pass ? "PASS" : "FAIL", name, out.detail.c_str(), elapsed);
  if (budget_s > 0.0) std::printf(" (budget %.0f s%s)", budget_s, in_time ? "" : ", exceeded");
  std::printf("\n");
  std::fflush(stdout);
}

std::string Fmt(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), fmt, args...);
  return buf;
}

cdouble RandomComplex(Xoshiro256pp& rng) { return {rng.Normal(), rng.Normal()}; }

Spectrogram RandomSpec(std::size_t channels, std::size_t fft, std::size_t frames, Xoshiro256pp& rng) {
  Spectrogram s(channels, fft / 2 + 1, frames, 16000.0, fft, fft / 2);
  for (auto& z : s.data()) z = RandomComplex(rng);
  return s;
}

// ---------------------------------------------------------------------------

Outcome StftRoundTrip() {
  Xoshiro256pp rng(101);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const std::size_t channels = 1 + rng.Below(4);
    const std::size_t length = 1000 + rng.Below(40000);
    const std::size_t fft = std::size_t{256} << rng.Below(4);
    std::vector<std::vector<double>> ch(channels, std::vector<double>(length));
    for (auto& c : ch) {
      for (auto& x : c) x = rng.Normal();
    }
    const auto sig = MultichannelSignal::FromChannels(ch, 16000.0);
    const auto back = stft_inverse(stft_forward(sig, fft, fft / 2));
    double num = 0.0, den = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      for (std::size_t n = 0; n < length; ++n) {
        num += (back.channel(c)[n] - ch[c][n]) * (back.channel(c)[n] - ch[c][n]);
        den += ch[c][n] * ch[c][n];
      }
    }
    worst = std::max(worst, std::sqrt(num / den));
  }
  return {worst < 1e-7, Fmt("max relative L2 error %.2e over 100 signals (limit 1e-7)", worst)};
}

Outcome AliasingOnset() {
  const auto cfg = preset("i_fix", PresetScale::kDesk);
  auto sweep_cfg = DefaultSweepConfig(cfg, 360, 16, 2024);
  sweep_cfg.threads = Threads();
  const auto resp = spatial_sweep(MakeSweepPipeline(cfg, FilterSpec::Parse("identity")), sweep_cfg);
  const double fa = cfg.fixed_alias_frequency();
  double below = 0.0, above = 0.0;
  for (std::size_t b = 0; b < resp.bands.size(); ++b) {
    double worst = 0.0;
    for (std::size_t q = 0; q < resp.num_channels; ++q) {
      for (std::size_t a = 0; a < resp.azimuths_deg.size(); ++a) {
        const double diff = (resp.azimuths_deg[a] - cfg.decode_directions[q].azimuth()) * kPi / 180.0;
        const double ideal = cfg.alpha + (1.0 - cfg.alpha) * std::cos(diff);
        worst = std::max(worst, std::abs(PatternDeviationDb(resp.at(b, q, a), ideal)));
      }
    }
    if (resp.bands[b].hi <= fa) {
      below = std::max(below, worst);
    } else {
      above = std::max(above, worst);
    }
  }
  return {below <= 1.0 && above > 6.0,
          Fmt("max deviation below f_alias %.2f dB (limit 1), above f_alias %.2f dB (need > 6)", below, above)};
}

struct PresetRun {
  std::string name;
  std::vector<SceneInput> scenes;
  PipelineReport diag, full;
};

std::vector<PresetRun> g_capacity_runs;

Outcome Capacity() {
  bool ok = true;
  std::string detail;
  for (const char* name : {"i_fix", "i_var", "ii_fix", "ii_var"}) {
    const auto cfg = preset(name, PresetScale::kDesk);
    PresetRun run;
    run.name = name;
    run.scenes = GenerateScenes(cfg, 32, 7001, Threads());
    run.diag = run_pipeline(cfg, FilterSpec::Parse("oracle_diag"), run.scenes, Threads());
    run.full = run_pipeline(cfg, FilterSpec::Parse("oracle_full"), run.scenes, Threads());
    double worst_order = 1e300;
    for (std::size_t i = 0; i < run.scenes.size(); ++i) {
      worst_order = std::min(worst_order, run.full.per_scene[i].c_si_snr_db - run.diag.per_scene[i].c_si_snr_db);
    }
    const bool here = run.diag.mean_db >= 60.0 && run.full.mean_db >= 60.0 && worst_order >= -0.1;
    ok = ok && here;
    detail += Fmt("%s diag %.1f full %.1f min(full-diag) %+.2f%s; ", name, run.diag.mean_db, run.full.mean_db,
                  worst_order, here ? "" : " [fail]");
    g_capacity_runs.push_back(std::move(run));
  }
  detail += "need means >= 60 dB and full >= diag - 0.1 dB per scene";
  return {ok, detail};
}

Outcome AliasedBaseline() {
  const auto cfg = preset("i_fix", PresetScale::kPaper);
  const auto scenes = GenerateScenes(cfg, 32, 9001, Threads());
  const auto r = run_pipeline(cfg, FilterSpec::Parse("identity"), scenes, Threads());
  return {r.mean_db >= 6.0 && r.mean_db <= 16.0,
          Fmt("identity C-Si-SNR %.2f dB (std %.2f) over 32 paper-scale scenes (need [6, 16])", r.mean_db, r.std_db)};
}

Outcome LtiGap() {
  if (g_capacity_runs.empty()) return {false, "capacity runs unavailable"};
  bool ok = true;
  std::string detail;
  for (const auto& run : g_capacity_runs) {
    const auto cfg = preset(run.name, PresetScale::kDesk);
    std::vector<SceneInput> multi;
    std::vector<std::size_t> index;
    for (std::size_t i = 0; i < run.scenes.size(); ++i) {
      if (run.scenes[i].scene.sources.size() >= 2) {
        multi.push_back(run.scenes[i]);
        index.push_back(i);
      }
    }
    if (multi.empty()) continue;
    const auto lti = run_pipeline(cfg, FilterSpec::Parse("lti"), multi, Threads());
    double diag = 0.0, full = 0.0;
    for (std::size_t i : index) {
      diag += run.diag.per_scene[i].improvement_db;
      full += run.full.per_scene[i].improvement_db;
    }
    diag /= static_cast<double>(index.size());
    full /= static_cast<double>(index.size());
    const double oracle = std::min(diag, full);
    const bool here = lti.improvement_db <= oracle - 10.0;
    ok = ok && here;
    detail += Fmt("%s (%zu scenes) lti %+.1f oracle %+.1f dB%s; ", run.name.c_str(), multi.size(),
                  lti.improvement_db, oracle, here ? "" : " [fail]");
  }
  detail += "need lti <= oracle - 10 dB";
  return {ok, detail};
}

// Independent dense ridge solve: SVD of [A; sqrt(eps) I].
Eigen::VectorXcd DenseRidge(const Eigen::MatrixXcd& a, const Eigen::VectorXcd& t, double eps) {
  const auto n = a.cols();
  Eigen::MatrixXcd aug(a.rows() + n, n);
  aug << a, std::sqrt(eps) * Eigen::MatrixXcd::Identity(n, n);
  Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(a.rows() + n);
  rhs.head(a.rows()) = t;
  return aug.jacobiSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(rhs);
}

Eigen::MatrixXcd FullSystem(const DecoderMatrix& d, const Eigen::VectorXcd& v) {
  const auto vm = d.entries().cols();
  Eigen::MatrixXcd a(d.entries().rows(), vm * vm);
  for (Eigen::Index c = 0; c < vm; ++c) a.middleCols(c * vm, vm) = v(c) * d.entries().cast<cdouble>();
  return a;
}

Outcome SolverCorrectness() {
  std::vector<Direction> fan;
  for (double az : {0.0, 180.0, 90.0, 270.0}) fan.push_back(Direction::FromAzimuth(az));
  const DecoderMatrix shapes[] = {identity_decoder(2), cardioid_fan_decoder(fan)};
  const double ladder[] = {0.0, 1e-6, 1e-3, 1e-1, 1.0, 10.0, 1e3};
  Xoshiro256pp rng(4242);
  double worst = 0.0;
  bool monotone = true;
  for (const auto& d : shapes) {
    const auto vm = d.entries().cols(), q = d.entries().rows();
    for (int tile = 0; tile < 1000; ++tile) {
      Eigen::VectorXcd v(vm), t(q);
      for (Eigen::Index i = 0; i < vm; ++i) v(i) = RandomComplex(rng);
      for (Eigen::Index i = 0; i < q; ++i) t(i) = RandomComplex(rng);
      const Eigen::MatrixXcd ad = d.entries().cast<cdouble>() * v.asDiagonal();
      const Eigen::MatrixXcd af = FullSystem(d, v);
      const double ridge = std::pow(10.0, rng.Uniform(-4.0, 1.0));
      const double eps_d = kDefaultRidgeScale * ad.squaredNorm() / static_cast<double>(vm);
      const double eps_f = kDefaultRidgeScale * af.squaredNorm() / static_cast<double>(vm);
      auto compare = [&](const Eigen::MatrixXcd& a, const Eigen::VectorXcd& got, double eps) {
        const Eigen::VectorXcd want = DenseRidge(a, t, eps);
        const double scale = std::max(1.0, t.norm());
        worst = std::max(worst, ((a * got - t) - (a * want - t)).norm() / scale);
        worst = std::max(worst, (got - want).norm() / std::max(1.0, want.norm()));
      };
      auto vec = [](const Eigen::MatrixXcd& m) { return Eigen::VectorXcd(Eigen::Map<const Eigen::VectorXcd>(m.data(), m.size())); };
      compare(ad, oracle_tile_diag(d, v, t), eps_d);
      compare(ad, oracle_tile_diag(d, v, t, ridge), ridge);
      compare(af, vec(oracle_tile_full(d, v, t)), eps_f);
      compare(af, vec(oracle_tile_full(d, v, t, ridge)), ridge);

      double prev_d = -1.0, prev_f = -1.0;
      for (double r : ladder) {
        const double res_d = (ad * oracle_tile_diag(d, v, t, r) - t).norm();
        const double res_f = (af * vec(oracle_tile_full(d, v, t, r)) - t).norm();
        monotone = monotone && res_d >= prev_d - 1e-12 && res_f >= prev_f - 1e-12;
        prev_d = res_d;
        prev_f = res_f;
      }
    }
  }
  return {worst <= 1e-8 && monotone,
          Fmt("max deviation from dense oracle %.2e over 2x1000 tiles, diag and full (limit 1e-8); residual %s in ridge",
              worst, monotone ? "monotone" : "NOT monotone")};
}

Outcome TargetEncoder() {
  auto e = [](double alpha, double decode_az, double src_az) {
    const std::vector<Direction> dec{Direction::FromAzimuth(decode_az)}, src{Direction::FromAzimuth(src_az)};
    return target_encoder(dec, src, alpha).entries()(0, 0);
  };
  const double peak = e(0.5, 30.0, 30.0), null = e(0.5, 30.0, 210.0);
  const double fig8 = e(0.0, 0.0, 90.0), omni = e(1.0, 0.0, 123.0);
  const bool values = peak == 1.0 && std::abs(null) <= 1e-15 && std::abs(fig8) <= 1e-15 && omni == 1.0;
  Xoshiro256pp rng(33);
  bool bounds = true;
  for (int i = 0; i < 10000; ++i) {
    const double alpha = rng.Uniform(0.0, 1.0);
    const double v = e(alpha, rng.Uniform(0.0, 360.0), rng.Uniform(0.0, 360.0));
    bounds = bounds && v <= 1.0 && v >= 2.0 * alpha - 1.0 - 1e-15 && (alpha < 0.5 || v >= -1e-15);
  }
  return {values && bounds, Fmt("cardioid peak %.17g null %.2e, fig-8 null %.2e, omni %.17g; bounds on 10000 draws %s",
                                peak, null, fig8, omni, bounds ? "hold" : "violated")};
}

Outcome MetricIdentities() {
  Xoshiro256pp rng(55);
  const auto t = RandomSpec(3, 256, 20, rng);
  auto est = t;
  for (auto& z : est.data()) z += 0.3 * RandomComplex(rng);
  const double base = c_si_snr(est, t).mean_db;
  double invariance = 0.0;
  for (cdouble g : {cdouble(0.5, 0.0), cdouble(0.0, 2.0), cdouble(-3.0, 1.5)}) {
    auto scaled = est;
    for (auto& z : scaled.data()) z *= g;
    invariance = std::max(invariance, std::abs(c_si_snr(scaled, t).mean_db - base));
  }

  // Target plus an error orthogonal to it at 20 dB.
  auto noisy = t;
  const auto noise = RandomSpec(3, 256, 20, rng);
  for (std::size_t c = 0; c < 3; ++c) {
    const auto tc = t.channel(c), nc = noise.channel(c);
    cdouble proj{};
    double tt = 0.0;
    for (std::size_t i = 0; i < tc.size(); ++i) {
      proj += nc[i] * std::conj(tc[i]);
      tt += std::norm(tc[i]);
    }
    std::vector<cdouble> err(tc.size());
    double ee = 0.0;
    for (std::size_t i = 0; i < tc.size(); ++i) {
      err[i] = nc[i] - proj / tt * tc[i];
      ee += std::norm(err[i]);
    }
    const double g = std::sqrt(tt * 0.01 / ee);
    auto oc = noisy.channel(c);
    for (std::size_t i = 0; i < tc.size(); ++i) oc[i] += g * err[i];
  }
  const double twenty = c_si_snr(noisy, t).mean_db;

  auto rotated = t;
  for (auto& z : rotated.data()) z *= std::polar(1.0, 0.7);
  const auto zeros = Spectrogram::ZerosLike(t, 3);
  const bool zero_cases = phasen_loss(t, t) == 0.0 && phasen_loss(zeros, zeros) == 0.0;
  const bool nonzero_cases = phasen_loss(rotated, t) > 0.0 && phasen_loss(est, t) > 0.0 && phasen_loss(zeros, t) > 0.0;
  const bool ok = invariance <= 1e-9 && std::abs(twenty - 20.0) <= 0.01 && zero_cases && nonzero_cases;
  return {ok, Fmt("scale invariance %.1e dB, orthogonal-error case %.4f dB (20 +- 0.01), PHASEN zero cases %s, "
                  "nonzero cases %s",
                  invariance, twenty, zero_cases ? "0" : "nonzero", nonzero_cases ? "> 0" : "zero")};
}

}  // namespace

int main() {
  std::printf("acceptance run, %zu worker thread(s)\n", Threads());
  Run("stft_round_trip", 5.0, StftRoundTrip);
  Run("aliasing_onset", 120.0, AliasingOnset);
  Run("model_capacity", 300.0, Capacity);
  Run("aliased_baseline", 120.0, AliasedBaseline);
  Run("lti_insufficiency", 180.0, LtiGap);
  Run("oracle_solver", 30.0, SolverCorrectness);
  Run("target_encoder", 0.0, TargetEncoder);
  Run("metric_identities", 0.0, MetricIdentities);
  std::printf("%d criterion(s) failed\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
