#include <Eigen/Dense>
#include <cmath>

#include "dealias/filters.hpp"
#include "dealias/metrics.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace dealias;

namespace {

std::vector<Direction> Dirs(std::initializer_list<double> az) {
  std::vector<Direction> out;
  for (double a : az) out.push_back(Direction::FromAzimuth(a));
  return out;
}

// The two experiment shapes: cardioid pair with an identity decoder, and
// planar FOA decoded to four in-phase cardioids.
DecoderMatrix ShapeI() { return identity_decoder(2); }
DecoderMatrix ShapeII() { return cardioid_fan_decoder(Dirs({0.0, 180.0, 90.0, 270.0})); }

Eigen::VectorXcd RandomVec(Eigen::Index n, Xoshiro256pp& rng) {
  Eigen::VectorXcd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = testutil::RandomComplex(rng);
  return v;
}

// System matrices of one tile.
Eigen::MatrixXcd DiagSystem(const DecoderMatrix& d, const Eigen::VectorXcd& v) {
  return d.entries().cast<cdouble>() * v.asDiagonal();
}

// Column-major vec: D M v = (v^T kron D) vec(M).
Eigen::MatrixXcd FullSystem(const DecoderMatrix& d, const Eigen::VectorXcd& v) {
  const auto q = d.entries().rows(), vm = d.entries().cols();
  Eigen::MatrixXcd a(q, vm * vm);
  for (Eigen::Index c = 0; c < vm; ++c) a.middleCols(c * vm, vm) = v(c) * d.entries().cast<cdouble>();
  return a;
}

// Dense ridge solve of the augmented system [A; sqrt(eps) I] x = [t; 0] by SVD.
Eigen::VectorXcd DenseRidge(const Eigen::MatrixXcd& a, const Eigen::VectorXcd& t, double eps) {
  const auto n = a.cols();
  Eigen::MatrixXcd aug(a.rows() + n, n);
  aug << a, std::sqrt(eps) * Eigen::MatrixXcd::Identity(n, n);
  Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(a.rows() + n);
  rhs.head(a.rows()) = t;
  return aug.jacobiSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(rhs);
}

Eigen::VectorXcd VecColMajor(const Eigen::MatrixXcd& m) {
  return Eigen::Map<const Eigen::VectorXcd>(m.data(), m.size());
}

double RelErr(const Eigen::VectorXcd& got, const Eigen::VectorXcd& want) {
  return (got - want).norm() / std::max(1.0, want.norm());
}

}  // namespace

TEST_CASE("diag oracle examples") {
  const auto d = ShapeI();
  Eigen::VectorXcd v(2), t(2);
  v << cdouble(2.0, 0.0), cdouble(0.0, 1.0);
  t << cdouble(1.0, 0.0), cdouble(1.0, 0.0);
  const auto m = oracle_tile_diag(d, v, t, 0.0);
  CHECK(std::abs(m(0) - cdouble(0.5, 0.0)) < 1e-14);
  CHECK(std::abs(m(1) - cdouble(0.0, -1.0)) < 1e-14);

  const auto zero = oracle_tile_diag(d, Eigen::VectorXcd::Zero(2), t);
  CHECK(zero.norm() == 0.0);
  CHECK(oracle_tile_full(d, Eigen::VectorXcd::Zero(2), t).norm() == 0.0);
  CHECK_THROWS_AS(oracle_tile_diag(d, v, t, -1.0), InvalidArgument);
  CHECK_THROWS_AS(oracle_tile_full(d, v, t, -1.0), InvalidArgument);
  CHECK_THROWS_AS(oracle_tile_diag(d, Eigen::VectorXcd::Ones(3), t), InvalidArgument);
}

TEST_CASE("full oracle is the minimum-norm solution at zero ridge") {
  Xoshiro256pp rng(3);
  for (const auto& d : {ShapeI(), ShapeII()}) {
    for (int trial = 0; trial < 50; ++trial) {
      const auto v = RandomVec(d.entries().cols(), rng);
      const auto t = RandomVec(d.entries().rows(), rng);
      const auto m = oracle_tile_full(d, v, t, 0.0);
      const auto a = FullSystem(d, v);
      Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXcd> cod(a);
      const Eigen::VectorXcd pinv = cod.pseudoInverse() * t;
      CHECK(RelErr(VecColMajor(m), pinv) < 1e-10);
    }
  }
}

TEST_CASE("both oracles match an independent dense ridge solve") {
  Xoshiro256pp rng(5);
  for (const auto& d : {ShapeI(), ShapeII()}) {
    const auto vm = d.entries().cols();
    for (int trial = 0; trial < 200; ++trial) {
      const auto v = RandomVec(vm, rng);
      const auto t = RandomVec(d.entries().rows(), rng);
      const auto ad = DiagSystem(d, v), af = FullSystem(d, v);
      // Default relative ridge, recomputed here from the system matrices.
      const double eps_d = 1e-6 * ad.squaredNorm() / static_cast<double>(vm);
      const double eps_f = 1e-6 * af.squaredNorm() / static_cast<double>(vm);
      CHECK(RelErr(oracle_tile_diag(d, v, t), DenseRidge(ad, t, eps_d)) < 1e-8);
      CHECK(RelErr(VecColMajor(oracle_tile_full(d, v, t)), DenseRidge(af, t, eps_f)) < 1e-8);
      const double ridge = std::pow(10.0, rng.Uniform(-4.0, 1.0));
      CHECK(RelErr(oracle_tile_diag(d, v, t, ridge), DenseRidge(ad, t, ridge)) < 1e-8);
      CHECK(RelErr(VecColMajor(oracle_tile_full(d, v, t, ridge)), DenseRidge(af, t, ridge)) < 1e-8);
    }
  }
}

TEST_CASE("residual grows and filter norm shrinks with the ridge") {
  Xoshiro256pp rng(7);
  const double ridges[] = {0.0, 1e-6, 1e-3, 1e-1, 1.0, 10.0, 1e3};
  for (const auto& d : {ShapeI(), ShapeII()}) {
    for (int trial = 0; trial < 100; ++trial) {
      const auto v = RandomVec(d.entries().cols(), rng);
      const auto t = RandomVec(d.entries().rows(), rng);
      double prev_res_d = -1.0, prev_res_f = -1.0, prev_norm_d = 1e300, prev_norm_f = 1e300;
      for (double r : ridges) {
        const auto md = oracle_tile_diag(d, v, t, r);
        const auto mf = VecColMajor(oracle_tile_full(d, v, t, r));
        const double res_d = (DiagSystem(d, v) * md - t).norm();
        const double res_f = (FullSystem(d, v) * mf - t).norm();
        CHECK(res_d >= prev_res_d - 1e-12);
        CHECK(res_f >= prev_res_f - 1e-12);
        CHECK(md.norm() <= prev_norm_d + 1e-12);
        CHECK(mf.norm() <= prev_norm_f + 1e-12);
        prev_res_d = res_d;
        prev_res_f = res_f;
        prev_norm_d = md.norm();
        prev_norm_f = mf.norm();
      }
    }
  }
}

TEST_CASE("full-matrix residual never exceeds the diagonal residual") {
  Xoshiro256pp rng(9);
  for (const auto& d : {ShapeI(), ShapeII()}) {
    for (int trial = 0; trial < 200; ++trial) {
      const auto v = RandomVec(d.entries().cols(), rng);
      const auto t = RandomVec(d.entries().rows(), rng);
      const double res_d = (DiagSystem(d, v) * oracle_tile_diag(d, v, t, 0.0) - t).norm();
      const double res_f = (FullSystem(d, v) * VecColMajor(oracle_tile_full(d, v, t, 0.0)) - t).norm();
      CHECK(res_f <= res_d + 1e-10);
    }
  }
}

TEST_CASE("consistent targets are fit exactly with a vanishing ridge") {
  Xoshiro256pp rng(11);
  for (const auto& d : {ShapeI(), ShapeII()}) {
    for (int trial = 0; trial < 100; ++trial) {
      const auto v = RandomVec(d.entries().cols(), rng);
      // Targets reachable by a diagonal filter.
      const auto m_true = RandomVec(d.entries().cols(), rng);
      const Eigen::VectorXcd t = DiagSystem(d, v) * m_true;
      const double tiny = 1e-14 * DiagSystem(d, v).squaredNorm();
      CHECK((DiagSystem(d, v) * oracle_tile_diag(d, v, t, tiny) - t).norm() < 1e-6 * t.norm());
      CHECK((FullSystem(d, v) * VecColMajor(oracle_tile_full(d, v, t, tiny)) - t).norm() < 1e-6 * t.norm());
    }
  }
}

TEST_CASE("oracle filter fields solve every tile") {
  const auto v = testutil::RandomSpectrogram(3, 16, 4, 13);
  const auto t = testutil::RandomSpectrogram(4, 16, 4, 14);
  const auto d = ShapeII();
  for (auto mode : {FilterMode::kDiag, FilterMode::kFull}) {
    const auto field = OracleFilterField(d, v, t, mode);
    CHECK(field.AllFinite());
    for (std::size_t n = 0; n < 4; ++n) {
      for (std::size_t k = 0; k < v.num_bins(); ++k) {
        Eigen::VectorXcd vt(3), tt(4);
        for (int i = 0; i < 3; ++i) vt(i) = v.at(static_cast<std::size_t>(i), k, n);
        for (int i = 0; i < 4; ++i) tt(i) = t.at(static_cast<std::size_t>(i), k, n);
        if (mode == FilterMode::kDiag) {
          const auto m = oracle_tile_diag(d, vt, tt);
          for (std::size_t i = 0; i < 3; ++i) CHECK(field.tile(n, k)[i] == m(static_cast<Eigen::Index>(i)));
        } else {
          const auto m = oracle_tile_full(d, vt, tt);
          for (std::size_t r = 0; r < 3; ++r) {
            for (std::size_t c = 0; c < 3; ++c) {
              CHECK(field.entry(n, k, r, c) == m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)));
            }
          }
        }
      }
    }
  }
  CHECK_THROWS_AS(OracleFilterField(ShapeI(), v, t, FilterMode::kDiag), InvalidArgument);
}

namespace {

LtiProblem CardioidProblem(std::vector<Direction> grid) {
  LtiProblem p;
  p.beamformer.kind = BeamformerKind::kCardioidPair;
  p.beamformer.spacing_x = p.beamformer.spacing_y = 0.06;
  p.decode_directions = Dirs({0.0, 180.0});
  p.alpha = 0.5;
  p.grid = std::move(grid);
  return p;
}

// Per-direction dB deviation of |D M a(theta)| from the encoder column, over a
// 360-point evaluation grid.
std::vector<double> LtiDeviations(const LtiProblem& p, const DecoderMatrix& d, double f) {
  const double freqs[] = {f};
  const auto m = lti_ls_filter(p, d, freqs).front();
  const SteeringModel steering(p.beamformer);
  const auto eval = UniformAzimuthGrid(360);
  const auto e = target_encoder(p.decode_directions, eval, p.alpha).entries();
  std::vector<double> out;
  for (std::size_t g = 0; g < eval.size(); ++g) {
    const auto a = steering.Response(eval[g], f);
    const Eigen::Map<const Eigen::VectorXcd> av(a.data(), static_cast<Eigen::Index>(a.size()));
    const Eigen::VectorXcd y = d.entries().cast<cdouble>() * (m * av);
    for (Eigen::Index q = 0; q < y.size(); ++q) {
      out.push_back(std::abs(PatternDeviationDb(std::abs(y(q)), e(q, static_cast<Eigen::Index>(g)))));
    }
  }
  return out;
}

}  // namespace

TEST_CASE("LTI fit on a single direction reproduces its target") {
  const auto p = CardioidProblem(Dirs({40.0}));
  const double f = 1000.0;
  const double freqs[] = {f};
  const auto m = lti_ls_filter(p, ShapeI(), freqs, 1e-12).front();
  const auto a = steering_response(p.beamformer, p.grid[0], f);
  const Eigen::Map<const Eigen::VectorXcd> av(a.data(), 2);
  const Eigen::VectorXcd y = m * av;
  const auto e = target_encoder(p.decode_directions, p.grid, p.alpha).entries();
  CHECK(std::abs(y(0) - e(0, 0)) < 1e-6);
  CHECK(std::abs(y(1) - e(1, 0)) < 1e-6);
}

TEST_CASE("LTI filter matches a direct Kronecker least-squares solve") {
  auto p = CardioidProblem(UniformAzimuthGrid(36));
  p.beamformer.kind = BeamformerKind::kPlanarFoa;
  p.decode_directions = Dirs({0.0, 180.0, 90.0, 270.0});
  const auto d = ShapeII();
  const double f = 3100.0, ridge = 1e-3;
  const double freqs[] = {f};
  const auto m = lti_ls_filter(p, d, freqs, ridge).front();
  // Stack D M a(theta) = (a^T kron D) vec(M) over the grid.
  const auto e = target_encoder(p.decode_directions, p.grid, p.alpha).entries();
  Eigen::MatrixXcd big(4 * 36, 9);
  Eigen::VectorXcd rhs(4 * 36);
  for (int g = 0; g < 36; ++g) {
    const auto a = steering_response(p.beamformer, p.grid[static_cast<std::size_t>(g)], f);
    Eigen::VectorXcd av(3);
    av << a[0], a[1], a[2];
    big.middleRows(4 * g, 4) = FullSystem(d, av);
    rhs.segment(4 * g, 4) = e.col(g).cast<cdouble>();
  }
  CHECK(RelErr(VecColMajor(m), DenseRidge(big, rhs, ridge)) < 1e-8);
}

TEST_CASE("LTI fit is accurate below and fails above the aliasing frequency") {
  const double fa = aliasing_frequency(0.06);
  auto foa = CardioidProblem(UniformAzimuthGrid(360));
  foa.beamformer.kind = BeamformerKind::kPlanarFoa;
  foa.decode_directions = Dirs({0.0, 180.0, 90.0, 270.0});
  const auto low = LtiDeviations(foa, ShapeII(), 0.5 * fa);
  double mean = 0.0;
  for (double x : low) mean += x;
  mean /= static_cast<double>(low.size());
  CHECK(mean < 1.0);
  const auto high = LtiDeviations(foa, ShapeII(), 1.5 * fa);
  CHECK(*std::max_element(high.begin(), high.end()) > 3.0);

  // Two cardioid channels span too little to reach first order near their
  // rear nulls, so only the above-aliasing failure is asserted for the pair.
  const auto pair_high = LtiDeviations(CardioidProblem(UniformAzimuthGrid(360)), ShapeI(), 1.5 * fa);
  CHECK(*std::max_element(pair_high.begin(), pair_high.end()) > 3.0);
}

TEST_CASE("LTI field expands per-bin matrices over frames") {
  std::vector<Eigen::MatrixXcd> per_bin(5, Eigen::MatrixXcd::Zero(2, 2));
  per_bin[3](0, 1) = cdouble(2.0, -1.0);
  const auto field = LtiFilterField(per_bin, 4);
  CHECK(field.mode() == FilterMode::kFull);
  for (std::size_t n = 0; n < 4; ++n) CHECK(field.entry(n, 3, 0, 1) == cdouble(2.0, -1.0));
  CHECK(field.entry(1, 2, 0, 1) == cdouble{});
  CHECK_THROWS_AS(LtiFilterField({}, 4), InvalidArgument);
  const double freqs[] = {0.0, 500.0};
  const auto dc = lti_ls_filter(CardioidProblem(UniformAzimuthGrid(8)), ShapeI(), freqs);
  CHECK(dc[0].norm() == 0.0);
  CHECK(dc[1].norm() > 0.0);
  CHECK_THROWS_AS(lti_ls_filter(CardioidProblem({}), ShapeI(), freqs), InvalidArgument);
}
