#include "dealias/filters.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <cmath>

namespace dealias {
namespace {

// Stack-allocated up to 9 x 9 (full-mode LTI systems at V = 3).
using SmallMatrix = Eigen::Matrix<cdouble, Eigen::Dynamic, Eigen::Dynamic, 0, 9, 9>;
using SmallVector = Eigen::Matrix<cdouble, Eigen::Dynamic, 1, 0, 9, 1>;

template <typename Matrix, typename Vector>
Vector SolveRegularized(const Matrix& normal, const Vector& rhs) {
  Eigen::LLT<Matrix> llt(normal);
  if (llt.info() == Eigen::Success) return llt.solve(rhs);
  // eps == 0 with a singular system: minimum-norm least squares.
  return Eigen::CompleteOrthogonalDecomposition<Matrix>(normal).solve(rhs);
}

double NormSq(std::span<const cdouble> v) {
  double s = 0.0;
  for (const auto& z : v) s += std::norm(z);
  return s;
}

}  // namespace

OracleSolver::OracleSolver(const DecoderMatrix& decoder, double ridge_scale)
    : decoder_(decoder), ridge_scale_(ridge_scale) {
  const Eigen::MatrixXd gram = decoder.entries() * decoder.entries().transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  gram_eigenvalues_ = eig.eigenvalues().cwiseMax(0.0);
  gram_eigenvectors_ = eig.eigenvectors();
  decoder_frobenius_sq_ = decoder.entries().squaredNorm();
}

void OracleSolver::SolveDiag(std::span<const cdouble> v, std::span<const cdouble> t,
                             std::optional<double> ridge, std::span<cdouble> m) const {
  const auto& d = decoder_.entries();
  const Eigen::Index vm = d.cols(), q = d.rows();
  if (static_cast<Eigen::Index>(v.size()) != vm || static_cast<Eigen::Index>(t.size()) != q ||
      static_cast<Eigen::Index>(m.size()) != vm) {
    throw InvalidArgument("oracle_tile_diag: dimension mismatch");
  }
  if (std::sqrt(NormSq(v)) < kDegenerateTileNorm) {
    std::fill(m.begin(), m.end(), cdouble{});
    return;
  }
  SmallMatrix a(q, vm);
  for (Eigen::Index i = 0; i < q; ++i) {
    for (Eigen::Index j = 0; j < vm; ++j) a(i, j) = d(i, j) * v[static_cast<std::size_t>(j)];
  }
  SmallVector target(q);
  for (Eigen::Index i = 0; i < q; ++i) target(i) = t[static_cast<std::size_t>(i)];
  const double eps =
      ridge ? *ridge : ridge_scale_ * a.squaredNorm() / static_cast<double>(vm);
  SmallMatrix normal = a.adjoint() * a;
  normal.diagonal().array() += eps;
  const SmallVector rhs = a.adjoint() * target;
  const SmallVector sol = SolveRegularized(normal, rhs);
  for (Eigen::Index j = 0; j < vm; ++j) m[static_cast<std::size_t>(j)] = sol(j);
}

void OracleSolver::SolveFull(std::span<const cdouble> v, std::span<const cdouble> t,
                             std::optional<double> ridge, std::span<cdouble> m) const {
  const auto& d = decoder_.entries();
  const Eigen::Index vm = d.cols(), q = d.rows();
  if (static_cast<Eigen::Index>(v.size()) != vm || static_cast<Eigen::Index>(t.size()) != q ||
      static_cast<Eigen::Index>(m.size()) != vm * vm) {
    throw InvalidArgument("oracle_tile_full: dimension mismatch");
  }
  const double v_norm_sq = NormSq(v);
  if (std::sqrt(v_norm_sq) < kDegenerateTileNorm) {
    std::fill(m.begin(), m.end(), cdouble{});
    return;
  }
  const double eps = ridge ? *ridge
                           : ridge_scale_ * v_norm_sq * decoder_frobenius_sq_ /
                                 static_cast<double>(vm);

  // w = (||v||^2 D D^T + eps I)^+ t through the eigenbasis of D D^T.
  SmallVector target(q);
  for (Eigen::Index i = 0; i < q; ++i) target(i) = t[static_cast<std::size_t>(i)];
  SmallVector coeffs = gram_eigenvectors_.transpose().cast<cdouble>() * target;
  for (Eigen::Index i = 0; i < q; ++i) {
    const double denom = v_norm_sq * gram_eigenvalues_(i) + eps;
    coeffs(i) = denom > 0.0 ? coeffs(i) / denom : cdouble{};
  }
  const SmallVector w = gram_eigenvectors_.cast<cdouble>() * coeffs;
  const SmallVector left = d.transpose().cast<cdouble>() * w;
  for (Eigen::Index r = 0; r < vm; ++r) {
    for (Eigen::Index c = 0; c < vm; ++c) {
      m[static_cast<std::size_t>(r * vm + c)] = left(r) * std::conj(v[static_cast<std::size_t>(c)]);
    }
  }
}

Eigen::VectorXcd oracle_tile_diag(const DecoderMatrix& decoder, const Eigen::VectorXcd& vmics,
                                  const Eigen::VectorXcd& target, std::optional<double> ridge) {
  if (ridge && *ridge < 0.0) throw InvalidArgument("oracle_tile_diag: ridge must be >= 0");
  Eigen::VectorXcd m(vmics.size());
  OracleSolver(decoder).SolveDiag({vmics.data(), static_cast<std::size_t>(vmics.size())},
                                  {target.data(), static_cast<std::size_t>(target.size())}, ridge,
                                  {m.data(), static_cast<std::size_t>(m.size())});
  return m;
}

Eigen::MatrixXcd oracle_tile_full(const DecoderMatrix& decoder, const Eigen::VectorXcd& vmics,
                                  const Eigen::VectorXcd& target, std::optional<double> ridge) {
  if (ridge && *ridge < 0.0) throw InvalidArgument("oracle_tile_full: ridge must be >= 0");
  const auto vm = vmics.size();
  std::vector<cdouble> flat(static_cast<std::size_t>(vm * vm));
  OracleSolver(decoder).SolveFull({vmics.data(), static_cast<std::size_t>(vm)},
                                  {target.data(), static_cast<std::size_t>(target.size())}, ridge,
                                  flat);
  Eigen::MatrixXcd m(vm, vm);
  for (Eigen::Index r = 0; r < vm; ++r) {
    for (Eigen::Index c = 0; c < vm; ++c) m(r, c) = flat[static_cast<std::size_t>(r * vm + c)];
  }
  return m;
}

FilterField OracleFilterField(const DecoderMatrix& decoder, const Spectrogram& vmics,
                              const Spectrogram& targets, FilterMode mode, double ridge_scale) {
  const std::size_t v = vmics.num_channels(), q = targets.num_channels();
  if (decoder.num_inputs() != v || decoder.num_outputs() != q || !vmics.SameGrid(targets)) {
    throw InvalidArgument("OracleFilterField: decoder, virtual mics and targets disagree");
  }
  OracleSolver solver(decoder, ridge_scale);
  FilterField field(mode, vmics.num_frames(), vmics.num_bins(), v);
  std::vector<cdouble> vt(v), tt(q);
  for (std::size_t n = 0; n < vmics.num_frames(); ++n) {
    for (std::size_t k = 0; k < vmics.num_bins(); ++k) {
      for (std::size_t i = 0; i < v; ++i) vt[i] = vmics.at(i, k, n);
      for (std::size_t i = 0; i < q; ++i) tt[i] = targets.at(i, k, n);
      if (mode == FilterMode::kDiag) {
        solver.SolveDiag(vt, tt, std::nullopt, field.tile(n, k));
      } else {
        solver.SolveFull(vt, tt, std::nullopt, field.tile(n, k));
      }
    }
  }
  return field;
}

std::vector<Eigen::MatrixXcd> lti_ls_filter(const LtiProblem& problem, const DecoderMatrix& decoder,
                                            std::span<const double> frequencies,
                                            std::optional<double> ridge) {
  const std::size_t v = problem.beamformer.num_outputs();
  const auto vm = static_cast<Eigen::Index>(v);
  if (decoder.num_inputs() != v) {
    throw InvalidArgument("lti_ls_filter: decoder input count differs from beamformer outputs");
  }
  if (problem.decode_directions.size() != decoder.num_outputs()) {
    throw InvalidArgument("lti_ls_filter: one decode direction per decoder row expected");
  }
  if (problem.grid.empty()) throw InvalidArgument("lti_ls_filter: empty direction grid");

  const SteeringModel steering(problem.beamformer);
  const EncoderMatrix encoder =
      target_encoder(problem.decode_directions, problem.grid, problem.alpha);
  const Eigen::MatrixXd& d = decoder.entries();
  const Eigen::MatrixXd gram = d.transpose() * d;

  std::vector<Eigen::MatrixXcd> out;
  out.reserve(frequencies.size());
  for (double f : frequencies) {
    if (f <= 0.0) {
      out.push_back(Eigen::MatrixXcd::Zero(vm, vm));
      continue;
    }
    Eigen::MatrixXcd cov = Eigen::MatrixXcd::Zero(vm, vm);                      // sum conj(a) a^T
    Eigen::MatrixXcd cross = Eigen::MatrixXcd::Zero(d.rows(), vm);              // sum e a^H
    for (std::size_t g = 0; g < problem.grid.size(); ++g) {
      const auto a_std = steering.Response(problem.grid[g], f);
      const Eigen::Map<const Eigen::VectorXcd> a(a_std.data(), vm);
      cov += a.conjugate() * a.transpose();
      cross += encoder.entries().col(static_cast<Eigen::Index>(g)).cast<cdouble>() * a.adjoint();
    }
    // Column-major vec(M): block (i, j) of the normal matrix is cov(i, j) * D^T D.
    SmallMatrix normal(vm * vm, vm * vm);
    for (Eigen::Index i = 0; i < vm; ++i) {
      for (Eigen::Index j = 0; j < vm; ++j) {
        normal.block(i * vm, j * vm, vm, vm) = cov(i, j) * gram.cast<cdouble>();
      }
    }
    const Eigen::MatrixXcd rhs_mat = d.transpose().cast<cdouble>() * cross;
    SmallVector rhs(vm * vm);
    for (Eigen::Index c = 0; c < vm; ++c) {
      for (Eigen::Index r = 0; r < vm; ++r) rhs(c * vm + r) = rhs_mat(r, c);
    }
    const double eps =
        ridge ? *ridge : kDefaultRidgeScale * normal.trace().real() / static_cast<double>(v);
    normal.diagonal().array() += eps;
    const SmallVector x = SolveRegularized(normal, rhs);
    Eigen::MatrixXcd m(vm, vm);
    for (Eigen::Index c = 0; c < vm; ++c) {
      for (Eigen::Index r = 0; r < vm; ++r) m(r, c) = x(c * vm + r);
    }
    out.push_back(std::move(m));
  }
  return out;
}

FilterField LtiFilterField(std::span<const Eigen::MatrixXcd> per_bin, std::size_t frames) {
  if (per_bin.empty()) throw InvalidArgument("LtiFilterField: no bins");
  const auto v = static_cast<std::size_t>(per_bin.front().rows());
  FilterField field(FilterMode::kFull, frames, per_bin.size(), v);
  for (std::size_t n = 0; n < frames; ++n) {
    for (std::size_t k = 0; k < per_bin.size(); ++k) {
      auto tile = field.tile(n, k);
      for (std::size_t r = 0; r < v; ++r) {
        for (std::size_t c = 0; c < v; ++c) {
          tile[r * v + c] = per_bin[k](static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
        }
      }
    }
  }
  return field;
}

std::vector<Direction> UniformAzimuthGrid(std::size_t n) {
  std::vector<Direction> grid;
  grid.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    grid.push_back(Direction::FromAzimuth(360.0 * static_cast<double>(i) / static_cast<double>(n)));
  }
  return grid;
}

}  // namespace dealias
