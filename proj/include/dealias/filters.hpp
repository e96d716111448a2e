#pragma once

#include <Eigen/Core>
#include <optional>
#include <span>
#include <vector>

#include "dealias/beamform.hpp"
#include "dealias/core.hpp"
#include "dealias/spatial_codec.hpp"

namespace dealias {

// Relative ridge: eps = kDefaultRidgeScale * ||A||_F^2 / V, A the system matrix
// of the tile (D diag(v) for diag, v^T kron D for full).
inline constexpr double kDefaultRidgeScale = 1e-6;
// Tiles with ||v|| below this get a zero filter.
inline constexpr double kDegenerateTileNorm = 1e-12;

// Per-tile least-squares oracles. These consume ground-truth targets and serve
// as capacity bounds for the filtering model, not as deployable predictors.
// A `ridge` of std::nullopt selects the relative default above.

// argmin_m ||D diag(v) m - t||^2 + eps ||m||^2 via the regularized normal
// equations.
Eigen::VectorXcd oracle_tile_diag(const DecoderMatrix& decoder, const Eigen::VectorXcd& vmics,
                                  const Eigen::VectorXcd& target,
                                  std::optional<double> ridge = std::nullopt);

// Ridge solution of (v^T kron D) vec(M) = t. Evaluated in the dual form
// M = D^T (||v||^2 D D^T + eps I)^-1 t v^H, which is the minimum-norm solution
// as eps -> 0.
Eigen::MatrixXcd oracle_tile_full(const DecoderMatrix& decoder, const Eigen::VectorXcd& vmics,
                                  const Eigen::VectorXcd& target,
                                  std::optional<double> ridge = std::nullopt);

// Decoder-specific solver state shared across all tiles of a field.
class OracleSolver {
 public:
  explicit OracleSolver(const DecoderMatrix& decoder, double ridge_scale = kDefaultRidgeScale);

  const DecoderMatrix& decoder() const { return decoder_; }

  // Output written to `m` (length V for diag, V*V row-major for full).
  void SolveDiag(std::span<const cdouble> v, std::span<const cdouble> t, std::optional<double> ridge,
                 std::span<cdouble> m) const;
  void SolveFull(std::span<const cdouble> v, std::span<const cdouble> t, std::optional<double> ridge,
                 std::span<cdouble> m) const;

 private:
  DecoderMatrix decoder_;
  double ridge_scale_;
  Eigen::VectorXd gram_eigenvalues_;   // of D D^T
  Eigen::MatrixXd gram_eigenvectors_;  // columns
  double decoder_frobenius_sq_;
};

// Oracle filter for every tile of a virtual-mic spectrogram.
FilterField OracleFilterField(const DecoderMatrix& decoder, const Spectrogram& vmics,
                              const Spectrogram& targets, FilterMode mode,
                              double ridge_scale = kDefaultRidgeScale);

// Static per-frequency filter fitted over a direction grid:
//   M(f) = argmin sum_theta ||D M a(theta, f) - e(theta)||^2 + eps ||M||_F^2
// with a from the steering model and e(theta) the target-encoder column of a
// source at theta. Returned as one V x V matrix per frequency.
struct LtiProblem {
  BeamformerConfig beamformer;
  std::vector<Direction> decode_directions;  // rows of the target encoder
  double alpha = 0.5;
  std::vector<Direction> grid;
};

std::vector<Eigen::MatrixXcd> lti_ls_filter(const LtiProblem& problem, const DecoderMatrix& decoder,
                                            std::span<const double> frequencies,
                                            std::optional<double> ridge = std::nullopt);

// Expands per-bin LTI filters (one per STFT bin) to a full-mode field.
FilterField LtiFilterField(std::span<const Eigen::MatrixXcd> per_bin, std::size_t frames);

// Uniform azimuth grid of n points starting at 0 degrees.
std::vector<Direction> UniformAzimuthGrid(std::size_t n);

}  // namespace dealias
