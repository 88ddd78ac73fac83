#pragma once

#include "irstensor/types.hpp"

#include <optional>
#include <vector>

namespace irstensor {

struct BalsOptions {
  double delta = 1e-5;   // stop when |e(i) - e(i-1)| <= delta
  int max_iter = 100;    // alternating rounds cap (500 suits the 3-factor run)
  // Compare the residual normalized by ||Y||_F^2 (relative form). false uses
  // the raw squared residual difference.
  bool normalize_error = true;
  // Route the 2-factor run through the closed-form orthogonal updates.
  bool use_orthogonal_fastpath = false;
  // Deterministic warm start; absent => CN(0,1) draw from the supplied rng.
  std::optional<ComplexMatrix> h_init;
};

struct EstimationResult {
  ComplexMatrix h_hat;      // N x d2 rows h_n^T (empty for ls_composite)
  ComplexMatrix g_hat;      // d1 x N columns g_n (empty for ls_composite)
  ComplexVector theta_hat;  // vec(h_hat^T kr g_hat) when factors exist
  std::optional<ComplexMatrix> s_hat;  // 3-factor run only
  int iterations = 0;
  bool converged = true;
  std::vector<double> error_trace;  // per-iteration reconstruction error
  double wall_time_s = 0.0;
  // Degenerate-column events: zero filter columns (factor split) or
  // re-randomized zero-norm columns (orthogonal updates).
  int degenerate_columns = 0;
};

// vec(h^T kr g) for h: N x d2, g: d1 x N.
ComplexVector composite_theta(const ComplexMatrix& h, const ComplexMatrix& g);

// Bilinear filtering front-end shared by the one-shot estimators: recovers
// the composite matrix  h^T kr g  (d1*d2 x N) from the observation by
// inverting the pilot and phase designs. Uses scaled-adjoint shortcuts when
// the designs are orthogonal, rank-revealing pseudo-inverses otherwise.
ComplexMatrix bilinear_filter(const Tensor3& y, const ComplexMatrix& s,
                              const ComplexMatrix& x);

// One-shot least-squares estimate of the composite parameter vector.
// Requires full-column-rank designs (K >= N, T >= pilot columns).
EstimationResult ls_composite(const Tensor3& y, const ComplexMatrix& s,
                              const ComplexMatrix& x);

// Khatri-Rao factorization estimator: bilinear filtering followed by a
// per-column dominant-singular-triplet split into the two channel factors.
EstimationResult krf(const Tensor3& y, const ComplexMatrix& s,
                     const ComplexMatrix& x);

// Bilinear alternating least squares over (g, h) with the phase design known.
EstimationResult bals(const Tensor3& y, const ComplexMatrix& s,
                      const ComplexMatrix& x, const BalsOptions& opts,
                      Rng& rng);

// Closed-form variant of the alternating update, valid only for orthogonal
// designs (S^H S = K I, X^H X = T I): each half-step reduces to a scaled
// adjoint product plus a diagonal rescaling by the running column energies.
EstimationResult bals_orthogonal(const Tensor3& y, const ComplexMatrix& s,
                                 const ComplexMatrix& x,
                                 const BalsOptions& opts, Rng& rng);

// Three-factor alternating least squares that re-estimates the realized
// phase matrix as well (s_init seeds the phase factor; typically the designed
// one). Requires the three-factor uniqueness dimension condition.
EstimationResult tals(const Tensor3& y, const ComplexMatrix& x,
                      const ComplexMatrix& s_init, const BalsOptions& opts,
                      Rng& rng);

// Per-block baseline: \hat C_k = Y[k] * (X^T)^+, one effective channel per
// phase block, no cross-block coupling.
std::vector<ComplexMatrix> block_ls(const Tensor3& y, const ComplexMatrix& x);

struct AlignResult {
  ComplexMatrix h;  // scale-aligned copy of the estimate
  ComplexMatrix g;
  int skipped = 0;  // zero-norm estimated columns left untouched
};

// Resolve the per-column scale ambiguity of a factor-pair estimate against a
// reference: row n of h is scaled by the least-squares coefficient onto the
// reference row, column n of g by its reciprocal (the composite is
// unchanged).
AlignResult align_scaling(const ComplexMatrix& h_hat, const ComplexMatrix& g_hat,
                          const ComplexMatrix& h_ref, const ComplexMatrix& g_ref);

}  // namespace irstensor
