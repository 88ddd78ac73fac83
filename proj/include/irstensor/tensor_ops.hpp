#pragma once

#include "irstensor/types.hpp"

namespace irstensor {

// Kronecker product, (I*K) x (J*L) for A: IxJ, B: KxL.
ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b);

// Column-wise Khatri-Rao product: column n is kron(a_n, b_n). Requires equal
// column counts.
ComplexMatrix khatri_rao(const ComplexMatrix& a, const ComplexMatrix& b);

// Elementwise product; requires identical shapes.
ComplexMatrix hadamard(const ComplexMatrix& a, const ComplexMatrix& b);

// Column-major vectorization and its inverse.
ComplexVector vec(const ComplexMatrix& a);
ComplexMatrix unvec(const ComplexVector& v, Index rows, Index cols);

// Diagonal of a square matrix as a vector, and a vector as a diagonal matrix.
ComplexVector vecd(const ComplexMatrix& a);
ComplexMatrix diag(const ComplexVector& v);

// Rank-N three-way tensor from factors g (d1 x N), z (d2 x N), s (d3 x N):
// entry (i, j, k) = sum_n g(i,n) z(j,n) s(k,n). Slice k equals
// g * diag(s.row(k)) * z^T.
Tensor3 build_parafac_tensor(const ComplexMatrix& g, const ComplexMatrix& z,
                             const ComplexMatrix& s);

// Unfoldings (1-based mode):
//   mode 1: d1 x (d2*d3), column j + d2*k   — slices side by side
//   mode 2: d2 x (d1*d3), column i + d1*k   — transposed slices side by side
//   mode 3: d3 x (d1*d2), row k is vec(slice k)^T
ComplexMatrix unfold(const Tensor3& y, int mode);
Tensor3 fold(const ComplexMatrix& m, int mode, Index d1, Index d2, Index d3);

struct Rank1Triplet {
  ComplexVector u;   // left singular vector, unit norm
  double sigma = 0;  // dominant singular value
  ComplexVector v;   // right singular vector, unit norm
};

// Dominant singular triplet of a (the best rank-1 approximation is
// sigma * u * v^H). Deterministic: phase fixed so the largest-magnitude entry
// of u is real positive. Power iteration on a^H a with a fixed internal seed;
// falls back to a full Jacobi SVD if the iteration stalls (e.g. tied leading
// singular values). Throws NumericsError on an all-zero matrix.
Rank1Triplet rank1_approx(const ComplexMatrix& a);

// Moore-Penrose pseudo-inverse via complete orthogonal decomposition with
// relative rank tolerance max(rows, cols) * machine-eps.
ComplexMatrix pseudo_inverse(const ComplexMatrix& a);

// Numerical rank by singular-value thresholding. rel_tol < 0 selects the
// machine rule max(rows, cols) * eps; otherwise sigma_i > rel_tol * sigma_max
// counts.
Index numerical_rank(const ComplexMatrix& a, double rel_tol = -1.0);

}  // namespace irstensor
