#include "irstensor/tensor_ops.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <cmath>
#include <limits>

namespace irstensor {

ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
  const Index ia = a.rows(), ja = a.cols(), ib = b.rows(), jb = b.cols();
  ComplexMatrix out(ia * ib, ja * jb);
  for (Index j = 0; j < ja; ++j)
    for (Index i = 0; i < ia; ++i)
      out.block(i * ib, j * jb, ib, jb) = a(i, j) * b;
  return out;
}

ComplexMatrix khatri_rao(const ComplexMatrix& a, const ComplexMatrix& b) {
  if (a.cols() != b.cols())
    throw ShapeError("khatri_rao: operands need equal column counts");
  const Index ia = a.rows(), ib = b.rows(), n = a.cols();
  ComplexMatrix out(ia * ib, n);
  for (Index c = 0; c < n; ++c)
    for (Index i = 0; i < ia; ++i)
      out.col(c).segment(i * ib, ib) = a(i, c) * b.col(c);
  return out;
}

ComplexMatrix hadamard(const ComplexMatrix& a, const ComplexMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError("hadamard: operands need identical shapes");
  return a.cwiseProduct(b);
}

ComplexVector vec(const ComplexMatrix& a) {
  return Eigen::Map<const ComplexVector>(a.data(), a.size());
}

ComplexMatrix unvec(const ComplexVector& v, Index rows, Index cols) {
  if (v.size() != rows * cols)
    throw ShapeError("unvec: length does not match requested shape");
  return Eigen::Map<const ComplexMatrix>(v.data(), rows, cols);
}

ComplexVector vecd(const ComplexMatrix& a) {
  if (a.rows() != a.cols()) throw ShapeError("vecd: matrix must be square");
  return a.diagonal();
}

ComplexMatrix diag(const ComplexVector& v) {
  ComplexMatrix m = ComplexMatrix::Zero(v.size(), v.size());
  m.diagonal() = v;
  return m;
}

Tensor3 build_parafac_tensor(const ComplexMatrix& g, const ComplexMatrix& z,
                             const ComplexMatrix& s) {
  if (g.cols() != z.cols() || g.cols() != s.cols())
    throw ShapeError("build_parafac_tensor: factors need equal column counts");
  // Mode-1 route: Y1 = g * (s kr z)^T, then reinterpret (mode-1 layout is the
  // native storage order).
  ComplexMatrix y1 = g * khatri_rao(s, z).transpose();
  return fold(y1, 1, g.rows(), z.rows(), s.rows());
}

ComplexMatrix unfold(const Tensor3& y, int mode) {
  const Index d1 = y.dim1(), d2 = y.dim2(), d3 = y.dim3();
  switch (mode) {
    case 1:
      return Eigen::Map<const ComplexMatrix>(y.data().data(), d1, d2 * d3);
    case 2: {
      ComplexMatrix out(d2, d1 * d3);
      for (Index k = 0; k < d3; ++k)
        out.middleCols(k * d1, d1) = y.slice(k).transpose();
      return out;
    }
    case 3: {
      ComplexMatrix out(d3, d1 * d2);
      for (Index k = 0; k < d3; ++k)
        out.row(k) = y.data().segment(k * d1 * d2, d1 * d2).transpose();
      return out;
    }
    default:
      throw ShapeError("unfold: mode must be 1, 2 or 3");
  }
}

Tensor3 fold(const ComplexMatrix& m, int mode, Index d1, Index d2, Index d3) {
  Tensor3 y(d1, d2, d3);
  switch (mode) {
    case 1:
      if (m.rows() != d1 || m.cols() != d2 * d3)
        throw ShapeError("fold: mode-1 shape mismatch");
      Eigen::Map<ComplexMatrix>(y.data().data(), d1, d2 * d3) = m;
      return y;
    case 2:
      if (m.rows() != d2 || m.cols() != d1 * d3)
        throw ShapeError("fold: mode-2 shape mismatch");
      for (Index k = 0; k < d3; ++k)
        y.slice(k) = m.middleCols(k * d1, d1).transpose();
      return y;
    case 3:
      if (m.rows() != d3 || m.cols() != d1 * d2)
        throw ShapeError("fold: mode-3 shape mismatch");
      for (Index k = 0; k < d3; ++k)
        y.data().segment(k * d1 * d2, d1 * d2) = m.row(k).transpose();
      return y;
    default:
      throw ShapeError("fold: mode must be 1, 2 or 3");
  }
}

namespace {

// Rotate u so its largest-magnitude entry is real positive; apply the inverse
// rotation to v to keep u * v^H unchanged.
void fix_phase(ComplexVector& u, ComplexVector& v) {
  Index imax = 0;
  u.cwiseAbs().maxCoeff(&imax);
  const Complex pivot = u[imax];
  const double mag = std::abs(pivot);
  if (mag == 0.0) return;
  const Complex rot = std::conj(pivot) / mag;
  u *= rot;
  u[imax] = Complex(mag, 0.0);  // force exact real after rotation
  v *= std::conj(rot);
}

Rank1Triplet svd_fallback(const ComplexMatrix& a) {
  Eigen::JacobiSVD<ComplexMatrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Rank1Triplet t;
  t.u = svd.matrixU().col(0);
  t.v = svd.matrixV().col(0);
  t.sigma = svd.singularValues()[0];
  fix_phase(t.u, t.v);
  return t;
}

}  // namespace

Rank1Triplet rank1_approx(const ComplexMatrix& a) {
  const double anorm = a.norm();
  if (!(anorm > 0.0))
    throw NumericsError("rank1_approx: zero (or non-finite) matrix");

  const Index rows = a.rows(), cols = a.cols();
  // Iterate on the smaller Gram side.
  const bool gram_right = cols <= rows;  // b = a^H a (cols x cols) else a a^H
  const Index n = gram_right ? cols : rows;
  ComplexMatrix b;
  if (gram_right)
    b.noalias() = a.adjoint() * a;
  else
    b.noalias() = a * a.adjoint();

  Rng rng(0x5EEDBA5Eu);  // fixed start => deterministic output
  ComplexVector x = rng.cnormal_matrix(n, 1);
  x.normalize();

  const double tol = 1e-12;
  const int max_iter = 500;
  double rho_prev = -1.0;
  bool ok = false;
  for (int it = 0; it < max_iter; ++it) {
    ComplexVector w = b * x;
    const double rho = std::real(x.dot(w));  // Rayleigh quotient, real for Hermitian b
    const double wn = w.norm();
    if (wn == 0.0) break;  // x in the null space; restart would be needed
    ComplexVector xn = w / wn;
    const double dx = (xn - x).norm();
    const double drho = std::abs(rho - rho_prev);
    x = xn;
    if (it > 0 && drho <= tol * std::abs(rho) && dx <= tol) {
      ok = true;
      break;
    }
    rho_prev = rho;
  }
  if (!ok) return svd_fallback(a);

  Rank1Triplet t;
  if (gram_right) {
    t.v = x;
    ComplexVector av = a * x;
    t.sigma = av.norm();
    if (t.sigma == 0.0) return svd_fallback(a);
    t.u = av / t.sigma;
  } else {
    t.u = x;
    ComplexVector ahu = a.adjoint() * x;
    t.sigma = ahu.norm();
    if (t.sigma == 0.0) return svd_fallback(a);
    t.v = ahu / t.sigma;
  }
  fix_phase(t.u, t.v);
  return t;
}

ComplexMatrix pseudo_inverse(const ComplexMatrix& a) {
  Eigen::CompleteOrthogonalDecomposition<ComplexMatrix> cod;
  cod.setThreshold(static_cast<double>(std::max(a.rows(), a.cols())) *
                   std::numeric_limits<double>::epsilon());
  cod.compute(a);
  return cod.pseudoInverse();
}

Index numerical_rank(const ComplexMatrix& a, double rel_tol) {
  Eigen::JacobiSVD<ComplexMatrix> svd(a);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0) return 0;
  const double smax = sv[0];
  if (smax == 0.0) return 0;
  const double tol = (rel_tol < 0.0)
                         ? static_cast<double>(std::max(a.rows(), a.cols())) *
                               std::numeric_limits<double>::epsilon()
                         : rel_tol;
  Index r = 0;
  for (Index i = 0; i < sv.size(); ++i)
    if (sv[i] > tol * smax) ++r;
  return r;
}

}  // namespace irstensor
