#include "irstensor/estimators.hpp"

#include "irstensor/tensor_ops.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include <chrono>
#include <cmath>
#include <limits>

namespace irstensor {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void check_observation(const Tensor3& y, const ComplexMatrix& x) {
  if (x.rows() != y.dim2())
    throw ShapeError("estimator: pilot rows must match tensor dim 2");
  if (x.rows() < 1 || x.cols() < 1)
    throw ShapeError("estimator: empty pilot design");
}

void check_phase_design(const Tensor3& y, const ComplexMatrix& s) {
  if (s.rows() != y.dim3())
    throw ShapeError("estimator: phase-design rows must match tensor dim 3");
  if (s.cols() < 1) throw ShapeError("estimator: empty phase design");
}

bool is_semi_unitary(const ComplexMatrix& a, double scale) {
  ComplexMatrix gram = a.adjoint() * a;
  gram.diagonal().array() -= scale;
  return gram.cwiseAbs().maxCoeff() <= 1e-8 * scale;
}

Eigen::CompleteOrthogonalDecomposition<ComplexMatrix> make_cod(
    const ComplexMatrix& a) {
  Eigen::CompleteOrthogonalDecomposition<ComplexMatrix> cod;
  cod.setThreshold(static_cast<double>(std::max(a.rows(), a.cols())) *
                   std::numeric_limits<double>::epsilon());
  cod.compute(a);
  return cod;
}

// Least squares  min_w || yunf - w * (a kr b)^T ||_F  through the Gram
// identity (a kr b)^H (a kr b) = (a^H a) .* (b^H b). The N x N system is
// solved by pivoted LDLT with a conditioning check at the squared relative
// rank tolerance; a failed check means the update target lost column rank.
ComplexMatrix kr_ls_solve(const ComplexMatrix& a, const ComplexMatrix& aha,
                          const ComplexMatrix& b, const ComplexMatrix& yunf) {
  const Index n = a.cols();
  ComplexMatrix p = khatri_rao(a, b);
  ComplexMatrix gram = aha.cwiseProduct(b.adjoint() * b);
  ComplexMatrix rhs = p.adjoint() * yunf.transpose();  // n x rows(yunf)
  Eigen::LDLT<ComplexMatrix> ldlt(gram);
  const auto& d = ldlt.vectorD();
  const double dmax = d.maxCoeff();
  const double reltol = static_cast<double>(std::max(p.rows(), n)) *
                        std::numeric_limits<double>::epsilon();
  if (ldlt.info() != Eigen::Success || !(dmax > 0.0) ||
      !(d.minCoeff() > reltol * reltol * dmax))
    throw DesignError("alternating update: factor target lost column rank");
  return ldlt.solve(rhs).transpose();
}

ComplexMatrix initial_h(const BalsOptions& opts, Index n, Index d2, Rng& rng) {
  if (opts.h_init) {
    if (opts.h_init->rows() != n || opts.h_init->cols() != d2)
      throw ShapeError("h_init: expected N x (pilot columns)");
    return *opts.h_init;
  }
  return rng.cnormal_matrix(n, d2);
}

double observation_energy(const Tensor3& y) {
  const double e = y.squared_norm();
  if (!(e > 0.0)) throw NumericsError("estimator: all-zero observation");
  return e;
}

}  // namespace

ComplexVector composite_theta(const ComplexMatrix& h, const ComplexMatrix& g) {
  return vec(khatri_rao(h.transpose(), g));
}

ComplexMatrix bilinear_filter(const Tensor3& y, const ComplexMatrix& s,
                              const ComplexMatrix& x) {
  check_observation(y, x);
  check_phase_design(y, s);
  const Index d1 = y.dim1(), bigT = x.rows(), d2 = x.cols();
  const Index bigK = s.rows(), n = s.cols();
  if (bigK < n)
    throw DesignError("bilinear filter: phase design needs K >= N");
  if (bigT < d2)
    throw DesignError("bilinear filter: pilot design needs T >= columns");

  // (X^+)^T, via the scaled adjoint for an orthogonal design.
  ComplexMatrix pinv_x_t;
  if (is_semi_unitary(x, static_cast<double>(bigT))) {
    pinv_x_t = x.conjugate() / static_cast<double>(bigT);
  } else {
    auto cod = make_cod(x);
    if (cod.rank() < d2)
      throw DesignError("bilinear filter: pilot design lost column rank");
    pinv_x_t = cod.pseudoInverse().transpose();
  }
  ComplexMatrix slots(d1 * d2, bigK);
  for (Index k = 0; k < bigK; ++k) {
    ComplexMatrix wk = y.slice(k) * pinv_x_t;
    slots.col(k) = Eigen::Map<const ComplexVector>(wk.data(), wk.size());
  }
  // (S^T)^+ = (S^+)^T, again short-circuited for orthogonal designs.
  if (is_semi_unitary(s, static_cast<double>(bigK)))
    return slots * s.conjugate() / static_cast<double>(bigK);
  auto cod = make_cod(s);
  if (cod.rank() < n)
    throw DesignError("bilinear filter: phase design lost column rank");
  return slots * cod.pseudoInverse().transpose();
}

EstimationResult ls_composite(const Tensor3& y, const ComplexMatrix& s,
                              const ComplexMatrix& x) {
  const auto t0 = Clock::now();
  ComplexMatrix omega = bilinear_filter(y, s, x);
  EstimationResult res;
  res.theta_hat = vec(omega);
  res.iterations = 0;
  res.converged = true;
  res.wall_time_s = seconds_since(t0);
  return res;
}

EstimationResult krf(const Tensor3& y, const ComplexMatrix& s,
                     const ComplexMatrix& x) {
  const auto t0 = Clock::now();
  ComplexMatrix omega = bilinear_filter(y, s, x);
  const Index d1 = y.dim1(), d2 = x.cols(), n = s.cols();
  EstimationResult res;
  res.h_hat = ComplexMatrix::Zero(n, d2);
  res.g_hat = ComplexMatrix::Zero(d1, n);
  for (Index c = 0; c < n; ++c) {
    if (omega.col(c).norm() == 0.0) {
      ++res.degenerate_columns;  // rows/cols stay zero
      continue;
    }
    ComplexMatrix block = unvec(omega.col(c), d1, d2);
    Rank1Triplet t = rank1_approx(block);
    const double root = std::sqrt(t.sigma);
    res.h_hat.row(c) = root * t.v.conjugate().transpose();
    res.g_hat.col(c) = root * t.u;
  }
  res.theta_hat = composite_theta(res.h_hat, res.g_hat);
  res.iterations = 0;
  res.converged = true;
  res.wall_time_s = seconds_since(t0);
  return res;
}

EstimationResult bals(const Tensor3& y, const ComplexMatrix& s,
                      const ComplexMatrix& x, const BalsOptions& opts,
                      Rng& rng) {
  if (opts.use_orthogonal_fastpath) {
    BalsOptions plain = opts;
    plain.use_orthogonal_fastpath = false;
    return bals_orthogonal(y, s, x, plain, rng);
  }
  const auto t0 = Clock::now();
  check_observation(y, x);
  check_phase_design(y, s);
  const Index d1 = y.dim1(), bigT = x.rows(), d2 = x.cols();
  const Index bigK = s.rows(), n = s.cols();
  if (bigK * std::min(bigT, d1) < n)
    throw DesignError("bals: needs K * min(T, d1) >= N");
  if (bigT < d2) throw DesignError("bals: pilot design needs T >= columns");
  if (opts.max_iter < 1) throw ShapeError("bals: max_iter must be >= 1");

  const double ynorm2 = observation_energy(y);
  const ComplexMatrix y1 = unfold(y, 1);
  const ComplexMatrix y2 = unfold(y, 2);
  const ComplexMatrix shs = s.adjoint() * s;
  auto codx = make_cod(x);
  if (codx.rank() < d2)
    throw DesignError("bals: pilot design lost column rank");

  ComplexMatrix h = initial_h(opts, n, d2, rng);
  ComplexMatrix g;
  EstimationResult res;
  res.converged = false;
  double e_prev = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= opts.max_iter; ++it) {
    ComplexMatrix z = x * h.transpose();
    g = kr_ls_solve(s, shs, z, y1);
    ComplexMatrix z_fit = kr_ls_solve(s, shs, g, y2);
    h = codx.solve(z_fit).transpose();
    z = x * h.transpose();
    double e = (y1 - g * khatri_rao(s, z).transpose()).squaredNorm();
    if (opts.normalize_error) e /= ynorm2;
    res.error_trace.push_back(e);
    res.iterations = it;
    if (it > 1 && std::abs(e - e_prev) <= opts.delta) {
      res.converged = true;
      break;
    }
    e_prev = e;
  }
  res.h_hat = h;
  res.g_hat = g;
  res.theta_hat = composite_theta(h, g);
  res.wall_time_s = seconds_since(t0);
  return res;
}

EstimationResult bals_orthogonal(const Tensor3& y, const ComplexMatrix& s,
                                 const ComplexMatrix& x,
                                 const BalsOptions& opts, Rng& rng) {
  const auto t0 = Clock::now();
  check_observation(y, x);
  check_phase_design(y, s);
  const Index d1 = y.dim1(), bigT = x.rows(), d2 = x.cols();
  const Index bigK = s.rows(), n = s.cols();
  if (!is_semi_unitary(s, static_cast<double>(bigK)) ||
      !is_semi_unitary(x, static_cast<double>(bigT)))
    throw DesignError("bals_orthogonal: needs orthogonal S and X designs");
  if (opts.max_iter < 1) throw ShapeError("bals_orthogonal: max_iter >= 1");

  const double ynorm2 = observation_energy(y);
  const ComplexMatrix y1 = unfold(y, 1);
  const ComplexMatrix y2 = unfold(y, 2);
  const double kt = static_cast<double>(bigK) * static_cast<double>(bigT);
  constexpr double kZeroNorm = 1e-100;

  ComplexMatrix h = initial_h(opts, n, d2, rng);
  ComplexMatrix g;
  EstimationResult res;
  res.converged = false;
  double e_prev = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= opts.max_iter; ++it) {
    for (Index c = 0; c < n; ++c)
      if (h.row(c).squaredNorm() < kZeroNorm) {
        h.row(c) = rng.cnormal_matrix(1, d2);
        ++res.degenerate_columns;
      }
    ComplexMatrix z = x * h.transpose();
    ComplexMatrix m1 = khatri_rao(s, z);
    g = (y1 * m1.conjugate()) / kt;
    for (Index c = 0; c < n; ++c) g.col(c) /= h.row(c).squaredNorm();

    for (Index c = 0; c < n; ++c)
      if (g.col(c).squaredNorm() < kZeroNorm) {
        g.col(c) = rng.cnormal_matrix(d1, 1);
        ++res.degenerate_columns;
      }
    ComplexMatrix m2 = khatri_rao(s, g);
    ComplexMatrix ht = (x.adjoint() * (y2 * m2.conjugate())) / kt;
    for (Index c = 0; c < n; ++c) ht.col(c) /= g.col(c).squaredNorm();
    h = ht.transpose();

    z = x * h.transpose();
    double e = (y1 - g * khatri_rao(s, z).transpose()).squaredNorm();
    if (opts.normalize_error) e /= ynorm2;
    res.error_trace.push_back(e);
    res.iterations = it;
    if (it > 1 && std::abs(e - e_prev) <= opts.delta) {
      res.converged = true;
      break;
    }
    e_prev = e;
  }
  res.h_hat = h;
  res.g_hat = g;
  res.theta_hat = composite_theta(h, g);
  res.wall_time_s = seconds_since(t0);
  return res;
}

EstimationResult tals(const Tensor3& y, const ComplexMatrix& x,
                      const ComplexMatrix& s_init, const BalsOptions& opts,
                      Rng& rng) {
  const auto t0 = Clock::now();
  check_observation(y, x);
  check_phase_design(y, s_init);
  const Index d1 = y.dim1(), bigT = x.rows(), d2 = x.cols();
  const Index bigK = s_init.rows(), n = s_init.cols();
  if (std::min(d1, n) + std::min(d2, n) + std::min(bigK, n) < 2 * n + 2)
    throw DesignError(
        "tals: three-factor uniqueness condition "
        "min(d1,N) + min(d2,N) + min(K,N) >= 2N + 2 fails");
  if (bigT < d2) throw DesignError("tals: pilot design needs T >= columns");
  if (opts.max_iter < 1) throw ShapeError("tals: max_iter must be >= 1");

  const double ynorm2 = observation_energy(y);
  const ComplexMatrix y1 = unfold(y, 1);
  const ComplexMatrix y2 = unfold(y, 2);
  const ComplexMatrix y3 = unfold(y, 3);
  auto codx = make_cod(x);
  if (codx.rank() < d2)
    throw DesignError("tals: pilot design lost column rank");

  ComplexMatrix s = s_init;
  ComplexMatrix h = initial_h(opts, n, d2, rng);
  ComplexMatrix g;
  EstimationResult res;
  res.converged = false;
  double e_prev = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= opts.max_iter; ++it) {
    const ComplexMatrix shs = s.adjoint() * s;
    ComplexMatrix z = x * h.transpose();
    g = kr_ls_solve(s, shs, z, y1);
    ComplexMatrix z_fit = kr_ls_solve(s, shs, g, y2);
    h = codx.solve(z_fit).transpose();
    z = x * h.transpose();
    s = kr_ls_solve(z, z.adjoint() * z, g, y3);
    double e = (y1 - g * khatri_rao(s, z).transpose()).squaredNorm();
    if (opts.normalize_error) e /= ynorm2;
    res.error_trace.push_back(e);
    res.iterations = it;
    if (it > 1 && std::abs(e - e_prev) <= opts.delta) {
      res.converged = true;
      break;
    }
    e_prev = e;
  }
  res.h_hat = h;
  res.g_hat = g;
  res.theta_hat = composite_theta(h, g);
  res.s_hat = s;
  res.wall_time_s = seconds_since(t0);
  return res;
}

std::vector<ComplexMatrix> block_ls(const Tensor3& y, const ComplexMatrix& x) {
  check_observation(y, x);
  const Index d2 = x.cols();
  if (x.rows() < d2)
    throw DesignError("block_ls: pilot design needs T >= columns");
  ComplexMatrix pinv_x_t;
  if (is_semi_unitary(x, static_cast<double>(x.rows()))) {
    pinv_x_t = x.conjugate() / static_cast<double>(x.rows());
  } else {
    auto cod = make_cod(x);
    if (cod.rank() < d2)
      throw DesignError("block_ls: pilot design lost column rank");
    pinv_x_t = cod.pseudoInverse().transpose();
  }
  std::vector<ComplexMatrix> out;
  out.reserve(static_cast<std::size_t>(y.dim3()));
  for (Index k = 0; k < y.dim3(); ++k) out.push_back(y.slice(k) * pinv_x_t);
  return out;
}

AlignResult align_scaling(const ComplexMatrix& h_hat,
                          const ComplexMatrix& g_hat,
                          const ComplexMatrix& h_ref,
                          const ComplexMatrix& g_ref) {
  if (h_hat.rows() != h_ref.rows() || h_hat.cols() != h_ref.cols() ||
      g_hat.rows() != g_ref.rows() || g_hat.cols() != g_ref.cols() ||
      h_hat.rows() != g_hat.cols())
    throw ShapeError("align_scaling: estimate/reference shape mismatch");
  AlignResult r{h_hat, g_hat, 0};
  for (Index c = 0; c < h_hat.rows(); ++c) {
    const double den = h_hat.row(c).squaredNorm();
    if (den == 0.0) {
      ++r.skipped;
      continue;
    }
    const Complex num =
        (h_hat.row(c).conjugate().cwiseProduct(h_ref.row(c))).sum();
    const Complex delta = num / den;
    if (std::abs(delta) == 0.0) {
      ++r.skipped;
      continue;
    }
    r.h.row(c) *= delta;
    r.g.col(c) /= delta;
  }
  return r;
}

}  // namespace irstensor
