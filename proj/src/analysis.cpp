#include "irstensor/analysis.hpp"

#include "irstensor/tensor_ops.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>

namespace irstensor {

double nmse(const Eigen::Ref<const ComplexMatrix>& estimate,
            const Eigen::Ref<const ComplexMatrix>& reference) {
  if (estimate.rows() != reference.rows() ||
      estimate.cols() != reference.cols())
    throw ShapeError("nmse: estimate/reference shape mismatch");
  const double den = reference.squaredNorm();
  if (!(den > 0.0)) throw NumericsError("nmse: zero reference");
  return (estimate - reference).squaredNorm() / den;
}

CrbReport crb_closed_form(double sigma2, int m, int d1, int n, int k, int t) {
  if (m < 1 || d1 < 1 || n < 1 || k < 1 || t < 1)
    throw ShapeError("crb_closed_form: dimensions must be >= 1");
  if (sigma2 < 0.0) throw NumericsError("crb_closed_form: sigma2 must be >= 0");
  CrbReport rep;
  rep.sigma2 = sigma2;
  const double coeffs = static_cast<double>(m) * n * d1;
  const double kt = static_cast<double>(k) * t;
  rep.trace_real = sigma2 * coeffs / (2.0 * kt);
  rep.trace_imag = rep.trace_real;
  return rep;
}

CrbReport crb_numerical(const ComplexMatrix& s, const ComplexMatrix& x,
                        Index d1, double sigma2) {
  if (d1 < 1) throw ShapeError("crb_numerical: d1 must be >= 1");
  if (!(sigma2 > 0.0))
    throw NumericsError("crb_numerical: sigma2 must be positive");
  // Gram of the combined design S (x) X (x) I_d1 acting on the composite
  // parameter.
  const ComplexMatrix w =
      kron(kron(s.adjoint() * s, x.adjoint() * x),
           ComplexMatrix::Identity(d1, d1));
  const Eigen::MatrixXd mbar = w.real();
  const Eigen::MatrixXd mtil = w.imag();

  Eigen::FullPivLU<Eigen::MatrixXd> lu_mbar(mbar);
  if (!lu_mbar.isInvertible())
    throw NumericsError("crb_numerical: singular information matrix");
  const Eigen::MatrixXd mbar_inv = lu_mbar.inverse();

  const Eigen::MatrixXd t1 = mbar + mtil * mbar_inv * mtil;
  Eigen::FullPivLU<Eigen::MatrixXd> lu_t1(t1);
  if (!lu_t1.isInvertible())
    throw NumericsError("crb_numerical: singular information matrix");
  const Eigen::MatrixXd t1_inv = lu_t1.inverse();

  CrbReport rep;
  rep.sigma2 = sigma2;
  rep.trace_real = 0.5 * sigma2 * t1_inv.trace();
  const Eigen::MatrixXd mid = mbar_inv * mtil * t1_inv * mtil * mbar_inv;
  rep.trace_imag = 0.5 * sigma2 * (mbar_inv.trace() - mid.trace());
  return rep;
}

namespace {

ConditionCheck ge(long long lhs, long long rhs) {
  return ConditionCheck{lhs >= rhs, lhs - rhs};
}

}  // namespace

DesignReport check_design(const SystemConfig& cfg, int rank_h, int rank_g) {
  cfg.validate();
  DesignReport rep;
  const bool stacked = cfg.U > 1 || cfg.P > 1;
  rep.d1 = stacked ? static_cast<Index>(cfg.P) * cfg.M : cfg.L;
  rep.d2 = stacked ? static_cast<Index>(cfg.U) * cfg.L : cfg.M;
  rep.n = cfg.N;
  rep.k = cfg.K;
  rep.t = cfg.T;

  if (rank_h < 0)
    rank_h = cfg.channel_model == ChannelModel::Geometric ? cfg.R1 : cfg.N;
  if (rank_g < 0)
    rank_g = cfg.channel_model == ChannelModel::Geometric ? cfg.R2 : cfg.N;

  const long long n = rep.n, k = rep.k, t = rep.t, d1 = rep.d1, d2 = rep.d2;
  // Generic rank of z = x * h_eff^T given the channel rank, and of g_eff.
  rep.rank_pilot_factor =
      std::min<long long>({t, d2, n, static_cast<long long>(rank_h)});
  rep.rank_mode1_factor =
      std::min<long long>({d1, n, static_cast<long long>(rank_g)});

  rep.krf_blocks = ge(k, n);
  rep.krf_slots = ge(t, d2);
  rep.bals_blocks = ge(k * std::min(t, d1), n);
  rep.bals_slots = ge(t, d2);
  const long long rank_s = std::min(k, n);
  rep.suff_pilot_side = ge(rank_s + rep.rank_pilot_factor, n + 1);
  rep.suff_mode1_side = ge(rank_s + rep.rank_mode1_factor, n + 1);
  rep.full_pilot_side = ge(rank_s + std::min(d2, n), n + 1);
  rep.full_mode1_side = ge(rank_s + std::min(d1, n), n + 1);
  rep.deficient_pilot_side = ge(rank_s + rank_h, n + 1);
  rep.deficient_mode1_side = ge(rank_s + rank_g, n + 1);
  rep.kruskal =
      ge(std::min(d1, n) + std::min(d2, n) + std::min(k, n), 2 * n + 2);
  return rep;
}

KrRankCheck khatri_rao_rank_check(const ComplexMatrix& a,
                                  const ComplexMatrix& b, double rel_tol) {
  if (a.cols() != b.cols())
    throw ShapeError("khatri_rao_rank_check: equal column counts required");
  KrRankCheck chk;
  chk.rank_a = numerical_rank(a, rel_tol);
  chk.rank_b = numerical_rank(b, rel_tol);
  chk.rank_kr = numerical_rank(khatri_rao(a, b), rel_tol);
  chk.bound = std::min(chk.rank_a + chk.rank_b - 1, a.cols());
  chk.bound_holds = chk.rank_kr >= chk.bound;
  return chk;
}

}  // namespace irstensor
