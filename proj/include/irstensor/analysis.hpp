#pragma once

#include "irstensor/system_model.hpp"
#include "irstensor/types.hpp"

namespace irstensor {

// ||estimate - reference||_F^2 / ||reference||_F^2. Throws on shape mismatch
// or a zero reference.
double nmse(const Eigen::Ref<const ComplexMatrix>& estimate,
            const Eigen::Ref<const ComplexMatrix>& reference);

struct CrbReport {
  double sigma2 = 0.0;
  double trace_real = 0.0;  // bound on the real part of the composite vector
  double trace_imag = 0.0;  // bound on the imaginary part
  double trace_total() const { return trace_real + trace_imag; }
};

// Orthogonal-design bound: each real/imaginary coefficient pair of the
// composite parameter is bounded by sigma2/(2KT), so the total is
// sigma2 * m * n * d1 / (K * T). `m` is the pilot-side dimension and `d1`
// the mode-1 dimension (M and L in the single-terminal layout).
CrbReport crb_closed_form(double sigma2, int m, int d1, int n, int k, int t);

// Bound for arbitrary designs from the information matrix of the stacked
// real parameterization; reduces to the closed form when S and X are
// orthogonal. Throws NumericsError when the information matrix is singular.
CrbReport crb_numerical(const ComplexMatrix& s, const ComplexMatrix& x,
                        Index d1, double sigma2);

struct ConditionCheck {
  bool pass = false;
  long long margin = 0;  // lhs - rhs of the inequality (>= 0 iff pass)
};

// Identifiability / feasibility conditions evaluated on the effective
// dimensions (d1, d2) of the configured layout. The *_pilot_side conditions
// concern the factor z = x * h_eff^T, the *_mode1_side ones the factor g_eff.
struct DesignReport {
  Index d1 = 0, d2 = 0, n = 0, k = 0, t = 0;
  Index rank_pilot_factor = 0, rank_mode1_factor = 0;
  ConditionCheck krf_blocks;           // K >= N
  ConditionCheck krf_slots;            // T >= d2
  ConditionCheck bals_blocks;          // K * min(T, d1) >= N
  ConditionCheck bals_slots;           // T >= d2
  ConditionCheck suff_pilot_side;      // rank(S) + rank(z) >= N + 1
  ConditionCheck suff_mode1_side;      // rank(S) + rank(g_eff) >= N + 1
  ConditionCheck full_pilot_side;      // min(K,N) + min(d2,N) >= N + 1
  ConditionCheck full_mode1_side;      // min(K,N) + min(d1,N) >= N + 1
  ConditionCheck deficient_pilot_side; // min(K,N) + rank_pilot >= N + 1
  ConditionCheck deficient_mode1_side; // min(K,N) + rank_mode1 >= N + 1
  ConditionCheck kruskal;  // min(d1,N)+min(d2,N)+min(K,N) >= 2N+2

  bool ls_feasible() const { return krf_blocks.pass && krf_slots.pass; }
  bool krf_feasible() const { return ls_feasible(); }
  bool bals_feasible() const { return bals_blocks.pass && bals_slots.pass; }
  bool tals_feasible() const { return kruskal.pass && bals_slots.pass; }
  bool block_ls_feasible() const { return bals_slots.pass; }
};

// rank_h / rank_g: known ranks of the physical channels (pass -1 for full;
// geometric configs default to their path counts R1 / R2).
DesignReport check_design(const SystemConfig& cfg, int rank_h = -1,
                          int rank_g = -1);

struct KrRankCheck {
  Index rank_a = 0, rank_b = 0, rank_kr = 0;
  Index bound = 0;  // min(rank_a + rank_b - 1, cols)
  bool bound_holds = false;
};

// Numerical check of the column-wise product rank bound
// rank(a kr b) >= min(rank a + rank b - 1, cols).
KrRankCheck khatri_rao_rank_check(const ComplexMatrix& a,
                                  const ComplexMatrix& b,
                                  double rel_tol = -1.0);

}  // namespace irstensor
