// wpe.hpp
// Long-term linear prediction filters that subtract late reverberation.
// Filters G live in M*taps x M matrices: z_t = x_t - G^H xbar_t.
//
// The multi-source variants estimate one shared filter whose weighting
// couples all beamformers: per frame the weight matrix is
// sum_i q_i q_i^H / lambda_t^(i). The brute builder accumulates the normal
// equations frame by frame from the expanded regressors; the fast builder
// assembles the same matrices from per-source covariances and Kronecker
// products, which is algebraically identical and much cheaper.

#pragma once

#include <vector>

#include "cbf/covariance.hpp"
#include "cbf/numerics.hpp"
#include "cbf/stacking.hpp"
#include "cbf/types.hpp"

namespace cbf {

// z = x - G^H xbar for every frame; returns M x T.
CMatrix apply_prediction(const StackedObservation& stacked, const CMatrix& G);

// Weighted least squares predictor for one variance track: G = Rbar^-1 P.
CMatrix single_target_wpe(const CovarianceSet& cov,
                          double loading = kDefaultLoading);

// Normal equations for the vectorized shared filter g: Psi g = psi.
struct NormalEquations {
  CMatrix Psi;  // M^2 * taps square
  CVector psi;
};

inline constexpr int kDefaultBruteRowCap = 4096;

// Direct summation over expanded regressors. Q holds the beamformers as
// columns (M x I); lambdas holds one variance track per source. Refuses to
// allocate when M^2 * taps exceeds max_rows (<= 0 lifts the cap).
NormalEquations packed_normal_equations_brute(
    const StackedObservation& stacked, const CMatrix& Q,
    const std::vector<RVector>& lambdas, int max_rows = kDefaultBruteRowCap,
    double floor_eps = kDefaultVarianceFloor);

// Kronecker assembly from per-source variance-normalized covariances,
// covs[i] accumulated with source i's track.
NormalEquations packed_normal_equations_fast(const std::vector<CovarianceSet>& covs,
                                             const CMatrix& Q);

// Orthonormal basis of the orthogonal complement of span(Q); M x (M - I).
CMatrix orthonormal_complement(const CMatrix& Q);

// Adds the complement-subspace terms (shared residual covariance comp_cov,
// orthonormal basis columns) to existing normal equations.
void add_complement_terms(NormalEquations& eqs, const CMatrix& basis,
                          const CovarianceSet& comp_cov);

// Solve + reshape wrappers. The complement pieces are optional; pass null
// when M == I or the extension is disabled.
CMatrix multiple_target_wpe_brute(const StackedObservation& stacked,
                                  const CMatrix& Q,
                                  const std::vector<RVector>& lambdas,
                                  double pinv_tol = kDefaultPinvTol,
                                  int max_rows = kDefaultBruteRowCap);
CMatrix multiple_target_wpe_fast(const std::vector<CovarianceSet>& covs,
                                 const CMatrix& Q,
                                 const CovarianceSet* comp_cov = nullptr,
                                 const CMatrix* comp_basis = nullptr,
                                 double pinv_tol = kDefaultPinvTol);

}  // namespace cbf
