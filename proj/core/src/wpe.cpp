#include "cbf/wpe.hpp"

#include <Eigen/QR>

#include <string>

namespace cbf {

CMatrix apply_prediction(const StackedObservation& stacked, const CMatrix& G) {
  if (stacked.cfg.taps() == 0) {
    if (G.size() != 0) throw InputError("apply_prediction: filter given but no taps");
    return stacked.frames;
  }
  if (G.rows() != stacked.cfg.stacked_size() || G.cols() != stacked.cfg.channels) {
    throw InputError("apply_prediction: filter shape mismatch");
  }
  return stacked.frames - G.adjoint() * stacked.delayed;
}

CMatrix single_target_wpe(const CovarianceSet& cov, double loading) {
  if (cov.Rbar.rows() == 0) throw InputError("single_target_wpe: no taps");
  return hermitian_solve(cov.Rbar, cov.P, loading);
}

NormalEquations packed_normal_equations_brute(const StackedObservation& stacked,
                                              const CMatrix& Q,
                                              const std::vector<RVector>& lambdas,
                                              int max_rows, double floor_eps) {
  const int M = stacked.cfg.channels;
  const int taps = stacked.cfg.taps();
  const int T = stacked.num_frames();
  const int I = static_cast<int>(Q.cols());
  if (taps == 0) throw InputError("packed_normal_equations_brute: no taps");
  if (Q.rows() != M) throw InputError("packed_normal_equations_brute: Q row mismatch");
  if (static_cast<int>(lambdas.size()) != I) {
    throw InputError("packed_normal_equations_brute: one variance track per source required");
  }
  const Eigen::Index rows = static_cast<Eigen::Index>(M) * M * taps;
  if (max_rows > 0 && rows > max_rows) {
    throw InputError("packed_normal_equations_brute: " + std::to_string(rows) +
                     " rows exceed the cap of " + std::to_string(max_rows) +
                     " (raise max_rows to override)");
  }

  std::vector<RVector> lam(lambdas.size());
  for (size_t i = 0; i < lambdas.size(); ++i) {
    if (lambdas[i].size() != T) {
      throw InputError("packed_normal_equations_brute: variance track length mismatch");
    }
    lam[i] = floored(lambdas[i], floor_eps);
  }

  NormalEquations eqs;
  eqs.Psi = CMatrix::Zero(rows, rows);
  eqs.psi = CVector::Zero(rows);
  CMatrix phi(M, M);
  for (int t = 0; t < T; ++t) {
    phi.setZero();
    for (int i = 0; i < I; ++i) {
      phi.noalias() += Q.col(i) * Q.col(i).adjoint() / lam[i][t];
    }
    const CMatrix Xt = stacked_regressor(stacked.delayed.col(t), M);
    const CMatrix phiX = phi * Xt;
    eqs.Psi.noalias() += Xt.adjoint() * phiX;
    eqs.psi.noalias() += phiX.adjoint() * stacked.frames.col(t);
  }
  eqs.Psi /= static_cast<double>(T);
  eqs.psi /= static_cast<double>(T);
  return eqs;
}

NormalEquations packed_normal_equations_fast(const std::vector<CovarianceSet>& covs,
                                             const CMatrix& Q) {
  const int I = static_cast<int>(Q.cols());
  if (covs.size() != static_cast<size_t>(I)) {
    throw InputError("packed_normal_equations_fast: one covariance set per source required");
  }
  if (I == 0) throw InputError("packed_normal_equations_fast: no sources");
  const int M = static_cast<int>(Q.rows());
  const Eigen::Index n = covs[0].Rbar.rows();
  if (n == 0) throw InputError("packed_normal_equations_fast: no taps");

  NormalEquations eqs;
  eqs.Psi = CMatrix::Zero(static_cast<Eigen::Index>(M) * n, static_cast<Eigen::Index>(M) * n);
  eqs.psi = CVector::Zero(static_cast<Eigen::Index>(M) * n);
  for (int i = 0; i < I; ++i) {
    if (covs[i].Rbar.rows() != n) {
      throw InputError("packed_normal_equations_fast: covariance size mismatch");
    }
    const CMatrix qq = Q.col(i) * Q.col(i).adjoint();
    eqs.Psi.noalias() += kron(qq, covs[i].Rbar.transpose());
    const CVector w = (covs[i].P * Q.col(i)).conjugate();
    for (int m = 0; m < M; ++m) {
      eqs.psi.segment(static_cast<Eigen::Index>(m) * n, n) += Q(m, i) * w;
    }
  }
  return eqs;
}

CMatrix orthonormal_complement(const CMatrix& Q) {
  const Eigen::Index M = Q.rows();
  const Eigen::Index I = Q.cols();
  if (I >= M) return CMatrix::Zero(M, 0);
  Eigen::HouseholderQR<CMatrix> qr(Q);
  const CMatrix U = qr.householderQ();
  return U.rightCols(M - I);
}

void add_complement_terms(NormalEquations& eqs, const CMatrix& basis,
                          const CovarianceSet& comp_cov) {
  if (basis.cols() == 0) return;
  const int M = static_cast<int>(basis.rows());
  const Eigen::Index n = comp_cov.Rbar.rows();
  if (eqs.Psi.rows() != static_cast<Eigen::Index>(M) * n) {
    throw InputError("add_complement_terms: size mismatch");
  }
  const CMatrix bb = basis * basis.adjoint();
  eqs.Psi.noalias() += kron(bb, comp_cov.Rbar.transpose());
  for (Eigen::Index j = 0; j < basis.cols(); ++j) {
    const CVector w = (comp_cov.P * basis.col(j)).conjugate();
    for (int m = 0; m < M; ++m) {
      eqs.psi.segment(static_cast<Eigen::Index>(m) * n, n) += basis(m, j) * w;
    }
  }
}

namespace {

CMatrix solve_packed(const NormalEquations& eqs, int channels, double pinv_tol) {
  const CVector g = pseudo_inverse_apply(eqs.Psi, eqs.psi, pinv_tol);
  const Eigen::Index n = eqs.Psi.rows() / channels;
  return matricize_filter(g, static_cast<int>(n), channels);
}

}  // namespace

CMatrix multiple_target_wpe_brute(const StackedObservation& stacked, const CMatrix& Q,
                                  const std::vector<RVector>& lambdas,
                                  double pinv_tol, int max_rows) {
  const NormalEquations eqs =
      packed_normal_equations_brute(stacked, Q, lambdas, max_rows);
  return solve_packed(eqs, stacked.cfg.channels, pinv_tol);
}

CMatrix multiple_target_wpe_fast(const std::vector<CovarianceSet>& covs,
                                 const CMatrix& Q, const CovarianceSet* comp_cov,
                                 const CMatrix* comp_basis, double pinv_tol) {
  NormalEquations eqs = packed_normal_equations_fast(covs, Q);
  if (comp_cov != nullptr && comp_basis != nullptr) {
    add_complement_terms(eqs, *comp_basis, *comp_cov);
  }
  return solve_packed(eqs, static_cast<int>(Q.rows()), pinv_tol);
}

}  // namespace cbf
