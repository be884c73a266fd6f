#include "cbf/rtf.hpp"

#include <Eigen/Cholesky>

#include <cmath>

#include "cbf/numerics.hpp"

namespace cbf {

void MaskSet::validate() const {
  if (gamma.empty()) throw InputError("MaskSet: no sources");
  for (const auto& g : gamma) {
    if (g.rows() != gamma[0].rows() || g.cols() != gamma[0].cols()) {
      throw InputError("MaskSet: inconsistent mask shapes");
    }
    if ((g.array() < 0.0).any() || (g.array() > 1.0).any()) {
      throw InputError("MaskSet: mask values outside [0, 1]");
    }
  }
}

std::pair<CMatrix, CMatrix> masked_covariances(const CMatrix& z_frames,
                                               const RVector& gamma, double clamp) {
  const Eigen::Index T = z_frames.cols();
  if (gamma.size() != T) throw InputError("masked_covariances: mask length mismatch");
  if (T == 0) throw InputError("masked_covariances: no frames");

  const RVector g = gamma.cwiseMax(clamp).cwiseMin(1.0 - clamp);
  const double wt = g.sum();
  const double wn = static_cast<double>(T) - wt;

  const CVector st = (g.array() / wt).sqrt().matrix().cast<Complex>();
  const CVector sn = ((1.0 - g.array()) / wn).sqrt().matrix().cast<Complex>();
  const CMatrix Zt = z_frames * st.asDiagonal();
  const CMatrix Zn = z_frames * sn.asDiagonal();

  const Eigen::Index M = z_frames.rows();
  CMatrix Rt = CMatrix::Zero(M, M);
  Rt.selfadjointView<Eigen::Lower>().rankUpdate(Zt);
  CMatrix Rn = CMatrix::Zero(M, M);
  Rn.selfadjointView<Eigen::Lower>().rankUpdate(Zn);
  return {CMatrix(Rt.selfadjointView<Eigen::Lower>()),
          CMatrix(Rn.selfadjointView<Eigen::Lower>())};
}

Steering estimate_steering(const CMatrix& R_target, const CMatrix& R_rest,
                           int ref, double loading) {
  if (R_target.rows() != R_target.cols() || R_rest.rows() != R_rest.cols() ||
      R_target.rows() != R_rest.rows()) {
    throw InputError("estimate_steering: covariance size mismatch");
  }
  const Eigen::Index M = R_target.rows();

  CMatrix A = R_rest;
  const double shift = loading * A.trace().real() / static_cast<double>(M);
  A.diagonal().array() += shift;
  Eigen::LLT<CMatrix> llt(A);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("estimate_steering: whitening factorization failed");
  }
  const CMatrix L = llt.matrixL();

  // B = L^-1 R_target L^-H is Hermitian; its principal eigenvector u gives
  // the generalized pair (R_target, A) via L^-H u, and scaling back by A
  // collapses to v = L u.
  CMatrix B = L.triangularView<Eigen::Lower>().solve(R_target);
  B = L.triangularView<Eigen::Lower>().solve(CMatrix(B.adjoint())).adjoint();
  const CVector u = max_eigvec(0.5 * (B + B.adjoint()));
  const CVector v = L.triangularView<Eigen::Lower>() * u;
  return make_steering(v, ref);
}

}  // namespace cbf
