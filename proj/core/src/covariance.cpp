#include "cbf/covariance.hpp"

#include <cmath>

namespace cbf {

RVector floored(const RVector& lambda, double eps) {
  if (lambda.size() == 0) throw InputError("floored: empty variance track");
  if ((lambda.array() < 0).any()) throw InputError("floored: negative variance");
  const double mean = lambda.mean();
  const double floor = mean > 0 ? eps * mean : eps;
  return lambda.cwiseMax(floor);
}

namespace {

// Columns scaled by 1/sqrt(T * lambda_t), so Gram matrices of the result are
// the variance-normalized covariances.
CMatrix normalized(const CMatrix& X, const RVector& lam) {
  const double T = static_cast<double>(X.cols());
  const CVector scale = (lam.array() * T).rsqrt().matrix().cast<Complex>();
  return X * scale.asDiagonal();
}

CMatrix gram(const CMatrix& X) {
  CMatrix G = CMatrix::Zero(X.rows(), X.rows());
  G.selfadjointView<Eigen::Lower>().rankUpdate(X);
  return CMatrix(G.selfadjointView<Eigen::Lower>());
}

}  // namespace

CovarianceSet accumulate(const StackedObservation& stacked, const RVector& lambda,
                         bool with_joint, double floor_eps) {
  const int T = stacked.num_frames();
  if (lambda.size() != T) throw InputError("accumulate: variance track length mismatch");
  const RVector lam = floored(lambda, floor_eps);

  const CMatrix Xc = normalized(stacked.frames, lam);
  CovarianceSet cov;
  cov.R = gram(Xc);

  const int M = stacked.cfg.channels;
  if (stacked.cfg.taps() > 0) {
    const CMatrix Xb = normalized(stacked.delayed, lam);
    cov.P = Xb * Xc.adjoint();
    cov.Rbar = gram(Xb);
    if (with_joint) {
      CMatrix Xj(Xc.rows() + Xb.rows(), T);
      Xj.topRows(Xc.rows()) = Xc;
      Xj.bottomRows(Xb.rows()) = Xb;
      cov.joint = gram(Xj);
    }
  } else {
    cov.P = CMatrix::Zero(0, M);
    cov.Rbar = CMatrix::Zero(0, 0);
    if (with_joint) cov.joint = cov.R;
  }
  return cov;
}

CMatrix beam_output_cov(const CMatrix& z_frames, const RVector& lambda,
                        double floor_eps) {
  if (z_frames.cols() == 0) throw InputError("beam_output_cov: no frames");
  if (lambda.size() != z_frames.cols()) {
    throw InputError("beam_output_cov: variance track length mismatch");
  }
  return gram(normalized(z_frames, floored(lambda, floor_eps)));
}

}  // namespace cbf
