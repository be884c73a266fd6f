#include "cbf/beamformer.hpp"

#include <cmath>

namespace cbf {

Steering make_steering(const CVector& v, int ref) {
  if (v.size() == 0) throw InputError("make_steering: empty steering vector");
  if (ref < 0 || ref >= v.size()) throw InputError("make_steering: reference out of range");
  const double mag = std::abs(v[ref]);
  if (!(mag > 1e-12 * v.norm())) {
    throw NumericalError("make_steering: reference entry numerically zero");
  }
  Steering s;
  s.v = v;
  s.ref = ref;
  s.rtf = v / v[ref];
  s.rtf[ref] = Complex(1.0, 0.0);
  return s;
}

namespace {

// Minimum of w^H R w subject to w^H d = 1. Dividing by the complex inner
// product keeps the constraint exact up to one rounding.
CVector constrained_min(const CMatrix& R, const CVector& d, double loading,
                        const char* who) {
  const CVector u = hermitian_solve(R, d, loading);
  const Complex denom = d.dot(u);  // d^H R^-1 d
  if (!(std::abs(denom) > 0) || !std::isfinite(std::abs(denom))) {
    throw NumericalError(std::string(who) + ": normalization numerically zero");
  }
  return u / denom;
}

}  // namespace

CVector wmpdr(const CMatrix& R, const Steering& s, double loading) {
  if (R.rows() != s.rtf.size()) throw InputError("wmpdr: size mismatch");
  return constrained_min(R, s.rtf, loading, "wmpdr");
}

CVector mpdr(const CMatrix& R, const Steering& s, double loading) {
  if (R.rows() != s.rtf.size()) throw InputError("mpdr: size mismatch");
  return constrained_min(R, s.rtf, loading, "mpdr");
}

CVector mvdr(const CMatrix& R_noise, const Steering& s, double loading) {
  if (R_noise.rows() != s.rtf.size()) throw InputError("mvdr: size mismatch");
  return constrained_min(R_noise, s.rtf, loading, "mvdr");
}

CVector wmpdr_joint(const CMatrix& R_joint, const Steering& s, double loading) {
  const Eigen::Index n = R_joint.rows();
  const Eigen::Index M = s.rtf.size();
  if (n < M) throw InputError("wmpdr_joint: joint covariance smaller than steering");
  CVector d = CVector::Zero(n);
  d.head(M) = s.rtf;
  return constrained_min(R_joint, d, loading, "wmpdr_joint");
}

CVector apply_beamformer(const CVector& w, const CMatrix& frames) {
  if (w.size() != frames.rows()) throw InputError("apply_beamformer: size mismatch");
  return (w.adjoint() * frames).transpose();
}

}  // namespace cbf
