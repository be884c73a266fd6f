#include "cbf/numerics.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace cbf {

namespace {

void check_hermitian(const CMatrix& A, const char* who) {
  if (A.rows() != A.cols()) throw InputError(std::string(who) + ": matrix not square");
  const double scale = A.norm();
  const double asym = (A - A.adjoint()).norm();
  if (scale > 0 && asym > 1e-8 * scale) {
    throw InputError(std::string(who) + ": matrix not Hermitian");
  }
}

CMatrix loaded(const CMatrix& A, double loading) {
  const Eigen::Index n = A.rows();
  CMatrix L = A;
  if (loading > 0) {
    const double shift = loading * A.trace().real() / static_cast<double>(n);
    L.diagonal().array() += shift;
  }
  return L;
}

}  // namespace

CMatrix hermitian_solve(const CMatrix& A, const CMatrix& B, double loading) {
  check_hermitian(A, "hermitian_solve");
  if (B.rows() != A.rows()) throw InputError("hermitian_solve: rhs row mismatch");
  const CMatrix Al = loaded(A, loading);
  Eigen::LDLT<CMatrix> ldlt(Al.selfadjointView<Eigen::Lower>());
  CMatrix X = ldlt.solve(B);
  // LDLT rarely reports failure; a residual check catches singular systems.
  const double resid = (Al.selfadjointView<Eigen::Lower>() * X - B).norm();
  const double ref = B.norm() + Al.norm() * X.norm();
  if (!(resid <= 1e-6 * (ref > 0 ? ref : 1.0))) {
    throw NumericalError("hermitian_solve: system singular after loading");
  }
  return X;
}

CVector hermitian_solve(const CMatrix& A, const CVector& b, double loading) {
  return CVector(hermitian_solve(A, CMatrix(b), loading));
}

CVector pseudo_inverse_apply(const CMatrix& A, const CVector& b, double rel_tol) {
  check_hermitian(A, "pseudo_inverse_apply");
  if (b.size() != A.rows()) throw InputError("pseudo_inverse_apply: rhs size mismatch");
  const CMatrix H = 0.5 * (A + A.adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(H);
  if (eig.info() != Eigen::Success) {
    throw NumericalError("pseudo_inverse_apply: eigendecomposition failed");
  }
  const RVector& ev = eig.eigenvalues();
  const double cutoff = rel_tol * ev.cwiseAbs().maxCoeff();
  CVector proj = eig.eigenvectors().adjoint() * b;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    const double mag = std::abs(ev[i]);
    proj[i] = (mag > cutoff && mag > 0) ? proj[i] / ev[i] : Complex(0);
  }
  return eig.eigenvectors() * proj;
}

CVector max_eigvec(const CMatrix& B) {
  check_hermitian(B, "max_eigvec");
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(0.5 * (B + B.adjoint()));
  if (eig.info() != Eigen::Success) {
    throw NumericalError("max_eigvec: eigendecomposition failed to converge");
  }
  // Eigenvalues come back ascending; the last column is the principal one.
  CVector v = eig.eigenvectors().col(B.rows() - 1);
  v.normalize();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double mag = std::abs(v[i]);
    if (mag > 1e-12) {
      v *= std::conj(v[i]) / mag;
      break;
    }
  }
  return v;
}

CMatrix kron(const CMatrix& A, const CMatrix& B) {
  CMatrix K(A.rows() * B.rows(), A.cols() * B.cols());
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    for (Eigen::Index j = 0; j < A.cols(); ++j) {
      K.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
    }
  }
  return K;
}

}  // namespace cbf
