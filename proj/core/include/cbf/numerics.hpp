// numerics.hpp
// Dense Hermitian linear algebra used by every estimator: regularized
// solves, eigenvalue-truncated pseudo-inverse application, principal
// eigenvectors and Kronecker products.

#pragma once

#include "cbf/types.hpp"

namespace cbf {

// Relative diagonal loading applied before factorizing Hermitian systems:
// A + loading * (tr(A) / n) * I.
inline constexpr double kDefaultLoading = 1e-8;

// Relative eigenvalue cutoff for pseudo-inverse application.
inline constexpr double kDefaultPinvTol = 1e-10;

// Solves A x = b for Hermitian A via pivoted LDL^T after diagonal loading.
// Throws InputError when A is not square/Hermitian (1e-8 relative asymmetry
// allowed) and NumericalError when the loaded system is still singular.
CVector hermitian_solve(const CMatrix& A, const CVector& b,
                        double loading = kDefaultLoading);
CMatrix hermitian_solve(const CMatrix& A, const CMatrix& B,
                        double loading = kDefaultLoading);

// Returns A^+ b for Hermitian PSD A. Eigenvalues below rel_tol times the
// largest magnitude eigenvalue are truncated; a zero matrix maps b to zero.
CVector pseudo_inverse_apply(const CMatrix& A, const CVector& b,
                             double rel_tol = kDefaultPinvTol);

// Unit-norm eigenvector of Hermitian B for its largest eigenvalue. The
// first entry of nonnegligible magnitude is rotated to be real positive so
// results are reproducible across runs.
CVector max_eigvec(const CMatrix& B);

// Kronecker product, row-major block convention: result block (i, j) equals
// A(i, j) * B.
CMatrix kron(const CMatrix& A, const CMatrix& B);

}  // namespace cbf
