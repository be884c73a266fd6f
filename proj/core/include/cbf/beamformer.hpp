// beamformer.hpp
// Distortionless spatial filters. All constructors return w with
// w^H steering = 1 held to machine precision; they differ only in which
// covariance they minimize against:
//   wmpdr       variance-normalized output covariance
//   mpdr        unweighted output covariance
//   mvdr        mask-weighted noise covariance
//   wmpdr_joint variance-normalized covariance of the [x; xbar] stack,
//               which folds dereverberation into one long filter
// With a single frame of history disabled (taps == 0) wmpdr_joint is
// exactly wmpdr.

#pragma once

#include "cbf/numerics.hpp"
#include "cbf/types.hpp"

namespace cbf {

// Steering vector and its reference-normalized form. rtf[ref] == 1 exactly.
struct Steering {
  CVector v;
  CVector rtf;
  int ref = 0;
};

Steering make_steering(const CVector& v, int ref);

CVector wmpdr(const CMatrix& R, const Steering& s, double loading = kDefaultLoading);
CVector mpdr(const CMatrix& R, const Steering& s, double loading = kDefaultLoading);
CVector mvdr(const CMatrix& R_noise, const Steering& s, double loading = kDefaultLoading);

// R_joint covers the stacked [x; xbar] vector; the steering is zero-padded
// to that length internally.
CVector wmpdr_joint(const CMatrix& R_joint, const Steering& s,
                    double loading = kDefaultLoading);

// y_t = w^H frames_t; returns a length-T vector.
CVector apply_beamformer(const CVector& w, const CMatrix& frames);

}  // namespace cbf
