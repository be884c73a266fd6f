// covariance.hpp
// Variance-normalized covariance statistics. Every accumulator divides each
// frame's outer product by that frame's variance estimate and by the frame
// count, after flooring the variance track to avoid division blowups.

#pragma once

#include <optional>

#include "cbf/stacking.hpp"
#include "cbf/types.hpp"

namespace cbf {

inline constexpr double kDefaultVarianceFloor = 1e-6;

// max(lambda_t, eps * mean(lambda)); an all-zero track becomes eps.
RVector floored(const RVector& lambda, double eps = kDefaultVarianceFloor);

struct CovarianceSet {
  CMatrix R;     // M x M            sum x x^H / lambda / T
  CMatrix P;     // M*taps x M       sum xbar x^H / lambda / T
  CMatrix Rbar;  // M*taps x M*taps  sum xbar xbar^H / lambda / T
  // sum of joint outer products; block structure [[R, P^H], [P, Rbar]].
  std::optional<CMatrix> joint;
};

CovarianceSet accumulate(const StackedObservation& stacked, const RVector& lambda,
                         bool with_joint = false,
                         double floor_eps = kDefaultVarianceFloor);

// (1/T) sum z_t z_t^H / lambda_t for beamformer inputs z (M x T).
CMatrix beam_output_cov(const CMatrix& z_frames, const RVector& lambda,
                        double floor_eps = kDefaultVarianceFloor);

}  // namespace cbf
