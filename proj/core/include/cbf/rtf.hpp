// rtf.hpp
// Relative transfer function estimation from time-frequency masks.
// Mask-weighted covariances split the observation into a target part and an
// everything-else part; the steering estimate is the principal generalized
// eigenvector of that pair, mapped back through the non-target covariance
// so a rank-one target covariance is recovered exactly.

#pragma once

#include <utility>
#include <vector>

#include "cbf/beamformer.hpp"
#include "cbf/types.hpp"

namespace cbf {

inline constexpr double kDefaultMaskClamp = 1e-4;

// Per-source masks in [0, 1], each frames x bins.
struct MaskSet {
  std::vector<RMatrix> gamma;

  int sources() const { return static_cast<int>(gamma.size()); }
  int frames() const { return gamma.empty() ? 0 : static_cast<int>(gamma[0].rows()); }
  int num_bins() const { return gamma.empty() ? 0 : static_cast<int>(gamma[0].cols()); }
  void validate() const;
};

// Returns {target, rest}: sum gamma_t z z^H / sum gamma_t and the same with
// 1 - gamma. Masks are clamped to [clamp, 1 - clamp] first so neither
// denominator can vanish. z_frames: M x T, gamma: length T.
std::pair<CMatrix, CMatrix> masked_covariances(const CMatrix& z_frames,
                                               const RVector& gamma,
                                               double clamp = kDefaultMaskClamp);

// Principal direction of R_target against R_rest via Cholesky whitening of
// the loaded R_rest. The result is scaled back by the loaded R_rest and
// normalized at the reference channel.
Steering estimate_steering(const CMatrix& R_target, const CMatrix& R_rest,
                           int ref = 0, double loading = kDefaultLoading);

}  // namespace cbf
