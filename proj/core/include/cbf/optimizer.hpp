// optimizer.hpp
// Iterative enhancement drivers. Every method alternates closed-form filter
// updates with per-frame variance re-estimation lambda <- |y|^2 and works on
// frequency bins independently (bins are the parallelism unit; per-iteration
// trace aggregation is the only synchronization point).
//
// Methods:
//   source_wise            per-source long-term predictor + weighted
//                          distortionless beamformer, shared variance track
//   source_packed_fast     one shared predictor for all sources, normal
//                          equations assembled from per-source covariances,
//                          plus residual-subspace terms when M > I
//   source_packed_brute    same filter from direct regressor summation,
//                          no residual-subspace terms
//   cascade_*              stage-wise baselines: predictor variances follow
//                          the dereverberated signal (separate scheme) or
//                          the beamformer output (integrated scheme)
//   miso_direct            single long filter over [x; xbar] solved in one
//                          constrained step per iteration

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cbf/covariance.hpp"
#include "cbf/rtf.hpp"
#include "cbf/types.hpp"
#include "cbf/wpe.hpp"

namespace cbf {

enum class Method {
  kSourceWise,
  kSourcePackedFast,
  kSourcePackedBrute,
  kCascadeMpdr,
  kCascadeMvdr,
  kCascadeWmpdrSeparate,
  kCascadeMpdrIntegrated,
  kMisoDirect,
};

std::string method_name(Method m);
Method method_from_name(const std::string& name);

// Filter span per frequency band: bins strictly below max_hz use `length`
// total frames. The last entry should have max_hz = infinity.
struct BandTaps {
  double max_hz = 0.0;
  int length = 1;
};

std::vector<BandTaps> default_bands();

struct RunConfig {
  Method method = Method::kSourceWise;
  int iterations = 10;
  int delay = 4;
  std::vector<BandTaps> bands = default_bands();
  double variance_floor = kDefaultVarianceFloor;
  double loading = kDefaultLoading;
  double pinv_tol = kDefaultPinvTol;
  double mask_clamp = kDefaultMaskClamp;
  bool complement = true;  // residual-subspace terms in source_packed_fast
  int ref_channel = 0;
  int threads = 0;  // 0 = hardware concurrency
  int brute_row_cap = kDefaultBruteRowCap;
  // When set, per-source steering vectors (channels x bins per source) used
  // as-is instead of per-iteration estimation from masks.
  std::optional<std::vector<CMatrix>> fixed_steering;

  int filter_length_for(double hz) const;
  void validate(int channels, int sources) const;
};

// Per-iteration diagnostics, aggregated over bins: objective summed,
// constraint residuals maxed, per-bin compute time summed.
struct Trace {
  std::vector<double> objective;
  std::vector<double> seconds;
  std::vector<double> constraint_residual;
};

struct RunResult {
  std::vector<Spectrogram> sources;  // one single-channel spectrogram each
  Trace trace;
};

// Maximum-likelihood objective for one bin:
// sum_i (1/T) sum_t (|y_t^(i)|^2 / lambda_t^(i) + log lambda_t^(i)).
double ml_objective(const std::vector<CVector>& outputs,
                    const std::vector<RVector>& lambdas);

// lambda_t = max(|y_t|^2, floor); see floored().
RVector update_variances(const CVector& y, double floor_eps = kDefaultVarianceFloor);

RunResult run_source_wise(const Spectrogram& spec, const MaskSet& masks,
                          int target, const RunConfig& cfg);
RunResult run_source_packed(const Spectrogram& spec, const MaskSet& masks,
                            const RunConfig& cfg);
RunResult run_cascade(const Spectrogram& spec, const MaskSet& masks,
                      const RunConfig& cfg);
RunResult run_miso_direct(const Spectrogram& spec, const MaskSet& masks,
                          int target, const RunConfig& cfg);

// Dispatch on cfg.method; single-target methods loop over all sources.
RunResult run(const Spectrogram& spec, const MaskSet& masks, const RunConfig& cfg);

// Line-delimited records: one config line then one line per iteration.
// Timing fields are omitted when include_timing is false so logs compare
// byte-for-byte across runs.
void write_run_log(std::ostream& os, const RunConfig& cfg, const Trace& trace,
                   bool include_timing = true);

}  // namespace cbf
