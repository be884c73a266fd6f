// simulate.hpp
// Seeded synthetic scenes directly in the time-frequency domain, with full
// component-level ground truth for oracle masks and metrics. Per bin the
// observation is
//   x_t = sum_i (v_i s_t^i + sum_tau a_tau^i s_{t-tau}^i) + n_t
// with lags tau running from `delay` to delay + late_taps - 1. Steering and
// echo responses come from short real-coefficient filters, so they vary
// smoothly across bins. Dry sources are short-time spectra of seeded white
// noise shaped by a wandering level envelope and gated per frame; when the
// framing metadata permits, a scene rendered to audio and re-analyzed stays
// close to the frame-domain ground truth.

#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "cbf/rtf.hpp"
#include "cbf/types.hpp"

namespace cbf {

struct SceneConfig {
  int sources = 1;
  int channels = 4;
  int num_bins = 33;
  int frames = 200;
  int delay = 2;        // first echo lag in frames
  int late_taps = 0;    // echoes per source; 0 = anechoic
  double reverb_level = 0.5;  // echo amplitude relative to the direct path
  double noise_level = 0.0;   // noise std per channel/bin/frame
  double activity = 1.0;      // probability a frame is active
  // When positive, source i is active exactly at frames where
  // (t + i * burst_period / sources) % burst_period == 0. This gives
  // non-overlapping, isolated excitations for exactness tests.
  int burst_period = 0;
  std::uint64_t seed = 0;
  double sample_rate = 16000.0;
  // 0 derives frame_len = 2 * (num_bins - 1), frame_shift = frame_len / 4.
  int frame_len = 0;
  int frame_shift = 0;

  void validate() const;
};

struct GroundTruth {
  // [source][bin] channels x frames; observation = sum of all components.
  std::vector<std::vector<CMatrix>> desired;
  std::vector<std::vector<CMatrix>> late;
  std::vector<CMatrix> noise;  // [bin] channels x frames
  std::vector<CMatrix> steering;  // [source] channels x bins
  std::vector<CMatrix> dry;       // [source] bins x frames

  // Desired signal at one channel as a bins x frames matrix.
  CMatrix desired_at(int source, int channel) const;
};

std::pair<Spectrogram, GroundTruth> generate_scene(const SceneConfig& cfg);

// Power-ratio masks at the reference channel:
// |d|^2 / (sum_j |d_j|^2 + |n|^2 + sum_j |r_j|^2), zero where nothing is
// active. Values land in [0, 1].
MaskSet oracle_masks(const GroundTruth& truth, int ref_channel = 0);

// Scale-invariant signal-to-distortion ratio in dB over any same-shape
// complex tensors, capped at 100 dB. The estimate is projected onto the
// reference with the least-squares complex scalar first.
double sdr_db(const CMatrix& est, const CMatrix& ref);

// Assignment of estimates to references maximizing summed |correlation|.
// Returns perm with est[k] matched to ref[perm[k]].
std::vector<int> match_sources(const std::vector<CMatrix>& est,
                               const std::vector<CMatrix>& ref);

// Bins x frames view of a single-channel spectrogram (output of run()).
CMatrix flatten_bins(const Spectrogram& spec, int channel = 0);

}  // namespace cbf
