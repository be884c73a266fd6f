#include "cbf/stacking.hpp"

namespace cbf {

void StackConfig::validate() const {
  if (channels < 1) throw InputError("StackConfig: channels must be >= 1");
  if (delay < 1) throw InputError("StackConfig: delay must be >= 1");
  if (length < 1) throw InputError("StackConfig: length must be >= 1");
  if (length > 1 && length <= delay) {
    throw InputError("StackConfig: length must exceed delay (or be 1 for no taps)");
  }
}

CVector StackedObservation::joint(int t) const {
  CVector x(cfg.joint_size());
  x.head(cfg.channels) = frames.col(t);
  if (cfg.taps() > 0) x.tail(cfg.stacked_size()) = delayed.col(t);
  return x;
}

CMatrix StackedObservation::joint_frames() const {
  CMatrix X(cfg.joint_size(), frames.cols());
  X.topRows(cfg.channels) = frames;
  if (cfg.taps() > 0) X.bottomRows(cfg.stacked_size()) = delayed;
  return X;
}

StackedObservation stack(const CMatrix& bin_frames, const StackConfig& cfg) {
  cfg.validate();
  if (bin_frames.rows() != cfg.channels) {
    throw InputError("stack: channel count does not match config");
  }
  if (bin_frames.cols() == 0) throw InputError("stack: no frames");

  const int M = cfg.channels;
  const int T = static_cast<int>(bin_frames.cols());
  const int taps = cfg.taps();

  StackedObservation out;
  out.cfg = cfg;
  out.frames = bin_frames;
  out.delayed = CMatrix::Zero(cfg.stacked_size(), T);
  for (int t = 0; t < T; ++t) {
    for (int j = 0; j < taps; ++j) {
      const int src = t - cfg.delay - j;
      if (src >= 0) out.delayed.block(j * M, t, M, 1) = bin_frames.col(src);
    }
  }
  return out;
}

CMatrix stacked_regressor(const CVector& xbar, int channels) {
  const Eigen::Index n = xbar.size();
  CMatrix X = CMatrix::Zero(channels, channels * n);
  for (int m = 0; m < channels; ++m) {
    X.block(m, m * n, 1, n) = xbar.transpose();
  }
  return X;
}

CVector vectorize_filter(const CMatrix& G) {
  const Eigen::Index rows = G.rows();
  CVector g(rows * G.cols());
  for (Eigen::Index m = 0; m < G.cols(); ++m) {
    g.segment(m * rows, rows) = G.col(m).conjugate();
  }
  return g;
}

CMatrix matricize_filter(const CVector& g, int rows, int channels) {
  if (g.size() != static_cast<Eigen::Index>(rows) * channels) {
    throw InputError("matricize_filter: size mismatch");
  }
  CMatrix G(rows, channels);
  for (int m = 0; m < channels; ++m) {
    G.col(m) = g.segment(static_cast<Eigen::Index>(m) * rows, rows).conjugate();
  }
  return G;
}

}  // namespace cbf
