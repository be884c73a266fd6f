// types.hpp
// Shared scalar/matrix aliases, container types and error classes.

#pragma once

#include <Eigen/Dense>

#include <complex>
#include <stdexcept>
#include <vector>

namespace cbf {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

// Malformed caller input: bad shapes, values out of range, unparsable files.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Numerical breakdown that survived regularization (singular systems,
// eigensolver non-convergence, degenerate normalizations).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Multichannel time-domain signal, one row per channel.
struct TimeSignal {
  RMatrix samples;  // channels x samples
  double sample_rate = 16000.0;

  int channels() const { return static_cast<int>(samples.rows()); }
  Eigen::Index num_samples() const { return samples.cols(); }
};

// Multichannel STFT tensor. bins[f] holds the channels x frames slice of
// bin f, so a column is the spatial snapshot x_t used everywhere downstream.
struct Spectrogram {
  std::vector<CMatrix> bins;
  int frame_len = 0;
  int frame_shift = 0;
  double sample_rate = 16000.0;

  int channels() const { return bins.empty() ? 0 : static_cast<int>(bins[0].rows()); }
  int frames() const { return bins.empty() ? 0 : static_cast<int>(bins[0].cols()); }
  int num_bins() const { return static_cast<int>(bins.size()); }
  double bin_hz(int f) const {
    return frame_len > 0 ? f * sample_rate / frame_len : 0.0;
  }
};

}  // namespace cbf
