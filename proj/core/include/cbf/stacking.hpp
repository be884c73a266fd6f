// stacking.hpp
// Delayed-frame stacking for convolutional filtering. For a filter of total
// span `length` frames with prediction delay `delay`, frame t gets the
// history column xbar_t = [x_{t-delay}; x_{t-delay-1}; ...; x_{t-length+1}]
// with zeros where the history runs off the start of the signal.

#pragma once

#include "cbf/types.hpp"

namespace cbf {

struct StackConfig {
  int length = 1;    // total filter span in frames, current frame included
  int delay = 1;     // first predicted-from lag
  int channels = 1;  // M

  // Number of delayed taps, length - delay. length == 1 means no history.
  int taps() const { return length > delay ? length - delay : 0; }
  int stacked_size() const { return channels * taps(); }
  int joint_size() const { return channels * (taps() + 1); }
  void validate() const;
};

struct StackedObservation {
  CMatrix frames;   // M x T, column t is x_t
  CMatrix delayed;  // M * taps x T, column t is xbar_t
  StackConfig cfg;

  int num_frames() const { return static_cast<int>(frames.cols()); }
  // [x_t; xbar_t], the first M entries always equal x_t.
  CVector joint(int t) const;
  // All joint columns as one matrix, M * (taps + 1) x T.
  CMatrix joint_frames() const;
};

// bin_frames: M x T slice of one frequency bin.
StackedObservation stack(const CMatrix& bin_frames, const StackConfig& cfg);

// Regression matrix for the vectorized filter, I_M kron xbar^T. Row m holds
// xbar^T in the m-th block of columns, so stacked_regressor(xbar, M) * g
// equals G^H xbar when g = vectorize_filter(G).
CMatrix stacked_regressor(const CVector& xbar, int channels);

// Concatenated conjugated columns of G (size rows * channels).
CVector vectorize_filter(const CMatrix& G);
CMatrix matricize_filter(const CVector& g, int rows, int channels);

}  // namespace cbf
