// stft.hpp
// Short-time analysis and overlap-add synthesis.
//
// analyze() zero-pads the signal tail so the last frame is full; the frame
// count is ceil(samples / frame_shift). synthesize() divides by the summed
// squared window, which makes analyze -> synthesize an identity wherever
// that sum is nonzero (everything except the very first sample for a Hann
// window and the padded tail).

#pragma once

#include "cbf/types.hpp"

namespace cbf {

enum class Window { kHann };

// Periodic Hann: w[n] = 0.5 * (1 - cos(2 pi n / len)).
RVector make_window(Window kind, int len);

// signal: channels x samples. Requires frame_shift to divide frame_len.
Spectrogram analyze(const TimeSignal& signal, int frame_len, int frame_shift,
                    Window window = Window::kHann);

// Weighted overlap-add inverse. Returns frames * frame_shift samples unless
// trim_len >= 0 asks for a specific length (the tail is zero-padded if the
// request runs past the reconstructed range).
TimeSignal synthesize(const Spectrogram& spec, Eigen::Index trim_len = -1,
                      Window window = Window::kHann);

}  // namespace cbf
