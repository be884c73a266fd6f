#include "cbf/stft.hpp"

#include <cmath>
#include <numbers>

#include "fft.hpp"

namespace cbf {

RVector make_window(Window kind, int len) {
  if (len <= 0) throw InputError("window length must be positive");
  RVector w(len);
  switch (kind) {
    case Window::kHann:
      for (int n = 0; n < len; ++n) {
        w[n] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * n / len));
      }
      break;
  }
  return w;
}

Spectrogram analyze(const TimeSignal& signal, int frame_len, int frame_shift,
                    Window window) {
  if (signal.samples.size() == 0) throw InputError("analyze: empty signal");
  if (signal.sample_rate <= 0) throw InputError("analyze: sample_rate must be positive");
  if (frame_len <= 0 || frame_shift <= 0) {
    throw InputError("analyze: frame_len and frame_shift must be positive");
  }
  if (frame_shift > frame_len) throw InputError("analyze: frame_shift exceeds frame_len");
  if (frame_len % frame_shift != 0) {
    throw InputError("analyze: frame_shift must divide frame_len");
  }

  const int channels = signal.channels();
  const Eigen::Index num_samples = signal.num_samples();
  const int frames = static_cast<int>((num_samples + frame_shift - 1) / frame_shift);
  const int num_bins = frame_len / 2 + 1;
  const RVector w = make_window(window, frame_len);

  Spectrogram spec;
  spec.frame_len = frame_len;
  spec.frame_shift = frame_shift;
  spec.sample_rate = signal.sample_rate;
  spec.bins.assign(num_bins, CMatrix::Zero(channels, frames));

  std::vector<double> buf(frame_len);
  std::vector<Complex> out(num_bins);
  for (int m = 0; m < channels; ++m) {
    for (int t = 0; t < frames; ++t) {
      const Eigen::Index start = static_cast<Eigen::Index>(t) * frame_shift;
      for (int n = 0; n < frame_len; ++n) {
        const Eigen::Index idx = start + n;
        buf[n] = idx < num_samples ? w[n] * signal.samples(m, idx) : 0.0;
      }
      detail::fft_real_forward(buf.data(), out.data(), frame_len);
      for (int f = 0; f < num_bins; ++f) spec.bins[f](m, t) = out[f];
    }
  }
  return spec;
}

TimeSignal synthesize(const Spectrogram& spec, Eigen::Index trim_len, Window window) {
  const int frame_len = spec.frame_len;
  const int frame_shift = spec.frame_shift;
  if (frame_len <= 0 || frame_shift <= 0 || frame_len % frame_shift != 0) {
    throw InputError("synthesize: inconsistent framing metadata");
  }
  if (spec.num_bins() != frame_len / 2 + 1) {
    throw InputError("synthesize: bin count does not match frame_len / 2 + 1");
  }
  if (spec.frames() == 0 || spec.channels() == 0) {
    throw InputError("synthesize: empty spectrogram");
  }

  const int channels = spec.channels();
  const int frames = spec.frames();
  const int num_bins = spec.num_bins();
  const RVector w = make_window(window, frame_len);
  const Eigen::Index full = static_cast<Eigen::Index>(frames - 1) * frame_shift + frame_len;
  const Eigen::Index out_len =
      trim_len >= 0 ? trim_len : static_cast<Eigen::Index>(frames) * frame_shift;

  RMatrix acc = RMatrix::Zero(channels, full);
  RVector wsum = RVector::Zero(full);
  for (int t = 0; t < frames; ++t) {
    const Eigen::Index start = static_cast<Eigen::Index>(t) * frame_shift;
    for (int n = 0; n < frame_len; ++n) wsum[start + n] += w[n] * w[n];
  }

  std::vector<Complex> in(num_bins);
  std::vector<double> buf(frame_len);
  for (int m = 0; m < channels; ++m) {
    for (int t = 0; t < frames; ++t) {
      for (int f = 0; f < num_bins; ++f) in[f] = spec.bins[f](m, t);
      detail::fft_real_inverse(in.data(), buf.data(), frame_len);
      const Eigen::Index start = static_cast<Eigen::Index>(t) * frame_shift;
      for (int n = 0; n < frame_len; ++n) acc(m, start + n) += w[n] * buf[n];
    }
  }

  TimeSignal out;
  out.sample_rate = spec.sample_rate;
  out.samples = RMatrix::Zero(channels, out_len);
  const Eigen::Index copy_len = std::min(out_len, full);
  for (Eigen::Index n = 0; n < copy_len; ++n) {
    if (wsum[n] > 1e-12) {
      out.samples.col(n) = acc.col(n) / wsum[n];
    }
  }
  return out;
}

}  // namespace cbf
