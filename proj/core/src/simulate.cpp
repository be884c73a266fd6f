#include "cbf/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "cbf/stft.hpp"

namespace cbf {

void SceneConfig::validate() const {
  if (sources < 1) throw InputError("SceneConfig: sources must be >= 1");
  if (channels < sources) throw InputError("SceneConfig: need channels >= sources");
  if (num_bins < 1 || frames < 1) throw InputError("SceneConfig: empty scene");
  if (delay < 1) throw InputError("SceneConfig: delay must be >= 1");
  if (late_taps < 0) throw InputError("SceneConfig: negative tap count");
  if (noise_level < 0 || reverb_level < 0) throw InputError("SceneConfig: negative level");
  if (activity <= 0 || activity > 1) throw InputError("SceneConfig: activity outside (0, 1]");
  if (burst_period < 0) throw InputError("SceneConfig: negative burst period");
}

namespace {

// Deterministic draws independent of the standard library's distribution
// implementations: uniforms from the raw 64-bit stream, normals by
// Box-Muller.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  double uniform() {
    return (gen_() >> 11) * 0x1.0p-53;  // [0, 1)
  }

  double normal() {
    double u1 = uniform();
    while (u1 <= 0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  Complex cnormal() {
    const double re = normal();
    const double im = normal();
    return Complex(re, im) / std::sqrt(2.0);
  }

  CVector cnormal_vector(int n) {
    CVector v(n);
    for (int i = 0; i < n; ++i) v[i] = cnormal();
    return v;
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace

CMatrix GroundTruth::desired_at(int source, int channel) const {
  const int F = static_cast<int>(desired[source].size());
  const int T = static_cast<int>(desired[source][0].cols());
  CMatrix out(F, T);
  for (int f = 0; f < F; ++f) out.row(f) = desired[source][f].row(channel);
  return out;
}

std::pair<Spectrogram, GroundTruth> generate_scene(const SceneConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const int I = cfg.sources;
  const int M = cfg.channels;
  const int F = cfg.num_bins;
  const int T = cfg.frames;

  // Framing metadata first: dry sources are rendered against it below.
  Spectrogram spec;
  spec.sample_rate = cfg.sample_rate;
  spec.frame_len = cfg.frame_len > 0 ? cfg.frame_len : 2 * (F - 1);
  spec.frame_shift = cfg.frame_shift > 0 ? cfg.frame_shift : std::max(1, spec.frame_len / 4);
  spec.bins.assign(F, CMatrix::Zero(M, T));

  GroundTruth truth;
  truth.steering.resize(I);
  truth.dry.assign(I, CMatrix::Zero(F, T));
  truth.desired.assign(I, std::vector<CMatrix>(F, CMatrix::Zero(M, T)));
  truth.late.assign(I, std::vector<CMatrix>(F, CMatrix::Zero(M, T)));
  truth.noise.assign(F, CMatrix::Zero(M, T));

  // Acoustic responses are sampled from short real-coefficient filters so
  // they vary smoothly across bins and are real at the band edges, the way
  // responses of physical arrays do. Lag weights decay geometrically: most
  // of the response mass sits at small delays, keeping per-bin gains close
  // to a true short filter when frames are rendered to audio.
  constexpr int kResponseTaps = 5;
  constexpr double kLagDecay = 0.6;
  double lag_power = 0.0;
  for (int k = 0; k < kResponseTaps; ++k) lag_power += std::pow(kLagDecay, 2 * k);
  const double lag_norm = 1.0 / std::sqrt(lag_power);
  const double bin_denom = static_cast<double>(std::max(1, F - 1));
  const auto response = [&](const RMatrix& coef, int f) {
    CVector g = CVector::Zero(M);
    for (int k = 0; k < kResponseTaps; ++k) {
      const double ang = -std::numbers::pi * f * k / bin_denom;
      const Complex e(std::cos(ang), std::sin(ang));
      for (int m = 0; m < M; ++m) g[m] += coef(m, k) * e;
    }
    return g;
  };

  // Steering vectors: per-bin norm sqrt(M), redrawn until every bin is
  // usable at the reference channel and pairwise separated. The reference
  // channel gets a dominant direct tap so its response never nulls.
  for (int i = 0; i < I; ++i) {
    truth.steering[i].resize(M, F);
    bool placed = false;
    for (int attempt = 0; attempt < 64 && !placed; ++attempt) {
      RMatrix coef(M, kResponseTaps);
      const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
      coef(0, 0) = sign * (1.0 + 0.3 * std::abs(rng.normal()));
      for (int k = 1; k < kResponseTaps; ++k) {
        coef(0, k) = 0.12 * std::pow(kLagDecay, k - 1) * rng.normal();
      }
      for (int m = 1; m < M; ++m) {
        for (int k = 0; k < kResponseTaps; ++k) {
          coef(m, k) = lag_norm * std::pow(kLagDecay, k) * rng.normal();
        }
      }

      CMatrix cand(M, F);
      bool ok = true;
      for (int f = 0; f < F && ok; ++f) {
        CVector g = response(coef, f);
        const double norm = g.norm();
        if (norm < 1e-9) {
          ok = false;
          break;
        }
        const CVector v = g * (std::sqrt(static_cast<double>(M)) / norm);
        if (std::abs(v[0]) < 0.3) {
          ok = false;
          break;
        }
        for (int j = 0; j < i; ++j) {
          if (std::abs(truth.steering[j].col(f).dot(v)) / M > 0.9) {
            ok = false;
            break;
          }
        }
        cand.col(f) = v;
      }
      if (ok) {
        truth.steering[i] = cand;
        placed = true;
      }
    }
    if (!placed) throw NumericalError("generate_scene: steering draw failed");
  }

  // Echo coefficients: one smooth response per lag with geometric decay.
  std::vector<std::vector<CMatrix>> taps(I);  // [source][bin] M x late_taps
  for (int i = 0; i < I; ++i) {
    taps[i].resize(F);
    for (int f = 0; f < F; ++f) taps[i][f].resize(M, cfg.late_taps);
    for (int j = 0; j < cfg.late_taps; ++j) {
      RMatrix ecoef(M, kResponseTaps);
      for (int m = 0; m < M; ++m) {
        for (int k = 0; k < kResponseTaps; ++k) {
          ecoef(m, k) = lag_norm * std::pow(kLagDecay, k) * rng.normal();
        }
      }
      const double scale = cfg.reverb_level * std::pow(0.7, j);
      for (int f = 0; f < F; ++f) taps[i][f].col(j) = scale * response(ecoef, f);
    }
  }

  // Activity gates and per-frame levels are shared across bins so frames
  // look broadband, as real short-time spectra do. The log-level follows a
  // first-order autoregression: levels move smoothly instead of jumping.
  std::vector<std::vector<char>> active(I, std::vector<char>(T, 0));
  std::vector<std::vector<double>> frame_scale(I, std::vector<double>(T, 1.0));
  for (int i = 0; i < I; ++i) {
    double level = 0.0;
    for (int t = 0; t < T; ++t) {
      if (cfg.burst_period > 0) {
        const int phase = i * cfg.burst_period / I;
        active[i][t] = ((t + phase) % cfg.burst_period) == 0;
      } else {
        active[i][t] = rng.uniform() < cfg.activity;
      }
      const double innovation = rng.normal();
      level = t == 0 ? innovation : 0.75 * level + std::sqrt(1.0 - 0.75 * 0.75) * innovation;
      frame_scale[i][t] = std::exp(0.7 * level);
    }
  }

  // Dry sources: when the framing metadata supports analysis, each source
  // is the short-time spectrum of seeded white noise shaped by the level
  // envelope in the time domain, so a rendered scene survives the trip to
  // audio and back. Per-frame gating stays exact: a gated frame is zero in
  // every bin. Unusable framing (single bin, mismatched bin count) falls
  // back to independent draws per cell; such scenes cannot be rendered
  // anyway.
  const bool renderable = spec.frame_len >= 2 && spec.frame_shift >= 1 &&
                          spec.frame_shift <= spec.frame_len &&
                          spec.frame_len % spec.frame_shift == 0 &&
                          spec.frame_len / 2 + 1 == F;
  for (int i = 0; i < I; ++i) {
    if (renderable) {
      TimeSignal src;
      src.sample_rate = spec.sample_rate;
      src.samples.resize(1, static_cast<Eigen::Index>(T) * spec.frame_shift);
      for (Eigen::Index s = 0; s < src.samples.cols(); ++s) {
        src.samples(0, s) = frame_scale[i][s / spec.frame_shift] * rng.normal();
      }
      const Spectrogram d = analyze(src, spec.frame_len, spec.frame_shift);
      double energy = 0.0;
      for (int f = 0; f < F; ++f) energy += d.bins[f].squaredNorm();
      const double unit = energy > 0 ? std::sqrt(static_cast<double>(F) * T / energy) : 1.0;
      for (int f = 0; f < F; ++f) {
        for (int t = 0; t < T; ++t) {
          if (active[i][t]) truth.dry[i](f, t) = unit * d.bins[f](0, t);
        }
      }
    } else {
      for (int f = 0; f < F; ++f) {
        for (int t = 0; t < T; ++t) {
          if (active[i][t]) {
            truth.dry[i](f, t) = frame_scale[i][t] * rng.cnormal();
          }
        }
      }
    }
  }

  for (int f = 0; f < F; ++f) {
    for (int t = 0; t < T; ++t) {
      truth.noise[f].col(t) = cfg.noise_level * rng.cnormal_vector(M);
    }
  }

  for (int i = 0; i < I; ++i) {
    for (int f = 0; f < F; ++f) {
      const CVector v = truth.steering[i].col(f);
      for (int t = 0; t < T; ++t) {
        const Complex s = truth.dry[i](f, t);
        if (s != Complex(0)) truth.desired[i][f].col(t) = v * s;
        for (int j = 0; j < cfg.late_taps; ++j) {
          const int src = t - cfg.delay - j;
          if (src >= 0 && truth.dry[i](f, src) != Complex(0)) {
            truth.late[i][f].col(t) += taps[i][f].col(j) * truth.dry[i](f, src);
          }
        }
      }
      spec.bins[f] += truth.desired[i][f] + truth.late[i][f];
    }
  }
  for (int f = 0; f < F; ++f) spec.bins[f] += truth.noise[f];

  return {std::move(spec), std::move(truth)};
}

MaskSet oracle_masks(const GroundTruth& truth, int ref_channel) {
  const int I = static_cast<int>(truth.desired.size());
  const int F = static_cast<int>(truth.noise.size());
  const int T = static_cast<int>(truth.noise[0].cols());

  MaskSet masks;
  masks.gamma.assign(I, RMatrix::Zero(T, F));
  for (int f = 0; f < F; ++f) {
    for (int t = 0; t < T; ++t) {
      double denom = std::norm(truth.noise[f](ref_channel, t));
      std::vector<double> powers(I);
      for (int i = 0; i < I; ++i) {
        powers[i] = std::norm(truth.desired[i][f](ref_channel, t));
        denom += powers[i] + std::norm(truth.late[i][f](ref_channel, t));
      }
      if (denom > 0) {
        for (int i = 0; i < I; ++i) {
          masks.gamma[i](t, f) = std::clamp(powers[i] / denom, 0.0, 1.0);
        }
      }
    }
  }
  return masks;
}

double sdr_db(const CMatrix& est, const CMatrix& ref) {
  if (est.rows() != ref.rows() || est.cols() != ref.cols()) {
    throw InputError("sdr_db: shape mismatch");
  }
  const double ref_energy = ref.squaredNorm();
  if (ref_energy == 0) throw InputError("sdr_db: zero reference");
  const double est_energy = est.squaredNorm();
  Complex alpha(0);
  if (est_energy > 0) {
    alpha = (est.conjugate().cwiseProduct(ref)).sum() / est_energy;
  }
  const double err = (ref - alpha * est).squaredNorm();
  if (err <= 1e-10 * ref_energy) return 100.0;
  return std::min(100.0, 10.0 * std::log10(ref_energy / err));
}

std::vector<int> match_sources(const std::vector<CMatrix>& est,
                               const std::vector<CMatrix>& ref) {
  const int n = static_cast<int>(est.size());
  if (ref.size() != est.size()) throw InputError("match_sources: count mismatch");
  RMatrix corr(n, n);
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      const double na = est[a].norm();
      const double nb = ref[b].norm();
      corr(a, b) = na > 0 && nb > 0
                       ? std::abs((est[a].conjugate().cwiseProduct(ref[b])).sum()) / (na * nb)
                       : 0.0;
    }
  }
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<int> best = perm;
  double best_score = -1.0;
  do {
    double score = 0.0;
    for (int a = 0; a < n; ++a) score += corr(a, perm[a]);
    if (score > best_score) {
      best_score = score;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

CMatrix flatten_bins(const Spectrogram& spec, int channel) {
  CMatrix out(spec.num_bins(), spec.frames());
  for (int f = 0; f < spec.num_bins(); ++f) out.row(f) = spec.bins[f].row(channel);
  return out;
}

}  // namespace cbf
