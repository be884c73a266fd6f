#include "cbf/optimizer.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>

#include "cbf/beamformer.hpp"
#include "cbf/parallel.hpp"
#include "cbf/wpe.hpp"

namespace cbf {

std::string method_name(Method m) {
  switch (m) {
    case Method::kSourceWise: return "source-wise";
    case Method::kSourcePackedFast: return "source-packed-fast";
    case Method::kSourcePackedBrute: return "source-packed-brute";
    case Method::kCascadeMpdr: return "cascade-mpdr-separate";
    case Method::kCascadeMvdr: return "cascade-mvdr-separate";
    case Method::kCascadeWmpdrSeparate: return "cascade-wmpdr-separate";
    case Method::kCascadeMpdrIntegrated: return "cascade-mpdr-integrated";
    case Method::kMisoDirect: return "miso-direct";
  }
  throw InputError("method_name: unknown method");
}

Method method_from_name(const std::string& name) {
  if (name == "source-wise") return Method::kSourceWise;
  if (name == "source-packed-fast") return Method::kSourcePackedFast;
  if (name == "source-packed-brute") return Method::kSourcePackedBrute;
  if (name == "cascade-mpdr-separate" || name == "cascade-mpdr") return Method::kCascadeMpdr;
  if (name == "cascade-mvdr-separate" || name == "cascade-mvdr") return Method::kCascadeMvdr;
  if (name == "cascade-wmpdr-separate" || name == "cascade-wmpdr") {
    return Method::kCascadeWmpdrSeparate;
  }
  if (name == "cascade-mpdr-integrated") return Method::kCascadeMpdrIntegrated;
  if (name == "miso-direct") return Method::kMisoDirect;
  throw InputError("unknown method: " + name);
}

std::vector<BandTaps> default_bands() {
  return {{800.0, 20}, {1500.0, 16}, {std::numeric_limits<double>::infinity(), 8}};
}

int RunConfig::filter_length_for(double hz) const {
  for (const auto& band : bands) {
    if (hz < band.max_hz) return band.length;
  }
  return bands.back().length;
}

void RunConfig::validate(int channels, int sources) const {
  if (iterations < 1) throw InputError("RunConfig: iterations must be >= 1");
  if (delay < 1) throw InputError("RunConfig: delay must be >= 1");
  if (bands.empty()) throw InputError("RunConfig: empty band table");
  for (const auto& band : bands) {
    if (band.length < 1 || (band.length > 1 && band.length <= delay)) {
      throw InputError("RunConfig: band length must be 1 or exceed delay");
    }
  }
  if (ref_channel < 0 || ref_channel >= channels) {
    throw InputError("RunConfig: reference channel out of range");
  }
  if (sources < 1) throw InputError("RunConfig: no sources");
  if (sources > channels) throw InputError("RunConfig: more sources than channels");
  if (fixed_steering && static_cast<int>(fixed_steering->size()) != sources) {
    throw InputError("RunConfig: fixed steering count does not match sources");
  }
}

double ml_objective(const std::vector<CVector>& outputs,
                    const std::vector<RVector>& lambdas) {
  if (outputs.size() != lambdas.size()) {
    throw InputError("ml_objective: output/variance count mismatch");
  }
  double total = 0.0;
  for (size_t i = 0; i < outputs.size(); ++i) {
    const Eigen::Index T = outputs[i].size();
    if (lambdas[i].size() != T || T == 0) {
      throw InputError("ml_objective: track length mismatch");
    }
    const auto power = outputs[i].cwiseAbs2().array();
    const auto lam = lambdas[i].array();
    total += (power / lam + lam.log()).sum() / static_cast<double>(T);
  }
  return total;
}

RVector update_variances(const CVector& y, double floor_eps) {
  return floored(y.cwiseAbs2(), floor_eps);
}

namespace {

using Clock = std::chrono::steady_clock;

struct BinTrace {
  std::vector<double> objective;
  std::vector<double> seconds;
  std::vector<double> residual;

  void record(double obj, double res, Clock::time_point start) {
    objective.push_back(obj);
    residual.push_back(res);
    seconds.push_back(std::chrono::duration<double>(Clock::now() - start).count());
  }
};

struct BinOut {
  std::vector<CVector> ys;
  BinTrace trace;
};

RVector initial_variances(const CMatrix& X) {
  return X.colwise().squaredNorm().real().transpose() / static_cast<double>(X.rows());
}

struct BinCtx {
  const RunConfig& cfg;
  const MaskSet& masks;
  StackConfig scfg;
  int bin = 0;

  RVector gamma(int i) const { return masks.gamma[i].col(bin); }

  Steering steering(int i, const CMatrix& z) const {
    if (cfg.fixed_steering) {
      return make_steering((*cfg.fixed_steering)[i].col(bin), cfg.ref_channel);
    }
    auto [Rt, Rn] = masked_covariances(z, gamma(i), cfg.mask_clamp);
    return estimate_steering(Rt, Rn, cfg.ref_channel, cfg.loading);
  }
};

double constraint_residual(const CVector& w, const Steering& s) {
  return std::abs(w.head(s.rtf.size()).dot(s.rtf) - Complex(1.0, 0.0));
}

BinOut bin_source_wise(const BinCtx& ctx, const StackedObservation& stacked) {
  const RunConfig& cfg = ctx.cfg;
  BinOut out;
  out.ys.resize(1);
  RVector lambda = initial_variances(stacked.frames);
  CMatrix z = stacked.frames;
  for (int it = 0; it < cfg.iterations; ++it) {
    const auto start = Clock::now();
    if (ctx.scfg.taps() > 0) {
      const CovarianceSet cov =
          accumulate(stacked, lambda, false, cfg.variance_floor);
      const CMatrix G = single_target_wpe(cov, cfg.loading);
      z = apply_prediction(stacked, G);
    }
    const Steering st = ctx.steering(0, z);
    const CMatrix Rz = beam_output_cov(z, lambda, cfg.variance_floor);
    const CVector q = wmpdr(Rz, st, cfg.loading);
    out.ys[0] = apply_beamformer(q, z);
    lambda = update_variances(out.ys[0], cfg.variance_floor);
    out.trace.record(ml_objective({out.ys[0]}, {lambda}),
                     constraint_residual(q, st), start);
  }
  return out;
}

BinOut bin_miso_direct(const BinCtx& ctx, const StackedObservation& stacked) {
  const RunConfig& cfg = ctx.cfg;
  BinOut out;
  out.ys.resize(1);
  RVector lambda = initial_variances(stacked.frames);

  // The long filter has no dereverberated intermediate to estimate steering
  // from, so without fixed steering we bootstrap it once from a plain
  // prediction pass and keep it for all iterations.
  Steering st = [&] {
    if (cfg.fixed_steering) return ctx.steering(0, stacked.frames);
    CMatrix z0 = stacked.frames;
    if (ctx.scfg.taps() > 0) {
      const CovarianceSet cov = accumulate(stacked, lambda, false, cfg.variance_floor);
      z0 = apply_prediction(stacked, single_target_wpe(cov, cfg.loading));
    }
    auto [Rt, Rn] = masked_covariances(z0, ctx.gamma(0), cfg.mask_clamp);
    return estimate_steering(Rt, Rn, cfg.ref_channel, cfg.loading);
  }();

  const CMatrix joint = stacked.joint_frames();
  for (int it = 0; it < cfg.iterations; ++it) {
    const auto start = Clock::now();
    const CovarianceSet cov = accumulate(stacked, lambda, true, cfg.variance_floor);
    const CVector w = wmpdr_joint(*cov.joint, st, cfg.loading);
    out.ys[0] = apply_beamformer(w, joint);
    lambda = update_variances(out.ys[0], cfg.variance_floor);
    out.trace.record(ml_objective({out.ys[0]}, {lambda}),
                     constraint_residual(w, st), start);
  }
  return out;
}

BinOut bin_source_packed(const BinCtx& ctx, const StackedObservation& stacked,
                         bool brute) {
  const RunConfig& cfg = ctx.cfg;
  const int M = ctx.scfg.channels;
  const int I = ctx.masks.sources();

  BinOut out;
  out.ys.resize(I);
  std::vector<RVector> lambdas(I, initial_variances(stacked.frames));
  CMatrix Q = CMatrix::Identity(M, M).leftCols(I);
  CMatrix z = stacked.frames;

  for (int it = 0; it < cfg.iterations; ++it) {
    const auto start = Clock::now();
    if (ctx.scfg.taps() > 0) {
      CMatrix G;
      if (brute) {
        G = multiple_target_wpe_brute(stacked, Q, lambdas, cfg.pinv_tol,
                                      cfg.brute_row_cap);
      } else {
        std::vector<CovarianceSet> covs(I);
        for (int i = 0; i < I; ++i) {
          covs[i] = accumulate(stacked, lambdas[i], false, cfg.variance_floor);
        }
        CovarianceSet comp_cov;
        CMatrix basis;
        const bool with_comp = cfg.complement && M > I;
        if (with_comp) {
          basis = orthonormal_complement(Q);
          const RVector res_lambda =
              (basis.adjoint() * z).colwise().squaredNorm().real().transpose() /
              static_cast<double>(M - I);
          comp_cov = accumulate(stacked, res_lambda, false, cfg.variance_floor);
        }
        G = multiple_target_wpe_fast(covs, Q, with_comp ? &comp_cov : nullptr,
                                     with_comp ? &basis : nullptr, cfg.pinv_tol);
      }
      z = apply_prediction(stacked, G);
    }

    std::vector<RVector> new_lambdas(I);
    double residual = 0.0;
    for (int i = 0; i < I; ++i) {
      const Steering st = ctx.steering(i, z);
      const CMatrix Rz = beam_output_cov(z, lambdas[i], cfg.variance_floor);
      const CVector q = wmpdr(Rz, st, cfg.loading);
      out.ys[i] = apply_beamformer(q, z);
      new_lambdas[i] = update_variances(out.ys[i], cfg.variance_floor);
      residual = std::max(residual, constraint_residual(q, st));
      Q.col(i) = q;
    }
    lambdas = std::move(new_lambdas);
    out.trace.record(ml_objective(out.ys, lambdas), residual, start);
  }
  return out;
}

BinOut bin_cascade(const BinCtx& ctx, const StackedObservation& stacked) {
  const RunConfig& cfg = ctx.cfg;
  const int I = ctx.masks.sources();
  const RVector ones = RVector::Ones(stacked.num_frames());

  BinOut out;
  out.ys.resize(I);

  if (cfg.method == Method::kCascadeMpdrIntegrated) {
    // Per-source prediction whose weights follow the beamformer output.
    std::vector<BinTrace> traces(I);
    for (int i = 0; i < I; ++i) {
      RVector lambda = initial_variances(stacked.frames);
      CMatrix z = stacked.frames;
      for (int it = 0; it < cfg.iterations; ++it) {
        const auto start = Clock::now();
        if (ctx.scfg.taps() > 0) {
          const CovarianceSet cov = accumulate(stacked, lambda, false, cfg.variance_floor);
          z = apply_prediction(stacked, single_target_wpe(cov, cfg.loading));
        }
        const Steering st = ctx.steering(i, z);
        const CVector q = mpdr(beam_output_cov(z, ones, cfg.variance_floor), st,
                               cfg.loading);
        out.ys[i] = apply_beamformer(q, z);
        lambda = update_variances(out.ys[i], cfg.variance_floor);
        traces[i].record(ml_objective({out.ys[i]}, {lambda}),
                         constraint_residual(q, st), start);
      }
    }
    for (int it = 0; it < cfg.iterations; ++it) {
      double obj = 0.0, res = 0.0, sec = 0.0;
      for (int i = 0; i < I; ++i) {
        obj += traces[i].objective[it];
        res = std::max(res, traces[i].residual[it]);
        sec += traces[i].seconds[it];
      }
      out.trace.objective.push_back(obj);
      out.trace.residual.push_back(res);
      out.trace.seconds.push_back(sec);
    }
    return out;
  }

  // Separate scheme: one shared prediction stage whose weights follow the
  // dereverberated signal, then per-source beamformers on top of it.
  RVector lambda_derev = initial_variances(stacked.frames);
  std::vector<RVector> lambda_bf(I, ones);
  CMatrix z = stacked.frames;
  for (int it = 0; it < cfg.iterations; ++it) {
    const auto start = Clock::now();
    if (ctx.scfg.taps() > 0) {
      const CovarianceSet cov = accumulate(stacked, lambda_derev, false, cfg.variance_floor);
      z = apply_prediction(stacked, single_target_wpe(cov, cfg.loading));
      lambda_derev = initial_variances(z);
    }

    double residual = 0.0;
    std::vector<RVector> obj_lambdas(I, ones);
    for (int i = 0; i < I; ++i) {
      const Steering st = ctx.steering(i, z);
      CVector q;
      switch (cfg.method) {
        case Method::kCascadeMpdr:
          q = mpdr(beam_output_cov(z, ones, cfg.variance_floor), st, cfg.loading);
          break;
        case Method::kCascadeMvdr:
          q = mvdr(masked_covariances(z, ctx.gamma(i), cfg.mask_clamp).second, st,
                   cfg.loading);
          break;
        case Method::kCascadeWmpdrSeparate:
          q = wmpdr(beam_output_cov(z, lambda_bf[i], cfg.variance_floor), st,
                    cfg.loading);
          break;
        default:
          throw InputError("bin_cascade: not a cascade method");
      }
      out.ys[i] = apply_beamformer(q, z);
      residual = std::max(residual, constraint_residual(q, st));
      if (cfg.method == Method::kCascadeWmpdrSeparate) {
        lambda_bf[i] = update_variances(out.ys[i], cfg.variance_floor);
        obj_lambdas[i] = lambda_bf[i];
      }
    }
    out.trace.record(ml_objective(out.ys, obj_lambdas), residual, start);
  }
  return out;
}

RunResult drive(const Spectrogram& spec, const MaskSet& masks, const RunConfig& cfg,
                int out_sources,
                const std::function<BinOut(const BinCtx&, const StackedObservation&)>& fn) {
  const int F = spec.num_bins();
  const int T = spec.frames();
  const int M = spec.channels();

  RunResult result;
  result.sources.resize(out_sources);
  for (auto& s : result.sources) {
    s.frame_len = spec.frame_len;
    s.frame_shift = spec.frame_shift;
    s.sample_rate = spec.sample_rate;
    s.bins.assign(F, CMatrix::Zero(1, T));
  }
  std::vector<BinTrace> bin_traces(F);

  parallel_for(F, cfg.threads, [&](int f) {
    try {
      BinCtx ctx{cfg, masks, StackConfig{}, f};
      ctx.scfg.channels = M;
      ctx.scfg.delay = cfg.delay;
      ctx.scfg.length = cfg.filter_length_for(spec.bin_hz(f));
      const StackedObservation stacked = stack(spec.bins[f], ctx.scfg);
      BinOut out = fn(ctx, stacked);
      for (int i = 0; i < out_sources; ++i) {
        result.sources[i].bins[f].row(0) = out.ys[i].transpose();
      }
      bin_traces[f] = std::move(out.trace);
    } catch (const NumericalError& e) {
      throw NumericalError("bin " + std::to_string(f) + ": " + e.what());
    } catch (const InputError& e) {
      throw InputError("bin " + std::to_string(f) + ": " + e.what());
    }
  });

  result.trace.objective.assign(cfg.iterations, 0.0);
  result.trace.seconds.assign(cfg.iterations, 0.0);
  result.trace.constraint_residual.assign(cfg.iterations, 0.0);
  for (const auto& bt : bin_traces) {
    for (int it = 0; it < cfg.iterations; ++it) {
      result.trace.objective[it] += bt.objective[it];
      result.trace.seconds[it] += bt.seconds[it];
      result.trace.constraint_residual[it] =
          std::max(result.trace.constraint_residual[it], bt.residual[it]);
    }
  }
  return result;
}

void check_inputs(const Spectrogram& spec, const MaskSet& masks, const RunConfig& cfg) {
  if (spec.num_bins() == 0 || spec.frames() == 0 || spec.channels() == 0) {
    throw InputError("run: empty spectrogram");
  }
  masks.validate();
  if (masks.frames() != spec.frames() || masks.num_bins() != spec.num_bins()) {
    throw InputError("run: mask shape does not match spectrogram");
  }
  cfg.validate(spec.channels(), masks.sources());
  if (cfg.fixed_steering) {
    for (const auto& V : *cfg.fixed_steering) {
      if (V.rows() != spec.channels() || V.cols() != spec.num_bins()) {
        throw InputError("run: fixed steering shape mismatch");
      }
    }
  }
}

// Restricts a mask set / fixed steering to one source for the single-target
// drivers.
RunConfig single_target_cfg(const RunConfig& cfg, int target) {
  RunConfig c = cfg;
  if (cfg.fixed_steering) {
    c.fixed_steering = std::vector<CMatrix>{(*cfg.fixed_steering)[target]};
  }
  return c;
}

MaskSet single_target_masks(const MaskSet& masks, int target) {
  MaskSet m;
  m.gamma = {masks.gamma[target]};
  return m;
}

}  // namespace

RunResult run_source_wise(const Spectrogram& spec, const MaskSet& masks, int target,
                          const RunConfig& cfg) {
  check_inputs(spec, masks, cfg);
  if (target < 0 || target >= masks.sources()) throw InputError("run_source_wise: bad target");
  const MaskSet m = single_target_masks(masks, target);
  const RunConfig c = single_target_cfg(cfg, target);
  return drive(spec, m, c, 1, bin_source_wise);
}

RunResult run_miso_direct(const Spectrogram& spec, const MaskSet& masks, int target,
                          const RunConfig& cfg) {
  check_inputs(spec, masks, cfg);
  if (target < 0 || target >= masks.sources()) throw InputError("run_miso_direct: bad target");
  const MaskSet m = single_target_masks(masks, target);
  const RunConfig c = single_target_cfg(cfg, target);
  return drive(spec, m, c, 1, bin_miso_direct);
}

RunResult run_source_packed(const Spectrogram& spec, const MaskSet& masks,
                            const RunConfig& cfg) {
  check_inputs(spec, masks, cfg);
  const bool brute = cfg.method == Method::kSourcePackedBrute;
  return drive(spec, masks, cfg, masks.sources(),
               [brute](const BinCtx& ctx, const StackedObservation& stacked) {
                 return bin_source_packed(ctx, stacked, brute);
               });
}

RunResult run_cascade(const Spectrogram& spec, const MaskSet& masks,
                      const RunConfig& cfg) {
  check_inputs(spec, masks, cfg);
  switch (cfg.method) {
    case Method::kCascadeMpdr:
    case Method::kCascadeMvdr:
    case Method::kCascadeWmpdrSeparate:
    case Method::kCascadeMpdrIntegrated:
      break;
    default:
      throw InputError("run_cascade: not a cascade method");
  }
  return drive(spec, masks, cfg, masks.sources(), bin_cascade);
}

namespace {

// Merges single-target results run per source into one multi-source result.
RunResult merge_single_target(std::vector<RunResult> parts) {
  RunResult merged;
  merged.trace = parts[0].trace;
  merged.sources.reserve(parts.size());
  for (auto& p : parts) merged.sources.push_back(std::move(p.sources[0]));
  for (size_t i = 1; i < parts.size(); ++i) {
    for (size_t it = 0; it < merged.trace.objective.size(); ++it) {
      merged.trace.objective[it] += parts[i].trace.objective[it];
      merged.trace.seconds[it] += parts[i].trace.seconds[it];
      merged.trace.constraint_residual[it] =
          std::max(merged.trace.constraint_residual[it],
                   parts[i].trace.constraint_residual[it]);
    }
  }
  return merged;
}

}  // namespace

RunResult run(const Spectrogram& spec, const MaskSet& masks, const RunConfig& cfg) {
  switch (cfg.method) {
    case Method::kSourceWise:
    case Method::kMisoDirect: {
      std::vector<RunResult> parts;
      for (int i = 0; i < masks.sources(); ++i) {
        parts.push_back(cfg.method == Method::kSourceWise
                            ? run_source_wise(spec, masks, i, cfg)
                            : run_miso_direct(spec, masks, i, cfg));
      }
      return merge_single_target(std::move(parts));
    }
    case Method::kSourcePackedFast:
    case Method::kSourcePackedBrute:
      return run_source_packed(spec, masks, cfg);
    case Method::kCascadeMpdr:
    case Method::kCascadeMvdr:
    case Method::kCascadeWmpdrSeparate:
    case Method::kCascadeMpdrIntegrated:
      return run_cascade(spec, masks, cfg);
  }
  throw InputError("run: unknown method");
}

namespace {

std::string fmt_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) return "0";
  return std::string(buf, ptr);
}

}  // namespace

void write_run_log(std::ostream& os, const RunConfig& cfg, const Trace& trace,
                   bool include_timing) {
  os << "{\"record\":\"config\",\"method\":\"" << method_name(cfg.method)
     << "\",\"iterations\":" << cfg.iterations << ",\"delay\":" << cfg.delay
     << ",\"loading\":" << fmt_double(cfg.loading)
     << ",\"variance_floor\":" << fmt_double(cfg.variance_floor)
     << ",\"complement\":" << (cfg.complement ? "true" : "false") << "}\n";
  for (size_t it = 0; it < trace.objective.size(); ++it) {
    os << "{\"record\":\"iteration\",\"iter\":" << (it + 1)
       << ",\"objective\":" << fmt_double(trace.objective[it])
       << ",\"constraint_residual\":" << fmt_double(trace.constraint_residual[it]);
    if (include_timing) os << ",\"seconds\":" << fmt_double(trace.seconds[it]);
    os << "}\n";
  }
}

}  // namespace cbf
