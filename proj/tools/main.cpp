// cbf: multichannel dereverberation, denoising, and source separation.
//
// Subcommands:
//   enhance    WAV + mask tensor (or a scene file with --oracle) -> one WAV
//              per source plus a run log
//   simulate   scene file -> mixture WAV, per-source references, oracle masks
//   bench      times the filter estimation methods on a fixed scene
//   selftest   compact invariant checks, exit 0 when all pass
//
// Exit codes: 0 success, 1 input or usage error, 2 numerical failure.

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "cbf/beamformer.hpp"
#include "cbf/covariance.hpp"
#include "cbf/io.hpp"
#include "cbf/numerics.hpp"
#include "cbf/optimizer.hpp"
#include "cbf/simulate.hpp"
#include "cbf/stacking.hpp"
#include "cbf/stft.hpp"
#include "cbf/wpe.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Options {
  std::string input;
  std::string masks;
  std::string output_dir = ".";
  std::string config_path;
  std::string method = "source-wise";
  std::string bands;
  int iterations = 10;
  int delta = 4;
  int frame_len = 512;
  int frame_shift = 128;
  int ref_channel = 0;
  int threads = -1;  // -1: unset, fall back to CBF_THREADS then hardware
  double loading = cbf::kDefaultLoading;
  double variance_floor = cbf::kDefaultVarianceFloor;
  double mask_clamp = cbf::kDefaultMaskClamp;
  bool no_complement = false;
  bool oracle = false;
  bool pcm16 = false;
  bool log_timing = false;
};

std::vector<cbf::BandTaps> parse_bands(const std::string& text) {
  std::vector<cbf::BandTaps> bands;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) {
      throw cbf::InputError("bad band entry '" + item + "' (want max_hz:length)");
    }
    cbf::BandTaps band;
    const std::string hz = item.substr(0, colon);
    try {
      band.max_hz = hz == "inf" ? std::numeric_limits<double>::infinity() : std::stod(hz);
      band.length = std::stoi(item.substr(colon + 1));
    } catch (const std::exception&) {
      throw cbf::InputError("bad band entry '" + item + "' (want max_hz:length)");
    }
    bands.push_back(band);
  }
  if (bands.empty()) throw cbf::InputError("empty band table");
  return bands;
}

// Config file values take precedence over command line flags.
void apply_config_file(Options& opt) {
  if (opt.config_path.empty()) return;
  std::ifstream in(opt.config_path);
  if (!in) throw cbf::InputError("cannot open " + opt.config_path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw cbf::InputError("config " + opt.config_path + ": " + e.what());
  }
  if (!doc.is_object()) throw cbf::InputError("config must be a JSON object");

  try {
    for (const auto& [key, value] : doc.items()) {
      if (key == "method") opt.method = value.get<std::string>();
      else if (key == "iterations") opt.iterations = value.get<int>();
      else if (key == "delta") opt.delta = value.get<int>();
      else if (key == "frame_len") opt.frame_len = value.get<int>();
      else if (key == "frame_shift") opt.frame_shift = value.get<int>();
      else if (key == "ref_channel") opt.ref_channel = value.get<int>();
      else if (key == "threads") opt.threads = value.get<int>();
      else if (key == "loading") opt.loading = value.get<double>();
      else if (key == "variance_floor") opt.variance_floor = value.get<double>();
      else if (key == "mask_clamp") opt.mask_clamp = value.get<double>();
      else if (key == "complement") opt.no_complement = !value.get<bool>();
      else if (key == "bands") {
        std::vector<cbf::BandTaps> bands;
        for (const auto& entry : value) {
          if (!entry.is_array() || entry.size() != 2) {
            throw cbf::InputError("config bands: want [[max_hz, length], ...]");
          }
          cbf::BandTaps band;
          band.max_hz = entry[0].is_string() && entry[0].get<std::string>() == "inf"
                            ? std::numeric_limits<double>::infinity()
                            : entry[0].get<double>();
          band.length = entry[1].get<int>();
          bands.push_back(band);
        }
        if (bands.empty()) throw cbf::InputError("config bands: empty table");
        std::ostringstream joined;
        for (std::size_t i = 0; i < bands.size(); ++i) {
          if (i) joined << ',';
          if (std::isinf(bands[i].max_hz)) joined << "inf";
          else joined << bands[i].max_hz;
          joined << ':' << bands[i].length;
        }
        opt.bands = joined.str();
      } else {
        throw cbf::InputError("config: unknown key '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw cbf::InputError("config " + opt.config_path + ": " + e.what());
  }
}

int resolve_threads(int flag_value) {
  if (flag_value >= 0) return flag_value;
  if (const char* env = std::getenv("CBF_THREADS")) {
    try {
      return std::max(0, std::stoi(env));
    } catch (const std::exception&) {
      throw cbf::InputError("CBF_THREADS is not an integer");
    }
  }
  return 0;
}

cbf::RunConfig make_run_config(const Options& opt) {
  cbf::RunConfig rc;
  rc.method = cbf::method_from_name(opt.method);
  rc.iterations = opt.iterations;
  rc.delay = opt.delta;
  if (!opt.bands.empty()) rc.bands = parse_bands(opt.bands);
  rc.loading = opt.loading;
  rc.variance_floor = opt.variance_floor;
  rc.mask_clamp = opt.mask_clamp;
  rc.complement = !opt.no_complement;
  rc.ref_channel = opt.ref_channel;
  rc.threads = resolve_threads(opt.threads);
  return rc;
}

cbf::Spectrogram spectrogram_row(const cbf::Spectrogram& like, const cbf::CMatrix& rows) {
  cbf::Spectrogram out;
  out.frame_len = like.frame_len;
  out.frame_shift = like.frame_shift;
  out.sample_rate = like.sample_rate;
  out.bins.reserve(rows.rows());
  for (Eigen::Index f = 0; f < rows.rows(); ++f) out.bins.push_back(rows.row(f));
  return out;
}

int cmd_enhance(const Options& raw) {
  Options opt = raw;
  apply_config_file(opt);

  cbf::Spectrogram spec;
  cbf::MaskSet masks;
  Eigen::Index trim_len = -1;

  if (opt.oracle) {
    const cbf::SceneConfig scene = cbf::read_scene_config(opt.input);
    auto [mix, truth] = cbf::generate_scene(scene);
    spec = std::move(mix);
    masks = cbf::oracle_masks(truth, opt.ref_channel);
  } else {
    if (opt.masks.empty()) {
      throw cbf::InputError("enhance needs a mask tensor file (or --oracle)");
    }
    const cbf::TimeSignal sig = cbf::read_wav(opt.input);
    trim_len = sig.samples.cols();
    spec = cbf::analyze(sig, opt.frame_len, opt.frame_shift);
    masks = cbf::read_masks(opt.masks);
    if (masks.frames() != spec.frames() || masks.num_bins() != spec.num_bins()) {
      std::ostringstream msg;
      msg << "mask shape " << masks.frames() << "x" << masks.num_bins()
          << " does not match spectrogram " << spec.frames() << "x" << spec.num_bins();
      throw cbf::InputError(msg.str());
    }
  }

  const cbf::RunConfig rc = make_run_config(opt);
  const auto t0 = std::chrono::steady_clock::now();
  const cbf::RunResult result = cbf::run(spec, masks, rc);
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  fs::create_directories(opt.output_dir);
  const auto fmt = opt.pcm16 ? cbf::WavFormat::kPcm16 : cbf::WavFormat::kFloat32;
  for (std::size_t i = 0; i < result.sources.size(); ++i) {
    const cbf::TimeSignal out = cbf::synthesize(result.sources[i], trim_len);
    const fs::path path = fs::path(opt.output_dir) / ("src" + std::to_string(i) + ".wav");
    cbf::write_wav(path.string(), out, fmt);
  }

  const fs::path log_path = fs::path(opt.output_dir) / "run_log.txt";
  std::ofstream log(log_path);
  if (!log) throw cbf::InputError("cannot open " + log_path.string() + " for writing");
  cbf::write_run_log(log, rc, result.trace, opt.log_timing);

  std::cout << "method " << cbf::method_name(rc.method) << ", " << result.sources.size()
            << " source(s), " << rc.iterations << " iteration(s)";
  if (!result.trace.objective.empty()) {
    std::cout << ", final objective " << std::setprecision(6) << result.trace.objective.back();
  }
  std::cout << ", " << std::setprecision(3) << elapsed << " s\n";
  std::cout << "wrote " << result.sources.size() << " WAV file(s) and " << log_path.string()
            << " to " << opt.output_dir << "\n";
  return 0;
}

int cmd_simulate(const Options& raw) {
  Options opt = raw;
  apply_config_file(opt);

  const cbf::SceneConfig scene = cbf::read_scene_config(opt.input);
  auto [spec, truth] = cbf::generate_scene(scene);
  fs::create_directories(opt.output_dir);
  const auto fmt = opt.pcm16 ? cbf::WavFormat::kPcm16 : cbf::WavFormat::kFloat32;

  cbf::write_wav((fs::path(opt.output_dir) / "mix.wav").string(), cbf::synthesize(spec), fmt);
  for (int i = 0; i < scene.sources; ++i) {
    const cbf::Spectrogram ref = spectrogram_row(spec, truth.desired_at(i, opt.ref_channel));
    cbf::write_wav((fs::path(opt.output_dir) / ("true_src" + std::to_string(i) + ".wav")).string(),
                   cbf::synthesize(ref), fmt);
  }
  cbf::write_masks((fs::path(opt.output_dir) / "masks.msk").string(),
                   cbf::oracle_masks(truth, opt.ref_channel));

  std::cout << "wrote mix.wav, " << scene.sources << " reference WAV(s), and masks.msk to "
            << opt.output_dir << "\n";
  return 0;
}

struct BenchRow {
  std::string method;
  double min_s = 0;
  double median_s = 0;
};

int cmd_bench(int repeat, bool assert_order, int frames, const Options& raw) {
  Options opt = raw;
  apply_config_file(opt);
  if (repeat < 1) throw cbf::InputError("--repeat must be >= 1");

  cbf::SceneConfig scene;
  scene.sources = 2;
  scene.channels = 8;
  scene.num_bins = 24;
  scene.frames = frames;
  scene.delay = 2;
  scene.late_taps = 2;
  scene.reverb_level = 0.4;
  scene.noise_level = 0.05;
  scene.seed = 11;
  auto [spec, truth] = cbf::generate_scene(scene);
  const cbf::MaskSet masks = cbf::oracle_masks(truth);

  cbf::RunConfig rc;
  rc.iterations = 2;
  rc.delay = 2;
  rc.bands = {{std::numeric_limits<double>::infinity(), 4}};
  rc.threads = resolve_threads(opt.threads);

  const cbf::Method methods[] = {cbf::Method::kSourceWise, cbf::Method::kSourcePackedFast,
                                 cbf::Method::kSourcePackedBrute};
  std::vector<BenchRow> rows;
  for (const cbf::Method m : methods) {
    rc.method = m;
    std::vector<double> times;
    for (int r = 0; r < repeat; ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      const cbf::RunResult result = cbf::run(spec, masks, rc);
      const auto t1 = std::chrono::steady_clock::now();
      if (result.sources.empty()) throw cbf::NumericalError("bench: empty result");
      times.push_back(std::chrono::duration<double>(t1 - t0).count());
    }
    std::sort(times.begin(), times.end());
    BenchRow row;
    row.method = cbf::method_name(m);
    row.min_s = times.front();
    row.median_s = times[times.size() / 2];
    rows.push_back(row);
  }

  std::cout << std::left << std::setw(24) << "method" << std::right << std::setw(12) << "min (s)"
            << std::setw(12) << "median (s)" << "\n";
  for (const BenchRow& row : rows) {
    std::cout << std::left << std::setw(24) << row.method << std::right << std::fixed
              << std::setprecision(4) << std::setw(12) << row.min_s << std::setw(12)
              << row.median_s << "\n";
  }

  if (assert_order) {
    const double sw = rows[0].min_s, fast = rows[1].min_s, brute = rows[2].min_s;
    if (!(sw < fast && fast < 0.5 * brute)) {
      std::cerr << "timing order violated: want source-wise < source-packed-fast"
                << " < 0.5 * source-packed-brute, got " << sw << " / " << fast << " / " << brute
                << "\n";
      return 1;
    }
    std::cout << "timing order holds\n";
  }
  return 0;
}

// Small library-level checks that a packaged build can run anywhere.
int cmd_selftest() {
  int failures = 0;
  const auto check = [&](const std::string& name, const std::function<void()>& body) {
    try {
      body();
      std::cout << "ok   " << name << "\n";
    } catch (const std::exception& e) {
      std::cout << "FAIL " << name << ": " << e.what() << "\n";
      ++failures;
    }
  };
  const auto expect = [](bool cond, const std::string& what) {
    if (!cond) throw std::runtime_error(what);
  };

  check("stft round trip", [&] {
    cbf::SceneConfig sc;
    sc.channels = 3;
    sc.num_bins = 65;
    sc.frames = 40;
    sc.seed = 5;
    auto [spec, truth] = cbf::generate_scene(sc);
    const cbf::TimeSignal sig = cbf::synthesize(spec);
    const cbf::Spectrogram again = cbf::analyze(sig, spec.frame_len, spec.frame_shift);
    const cbf::TimeSignal twice = cbf::synthesize(again, sig.samples.cols());
    const double err = (twice.samples - sig.samples).norm() / sig.samples.norm();
    expect(err < 1e-10, "reconstruction error " + std::to_string(err));
  });

  check("hermitian solve", [&] {
    cbf::SceneConfig sc;
    sc.channels = 6;
    sc.num_bins = 2;
    sc.frames = 80;
    sc.seed = 9;
    auto [spec, truth] = cbf::generate_scene(sc);
    const cbf::CMatrix X = spec.bins[0];
    const cbf::CMatrix A = (X * X.adjoint()) / double(X.cols());
    const cbf::CVector b = X.col(0);
    const cbf::CVector x = cbf::hermitian_solve(A, b, 1e-10);
    expect((A * x - b).norm() / b.norm() < 1e-6, "large residual");
  });

  check("packed normal equations: fast equals brute", [&] {
    cbf::SceneConfig sc;
    sc.sources = 2;
    sc.channels = 3;
    sc.num_bins = 1;
    sc.frames = 50;
    sc.late_taps = 2;
    sc.seed = 3;
    auto [spec, truth] = cbf::generate_scene(sc);
    cbf::StackConfig stack_cfg;
    stack_cfg.length = 3;
    stack_cfg.delay = 1;
    stack_cfg.channels = 3;
    const cbf::StackedObservation stacked = cbf::stack(spec.bins[0], stack_cfg);
    std::vector<cbf::RVector> lambdas;
    std::vector<cbf::CovarianceSet> covs;
    cbf::CMatrix Q(3, 2);
    for (int i = 0; i < 2; ++i) {
      Q.col(i) = truth.steering[i].col(0) / truth.steering[i](0, 0);
      cbf::RVector lam = cbf::RVector::Constant(50, 0.5 + 0.1 * i);
      lambdas.push_back(lam);
      covs.push_back(cbf::accumulate(stacked, lam));
    }
    const auto fast = cbf::packed_normal_equations_fast(covs, Q);
    const auto brute = cbf::packed_normal_equations_brute(stacked, Q, lambdas);
    const double rel = (fast.Psi - brute.Psi).norm() / brute.Psi.norm();
    expect(rel < 1e-10, "Psi mismatch " + std::to_string(rel));
    expect((fast.psi - brute.psi).norm() / brute.psi.norm() < 1e-10, "psi mismatch");
  });

  check("distortionless constraint", [&] {
    cbf::SceneConfig sc;
    sc.channels = 4;
    sc.num_bins = 2;
    sc.frames = 60;
    sc.seed = 21;
    auto [spec, truth] = cbf::generate_scene(sc);
    const cbf::CMatrix X = spec.bins[1];
    const cbf::CMatrix R = (X * X.adjoint()) / double(X.cols());
    const cbf::Steering s = cbf::make_steering(truth.steering[0].col(1), 0);
    const cbf::CVector q = cbf::mpdr(R, s);
    expect(std::abs(q.dot(s.rtf) - 1.0) < 1e-10, "constraint residual too large");
  });

  check("monotone objective", [&] {
    cbf::SceneConfig sc;
    sc.channels = 4;
    sc.num_bins = 5;
    sc.frames = 100;
    sc.late_taps = 2;
    sc.noise_level = 0.05;
    sc.seed = 31;
    auto [spec, truth] = cbf::generate_scene(sc);
    cbf::RunConfig rc;
    rc.iterations = 5;
    rc.delay = 2;
    rc.bands = {{std::numeric_limits<double>::infinity(), 4}};
    rc.fixed_steering = std::vector<cbf::CMatrix>{truth.steering[0]};
    rc.threads = 1;
    const cbf::RunResult result = cbf::run_source_wise(spec, cbf::oracle_masks(truth), 0, rc);
    for (std::size_t k = 1; k < result.trace.objective.size(); ++k) {
      const double prev = result.trace.objective[k - 1];
      const double cur = result.trace.objective[k];
      expect(cur <= prev + 1e-9 * std::abs(prev), "objective increased at iteration " + std::to_string(k));
    }
  });

  check("separation improves SDR", [&] {
    cbf::SceneConfig sc;
    sc.sources = 2;
    sc.channels = 4;
    sc.num_bins = 17;
    sc.frames = 160;
    sc.late_taps = 2;
    sc.reverb_level = 0.4;
    sc.noise_level = 0.05;
    sc.seed = 17;
    auto [spec, truth] = cbf::generate_scene(sc);
    cbf::RunConfig rc;
    rc.iterations = 5;
    rc.delay = 2;
    rc.bands = {{std::numeric_limits<double>::infinity(), 4}};
    const cbf::RunResult result = cbf::run(spec, cbf::oracle_masks(truth), rc);
    std::vector<cbf::CMatrix> est, ref;
    for (int i = 0; i < 2; ++i) {
      est.push_back(cbf::flatten_bins(result.sources[i]));
      ref.push_back(truth.desired_at(i, 0));
    }
    const std::vector<int> perm = cbf::match_sources(est, ref);
    double before = 0, after = 0;
    const cbf::CMatrix mix = cbf::flatten_bins(spec);
    for (int i = 0; i < 2; ++i) {
      after += cbf::sdr_db(est[i], ref[perm[i]]) / 2;
      before += cbf::sdr_db(mix, ref[perm[i]]) / 2;
    }
    expect(after > before + 3.0, "SDR gain too small: " + std::to_string(after - before));
  });

  check("file round trips", [&] {
    const fs::path dir =
        fs::temp_directory_path() / ("cbf-selftest-" + std::to_string(::getpid()));
    fs::create_directories(dir);
    cbf::SceneConfig sc;
    sc.sources = 2;
    sc.channels = 3;
    sc.num_bins = 33;
    sc.frames = 50;
    sc.seed = 2;
    sc.noise_level = 0.1;
    auto [spec, truth] = cbf::generate_scene(sc);

    const cbf::TimeSignal sig = cbf::synthesize(spec);
    cbf::write_wav((dir / "a.wav").string(), sig, cbf::WavFormat::kFloat32);
    const cbf::TimeSignal back = cbf::read_wav((dir / "a.wav").string());
    expect((back.samples.cast<float>().array() == sig.samples.cast<float>().array()).all(),
           "float32 WAV not exact");

    const cbf::MaskSet masks = cbf::oracle_masks(truth);
    cbf::write_masks((dir / "m.msk").string(), masks);
    const cbf::MaskSet masks2 = cbf::read_masks((dir / "m.msk").string());
    expect((masks.gamma[1].array() == masks2.gamma[1].array()).all(), "mask tensor not bit exact");

    cbf::write_scene_config((dir / "s.scene").string(), sc);
    const cbf::SceneConfig sc2 = cbf::read_scene_config((dir / "s.scene").string());
    expect(sc2.seed == sc.seed && sc2.frames == sc.frames && sc2.noise_level == sc.noise_level,
           "scene file round trip mismatch");
    fs::remove_all(dir);
  });

  if (failures == 0) {
    std::cout << "all checks passed\n";
    return 0;
  }
  std::cout << failures << " check(s) failed\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multichannel dereverberation, denoising, and source separation"};
  app.require_subcommand(1);

  Options opt;
  int repeat = 3;
  int bench_frames = 400;
  bool assert_order = false;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("-o,--output", opt.output_dir, "output directory");
    sub->add_option("--config", opt.config_path, "JSON config; values override flags");
    sub->add_option("--threads", opt.threads, "worker threads (0 = all cores; also CBF_THREADS)");
    sub->add_option("--ref", opt.ref_channel, "reference channel");
    sub->add_flag("--pcm16", opt.pcm16, "write 16-bit PCM instead of float32");
  };

  CLI::App* enhance = app.add_subcommand("enhance", "dereverberate, denoise, and separate a mixture");
  enhance->add_option("input", opt.input, "multichannel WAV (or scene file with --oracle)")
      ->required();
  enhance->add_option("masks", opt.masks, "mask tensor file");
  enhance->add_flag("--oracle", opt.oracle, "input is a scene file; use oracle masks");
  enhance->add_option("--method", opt.method, "estimation method (see docs)");
  enhance->add_option("--iters", opt.iterations, "optimization iterations");
  enhance->add_option("--delta", opt.delta, "prediction delay in frames");
  enhance->add_option("--bands", opt.bands, "filter lengths, e.g. 800:20,1500:16,inf:8");
  enhance->add_option("--frame-len", opt.frame_len, "analysis frame length");
  enhance->add_option("--frame-shift", opt.frame_shift, "analysis frame shift");
  enhance->add_option("--loading", opt.loading, "diagonal loading factor");
  enhance->add_option("--variance-floor", opt.variance_floor, "relative variance floor");
  enhance->add_option("--mask-clamp", opt.mask_clamp, "mask clamping bound");
  enhance->add_flag("--no-complement", opt.no_complement,
                    "drop residual-subspace terms in source-packed-fast");
  enhance->add_flag("--log-timing", opt.log_timing, "include per-iteration seconds in the run log");
  add_common(enhance);

  CLI::App* simulate = app.add_subcommand("simulate", "render a synthetic scene to files");
  simulate->add_option("scene", opt.input, "scene description file")->required();
  add_common(simulate);

  CLI::App* bench = app.add_subcommand("bench", "time the estimation methods");
  bench->add_option("--repeat", repeat, "repetitions per method");
  bench->add_option("--frames", bench_frames, "scene length in frames");
  bench->add_flag("--assert-order", assert_order, "fail unless the expected timing order holds");
  add_common(bench);

  CLI::App* selftest = app.add_subcommand("selftest", "run built-in invariant checks");
  (void)selftest;

  try {
    app.parse(argc, argv);
    if (enhance->parsed()) return cmd_enhance(opt);
    if (simulate->parsed()) return cmd_simulate(opt);
    if (bench->parsed()) return cmd_bench(repeat, assert_order, bench_frames, opt);
    return cmd_selftest();
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const cbf::InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const cbf::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
