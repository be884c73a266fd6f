// End-to-end checks driving the installed binary the way a user would.
// The binary path comes in through CBF_CLI_PATH at compile time.

#include "doctest.h"

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "cbf/io.hpp"
#include "cbf/simulate.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path& work_dir() {
  static const fs::path dir = [] {
    const fs::path d =
        fs::temp_directory_path() / ("cbf_cli_test_" + std::to_string(getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

CliResult run_cli(const std::string& args, const std::string& env_prefix = "") {
  static int counter = 0;
  const std::string tag = std::to_string(counter++);
  const std::string out_path = (work_dir() / ("stdout_" + tag)).string();
  const std::string err_path = (work_dir() / ("stderr_" + tag)).string();
  std::string cmd = env_prefix;
  if (!cmd.empty()) cmd += ' ';
  cmd += std::string("\"") + CBF_CLI_PATH + "\" " + args + " >" + out_path + " 2>" + err_path;

  const int status = std::system(cmd.c_str());
  CliResult r;
  if (status != -1 && WIFEXITED(status)) r.code = WEXITSTATUS(status);
  r.out = slurp(out_path);
  r.err = slurp(err_path);
  return r;
}

// 33 bins derive a 64-sample frame; the explicit 32-sample hop keeps echo
// lags past the window so rendered audio matches the frame-domain scene.
// Always-on sources with a wandering level envelope keep the rendering
// faithful; per-frame gating would not survive the trip through audio.
std::string scene_path() {
  static const std::string path = [] {
    cbf::SceneConfig sc;
    sc.sources = 2;
    sc.channels = 4;
    sc.num_bins = 33;
    sc.frames = 80;
    sc.frame_shift = 32;
    sc.delay = 2;
    sc.late_taps = 2;
    sc.reverb_level = 0.4;
    sc.noise_level = 0.05;
    sc.activity = 1.0;
    sc.seed = 13;
    const std::string p = (work_dir() / "scene.scene").string();
    cbf::write_scene_config(p, sc);
    return p;
  }();
  return path;
}

cbf::CMatrix complex_samples(const std::string& wav_path) {
  return cbf::read_wav(wav_path).samples.cast<cbf::Complex>();
}

// SDR over the interior samples. The first and last frame carry tiny window
// weight, so overlap-add synthesis amplifies whatever disagreement the
// per-bin filters leave there; every STFT pipeline shares that edge effect.
double matched_sdr_gain(const std::string& out_dir, const std::string& ref_dir,
                        double* worst = nullptr) {
  const int trim = 64;
  std::vector<cbf::CMatrix> est, ref;
  for (int i = 0; i < 2; ++i) {
    est.push_back(complex_samples(out_dir + "/src" + std::to_string(i) + ".wav"));
    ref.push_back(complex_samples(ref_dir + "/true_src" + std::to_string(i) + ".wav"));
    const int keep = static_cast<int>(est.back().cols()) - 2 * trim;
    REQUIRE(keep > 0);
    est.back() = est.back().middleCols(trim, keep).eval();
    ref.back() = ref.back().middleCols(trim, keep).eval();
  }
  cbf::CMatrix mix = complex_samples(ref_dir + "/mix.wav").row(0);
  mix = mix.middleCols(trim, mix.cols() - 2 * trim).eval();
  const std::vector<int> perm = cbf::match_sources(est, ref);
  double gain = 0.0;
  if (worst) *worst = 1e9;
  for (int i = 0; i < 2; ++i) {
    const double sdr = cbf::sdr_db(est[i], ref[perm[i]]);
    gain += (sdr - cbf::sdr_db(mix, ref[perm[i]])) / 2.0;
    if (worst) *worst = std::min(*worst, sdr);
  }
  return gain;
}

const std::string kEnhanceFlags =
    " --frame-len 64 --frame-shift 32 --iters 3 --delta 2 --bands inf:4 --threads 2";

}  // namespace

TEST_CASE("simulate writes its artifacts deterministically") {
  const std::string dir_a = (work_dir() / "sim_a").string();
  const std::string dir_b = (work_dir() / "sim_b").string();
  const CliResult a = run_cli("simulate " + scene_path() + " -o " + dir_a);
  const CliResult b = run_cli("simulate " + scene_path() + " -o " + dir_b);
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  CHECK(a.out.find("masks.msk") != std::string::npos);

  for (const char* name : {"mix.wav", "true_src0.wav", "true_src1.wav", "masks.msk"}) {
    CAPTURE(name);
    REQUIRE(fs::exists(fs::path(dir_a) / name));
    CHECK(slurp((fs::path(dir_a) / name).string()) == slurp((fs::path(dir_b) / name).string()));
  }

  const cbf::TimeSignal mix = cbf::read_wav(dir_a + "/mix.wav");
  CHECK(mix.channels() == 4);
  CHECK(mix.num_samples() == 80 * 32);
  CHECK(mix.sample_rate == 16000.0);
}

TEST_CASE("enhance separates a simulated mixture from files alone") {
  const std::string sim_dir = (work_dir() / "sim_main").string();
  REQUIRE(run_cli("simulate " + scene_path() + " -o " + sim_dir).code == 0);

  const std::string out_dir = (work_dir() / "enh_main").string();
  const CliResult r = run_cli("enhance " + sim_dir + "/mix.wav " + sim_dir +
                              "/masks.msk --method source-packed-fast" + kEnhanceFlags +
                              " -o " + out_dir);
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(fs::exists(fs::path(out_dir) / "src0.wav"));
  CHECK(fs::exists(fs::path(out_dir) / "src1.wav"));
  REQUIRE(fs::exists(fs::path(out_dir) / "run_log.txt"));

  const std::string log = slurp(out_dir + "/run_log.txt");
  CHECK(log.find("\"record\":\"config\"") != std::string::npos);
  CHECK(log.find("\"method\":\"source-packed-fast\"") != std::string::npos);
  CHECK(log.find("\"iter\":3") != std::string::npos);

  double worst = 0.0;
  const double gain = matched_sdr_gain(out_dir, sim_dir, &worst);
  CHECK(gain > 4.0);
  CHECK(worst > 6.0);

  // Output length follows the input mixture.
  CHECK(cbf::read_wav(out_dir + "/src0.wav").num_samples() == 80 * 32);
}

TEST_CASE("oracle mode runs straight from the scene description") {
  const std::string sim_dir = (work_dir() / "sim_oracle").string();
  REQUIRE(run_cli("simulate " + scene_path() + " -o " + sim_dir).code == 0);

  const std::string out_dir = (work_dir() / "enh_oracle").string();
  const CliResult r = run_cli("enhance " + scene_path() +
                              " --oracle --method source-wise" + kEnhanceFlags + " -o " + out_dir);
  REQUIRE_MESSAGE(r.code == 0, r.err);

  double worst = 0.0;
  const double gain = matched_sdr_gain(out_dir, sim_dir, &worst);
  CHECK(gain > 5.0);
  CHECK(worst > 7.0);
}

TEST_CASE("run logs without timing are byte-identical across reruns") {
  const std::string sim_dir = (work_dir() / "sim_log").string();
  REQUIRE(run_cli("simulate " + scene_path() + " -o " + sim_dir).code == 0);

  const std::string base = "enhance " + sim_dir + "/mix.wav " + sim_dir +
                           "/masks.msk --method source-packed-fast" + kEnhanceFlags;
  const std::string dir1 = (work_dir() / "log_1").string();
  const std::string dir2 = (work_dir() / "log_2").string();
  REQUIRE(run_cli(base + " -o " + dir1).code == 0);
  REQUIRE(run_cli(base + " -o " + dir2).code == 0);

  const std::string log1 = slurp(dir1 + "/run_log.txt");
  CHECK(log1 == slurp(dir2 + "/run_log.txt"));
  CHECK(!log1.empty());
  CHECK(log1.find("seconds") == std::string::npos);
}

TEST_CASE("config file values override conflicting flags") {
  const std::string sim_dir = (work_dir() / "sim_cfg").string();
  REQUIRE(run_cli("simulate " + scene_path() + " -o " + sim_dir).code == 0);

  const std::string cfg_path = (work_dir() / "override.json").string();
  {
    std::ofstream cfg(cfg_path);
    cfg << R"({"method": "source-wise", "iterations": 2, "bands": [["inf", 4]]})";
  }
  const std::string out_dir = (work_dir() / "enh_cfg").string();
  const CliResult r = run_cli("enhance " + sim_dir + "/mix.wav " + sim_dir +
                              "/masks.msk --method source-packed-fast --iters 7" +
                              " --frame-len 64 --frame-shift 32 --delta 2 --bands inf:4" +
                              " --threads 2 --config " + cfg_path + " -o " + out_dir);
  REQUIRE_MESSAGE(r.code == 0, r.err);

  const std::string log = slurp(out_dir + "/run_log.txt");
  CHECK(log.find("\"method\":\"source-wise\"") != std::string::npos);
  CHECK(log.find("\"iterations\":2") != std::string::npos);
  CHECK(log.find("\"iter\":2") != std::string::npos);
  CHECK(log.find("\"iter\":3") == std::string::npos);

  const CliResult bad = run_cli("enhance " + sim_dir + "/mix.wav " + sim_dir +
                                "/masks.msk --config " + cfg_path + " --unknown-key" +
                                " -o " + out_dir);
  CHECK(bad.code == 1);
}

TEST_CASE("exit codes distinguish usage errors from input errors") {
  CHECK(run_cli("").code == 1);             // a subcommand is required
  CHECK(run_cli("--help").code == 0);
  CHECK(run_cli("enhance").code == 1);      // missing required input
  CHECK(run_cli("frobnicate").code == 1);   // unknown subcommand

  const CliResult missing = run_cli("enhance does_not_exist.wav masks.msk");
  CHECK(missing.code == 1);
  CHECK(missing.err.find("error") != std::string::npos);

  const std::string sim_dir = (work_dir() / "sim_err").string();
  REQUIRE(run_cli("simulate " + scene_path() + " -o " + sim_dir).code == 0);

  const CliResult bad_method = run_cli("enhance " + sim_dir + "/mix.wav " + sim_dir +
                                       "/masks.msk --method bogus" + kEnhanceFlags);
  CHECK(bad_method.code == 1);
  CHECK(bad_method.err.find("unknown method") != std::string::npos);

  // Default 512/128 framing cannot match masks made for 64/32 frames.
  const CliResult mismatch =
      run_cli("enhance " + sim_dir + "/mix.wav " + sim_dir + "/masks.msk");
  CHECK(mismatch.code == 1);
  CHECK(mismatch.err.find("does not match") != std::string::npos);

  const CliResult no_masks = run_cli("enhance " + sim_dir + "/mix.wav");
  CHECK(no_masks.code == 1);

  const CliResult bad_bands = run_cli("enhance " + sim_dir + "/mix.wav " + sim_dir +
                                      "/masks.msk --bands oops");
  CHECK(bad_bands.code == 1);

  const CliResult bad_env = run_cli("enhance " + sim_dir + "/mix.wav " + sim_dir +
                                        "/masks.msk" + kEnhanceFlags,
                                    "CBF_THREADS=abc");
  // The explicit --threads flag wins, so break it by omitting the flag.
  const CliResult bad_env2 =
      run_cli("enhance " + sim_dir + "/mix.wav " + sim_dir +
                  "/masks.msk --frame-len 64 --frame-shift 32 --iters 1 --delta 2 --bands inf:4",
              "CBF_THREADS=abc");
  CHECK(bad_env.code == 0);
  CHECK(bad_env2.code == 1);
  CHECK(bad_env2.err.find("CBF_THREADS") != std::string::npos);
}

TEST_CASE("bench reports all three timed methods") {
  const CliResult r = run_cli("bench --repeat 1 --frames 60 --threads 2");
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(r.out.find("source-wise") != std::string::npos);
  CHECK(r.out.find("source-packed-fast") != std::string::npos);
  CHECK(r.out.find("source-packed-brute") != std::string::npos);
  CHECK(r.out.find("median (s)") != std::string::npos);
}

TEST_CASE("the built-in selftest passes") {
  const CliResult r = run_cli("selftest");
  const std::string log = r.out + r.err;
  REQUIRE_MESSAGE(r.code == 0, log);
  CHECK(r.out.find("all checks passed") != std::string::npos);
  CHECK(r.out.find("FAIL") == std::string::npos);
}
