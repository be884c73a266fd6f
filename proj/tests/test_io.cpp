#include "doctest.h"

#include <unistd.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include "cbf/io.hpp"

using cbf::MaskSet;
using cbf::RMatrix;
using cbf::SceneConfig;
using cbf::TimeSignal;

namespace {

std::string temp_path(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() /
                   ("cbf_io_test_" + std::to_string(getpid()));
  std::filesystem::create_directories(dir);
  return (dir / name).string();
}

void append_u16(std::string& buf, std::uint16_t v) {
  buf.push_back(static_cast<char>(v & 0xff));
  buf.push_back(static_cast<char>((v >> 8) & 0xff));
}

void append_u32(std::string& buf, std::uint32_t v) {
  append_u16(buf, static_cast<std::uint16_t>(v & 0xffff));
  append_u16(buf, static_cast<std::uint16_t>(v >> 16));
}

// Minimal PCM16 WAV body with caller-controlled chunks spliced in between.
std::string pcm16_file(const std::string& pre_fmt_chunks,
                       const std::string& post_fmt_chunks,
                       const std::vector<std::int16_t>& interleaved, int channels) {
  std::string data;
  for (std::int16_t v : interleaved) append_u16(data, static_cast<std::uint16_t>(v));

  std::string fmt;
  append_u16(fmt, 1);  // PCM
  append_u16(fmt, static_cast<std::uint16_t>(channels));
  append_u32(fmt, 8000);
  append_u32(fmt, 8000u * channels * 2);
  append_u16(fmt, static_cast<std::uint16_t>(channels * 2));
  append_u16(fmt, 16);

  std::string body = "WAVE";
  body += pre_fmt_chunks;
  body += "fmt ";
  append_u32(body, static_cast<std::uint32_t>(fmt.size()));
  body += fmt;
  body += post_fmt_chunks;
  body += "data";
  append_u32(body, static_cast<std::uint32_t>(data.size()));
  body += data;

  std::string file = "RIFF";
  append_u32(file, static_cast<std::uint32_t>(body.size()));
  file += body;
  return file;
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("float32 wav files round trip bit for bit") {
  TimeSignal sig;
  sig.sample_rate = 44100.0;
  sig.samples.resize(2, 5);
  sig.samples << 0.5, -0.25, 1.0, -1.0, 0.0,
                 0.125, 2.5, -0.0625, 0.75, -0.5;  // exactly representable floats

  const std::string path = temp_path("roundtrip_f32.wav");
  cbf::write_wav(path, sig, cbf::WavFormat::kFloat32);
  const TimeSignal back = cbf::read_wav(path);

  CHECK(back.sample_rate == 44100.0);
  REQUIRE(back.channels() == 2);
  REQUIRE(back.num_samples() == 5);
  CHECK((back.samples - sig.samples).cwiseAbs().maxCoeff() == 0.0);
  // Float storage does not clamp, so out-of-range samples survive.
  CHECK(back.samples(1, 1) == 2.5);
}

TEST_CASE("pcm16 wav files quantize to one step and clamp the overshoot") {
  TimeSignal sig;
  sig.sample_rate = 16000.0;
  sig.samples.resize(1, 6);
  sig.samples << 0.3, -0.7, 0.0, 1.5, -2.0, 0.9999;

  const std::string path = temp_path("roundtrip_pcm16.wav");
  cbf::write_wav(path, sig, cbf::WavFormat::kPcm16);
  const TimeSignal back = cbf::read_wav(path);

  REQUIRE(back.num_samples() == 6);
  for (int t = 0; t < 6; ++t) {
    const double clamped = std::clamp(sig.samples(0, t), -1.0, 1.0);
    CHECK(std::abs(back.samples(0, t) - clamped) <= 1.0 / 32768.0);
  }
  CHECK(back.samples(0, 3) <= 1.0);
  CHECK(back.samples(0, 4) >= -1.0);
}

TEST_CASE("interleaved samples land on the right channels") {
  // Two channels, three frames, laid out by hand: L0 R0 L1 R1 L2 R2.
  const std::vector<std::int16_t> interleaved = {16384, -16384, 8192, 0, -8192, 4096};
  const std::string path = temp_path("interleaved.wav");
  write_file(path, pcm16_file("", "", interleaved, 2));

  const TimeSignal sig = cbf::read_wav(path);
  REQUIRE(sig.channels() == 2);
  REQUIRE(sig.num_samples() == 3);
  CHECK(sig.sample_rate == 8000.0);
  CHECK(sig.samples(0, 0) == doctest::Approx(0.5));
  CHECK(sig.samples(1, 0) == doctest::Approx(-0.5));
  CHECK(sig.samples(0, 1) == doctest::Approx(0.25));
  CHECK(sig.samples(1, 1) == doctest::Approx(0.0));
  CHECK(sig.samples(0, 2) == doctest::Approx(-0.25));
  CHECK(sig.samples(1, 2) == doctest::Approx(0.125));
}

TEST_CASE("unknown riff chunks are skipped, including odd-sized ones") {
  std::string junk_odd = "junk";
  append_u32(junk_odd, 3);
  junk_odd += "ab";
  junk_odd.push_back('c');
  junk_odd.push_back('\0');  // pad byte for the odd size

  std::string list = "LIST";
  append_u32(list, 4);
  list += "INFO";

  const std::string path = temp_path("chunks.wav");
  write_file(path, pcm16_file(junk_odd, list, {100, 200}, 1));

  const TimeSignal sig = cbf::read_wav(path);
  REQUIRE(sig.num_samples() == 2);
  CHECK(sig.samples(0, 1) == doctest::Approx(200.0 / 32768.0));
}

TEST_CASE("malformed wav files fail with input errors") {
  CHECK_THROWS_AS(cbf::read_wav(temp_path("missing.wav")), cbf::InputError);

  const std::string good = pcm16_file("", "", {0, 0}, 1);

  std::string bad_magic = good;
  bad_magic[3] = 'X';  // RIFX
  write_file(temp_path("bad_magic.wav"), bad_magic);
  CHECK_THROWS_AS(cbf::read_wav(temp_path("bad_magic.wav")), cbf::InputError);

  std::string bad_wave = good;
  bad_wave[8] = 'X';
  write_file(temp_path("bad_wave.wav"), bad_wave);
  CHECK_THROWS_AS(cbf::read_wav(temp_path("bad_wave.wav")), cbf::InputError);

  // data chunk first, fmt never seen before it.
  {
    std::string body = "WAVE";
    body += "data";
    append_u32(body, 4);
    append_u32(body, 0);
    std::string file = "RIFF";
    append_u32(file, static_cast<std::uint32_t>(body.size()));
    file += body;
    write_file(temp_path("data_first.wav"), file);
    CHECK_THROWS_AS(cbf::read_wav(temp_path("data_first.wav")), cbf::InputError);
  }

  // 8-bit PCM is not supported.
  {
    std::string file = pcm16_file("", "", {0}, 1);
    // bits-per-sample lives 22 bytes into the fmt payload area; patch it.
    const auto fmt_pos = file.find("fmt ");
    REQUIRE(fmt_pos != std::string::npos);
    file[fmt_pos + 8 + 14] = 8;
    write_file(temp_path("pcm8.wav"), file);
    CHECK_THROWS_AS(cbf::read_wav(temp_path("pcm8.wav")), cbf::InputError);
  }

  std::string truncated = good;
  truncated.resize(truncated.size() - 2);
  write_file(temp_path("truncated.wav"), truncated);
  CHECK_THROWS_AS(cbf::read_wav(temp_path("truncated.wav")), cbf::InputError);
}

TEST_CASE("mask tensors round trip bit for bit") {
  MaskSet masks;
  masks.gamma.push_back(RMatrix::Zero(3, 4));
  masks.gamma.push_back(RMatrix::Zero(3, 4));
  for (int t = 0; t < 3; ++t) {
    for (int f = 0; f < 4; ++f) {
      masks.gamma[0](t, f) = (t + 1.0) / (3.0 * (f + 2.0));  // not dyadic on purpose
      masks.gamma[1](t, f) = 1.0 - masks.gamma[0](t, f);
    }
  }

  const std::string path = temp_path("masks.msk");
  cbf::write_masks(path, masks);
  const MaskSet back = cbf::read_masks(path);
  REQUIRE(back.sources() == 2);
  REQUIRE(back.frames() == 3);
  REQUIRE(back.num_bins() == 4);
  for (int i = 0; i < 2; ++i) {
    CHECK((back.gamma[i] - masks.gamma[i]).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("mask files with broken headers or payloads are rejected") {
  MaskSet masks;
  masks.gamma.push_back(RMatrix::Constant(2, 2, 0.5));
  const std::string path = temp_path("good.msk");
  cbf::write_masks(path, masks);

  std::ifstream in(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  auto expect_reject = [&](const std::string& name, const std::string& contents) {
    const std::string p = temp_path(name);
    write_file(p, contents);
    CHECK_THROWS_AS(cbf::read_masks(p), cbf::InputError);
  };

  expect_reject("magic.msk", "cbf-mask-tensor v2\n" + bytes.substr(bytes.find('\n') + 1));
  expect_reject("dtype.msk", "cbf-mask-tensor v1\ndtype float32\ndims 1 2 2\ndata\n");
  expect_reject("dims.msk", "cbf-mask-tensor v1\ndtype float64\ndims 0 2 2\ndata\n");
  expect_reject("huge.msk",
                "cbf-mask-tensor v1\ndtype float64\ndims 100000 100000 100000\ndata\n");
  expect_reject("marker.msk", "cbf-mask-tensor v1\ndtype float64\ndims 1 2 2\npayload\n");
  expect_reject("short.msk", bytes.substr(0, bytes.size() - 8));

  // Out-of-range values fail validation before hitting the disk.
  MaskSet wild;
  wild.gamma.push_back(RMatrix::Constant(2, 2, 0.5));
  wild.gamma[0](0, 0) = 2.0;
  const std::string wild_path = temp_path("wild.msk");
  CHECK_THROWS_AS(cbf::write_masks(wild_path, wild), cbf::InputError);

  CHECK_THROWS_AS(cbf::read_masks(temp_path("missing.msk")), cbf::InputError);
}

TEST_CASE("scene files round trip every field") {
  SceneConfig cfg;
  cfg.sources = 3;
  cfg.channels = 6;
  cfg.num_bins = 17;
  cfg.frames = 321;
  cfg.delay = 3;
  cfg.late_taps = 5;
  cfg.reverb_level = 0.625;
  cfg.noise_level = 0.0125;
  cfg.activity = 0.85;
  cfg.burst_period = 12;
  cfg.seed = 123456789012345ull;
  cfg.sample_rate = 48000.0;
  cfg.frame_len = 256;
  cfg.frame_shift = 64;

  const std::string path = temp_path("scene.scene");
  cbf::write_scene_config(path, cfg);
  const SceneConfig back = cbf::read_scene_config(path);

  CHECK(back.sources == cfg.sources);
  CHECK(back.channels == cfg.channels);
  CHECK(back.num_bins == cfg.num_bins);
  CHECK(back.frames == cfg.frames);
  CHECK(back.delay == cfg.delay);
  CHECK(back.late_taps == cfg.late_taps);
  CHECK(back.reverb_level == cfg.reverb_level);
  CHECK(back.noise_level == cfg.noise_level);
  CHECK(back.activity == cfg.activity);
  CHECK(back.burst_period == cfg.burst_period);
  CHECK(back.seed == cfg.seed);
  CHECK(back.sample_rate == cfg.sample_rate);
  CHECK(back.frame_len == cfg.frame_len);
  CHECK(back.frame_shift == cfg.frame_shift);
}

TEST_CASE("scene parsing tolerates comments and rejects typos loudly") {
  const std::string path = temp_path("commented.scene");
  write_file(path,
             "# a fully commented line\n"
             "\n"
             "sources 2   # inline comment\n"
             "channels 4\n"
             "frames 50\n");
  const SceneConfig cfg = cbf::read_scene_config(path);
  CHECK(cfg.sources == 2);
  CHECK(cfg.channels == 4);
  CHECK(cfg.frames == 50);
  CHECK(cfg.num_bins == 33);  // untouched default

  auto expect_message = [&](const std::string& name, const std::string& contents,
                            const std::string& needle) {
    const std::string p = temp_path(name);
    write_file(p, contents);
    try {
      cbf::read_scene_config(p);
      FAIL("expected InputError for " << name);
    } catch (const cbf::InputError& e) {
      CHECK(std::string(e.what()).find(needle) != std::string::npos);
    }
  };

  expect_message("unknown.scene", "channels 4\nchanels 4\n", "line 2");
  expect_message("unknown2.scene", "chanels 4\n", "unknown scene key");
  expect_message("trailing.scene", "channels 4 4\n", "trailing");
  expect_message("nonnum.scene", "channels four\n", "expected integer");

  // Values that parse but violate the scene contract still fail.
  write_file(temp_path("invalid.scene"), "sources 0\n");
  CHECK_THROWS_AS(cbf::read_scene_config(temp_path("invalid.scene")), cbf::InputError);
  CHECK_THROWS_AS(cbf::read_scene_config(temp_path("missing.scene")), cbf::InputError);
}
