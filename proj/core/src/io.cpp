#include "cbf/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <vector>

namespace cbf {

namespace {

std::uint16_t read_u16(std::istream& in) {
  unsigned char b[2];
  in.read(reinterpret_cast<char*>(b), 2);
  if (!in) throw InputError("wav: truncated file");
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw InputError("wav: truncated file");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_u16(std::ostream& out, std::uint16_t v) {
  const unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                              static_cast<unsigned char>((v >> 8) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 2);
}

void write_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                              static_cast<unsigned char>((v >> 8) & 0xff),
                              static_cast<unsigned char>((v >> 16) & 0xff),
                              static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::string read_tag(std::istream& in) {
  char tag[4];
  in.read(tag, 4);
  if (!in) throw InputError("wav: truncated file");
  return std::string(tag, 4);
}

}  // namespace

TimeSignal read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);

  if (read_tag(in) != "RIFF") throw InputError("wav: not a RIFF file: " + path);
  read_u32(in);  // container size, unused
  if (read_tag(in) != "WAVE") throw InputError("wav: not a WAVE file: " + path);

  std::uint16_t audio_format = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t bits = 0;
  bool have_fmt = false;

  while (true) {
    char tag_bytes[4];
    in.read(tag_bytes, 4);
    if (!in) throw InputError("wav: no data chunk in " + path);
    const std::string tag(tag_bytes, 4);
    const std::uint32_t size = read_u32(in);

    if (tag == "fmt ") {
      if (size < 16) throw InputError("wav: malformed fmt chunk");
      audio_format = read_u16(in);
      channels = read_u16(in);
      sample_rate = read_u32(in);
      read_u32(in);  // byte rate
      read_u16(in);  // block align
      bits = read_u16(in);
      in.seekg(size - 16 + (size & 1), std::ios::cur);
      have_fmt = true;
      continue;
    }
    if (tag != "data") {
      in.seekg(size + (size & 1), std::ios::cur);
      if (!in) throw InputError("wav: truncated chunk in " + path);
      continue;
    }

    if (!have_fmt) throw InputError("wav: data chunk before fmt in " + path);
    if (channels == 0 || sample_rate == 0) throw InputError("wav: malformed fmt chunk");
    const bool pcm16 = audio_format == 1 && bits == 16;
    const bool f32 = audio_format == 3 && bits == 32;
    if (!pcm16 && !f32) {
      throw InputError("wav: unsupported encoding (need PCM16 or float32): " + path);
    }

    const int bytes_per_sample = bits / 8;
    const std::uint32_t frame_bytes = channels * bytes_per_sample;
    const std::uint32_t num_frames = size / frame_bytes;
    std::vector<unsigned char> raw(static_cast<std::size_t>(num_frames) * frame_bytes);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!in) throw InputError("wav: truncated data chunk in " + path);

    TimeSignal sig;
    sig.sample_rate = sample_rate;
    sig.samples.resize(channels, num_frames);
    const unsigned char* p = raw.data();
    for (std::uint32_t t = 0; t < num_frames; ++t) {
      for (int c = 0; c < channels; ++c) {
        if (pcm16) {
          const auto v = static_cast<std::int16_t>(p[0] | (p[1] << 8));
          sig.samples(c, t) = v / 32768.0;
          p += 2;
        } else {
          const std::uint32_t u = static_cast<std::uint32_t>(p[0]) | (p[1] << 8) |
                                  (p[2] << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
          sig.samples(c, t) = std::bit_cast<float>(u);
          p += 4;
        }
      }
    }
    return sig;
  }
}

void write_wav(const std::string& path, const TimeSignal& sig, WavFormat format) {
  if (sig.samples.size() == 0) throw InputError("write_wav: empty signal");
  if (sig.sample_rate <= 0) throw InputError("write_wav: bad sample rate");
  const int channels = static_cast<int>(sig.samples.rows());
  const auto num_frames = static_cast<std::uint32_t>(sig.samples.cols());
  const bool f32 = format == WavFormat::kFloat32;
  const int bytes_per_sample = f32 ? 4 : 2;
  const std::uint32_t data_size = num_frames * channels * bytes_per_sample;
  const std::uint32_t fact_size = f32 ? 12 : 0;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open " + path + " for writing");

  out.write("RIFF", 4);
  write_u32(out, 4 + 24 + fact_size + 8 + data_size);
  out.write("WAVE", 4);

  out.write("fmt ", 4);
  write_u32(out, 16);
  write_u16(out, f32 ? 3 : 1);
  write_u16(out, static_cast<std::uint16_t>(channels));
  const auto rate = static_cast<std::uint32_t>(std::lround(sig.sample_rate));
  write_u32(out, rate);
  write_u32(out, rate * channels * bytes_per_sample);
  write_u16(out, static_cast<std::uint16_t>(channels * bytes_per_sample));
  write_u16(out, static_cast<std::uint16_t>(bytes_per_sample * 8));

  if (f32) {
    out.write("fact", 4);
    write_u32(out, 4);
    write_u32(out, num_frames);
  }

  out.write("data", 4);
  write_u32(out, data_size);
  for (std::uint32_t t = 0; t < num_frames; ++t) {
    for (int c = 0; c < channels; ++c) {
      const double v = sig.samples(c, t);
      if (f32) {
        write_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
      } else {
        const double clamped = std::clamp(v, -1.0, 1.0);
        write_u16(out, static_cast<std::uint16_t>(
                           static_cast<std::int16_t>(std::lround(clamped * 32767.0))));
      }
    }
  }
  if (!out) throw InputError("write_wav: write failed for " + path);
}

MaskSet read_masks(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);

  std::string line;
  if (!std::getline(in, line) || line != "cbf-mask-tensor v1") {
    throw InputError("mask file: bad magic in " + path);
  }
  if (!std::getline(in, line) || line != "dtype float64") {
    throw InputError("mask file: unsupported dtype in " + path);
  }
  if (!std::getline(in, line)) throw InputError("mask file: missing dims in " + path);
  std::istringstream dims(line);
  std::string key;
  long long sources = 0, frames = 0, bins = 0;
  dims >> key >> sources >> frames >> bins;
  if (key != "dims" || dims.fail() || sources < 1 || frames < 1 || bins < 1) {
    throw InputError("mask file: malformed dims in " + path);
  }
  const long long total = sources * frames * bins;
  if (total > (1ll << 30)) throw InputError("mask file: implausible dims in " + path);
  if (!std::getline(in, line) || line != "data") {
    throw InputError("mask file: missing data marker in " + path);
  }

  std::vector<unsigned char> raw(static_cast<std::size_t>(total) * 8);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!in) throw InputError("mask file: truncated payload in " + path);

  MaskSet masks;
  masks.gamma.assign(static_cast<std::size_t>(sources),
                     RMatrix(static_cast<int>(frames), static_cast<int>(bins)));
  const unsigned char* p = raw.data();
  for (long long i = 0; i < sources; ++i) {
    for (long long t = 0; t < frames; ++t) {
      for (long long f = 0; f < bins; ++f) {
        std::uint64_t u = 0;
        for (int b = 7; b >= 0; --b) u = (u << 8) | p[b];
        p += 8;
        masks.gamma[static_cast<std::size_t>(i)](static_cast<int>(t), static_cast<int>(f)) =
            std::bit_cast<double>(u);
      }
    }
  }
  masks.validate();
  return masks;
}

void write_masks(const std::string& path, const MaskSet& masks) {
  masks.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open " + path + " for writing");

  out << "cbf-mask-tensor v1\n"
      << "dtype float64\n"
      << "dims " << masks.sources() << ' ' << masks.frames() << ' ' << masks.num_bins() << '\n'
      << "data\n";
  for (const RMatrix& g : masks.gamma) {
    for (int t = 0; t < g.rows(); ++t) {
      for (int f = 0; f < g.cols(); ++f) {
        const auto u = std::bit_cast<std::uint64_t>(g(t, f));
        unsigned char b[8];
        for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>((u >> (8 * k)) & 0xff);
        out.write(reinterpret_cast<const char*>(b), 8);
      }
    }
  }
  if (!out) throw InputError("write_masks: write failed for " + path);
}

SceneConfig read_scene_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);

  SceneConfig cfg;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream row(line);
    std::string key;
    if (!(row >> key)) continue;

    auto bad = [&](const char* what) {
      return InputError("scene file " + path + " line " + std::to_string(line_no) + ": " + what);
    };
    auto read_int = [&](int& dst) {
      if (!(row >> dst)) throw bad("expected integer value");
    };
    auto read_double = [&](double& dst) {
      if (!(row >> dst)) throw bad("expected numeric value");
    };

    if (key == "sources") read_int(cfg.sources);
    else if (key == "channels") read_int(cfg.channels);
    else if (key == "num_bins") read_int(cfg.num_bins);
    else if (key == "frames") read_int(cfg.frames);
    else if (key == "delay") read_int(cfg.delay);
    else if (key == "late_taps") read_int(cfg.late_taps);
    else if (key == "reverb_level") read_double(cfg.reverb_level);
    else if (key == "noise_level") read_double(cfg.noise_level);
    else if (key == "activity") read_double(cfg.activity);
    else if (key == "burst_period") read_int(cfg.burst_period);
    else if (key == "seed") {
      if (!(row >> cfg.seed)) throw bad("expected integer value");
    } else if (key == "sample_rate") read_double(cfg.sample_rate);
    else if (key == "frame_len") read_int(cfg.frame_len);
    else if (key == "frame_shift") read_int(cfg.frame_shift);
    else throw bad(("unknown scene key: " + key).c_str());

    std::string extra;
    if (row >> extra) throw bad("trailing tokens after value");
  }
  cfg.validate();
  return cfg;
}

void write_scene_config(const std::string& path, const SceneConfig& cfg) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open " + path + " for writing");
  out.precision(17);
  out << "sources " << cfg.sources << '\n'
      << "channels " << cfg.channels << '\n'
      << "num_bins " << cfg.num_bins << '\n'
      << "frames " << cfg.frames << '\n'
      << "delay " << cfg.delay << '\n'
      << "late_taps " << cfg.late_taps << '\n'
      << "reverb_level " << cfg.reverb_level << '\n'
      << "noise_level " << cfg.noise_level << '\n'
      << "activity " << cfg.activity << '\n'
      << "burst_period " << cfg.burst_period << '\n'
      << "seed " << cfg.seed << '\n'
      << "sample_rate " << cfg.sample_rate << '\n'
      << "frame_len " << cfg.frame_len << '\n'
      << "frame_shift " << cfg.frame_shift << '\n';
  if (!out) throw InputError("write_scene_config: write failed for " + path);
}

}  // namespace cbf
