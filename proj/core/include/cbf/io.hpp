// io.hpp
// File formats used by the command line tools.
//
// WAV: RIFF with PCM16 or IEEE float32 samples, interleaved. Unknown chunks
// are skipped on read.
//
// Mask tensor (.msk): a short text header followed by raw little-endian
// float64 payload. Header lines, each '\n' terminated:
//   cbf-mask-tensor v1
//   dtype float64
//   dims <sources> <frames> <bins>
//   data
// Payload order: source-major, then frame, bin fastest. Values are the
// per-source time-frequency weights in [0, 1].
//
// Scene description (.scene): "key value" lines, one per line, '#' starts a
// comment. Keys mirror SceneConfig fields; unknown keys are an error so that
// typos fail loudly.

#pragma once

#include <string>

#include "cbf/rtf.hpp"
#include "cbf/simulate.hpp"
#include "cbf/types.hpp"

namespace cbf {

enum class WavFormat { kPcm16, kFloat32 };

TimeSignal read_wav(const std::string& path);
void write_wav(const std::string& path, const TimeSignal& sig,
               WavFormat format = WavFormat::kFloat32);

MaskSet read_masks(const std::string& path);
void write_masks(const std::string& path, const MaskSet& masks);

SceneConfig read_scene_config(const std::string& path);
void write_scene_config(const std::string& path, const SceneConfig& cfg);

}  // namespace cbf
