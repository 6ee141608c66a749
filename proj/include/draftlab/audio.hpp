#pragma once

#include "draftlab/common.hpp"

#include <string>
#include <vector>

namespace draft::audio {

struct WavData {
    std::vector<real> samples;  // normalized to [-1, 1]
    int sample_rate = 0;
};

// Reads a 16-bit signed little-endian PCM mono WAV. Other encodings raise an
// unsupported-format error naming the offending header field; truncated or
// inconsistent files raise a corrupt-file error. Samples are divided by
// 32768, so INT16_MIN maps to exactly -1.0.
WavData read_wav(const std::string& path);

// Writes the matching format (values clamped to [-1, 1], scaled by 32767).
void write_wav(const std::string& path, const std::vector<real>& samples,
               int sample_rate);

}  // namespace draft::audio
