#pragma once

#include <filesystem>
#include <vector>

namespace uvac::wav {

struct Audio {
  std::vector<float> samples;  // mono, in [-1, 1]
  int sample_rate = 0;
  int channels = 0;            // channel count in the file before downmixing
};

/// Reads RIFF/WAVE with integer PCM (8/16/24/32-bit) or IEEE float (32/64-bit).
/// Multi-channel input is averaged to mono. Throws std::runtime_error on malformed input.
Audio read(const std::filesystem::path& path);

/// Writes 16-bit mono PCM.
void write(const std::filesystem::path& path, const std::vector<float>& samples, int sample_rate);

}  // namespace uvac::wav
