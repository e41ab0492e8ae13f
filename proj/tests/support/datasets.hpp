#pragma once

#include <random>
#include <string>
#include <vector>

#include "uvac/cache.hpp"
#include "uvac/dataio.hpp"

namespace uvac::testing {

/// Random grids with a digit-dependent bright band, ids "<digit>_<speaker>_<index>".
inline std::vector<dsp::SpectrogramSample> toy_samples(int n, std::size_t freq, std::size_t frames,
                                                       std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 0.3f);
  std::uniform_int_distribution<std::size_t> len(frames / 2, frames);
  std::vector<dsp::SpectrogramSample> out;
  for (int i = 0; i < n; ++i) {
    dsp::SpectrogramSample s;
    s.digit = i % 10;
    s.speaker_id = std::to_string(1 + (i / 10) % 6);
    s.clip_id = std::to_string(s.digit) + "_" + s.speaker_id + "_" + std::to_string(i);
    s.freq_bins = freq;
    s.frames = frames;
    s.grid.resize(freq * frames);
    for (auto& v : s.grid) v = u(rng);
    const std::size_t band = std::size_t(s.digit) * freq / 10;
    for (std::size_t t = 0; t < frames; ++t) s.grid[band * frames + t] = 1.0f;
    const std::size_t active = len(rng);
    s.mask.assign(frames, 0);
    std::fill(s.mask.begin(), s.mask.begin() + std::ptrdiff_t(active), 1);
    out.push_back(std::move(s));
  }
  return out;
}

inline dataio::SplitManifest manifest_for(const std::vector<dsp::SpectrogramSample>& samples, std::uint64_t seed) {
  std::vector<std::pair<std::string, std::string>> ids;
  for (const auto& s : samples) ids.emplace_back(s.clip_id, s.speaker_id);
  return dataio::make_splits(ids, seed);
}

}  // namespace uvac::testing
