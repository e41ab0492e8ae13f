#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "uvac/common.hpp"
#include "uvac/dataio.hpp"

namespace uvac::dsp {

/// Front-end parameters. The defaults produce the 128 x 99 model input.
struct DspConfig {
  int sample_rate = 48000;           // working rate; other rates are resampled
  std::size_t target_samples = 48000;  // one second
  std::size_t window = 960;
  std::size_t hop = 480;
  std::size_t first_bin = 1;         // DC bin dropped
  std::size_t bins = 128;

  std::size_t frames() const { return (target_samples - window) / hop + 1; }
  std::size_t one_sided_bins() const { return window / 2 + 1; }
  /// Stable hash of every field plus the front-end revision; stored in caches and checkpoints.
  std::uint32_t hash() const;
};

/// Normalized magnitude grid (bins x frames, row-major, frequency-major) plus activity mask.
struct SpectrogramSample {
  std::string clip_id;
  int digit = -1;
  std::string speaker_id;
  std::size_t freq_bins = 0;
  std::size_t frames = 0;
  std::vector<float> grid;
  std::vector<std::uint8_t> mask;

  float at(std::size_t bin, std::size_t frame) const { return grid[bin * frames + frame]; }
};

/// Throws if the sample breaks a shape, range or mask-shape invariant.
void validate(const SpectrogramSample& sample);

/// Zero-pads (or truncates) to exactly `target_samples`, keeping the front.
std::vector<float> pad_to_duration(std::span<const float> samples, std::size_t target_samples);

/// Periodic Hann window of length n.
std::vector<double> hann_window(std::size_t n);

/// One-sided STFT magnitude, no centering: frames = floor((len - window) / hop) + 1.
/// Result is (window/2 + 1) x frames.
RowMatrix stft_magnitude(std::span<const float> samples, std::size_t window = 960,
                         std::size_t hop = 480);

/// Keeps rows [first_bin, first_bin + bins).
RowMatrix crop_and_select_bins(const RowMatrix& magnitude, std::size_t first_bin = 1,
                               std::size_t bins = 128);

/// Per-sample standardization then min-max to [0, 1]. Constant input maps to zeros.
RowMatrix normalize(const RowMatrix& magnitude);

/// Frame t is active iff t * hop < original_length.
std::vector<std::uint8_t> activity_mask(std::size_t original_length, std::size_t frames,
                                        std::size_t hop = 480);

/// Band-limited (windowed-sinc) resampling between integer rates.
std::vector<float> resample(std::span<const float> samples, int from_rate, int to_rate);

/// resample -> pad -> stft -> crop -> normalize -> mask.
SpectrogramSample preprocess(const dataio::AudioClip& clip, const DspConfig& config = {});

/// Flattened grids as feature rows (bins * frames columns).
RowMatrix flatten(std::span<const SpectrogramSample> samples);
RowMatrix flatten(std::span<const SpectrogramSample* const> samples);

}  // namespace uvac::dsp
