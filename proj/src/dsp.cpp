#include "uvac/dsp.hpp"

#include <cmath>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <string>

#include <fftw3.h>

namespace uvac::dsp {
namespace {

std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

// Real-to-complex FFT plan plus its buffers.
class RealFft {
 public:
  explicit RealFft(std::size_t n) : n_(n) {
    in_ = fftw_alloc_real(n);
    out_ = fftw_alloc_complex(n / 2 + 1);
    std::lock_guard lock(fftw_planner_mutex());
    plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in_, out_, FFTW_ESTIMATE);
  }
  ~RealFft() {
    {
      std::lock_guard lock(fftw_planner_mutex());
      fftw_destroy_plan(plan_);
    }
    fftw_free(in_);
    fftw_free(out_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  double* input() { return in_; }
  void execute() { fftw_execute(plan_); }
  double magnitude(std::size_t k) const { return std::hypot(out_[k][0], out_[k][1]); }

 private:
  std::size_t n_;
  double* in_ = nullptr;
  fftw_complex* out_ = nullptr;
  fftw_plan plan_ = nullptr;
};

double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

}  // namespace

std::uint32_t DspConfig::hash() const {
  const std::string canonical =
      "uvac-dsp r1 rate=" + std::to_string(sample_rate) + " target=" + std::to_string(target_samples) +
      " window=" + std::to_string(window) + " hop=" + std::to_string(hop) +
      " first_bin=" + std::to_string(first_bin) + " bins=" + std::to_string(bins) +
      " hann=periodic center=none norm=sample-zscore-minmax mask=start-before-end";
  return crc32(canonical);
}

void validate(const SpectrogramSample& s) {
  const auto fail = [&](const std::string& why) {
    return std::invalid_argument("spectrogram " + s.clip_id + ": " + why);
  };
  if (s.grid.size() != s.freq_bins * s.frames) throw fail("grid size does not match dimensions");
  if (s.mask.size() != s.frames) throw fail("mask length does not match frame count");
  for (float v : s.grid)
    if (!(v >= 0.0f && v <= 1.0f)) throw fail("grid value outside [0, 1]");
  bool seen_zero = false;
  for (auto m : s.mask) {
    if (m > 1) throw fail("mask is not binary");
    if (m == 0) seen_zero = true;
    else if (seen_zero) throw fail("mask is not a prefix of ones");
  }
}

std::vector<float> pad_to_duration(std::span<const float> samples, std::size_t target_samples) {
  std::vector<float> out(target_samples, 0.0f);
  const std::size_t keep = std::min(samples.size(), target_samples);
  std::copy_n(samples.begin(), keep, out.begin());
  return out;
}

std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * double(i) / double(n));
  return w;
}

RowMatrix stft_magnitude(std::span<const float> samples, std::size_t window, std::size_t hop) {
  if (window == 0 || hop == 0) throw std::invalid_argument("stft: window and hop must be positive");
  if (samples.size() < window)
    throw std::invalid_argument("stft: input of " + std::to_string(samples.size()) +
                                " samples is shorter than one window (" + std::to_string(window) + ")");
  const std::size_t frames = (samples.size() - window) / hop + 1;
  const std::size_t bins = window / 2 + 1;
  const auto w = hann_window(window);

  RealFft fft(window);
  RowMatrix mag(bins, frames);
  for (std::size_t t = 0; t < frames; ++t) {
    double* buf = fft.input();
    for (std::size_t i = 0; i < window; ++i) buf[i] = double(samples[t * hop + i]) * w[i];
    fft.execute();
    for (std::size_t k = 0; k < bins; ++k) mag(k, t) = fft.magnitude(k);
  }
  return mag;
}

RowMatrix crop_and_select_bins(const RowMatrix& magnitude, std::size_t first_bin, std::size_t bins) {
  if (std::size_t(magnitude.rows()) < first_bin + bins)
    throw std::invalid_argument("crop_and_select_bins: need at least " + std::to_string(first_bin + bins) +
                                " frequency rows, got " + std::to_string(magnitude.rows()));
  return magnitude.middleRows(first_bin, bins);
}

RowMatrix normalize(const RowMatrix& magnitude) {
  if (magnitude.size() == 0) throw std::invalid_argument("normalize: empty matrix");
  const double mean = magnitude.mean();
  const double var = (magnitude.array() - mean).square().mean();
  const double sd = std::sqrt(var);
  RowMatrix out = RowMatrix::Zero(magnitude.rows(), magnitude.cols());
  if (!(sd > 0.0)) return out;
  const RowMatrix z = (magnitude.array() - mean) / sd;
  const double lo = z.minCoeff();
  const double hi = z.maxCoeff();
  if (!(hi > lo)) return out;
  out = (z.array() - lo) / (hi - lo);
  return out;
}

std::vector<std::uint8_t> activity_mask(std::size_t original_length, std::size_t frames, std::size_t hop) {
  std::vector<std::uint8_t> mask(frames, 0);
  for (std::size_t t = 0; t < frames; ++t) mask[t] = t * hop < original_length ? 1 : 0;
  return mask;
}

std::vector<float> resample(std::span<const float> samples, int from_rate, int to_rate) {
  if (from_rate <= 0 || to_rate <= 0) throw std::invalid_argument("resample: rates must be positive");
  if (from_rate == to_rate) return {samples.begin(), samples.end()};
  const double ratio = double(to_rate) / double(from_rate);
  const double cutoff = std::min(1.0, ratio);  // in units of the input Nyquist
  constexpr int kZeroCrossings = 32;
  const double half_width = kZeroCrossings / cutoff;
  const std::size_t out_len =
      static_cast<std::size_t>(std::llround(double(samples.size()) * ratio));
  const auto n = static_cast<std::ptrdiff_t>(samples.size());

  std::vector<float> out(out_len);
  for (std::size_t j = 0; j < out_len; ++j) {
    const double t = double(j) / ratio;
    const auto lo = std::max<std::ptrdiff_t>(0, std::ptrdiff_t(std::ceil(t - half_width)));
    const auto hi = std::min<std::ptrdiff_t>(n - 1, std::ptrdiff_t(std::floor(t + half_width)));
    double acc = 0.0;
    for (std::ptrdiff_t k = lo; k <= hi; ++k) {
      const double d = t - double(k);
      const double taper = 0.5 + 0.5 * std::cos(std::numbers::pi * d / half_width);
      acc += double(samples[k]) * cutoff * sinc(cutoff * d) * taper;
    }
    out[j] = static_cast<float>(acc);
  }
  return out;
}

SpectrogramSample preprocess(const dataio::AudioClip& clip, const DspConfig& config) {
  dataio::validate(clip);
  std::vector<float> audio = clip.sample_rate == config.sample_rate
                                 ? clip.samples
                                 : resample(clip.samples, clip.sample_rate, config.sample_rate);
  const double ratio = double(config.sample_rate) / double(clip.sample_rate);
  const std::size_t original = std::min(clip.original_length, clip.samples.size());
  const std::size_t audible = std::min<std::size_t>(
      std::min<std::size_t>(std::llround(double(original) * ratio), audio.size()), config.target_samples);

  const auto padded = pad_to_duration(audio, config.target_samples);
  const RowMatrix grid =
      normalize(crop_and_select_bins(stft_magnitude(padded, config.window, config.hop), config.first_bin,
                                     config.bins));

  SpectrogramSample s;
  s.clip_id = clip.id;
  s.digit = clip.digit;
  s.speaker_id = clip.speaker_id;
  s.freq_bins = std::size_t(grid.rows());
  s.frames = std::size_t(grid.cols());
  s.grid.resize(grid.size());
  for (Eigen::Index i = 0; i < grid.size(); ++i) s.grid[i] = static_cast<float>(grid.data()[i]);
  s.mask = activity_mask(audible, s.frames, config.hop);
  return s;
}

RowMatrix flatten(std::span<const SpectrogramSample> samples) {
  std::vector<const SpectrogramSample*> ptrs;
  ptrs.reserve(samples.size());
  for (const auto& s : samples) ptrs.push_back(&s);
  return flatten(std::span<const SpectrogramSample* const>(ptrs));
}

RowMatrix flatten(std::span<const SpectrogramSample* const> samples) {
  if (samples.empty()) return {};
  const std::size_t d = samples.front()->grid.size();
  RowMatrix x(samples.size(), d);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i]->grid.size() != d) throw std::invalid_argument("flatten: samples differ in grid size");
    for (std::size_t j = 0; j < d; ++j) x(i, j) = samples[i]->grid[j];
  }
  return x;
}

}  // namespace uvac::dsp
