#include "uvac/cache.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>

namespace uvac::dsp {
namespace {

constexpr char kMagic[8] = {'U', 'V', 'A', 'C', 'S', 'P', 'E', 'C'};
constexpr std::uint32_t kRecordMagic = 0x44524352;  // "RCRD"
constexpr std::uint64_t kOpenEndedCount = ~std::uint64_t(0);

class ByteWriter {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u16(std::uint16_t v) { for (int i = 0; i < 2; ++i) bytes_.push_back(std::uint8_t(v >> (8 * i))); }
  void u32(std::uint32_t v) { for (int i = 0; i < 4; ++i) bytes_.push_back(std::uint8_t(v >> (8 * i))); }
  void u64(std::uint64_t v) { for (int i = 0; i < 8; ++i) bytes_.push_back(std::uint8_t(v >> (8 * i))); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void str(const std::string& s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  ByteReader(const std::vector<std::uint8_t>& bytes, std::size_t pos) : b_(bytes), pos_(pos) {}
  bool has(std::size_t n) const { return pos_ + n <= b_.size(); }
  std::size_t pos() const { return pos_; }
  std::uint8_t u8() { return b_[pos_++]; }
  std::uint16_t u16() { std::uint16_t v = 0; for (int i = 0; i < 2; ++i) v |= std::uint16_t(b_[pos_++]) << (8 * i); return v; }
  std::uint32_t u32() { std::uint32_t v = 0; for (int i = 0; i < 4; ++i) v |= std::uint32_t(b_[pos_++]) << (8 * i); return v; }
  std::uint64_t u64() { std::uint64_t v = 0; for (int i = 0; i < 8; ++i) v |= std::uint64_t(b_[pos_++]) << (8 * i); return v; }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string str(std::size_t n) { std::string s(b_.begin() + pos_, b_.begin() + pos_ + n); pos_ += n; return s; }

 private:
  const std::vector<std::uint8_t>& b_;
  std::size_t pos_;
};

}  // namespace

namespace {

std::vector<std::uint8_t> encode_header(const CacheHeader& h) {
  ByteWriter w;
  w.str(std::string(kMagic, 8));
  w.u32(h.version);
  w.u32(h.freq_bins);
  w.u32(h.frames);
  w.u32(h.dsp_hash);
  w.u64(h.count);
  return std::move(w.bytes());
}

std::vector<std::uint8_t> encode_record(const SpectrogramSample& s, const CacheHeader& h) {
  if (s.freq_bins != h.freq_bins || s.frames != h.frames || s.grid.size() != s.freq_bins * s.frames ||
      s.mask.size() != s.frames)
    throw std::invalid_argument("cache: sample " + s.clip_id + " does not match the cache shape");
  if (s.clip_id.size() > 0xffff || s.speaker_id.size() > 0xffff)
    throw std::invalid_argument("cache: id too long");
  if (s.digit < 0 || s.digit > 255) throw std::invalid_argument("cache: digit out of range");
  ByteWriter w;
  w.u32(kRecordMagic);
  w.u16(std::uint16_t(s.clip_id.size()));
  w.str(s.clip_id);
  w.u8(std::uint8_t(s.digit));
  w.u16(std::uint16_t(s.speaker_id.size()));
  w.str(s.speaker_id);
  for (float v : s.grid) w.f32(v);
  for (auto m : s.mask) w.u8(m);
  const auto& b = w.bytes();
  w.u32(crc32(std::span(b.data() + 4, b.size() - 4)));
  return std::move(w.bytes());
}

bool read_exact(std::istream& in, std::uint8_t* dst, std::size_t n) {
  in.read(reinterpret_cast<char*>(dst), std::streamsize(n));
  return std::size_t(in.gcount()) == n;
}

}  // namespace

void write_cache(const std::filesystem::path& path, std::span<const SpectrogramSample> samples,
                 std::uint32_t dsp_hash) {
  const std::uint32_t freq = samples.empty() ? 0 : std::uint32_t(samples.front().freq_bins);
  const std::uint32_t frames = samples.empty() ? 0 : std::uint32_t(samples.front().frames);
  CacheWriter writer(path, freq, frames, dsp_hash);
  for (const auto& s : samples) writer.append(s);
  writer.commit();
}

CacheWriter::CacheWriter(const std::filesystem::path& path, std::uint32_t freq_bins, std::uint32_t frames,
                         std::uint32_t dsp_hash)
    : path_(path), partial_(path.string() + ".partial") {
  header_.freq_bins = freq_bins;
  header_.frames = frames;
  header_.dsp_hash = dsp_hash;
  header_.count = kOpenEndedCount;
  out_.open(partial_, std::ios::binary | std::ios::trunc);
  if (!out_) throw std::runtime_error("cannot write cache " + partial_.string());
  const auto h = encode_header(header_);
  out_.write(reinterpret_cast<const char*>(h.data()), std::streamsize(h.size()));
}

CacheWriter::~CacheWriter() = default;

void CacheWriter::append(const SpectrogramSample& sample) {
  const auto r = encode_record(sample, header_);
  out_.write(reinterpret_cast<const char*>(r.data()), std::streamsize(r.size()));
  out_.flush();
  if (!out_) throw std::runtime_error("write failed for cache " + partial_.string());
  ++written_;
}

void CacheWriter::commit() {
  if (!out_.is_open()) throw std::logic_error("cache: writer already committed");
  header_.count = written_;
  const auto h = encode_header(header_);
  out_.seekp(0);
  out_.write(reinterpret_cast<const char*>(h.data()), std::streamsize(h.size()));
  out_.close();
  if (!out_) throw std::runtime_error("write failed for cache " + partial_.string());
  std::filesystem::rename(partial_, path_);
}

CacheRead read_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open cache " + path.string());
  std::vector<std::uint8_t> head(32);
  if (!read_exact(in, head.data(), head.size()) || std::memcmp(head.data(), kMagic, 8) != 0)
    throw std::runtime_error(path.string() + ": not a spectrogram cache");

  CacheRead result;
  ByteReader hr(head, 8);
  result.header.version = hr.u32();
  if (result.header.version != kCacheVersion)
    throw std::runtime_error(path.string() + ": unsupported cache version " + std::to_string(result.header.version));
  result.header.freq_bins = hr.u32();
  result.header.frames = hr.u32();
  result.header.dsp_hash = hr.u32();
  result.header.count = hr.u64();

  const std::size_t cells = std::size_t(result.header.freq_bins) * result.header.frames;
  const std::size_t tail = cells * 4 + result.header.frames + 4;
  std::vector<std::uint8_t> rec;
  for (std::uint64_t i = 0; i < result.header.count; ++i) {
    rec.resize(6);
    if (!read_exact(in, rec.data(), 6)) { result.truncated = true; break; }
    ByteReader r0(rec, 0);
    if (r0.u32() != kRecordMagic) { result.truncated = true; break; }
    const std::uint16_t id_len = r0.u16();
    rec.resize(6 + id_len + 3);
    if (!read_exact(in, rec.data() + 6, id_len + 3)) { result.truncated = true; break; }
    ByteReader r1(rec, 6 + id_len + 1);
    const std::uint16_t speaker_len = r1.u16();
    const std::size_t fixed = rec.size();
    rec.resize(fixed + speaker_len + tail);
    if (!read_exact(in, rec.data() + fixed, speaker_len + tail)) { result.truncated = true; break; }

    ByteReader r(rec, 6);
    SpectrogramSample s;
    s.clip_id = r.str(id_len);
    s.digit = r.u8();
    r.u16();
    s.speaker_id = r.str(speaker_len);
    s.freq_bins = result.header.freq_bins;
    s.frames = result.header.frames;
    s.grid.resize(cells);
    for (auto& v : s.grid) v = r.f32();
    s.mask.resize(s.frames);
    for (auto& m : s.mask) m = r.u8();
    const std::uint32_t expected = crc32(std::span(rec.data() + 4, r.pos() - 4));
    if (r.u32() != expected) {
      ++result.corrupted;
      continue;
    }
    result.samples.push_back(std::move(s));
  }
  return result;
}

SpectrogramDataset::SpectrogramDataset(std::vector<SpectrogramSample> samples, std::uint32_t dsp_hash)
    : samples_(std::move(samples)), dsp_hash_(dsp_hash) {
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    if (!index_.emplace(samples_[i].clip_id, i).second)
      throw std::invalid_argument("duplicate sample id " + samples_[i].clip_id);
  }
}

SpectrogramDataset SpectrogramDataset::load(const std::filesystem::path& cache_path) {
  CacheRead read = read_cache(cache_path);
  if (read.corrupted > 0 || read.truncated)
    throw std::runtime_error(cache_path.string() + ": " + std::to_string(read.corrupted) +
                             " corrupted record(s)" + (read.truncated ? ", truncated" : "") +
                             "; rerun prepare");
  return SpectrogramDataset(std::move(read.samples), read.header.dsp_hash);
}

const SpectrogramSample& SpectrogramDataset::at(const std::string& id) const {
  const auto it = index_.find(id);
  if (it == index_.end()) throw std::out_of_range("no preprocessed sample with id " + id);
  {
    std::lock_guard lock(log_->mutex);
    if (log_->enabled) log_->ids.insert(id);
  }
  return samples_[it->second];
}

std::vector<const SpectrogramSample*> SpectrogramDataset::select(const std::vector<std::string>& ids) const {
  std::vector<const SpectrogramSample*> out;
  out.reserve(ids.size());
  for (const auto& id : ids) out.push_back(&at(id));
  return out;
}

void SpectrogramDataset::set_access_logging(bool enabled) const {
  std::lock_guard lock(log_->mutex);
  log_->enabled = enabled;
  if (enabled) log_->ids.clear();
}

std::set<std::string> SpectrogramDataset::accessed_ids() const {
  std::lock_guard lock(log_->mutex);
  return log_->ids;
}

}  // namespace uvac::dsp
