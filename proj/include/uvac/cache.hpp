#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "uvac/dsp.hpp"

namespace uvac::dsp {

// Binary cache of preprocessed samples.
//
//   header:  "UVACSPEC" | u32 version | u32 freq_bins | u32 frames | u32 dsp_hash | u64 count
//   record:  u32 "RCRD" | u16 id_len | id | u8 digit | u16 speaker_len | speaker
//            | f32[freq_bins * frames] grid (row-major, frequency-major) | u8[frames] mask
//            | u32 crc32(id_len .. mask)
//
// All integers and floats little-endian.

inline constexpr std::uint32_t kCacheVersion = 1;

struct CacheHeader {
  std::uint32_t version = kCacheVersion;
  std::uint32_t freq_bins = 0;
  std::uint32_t frames = 0;
  std::uint32_t dsp_hash = 0;
  std::uint64_t count = 0;
};

struct CacheRead {
  CacheHeader header;
  std::vector<SpectrogramSample> samples;
  std::size_t corrupted = 0;   // records that failed their checksum
  bool truncated = false;      // parsing stopped before `count` records
};

void write_cache(const std::filesystem::path& path, std::span<const SpectrogramSample> samples,
                 std::uint32_t dsp_hash);
/// Reads every record whose checksum verifies; bad records are counted and skipped.
CacheRead read_cache(const std::filesystem::path& path);

/// Streams records to `<path>.partial`, flushing after each one. commit() fills in the record
/// count and renames the file onto `path`; until then the header carries an open-ended count,
/// so an interrupted writer leaves a partial file that reads back as truncated.
class CacheWriter {
 public:
  CacheWriter(const std::filesystem::path& path, std::uint32_t freq_bins, std::uint32_t frames,
              std::uint32_t dsp_hash);
  ~CacheWriter();
  CacheWriter(const CacheWriter&) = delete;
  CacheWriter& operator=(const CacheWriter&) = delete;

  void append(const SpectrogramSample& sample);
  void commit();
  std::uint64_t written() const { return written_; }
  const std::filesystem::path& partial_path() const { return partial_; }

 private:
  std::filesystem::path path_;
  std::filesystem::path partial_;
  CacheHeader header_;
  std::ofstream out_;
  std::uint64_t written_ = 0;
};

/// In-memory preprocessed corpus with id lookup. Lookups can be recorded, which is
/// how tests check that training never touches held-out ids.
class SpectrogramDataset {
 public:
  SpectrogramDataset() = default;
  SpectrogramDataset(std::vector<SpectrogramSample> samples, std::uint32_t dsp_hash);

  static SpectrogramDataset load(const std::filesystem::path& cache_path);

  std::size_t size() const { return samples_.size(); }
  std::uint32_t dsp_hash() const { return dsp_hash_; }
  bool contains(const std::string& id) const { return index_.count(id) != 0; }

  const SpectrogramSample& at(const std::string& id) const;
  std::vector<const SpectrogramSample*> select(const std::vector<std::string>& ids) const;
  const std::vector<SpectrogramSample>& samples() const { return samples_; }

  void set_access_logging(bool enabled) const;
  std::set<std::string> accessed_ids() const;

 private:
  std::vector<SpectrogramSample> samples_;
  std::unordered_map<std::string, std::size_t> index_;
  std::uint32_t dsp_hash_ = 0;

  struct AccessLog {
    std::mutex mutex;
    bool enabled = false;
    std::set<std::string> ids;
  };
  std::shared_ptr<AccessLog> log_ = std::make_shared<AccessLog>();
};

}  // namespace uvac::dsp
