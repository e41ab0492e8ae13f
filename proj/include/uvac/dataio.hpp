#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace uvac::dataio {

/// One decoded recording of a spoken digit.
struct AudioClip {
  std::string id;  // "<digit>_<speaker>_<index>", unique within the corpus
  std::vector<float> samples;
  int sample_rate = 0;
  int digit = -1;
  std::string speaker_id;
  std::size_t original_length = 0;
};

void validate(const AudioClip& clip);

struct CorpusLoad {
  std::vector<AudioClip> clips;  // sorted by id
  std::vector<std::string> warnings;
};

/// Parses "<digit>_<speaker>_<index>.wav". Returns false for names outside that scheme.
bool parse_clip_name(const std::string& stem, int& digit, std::string& speaker, std::string& index);

/// A corpus file whose name parsed; audio not yet decoded.
struct ClipEntry {
  std::string id;
  std::filesystem::path path;
  int digit = -1;
  std::string speaker_id;
};

struct CorpusListing {
  std::vector<ClipEntry> entries;  // sorted by id
  std::vector<std::string> warnings;
};

/// Walks `root` recursively for `<digit>_<speaker>_<index>.wav` without decoding.
/// Throws if the directory is missing; bad names and duplicate ids become warnings.
CorpusListing list_corpus(const std::filesystem::path& root);

/// Decodes and validates one listed file.
AudioClip load_clip(const ClipEntry& entry);

/// list_corpus followed by load_clip on every entry. Throws if nothing decodes;
/// undecodable files become warnings.
CorpusLoad load_corpus(const std::filesystem::path& root);

enum class SplitMode { Uniform, SpeakerHeldOut };

struct SplitManifest {
  std::vector<std::string> train_ids;
  std::vector<std::string> val_ids;
  std::vector<std::string> test_ids;
  std::uint64_t seed = 0;
  SplitMode mode = SplitMode::Uniform;

  /// CRC-32 over the seed, mode and all three id lists.
  std::uint32_t content_hash() const;
  std::size_t size() const { return train_ids.size() + val_ids.size() + test_ids.size(); }
};

/// 80/10/10 split (val = test = floor(n/10)); deterministic per seed. Requires >= 10 clips.
SplitManifest make_splits(const std::vector<AudioClip>& clips, std::uint64_t seed,
                          SplitMode mode = SplitMode::Uniform);

/// Same as above, from (id, speaker) pairs only.
SplitManifest make_splits(std::vector<std::pair<std::string, std::string>> id_speaker,
                          std::uint64_t seed, SplitMode mode = SplitMode::Uniform);

void write_manifest(const SplitManifest& manifest, const std::filesystem::path& path);
/// Throws if the file is malformed or its stored hash does not match the content.
SplitManifest read_manifest(const std::filesystem::path& path);

std::string to_string(SplitMode mode);
SplitMode split_mode_from_string(const std::string& text);

}  // namespace uvac::dataio
