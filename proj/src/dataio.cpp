#include "uvac/dataio.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>

#include "uvac/common.hpp"
#include "uvac/wav.hpp"

namespace uvac::dataio {
namespace {

// Fisher-Yates driven directly by mt19937_64 so the permutation does not depend on the
// standard library's distribution implementations.
template <typename T>
void seeded_shuffle(std::vector<T>& items, std::uint64_t seed) {
  std::mt19937_64 engine(seed);
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::uint64_t bound = i;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t draw;
    do {
      draw = engine();
    } while (draw >= limit);
    std::swap(items[i - 1], items[draw % bound]);
  }
}

bool all_digits(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
}

}  // namespace

void validate(const AudioClip& clip) {
  if (clip.sample_rate <= 0) throw std::invalid_argument("clip " + clip.id + ": sample_rate must be > 0");
  if (clip.samples.empty()) throw std::invalid_argument("clip " + clip.id + ": no samples");
  if (clip.digit < 0 || clip.digit > 9) throw std::invalid_argument("clip " + clip.id + ": digit outside 0-9");
}

bool parse_clip_name(const std::string& stem, int& digit, std::string& speaker, std::string& index) {
  const auto first = stem.find('_');
  if (first == std::string::npos) return false;
  const auto second = stem.find('_', first + 1);
  if (second == std::string::npos || stem.find('_', second + 1) != std::string::npos) return false;
  const std::string d = stem.substr(0, first);
  speaker = stem.substr(first + 1, second - first - 1);
  index = stem.substr(second + 1);
  if (d.size() != 1 || !std::isdigit(static_cast<unsigned char>(d[0])) || speaker.empty() ||
      !all_digits(index))
    return false;
  digit = d[0] - '0';
  return true;
}

CorpusListing list_corpus(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw std::runtime_error("corpus directory not found: " + root.string());

  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (entry.is_regular_file() && entry.path().extension() == ".wav") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  CorpusListing listing;
  std::map<std::string, fs::path> seen;
  for (const auto& file : files) {
    ClipEntry e;
    std::string index;
    const std::string stem = file.stem().string();
    if (!parse_clip_name(stem, e.digit, e.speaker_id, index)) {
      listing.warnings.push_back(file.string() + ": name does not match <digit>_<speaker>_<index>.wav, skipped");
      continue;
    }
    if (auto it = seen.find(stem); it != seen.end()) {
      listing.warnings.push_back(file.string() + ": duplicate id of " + it->second.string() + ", skipped");
      continue;
    }
    seen.emplace(stem, file);
    e.id = stem;
    e.path = file;
    listing.entries.push_back(std::move(e));
  }
  std::sort(listing.entries.begin(), listing.entries.end(),
            [](const ClipEntry& a, const ClipEntry& b) { return a.id < b.id; });
  return listing;
}

AudioClip load_clip(const ClipEntry& entry) {
  wav::Audio audio = wav::read(entry.path);
  AudioClip clip;
  clip.id = entry.id;
  clip.original_length = audio.samples.size();
  clip.samples = std::move(audio.samples);
  clip.sample_rate = audio.sample_rate;
  clip.digit = entry.digit;
  clip.speaker_id = entry.speaker_id;
  validate(clip);
  return clip;
}

CorpusLoad load_corpus(const std::filesystem::path& root) {
  CorpusListing listing = list_corpus(root);
  CorpusLoad load;
  load.warnings = std::move(listing.warnings);
  for (const auto& entry : listing.entries) {
    try {
      load.clips.push_back(load_clip(entry));
    } catch (const std::exception& e) {
      load.warnings.push_back(entry.path.string() + ": " + e.what() + ", skipped");
    }
  }
  if (load.clips.empty()) throw std::runtime_error("no decodable clips under " + root.string());
  return load;
}

SplitManifest make_splits(const std::vector<AudioClip>& clips, std::uint64_t seed, SplitMode mode) {
  std::vector<std::pair<std::string, std::string>> id_speaker;
  id_speaker.reserve(clips.size());
  for (const auto& c : clips) id_speaker.emplace_back(c.id, c.speaker_id);
  return make_splits(std::move(id_speaker), seed, mode);
}

SplitManifest make_splits(std::vector<std::pair<std::string, std::string>> id_speaker,
                          std::uint64_t seed, SplitMode mode) {
  const std::size_t n = id_speaker.size();
  if (n < 10) throw std::invalid_argument("make_splits needs at least 10 clips, got " + std::to_string(n));
  std::sort(id_speaker.begin(), id_speaker.end());
  for (std::size_t i = 1; i < n; ++i)
    if (id_speaker[i].first == id_speaker[i - 1].first)
      throw std::invalid_argument("duplicate clip id " + id_speaker[i].first);

  const std::size_t held = n / 10;
  SplitManifest m;
  m.seed = seed;
  m.mode = mode;

  if (mode == SplitMode::Uniform) {
    std::vector<std::string> ids;
    ids.reserve(n);
    for (auto& [id, speaker] : id_speaker) ids.push_back(id);
    seeded_shuffle(ids, seed);
    m.val_ids.assign(ids.begin(), ids.begin() + held);
    m.test_ids.assign(ids.begin() + held, ids.begin() + 2 * held);
    m.train_ids.assign(ids.begin() + 2 * held, ids.end());
  } else {
    std::map<std::string, std::vector<std::string>> by_speaker;
    for (auto& [id, speaker] : id_speaker) by_speaker[speaker].push_back(id);
    if (by_speaker.size() < 3) throw std::invalid_argument("speaker-held-out split needs >= 3 speakers");
    std::vector<std::string> speakers;
    for (const auto& [s, ids] : by_speaker) speakers.push_back(s);
    seeded_shuffle(speakers, seed);
    // Whole speakers go to test, then val, until each holds at least n/10 clips.
    std::size_t s = 0;
    for (; s < speakers.size() - 2 && m.test_ids.size() < held; ++s)
      for (const auto& id : by_speaker[speakers[s]]) m.test_ids.push_back(id);
    for (; s < speakers.size() - 1 && m.val_ids.size() < held; ++s)
      for (const auto& id : by_speaker[speakers[s]]) m.val_ids.push_back(id);
    for (; s < speakers.size(); ++s)
      for (const auto& id : by_speaker[speakers[s]]) m.train_ids.push_back(id);
  }
  std::sort(m.train_ids.begin(), m.train_ids.end());
  std::sort(m.val_ids.begin(), m.val_ids.end());
  std::sort(m.test_ids.begin(), m.test_ids.end());
  return m;
}

std::string to_string(SplitMode mode) { return mode == SplitMode::Uniform ? "uniform" : "speaker"; }

SplitMode split_mode_from_string(const std::string& text) {
  if (text == "uniform") return SplitMode::Uniform;
  if (text == "speaker") return SplitMode::SpeakerHeldOut;
  throw std::invalid_argument("unknown split mode '" + text + "' (expected uniform or speaker)");
}

std::uint32_t SplitManifest::content_hash() const {
  std::uint32_t h = crc32("seed " + std::to_string(seed) + "\nmode " + to_string(mode) + "\n");
  const auto section = [&](const char* name, const std::vector<std::string>& ids) {
    h = crc32(std::string("[") + name + "]\n", h);
    for (const auto& id : ids) h = crc32(id + "\n", h);
  };
  section("train", train_ids);
  section("val", val_ids);
  section("test", test_ids);
  return h;
}

void write_manifest(const SplitManifest& manifest, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "# uvac split manifest\n";
  out << "version 1\n";
  out << "seed " << manifest.seed << "\n";
  out << "mode " << to_string(manifest.mode) << "\n";
  char hash[9];
  std::snprintf(hash, sizeof hash, "%08x", manifest.content_hash());
  out << "hash " << hash << "\n";
  const auto section = [&](const char* name, const std::vector<std::string>& ids) {
    out << "[" << name << "] " << ids.size() << "\n";
    for (const auto& id : ids) out << id << "\n";
  };
  section("train", manifest.train_ids);
  section("val", manifest.val_ids);
  section("test", manifest.test_ids);

  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream file(tmp, std::ios::binary);
    if (!file) throw std::runtime_error("cannot write manifest " + path.string());
    file << out.str();
  }
  std::filesystem::rename(tmp, path);
}

SplitManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest " + path.string());
  const auto fail = [&](const std::string& why) {
    return std::runtime_error("manifest " + path.string() + ": " + why);
  };

  SplitManifest m;
  std::string line, stored_hash;
  bool have_seed = false;
  std::vector<std::string>* section = nullptr;
  std::map<std::string, std::size_t> declared;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (line[0] == '[') {
      const auto close = line.find(']');
      if (close == std::string::npos) throw fail("bad section line '" + line + "'");
      const std::string name = line.substr(1, close - 1);
      if (name == "train") section = &m.train_ids;
      else if (name == "val") section = &m.val_ids;
      else if (name == "test") section = &m.test_ids;
      else throw fail("unknown section " + name);
      declared[name] = std::stoul(line.substr(close + 1));
      continue;
    }
    if (section != nullptr) {
      section->push_back(line);
      continue;
    }
    std::istringstream fields(line);
    std::string key, value;
    fields >> key >> value;
    if (key == "version") {
      if (value != "1") throw fail("unsupported version " + value);
    } else if (key == "seed") {
      m.seed = std::stoull(value);
      have_seed = true;
    } else if (key == "mode") {
      m.mode = split_mode_from_string(value);
    } else if (key == "hash") {
      stored_hash = value;
    } else {
      throw fail("unknown header field " + key);
    }
  }
  if (!have_seed || stored_hash.empty()) throw fail("missing seed or hash");
  if (declared["train"] != m.train_ids.size() || declared["val"] != m.val_ids.size() ||
      declared["test"] != m.test_ids.size())
    throw fail("section sizes do not match their headers");
  char hash[9];
  std::snprintf(hash, sizeof hash, "%08x", m.content_hash());
  if (stored_hash != hash) throw fail("content hash mismatch (stored " + stored_hash + ", computed " + hash + ")");
  return m;
}

}  // namespace uvac::dataio
