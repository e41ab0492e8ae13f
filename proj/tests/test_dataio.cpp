#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <set>

#include "support/synthetic.hpp"
#include "uvac/dataio.hpp"
#include "uvac/wav.hpp"

using namespace uvac;
using uvac::testing::TempDir;

namespace {

void write_raw_wav(const std::filesystem::path& path, std::uint16_t format, std::uint16_t channels, int rate,
                   std::uint16_t bits, const std::vector<std::uint8_t>& payload) {
  std::ofstream f(path, std::ios::binary);
  const auto u32 = [&](std::uint32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); };
  const auto u16 = [&](std::uint16_t v) { f.write(reinterpret_cast<const char*>(&v), 2); };
  f.write("RIFF", 4);
  u32(std::uint32_t(36 + payload.size()));
  f.write("WAVEfmt ", 8);
  u32(16);
  u16(format);
  u16(channels);
  u32(std::uint32_t(rate));
  u32(std::uint32_t(rate) * channels * bits / 8);
  u16(std::uint16_t(channels * bits / 8));
  u16(bits);
  f.write("data", 4);
  u32(std::uint32_t(payload.size()));
  f.write(reinterpret_cast<const char*>(payload.data()), std::streamsize(payload.size()));
}

std::vector<std::pair<std::string, std::string>> fake_ids(int speakers, int per_speaker) {
  std::vector<std::pair<std::string, std::string>> out;
  for (int s = 0; s < speakers; ++s)
    for (int i = 0; i < per_speaker; ++i)
      out.emplace_back(std::to_string(i % 10) + "_" + std::to_string(s) + "_" + std::to_string(i / 10),
                       std::to_string(s));
  return out;
}

}  // namespace

TEST_CASE("clip names parse into digit, speaker and index") {
  int digit = -1;
  std::string speaker, index;
  CHECK(dataio::parse_clip_name("7_03_42", digit, speaker, index));
  CHECK(digit == 7);
  CHECK(speaker == "03");
  CHECK(index == "42");
  for (const char* bad : {"7_03", "12_03_1", "x_03_1", "7__1", "7_03_a", "7_03_1_2", ""})
    CHECK_FALSE(dataio::parse_clip_name(bad, digit, speaker, index));
}

TEST_CASE("wav round trip keeps samples within half a 16-bit step") {
  TempDir dir("wav");
  std::vector<float> x(1000);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = float(std::sin(0.01 * double(i))) * 0.9f;
  wav::write(dir / "a.wav", x, 48000);
  const auto a = wav::read(dir / "a.wav");
  CHECK(a.sample_rate == 48000);
  CHECK(a.channels == 1);
  REQUIRE(a.samples.size() == x.size());
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(a.samples[i] - x[i]) <= 0.5f / 32768.0f + 1e-7f);
}

TEST_CASE("wav reader handles stereo, 8-bit, 24-bit and float payloads") {
  TempDir dir("wavfmt");
  SUBCASE("stereo 16-bit is averaged") {
    std::vector<std::uint8_t> p;
    for (std::int16_t v : {std::int16_t(16384), std::int16_t(0), std::int16_t(-16384), std::int16_t(-16384)}) {
      p.push_back(std::uint8_t(v & 0xff));
      p.push_back(std::uint8_t((v >> 8) & 0xff));
    }
    write_raw_wav(dir / "s.wav", 1, 2, 8000, 16, p);
    const auto a = wav::read(dir / "s.wav");
    CHECK(a.channels == 2);
    REQUIRE(a.samples.size() == 2);
    CHECK(a.samples[0] == doctest::Approx(0.25).epsilon(1e-3));
    CHECK(a.samples[1] == doctest::Approx(-0.5).epsilon(1e-3));
  }
  SUBCASE("8-bit is unsigned around 128") {
    write_raw_wav(dir / "u8.wav", 1, 1, 8000, 8, {128, 255, 0});
    const auto a = wav::read(dir / "u8.wav");
    REQUIRE(a.samples.size() == 3);
    CHECK(a.samples[0] == doctest::Approx(0.0));
    CHECK(a.samples[1] == doctest::Approx(127.0 / 128.0));
    CHECK(a.samples[2] == doctest::Approx(-1.0));
  }
  SUBCASE("24-bit little endian") {
    write_raw_wav(dir / "p24.wav", 1, 1, 8000, 24, {0x00, 0x00, 0x40, 0x00, 0x00, 0xC0});
    const auto a = wav::read(dir / "p24.wav");
    REQUIRE(a.samples.size() == 2);
    CHECK(a.samples[0] == doctest::Approx(0.5));
    CHECK(a.samples[1] == doctest::Approx(-0.5));
  }
  SUBCASE("32-bit float") {
    std::vector<std::uint8_t> p(8);
    const float v[2] = {0.125f, -0.75f};
    std::memcpy(p.data(), v, 8);
    write_raw_wav(dir / "f.wav", 3, 1, 8000, 32, p);
    const auto a = wav::read(dir / "f.wav");
    REQUIRE(a.samples.size() == 2);
    CHECK(a.samples[0] == 0.125f);
    CHECK(a.samples[1] == -0.75f);
  }
  SUBCASE("garbage is rejected") {
    std::ofstream(dir / "g.wav") << "definitely not audio";
    CHECK_THROWS(wav::read(dir / "g.wav"));
  }
}

TEST_CASE("corpus loading parses names, skips bad files with warnings and sorts by id") {
  TempDir dir("corpus");
  uvac::testing::write_corpus(dir.path(), 2, 1, 16000);
  std::ofstream(dir / "01/notadigit.wav") << "x";
  std::ofstream(dir / "01/3_01_9.wav") << "broken";
  std::filesystem::create_directories(dir / "dup");
  std::filesystem::copy_file(dir / "01/0_01_0.wav", dir / "dup/0_01_0.wav");

  const auto load = dataio::load_corpus(dir.path());
  CHECK(load.clips.size() == 20);
  CHECK(load.warnings.size() == 3);
  CHECK(std::is_sorted(load.clips.begin(), load.clips.end(),
                       [](const auto& a, const auto& b) { return a.id < b.id; }));
  for (const auto& c : load.clips) {
    CHECK(c.sample_rate == 16000);
    CHECK(c.original_length == c.samples.size());
    CHECK(c.id.substr(0, 1) == std::to_string(c.digit));
    CHECK((c.speaker_id == "01" || c.speaker_id == "02"));
  }
}

TEST_CASE("listing finds clips without decoding them") {
  TempDir dir("listing");
  uvac::testing::write_corpus(dir.path(), 1, 1, 8000);
  std::ofstream(dir / "01/5_01_7.wav") << "not decoded yet";
  const auto listing = dataio::list_corpus(dir.path());
  CHECK(listing.entries.size() == 11);
  CHECK(listing.warnings.empty());
  const auto it = std::find_if(listing.entries.begin(), listing.entries.end(),
                               [](const auto& e) { return e.id == "5_01_7"; });
  REQUIRE(it != listing.entries.end());
  CHECK(it->digit == 5);
  CHECK_THROWS(dataio::load_clip(*it));
  CHECK(dataio::load_clip(listing.entries.front()).id == listing.entries.front().id);
}

TEST_CASE("corpus loading fails loudly on a missing or empty directory") {
  CHECK_THROWS_AS(dataio::load_corpus("/nonexistent/uvac-corpus"), std::runtime_error);
  TempDir dir("empty");
  CHECK_THROWS_AS(dataio::load_corpus(dir.path()), std::runtime_error);
}

TEST_CASE("uniform splits are a 80/10/10 partition determined by the seed") {
  const auto ids = fake_ids(60, 500);
  const auto m = dataio::make_splits(ids, 3);
  CHECK(m.train_ids.size() == 24000);
  CHECK(m.val_ids.size() == 3000);
  CHECK(m.test_ids.size() == 3000);

  std::set<std::string> all;
  for (const auto* part : {&m.train_ids, &m.val_ids, &m.test_ids}) {
    CHECK(std::is_sorted(part->begin(), part->end()));
    all.insert(part->begin(), part->end());
  }
  CHECK(all.size() == ids.size());

  const auto again = dataio::make_splits(ids, 3);
  CHECK(again.test_ids == m.test_ids);
  CHECK(again.content_hash() == m.content_hash());
  const auto other = dataio::make_splits(ids, 4);
  CHECK(other.test_ids != m.test_ids);

  auto shuffled = ids;
  std::reverse(shuffled.begin(), shuffled.end());
  CHECK(dataio::make_splits(shuffled, 3).test_ids == m.test_ids);
}

TEST_CASE("speaker held-out splits never share a speaker") {
  const auto ids = fake_ids(12, 50);
  const auto m = dataio::make_splits(ids, 11, dataio::SplitMode::SpeakerHeldOut);
  const auto speaker_of = [](const std::string& id) { return id.substr(id.find('_') + 1, id.rfind('_') - id.find('_') - 1); };
  std::set<std::string> train, val, test;
  for (const auto& id : m.train_ids) train.insert(speaker_of(id));
  for (const auto& id : m.val_ids) val.insert(speaker_of(id));
  for (const auto& id : m.test_ids) test.insert(speaker_of(id));
  for (const auto& s : test) {
    CHECK_FALSE(train.count(s));
    CHECK_FALSE(val.count(s));
  }
  for (const auto& s : val) CHECK_FALSE(train.count(s));
  CHECK(m.size() == ids.size());
  CHECK(m.test_ids.size() >= ids.size() / 10);
  CHECK(m.val_ids.size() >= ids.size() / 10);
}

TEST_CASE("split construction rejects tiny or duplicated inputs") {
  CHECK_THROWS_AS(dataio::make_splits(fake_ids(1, 9), 0), std::invalid_argument);
  auto ids = fake_ids(2, 10);
  ids.push_back(ids.front());
  CHECK_THROWS_AS(dataio::make_splits(ids, 0), std::invalid_argument);
  CHECK_THROWS_AS(dataio::make_splits(fake_ids(2, 10), 0, dataio::SplitMode::SpeakerHeldOut), std::invalid_argument);
  CHECK_THROWS_AS(dataio::split_mode_from_string("random"), std::invalid_argument);
}

TEST_CASE("manifests round-trip and detect tampering") {
  TempDir dir("manifest");
  const auto m = dataio::make_splits(fake_ids(5, 40), 9);
  dataio::write_manifest(m, dir / "splits.txt");
  const auto r = dataio::read_manifest(dir / "splits.txt");
  CHECK(r.train_ids == m.train_ids);
  CHECK(r.val_ids == m.val_ids);
  CHECK(r.test_ids == m.test_ids);
  CHECK(r.seed == 9);
  CHECK(r.content_hash() == m.content_hash());

  std::ifstream in(dir / "splits.txt");
  std::string text((std::istreambuf_iterator<char>(in)), {});
  in.close();
  const auto pos = text.find(m.test_ids.front());
  text.replace(pos, m.test_ids.front().size(), m.train_ids.front());
  std::ofstream(dir / "splits.txt", std::ios::trunc) << text;
  CHECK_THROWS(dataio::read_manifest(dir / "splits.txt"));
  CHECK_THROWS(dataio::read_manifest(dir / "missing.txt"));
}
