#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "support/synthetic.hpp"
#include "uvac/cache.hpp"
#include "uvac/dataio.hpp"
#include "uvac/metrics.hpp"

namespace fs = std::filesystem;
using uvac::testing::TempDir;

namespace {

struct Run {
  int code = -1;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// One shared corpus and output directory, built on first use and shared by the cases below.
struct Workspace {
  TempDir dir{"cli"};
  fs::path corpus = dir / "corpus";
  fs::path out = dir / "out";
  Workspace() { uvac::testing::write_corpus(corpus, 4, 2, 16000); }

  Run uvac(const std::string& args) const {
    static int counter = 0;
    const auto o = dir / ("stdout" + std::to_string(counter) + ".txt");
    const auto e = dir / ("stderr" + std::to_string(counter++) + ".txt");
    const std::string cmd = std::string(UVAC_BINARY) + " --out " + out.string() + " " + args + " >" + o.string() +
                            " 2>" + e.string();
    const int status = std::system(cmd.c_str());
    Run r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(o);
    r.err = slurp(e);
    return r;
  }
  Run prepare() const { return uvac("prepare --corpus " + corpus.string()); }
};

Workspace& workspace() {
  static Workspace w;
  return w;
}

bool contains(const std::string& haystack, const std::string& needle) { return haystack.find(needle) != std::string::npos; }

}  // namespace

TEST_CASE("prepare builds the cache and manifest, then is a no-op") {
  auto& w = workspace();
  const auto first = w.prepare();
  INFO(first.err);
  REQUIRE(first.code == 0);
  CHECK(contains(first.out, "grid 128 x 99"));
  CHECK(contains(first.out, "splits train 64, val 8, test 8"));
  CHECK(contains(first.out, "processed 80"));
  const auto cache = w.out / "spectrograms.bin";
  const auto r = uvac::dsp::read_cache(cache);
  CHECK(r.samples.size() == 80);
  CHECK(r.corrupted == 0);

  const auto stamp = fs::last_write_time(cache);
  const auto manifest_text = slurp(w.out / "splits.txt");
  const auto again = w.prepare();
  REQUIRE(again.code == 0);
  CHECK(contains(again.out, "cache up to date"));
  CHECK(contains(again.out, "manifest up to date"));
  CHECK(contains(again.out, "processed 0"));
  CHECK(fs::last_write_time(cache) == stamp);
  CHECK(slurp(w.out / "splits.txt") == manifest_text);
}

TEST_CASE("prepare regenerates a corrupted record") {
  auto& w = workspace();
  REQUIRE(w.prepare().code == 0);
  const auto cache = w.out / "spectrograms.bin";
  const auto before = uvac::dsp::read_cache(cache);
  {
    std::fstream f(cache, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(std::streamoff(fs::file_size(cache) / 2));
    f.put('\x7f');
    f.seekp(std::streamoff(fs::file_size(cache) / 2 + 1));
    f.put('\x01');
  }
  REQUIRE(uvac::dsp::read_cache(cache).corrupted == 1);
  const auto fixed = w.prepare();
  REQUIRE(fixed.code == 0);
  CHECK(contains(fixed.err, "corrupted"));
  CHECK(contains(fixed.out, "processed 1"));
  const auto after = uvac::dsp::read_cache(cache);
  CHECK(after.corrupted == 0);
  CHECK(after.samples.size() == 80);
  std::map<std::string, std::vector<float>> grids;
  for (const auto& s : before.samples) grids[s.clip_id] = s.grid;
  for (const auto& s : after.samples)
    if (grids.count(s.clip_id)) CHECK(grids[s.clip_id] == s.grid);
}

TEST_CASE("prepare resumes from an interrupted cache") {
  auto& w = workspace();
  REQUIRE(w.prepare().code == 0);
  const auto cache = w.out / "spectrograms.bin";
  const fs::path partial = cache.string() + ".partial";
  fs::copy_file(cache, partial, fs::copy_options::overwrite_existing);
  fs::resize_file(partial, fs::file_size(cache) / 2);
  fs::remove(cache);
  const auto resumed = w.prepare();
  REQUIRE(resumed.code == 0);
  CHECK(contains(resumed.err, "resuming"));
  CHECK_FALSE(contains(resumed.out, "reused 0,"));
  CHECK_FALSE(contains(resumed.out, "processed 80"));
  CHECK(uvac::dsp::read_cache(cache).samples.size() == 80);
  CHECK_FALSE(fs::exists(partial));
}

TEST_CASE("prepare fails cleanly on a missing corpus") {
  auto& w = workspace();
  const auto r = w.uvac("prepare --corpus " + (w.dir / "nowhere").string());
  CHECK(r.code != 0);
  CHECK(contains(r.err, "not found"));
}

TEST_CASE("train smoke run, evaluation and plotting") {
  auto& w = workspace();
  REQUIRE(w.prepare().code == 0);
  const auto trained = w.uvac("train --epochs 2 --batch-size 64");
  INFO(trained.err);
  REQUIRE(trained.code == 0);
  const auto best = w.out / "run0" / "best.pt";
  CHECK(fs::exists(best));
  CHECK(fs::exists(w.out / "run0" / "latest.pt"));
  CHECK(fs::exists(w.out / "run0" / "epochs.jsonl"));
  CHECK_NOTHROW(uvac::metrics::MetricsReport::from_text(slurp(w.out / "run0" / "metrics_test.txt")));
  CHECK_NOTHROW(uvac::metrics::MetricsReport::from_text(trained.out));

  const auto ev = w.uvac("eval --checkpoint " + best.string() + " --split test");
  REQUIRE(ev.code == 0);
  const auto report = uvac::metrics::MetricsReport::from_text(ev.out);
  CHECK(report.accuracy_pct >= 0.0);
  CHECK(fs::exists(w.out / "eval_test.txt"));
  const auto ev2 = w.uvac("eval --checkpoint " + best.string() + " --split test");
  CHECK(ev2.out == ev.out);

  const auto plot = w.uvac("plot --source latent --checkpoint " + best.string() + " --split train --iterations 250");
  INFO(plot.err);
  REQUIRE(plot.code == 0);
  const auto coords = w.out / "tsne_latent_train.coords.txt";
  CHECK(fs::exists(w.out / "tsne_latent_train.svg"));
  const auto first = slurp(coords);
  CHECK_FALSE(first.empty());
  REQUIRE(w.uvac("plot --source latent --checkpoint " + best.string() + " --split train --iterations 250").code == 0);
  CHECK(slurp(coords) == first);

  const auto few = w.uvac("plot --source spectrogram --labels truth --split test --iterations 50");
  CHECK(few.code != 0);
  CHECK(contains(few.err, "at least 10"));
}

TEST_CASE("labels-as-clusters evaluation") {
  auto& w = workspace();
  REQUIRE(w.prepare().code == 0);
  const auto r = w.uvac("eval --use-labels --split test");
  REQUIRE(r.code == 0);
  const auto report = uvac::metrics::MetricsReport::from_text(r.out);
  CHECK(report.accuracy_pct == 100.0);
  CHECK(report.nmi == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fs::exists(w.out / "labels_test.txt"));
}

TEST_CASE("baselines run and unknown methods are usage errors") {
  auto& w = workspace();
  REQUIRE(w.prepare().code == 0);
  const auto km = w.uvac("baseline kmeans --split train --runs 2 --restarts 2");
  INFO(km.err);
  REQUIRE(km.code == 0);
  CHECK_NOTHROW(uvac::metrics::MetricsReport::from_text(km.out));
  CHECK(contains(slurp(w.out / "baseline_kmeans_train.txt"), "# run 1 seed 1"));
  REQUIRE(w.uvac("baseline gmm-em --split train").code == 0);
  CHECK(w.uvac("baseline spectral").code != 0);
}

TEST_CASE("invalid configurations and missing artifacts fail before any work") {
  auto& w = workspace();
  REQUIRE(w.prepare().code == 0);
  const auto bad = w.uvac("train --lr-start 0.0005 --lr-end 0.005");
  CHECK(bad.code != 0);
  CHECK(contains(bad.err, "lr_start"));
  const auto missing = w.uvac("eval --checkpoint " + (w.dir / "missing.pt").string());
  CHECK(missing.code != 0);
  CHECK(contains(missing.err, "checkpoint not found"));
  std::ofstream(w.dir / "typo.json") << R"({"train": {"epochz": 2}})";
  CHECK(w.uvac("--config " + (w.dir / "typo.json").string() + " train").code != 0);
  CHECK(w.uvac("").code != 0);
}

TEST_CASE("desk acceptance checks run against a prepared directory") {
  auto& w = workspace();
  REQUIRE(w.prepare().code == 0);
  const auto accept = [&](const std::string& env, int id) {
    const auto o = w.dir / ("accept" + std::to_string(id) + ".txt");
    const std::string cmd = env + "=" + w.out.string() + " " + std::string(UVAC_ACCEPTANCE) + " --criterion " +
                            std::to_string(id) + " >" + o.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return std::make_pair(WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(o));
  };
  // The synthetic corpus is not the real one, so only the plumbing is checked here.
  const auto [labels_code, labels] = accept("UVAC_ACCEPT_OUT", 9);
  INFO(labels);
  CHECK((labels_code == 0 || labels_code == 1));
  CHECK(contains(labels, "acc 100 nmi 1 "));
  CHECK_FALSE(contains(labels, "error:"));

  if (!fs::exists(w.out / "run0" / "best.pt")) REQUIRE(w.uvac("train --epochs 1 --batch-size 64").code == 0);
  const auto [full_code, full] = accept("UVAC_ACCEPT_FULL", 11);
  CHECK(full_code == 1);
  CHECK(contains(full, "FAIL 11 full-protocol: a checkpoint was not trained with the full schedule"));
  const auto [scaled_code, scaled] = accept("UVAC_ACCEPT_SCALED", 12);
  CHECK(scaled_code == 1);
  CHECK(contains(scaled, "not trained on 3000 samples for 60 epochs"));

  const auto [rows_code, rows] = accept("UVAC_ACCEPT_OUT", 10);
  CHECK(rows_code == 1);
  CHECK(contains(rows, "FAIL 10 baseline-rows: error: kmeans_fit: need at least k=10 points, got 8"));
}
