#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "mvface/classify.hpp"
#include "mvface/data.hpp"

namespace fs = std::filesystem;
using namespace mvface;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path temp_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("mvface_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

// Ten subjects by seven expressions, one image each, 64x64 with a 30/52/40
// region annotation squeezed into the middle.
fs::path tiny_dataset(const fs::path& dir) {
  gabor::FiducialMask mask;
  int i = 0;
  for (auto [count, region] : {std::pair{30, gabor::Region::forehead},
                               std::pair{52, gabor::Region::eye},
                               std::pair{40, gabor::Region::mouth}}) {
    for (int k = 0; k < count; ++k, ++i) {
      mask.points.push_back({20.0 + i % 11 * 2, 20.0 + i / 11 * 2, region});
    }
  }
  data::save_annotation(dir / "points.txt", mask);
  data::DatasetManifest m;
  for (int s = 0; s < 10; ++s) {
    for (int e = 0; e < 7; ++e) {
      gabor::Image img(64, 64);
      for (int y = 0; y < 64; ++y) {
        for (int x = 0; x < 64; ++x) img(y, x) = 0.5 + 0.4 * std::sin(0.1 * (s + 1) * x + 0.3 * e * y);
      }
      const auto name = "i" + std::to_string(s) + "_" + std::to_string(e) + ".pgm";
      data::save_pgm(dir / name, img);
      m.entries.push_back({dir / name, "s" + std::to_string(s),
                           std::string(data::kExpressions[static_cast<std::size_t>(e)]),
                           dir / "points.txt"});
    }
  }
  data::save_manifest(dir / "manifest.txt", m);
  return dir / "manifest.txt";
}

}  // namespace

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run({}).code, cli::kUsage);
  EXPECT_EQ(run({"bogus"}).code, cli::kUsage);
  EXPECT_EQ(run({"train", "--features", "x"}).code, cli::kUsage);
  EXPECT_EQ(run({"--help"}).code, cli::kOk);
}

TEST(Cli, MissingFileIsIoError) {
  const auto r = run({"train", "--features", "/nonexistent.mvf", "--labels", "/nonexistent.tsv",
                      "--out", "/tmp/x.mvm", "--atoms", "3"});
  EXPECT_EQ(r.code, cli::kIo);
  EXPECT_NE(r.err.find("/nonexistent.mvf"), std::string::npos);
}

TEST(Cli, ExtractViewDims) {
  const auto dir = temp_dir("extract");
  const auto manifest = tiny_dataset(dir);
  const auto r = run({"extract", "--manifest", manifest.string(), "--out-dir",
                      (dir / "out").string(), "--window-radius", "6", "--method",
                      "gmcfa,mogfa,whole,single:eye"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("gmcfa views=3 dims=1200,2080,1600 samples=70"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("mogfa views=8 dims=610,610,610,610,610,610,610,610"), std::string::npos);
  EXPECT_NE(r.out.find("whole views=1 dims=4880"), std::string::npos);
  EXPECT_NE(r.out.find("single:eye views=1 dims=2080"), std::string::npos);
  const auto labels = data::load_labels(dir / "out" / "labels.tsv");
  int test = 0;
  for (const auto& l : labels) test += l.split == "test";
  EXPECT_EQ(test, 70);  // one image per (subject, expression): all of them
}

TEST(Cli, ExtractReportsFailingImage) {
  const auto dir = temp_dir("extract_bad");
  const auto manifest = tiny_dataset(dir);
  const auto r = run({"extract", "--manifest", manifest.string(), "--out-dir",
                      (dir / "out").string()});
  // Default radii reach 40 pixels, past the border of a 64x64 image.
  EXPECT_EQ(r.code, cli::kInvalidInput);
  EXPECT_NE(r.err.find("i0_0.pgm"), std::string::npos);
}

TEST(Cli, SynthTrainEvalDeterministic) {
  const auto dir = temp_dir("pipeline");
  const std::vector<std::string> synth = {"synth",     "--out-dir", (dir / "s").string(),
                                          "--classes", "4",         "--atoms",
                                          "8",         "--sparsity", "2",
                                          "--separation", "3",     "--snr",
                                          "25",        "--samples", "120"};
  ASSERT_EQ(run(synth).code, 0);
  auto train = [&](const std::string& out) {
    return run({"train", "--features", (dir / "s/synth.mvf").string(), "--labels",
                (dir / "s/labels.tsv").string(), "--out", (dir / out).string(),
                "--atoms-per-class", "2", "--task", "fer"});
  };
  const auto t1 = train("a.mvm");
  ASSERT_EQ(t1.code, 0) << t1.err;
  ASSERT_EQ(train("b.mvm").code, 0);
  EXPECT_EQ(read_bytes(dir / "a.mvm"), read_bytes(dir / "b.mvm"));
  EXPECT_EQ(read_bytes(dir / "a.mvm.trace.csv"), read_bytes(dir / "b.mvm.trace.csv"));
  EXPECT_NE(t1.out.find("train_ls=100"), std::string::npos) << t1.out;

  const auto e = run({"eval", "--model", (dir / "a.mvm").string(), "--features",
                      (dir / "s/synth.mvf").string(), "--labels",
                      (dir / "s/labels.tsv").string(), "--format", "csv", "--name", "Syn"});
  ASSERT_EQ(e.code, 0) << e.err;
  const auto table = classify::parse_csv(e.out);
  ASSERT_EQ(table.rows.size(), 2u);
  EXPECT_EQ(table.rows[0].name, "Syn_LS");
  for (const auto& v : table.rows[0].values) EXPECT_EQ(*v, 100.0);

  const auto no_labels = run({"eval", "--model", (dir / "a.mvm").string(), "--features",
                              (dir / "s/synth.mvf").string()});
  EXPECT_EQ(no_labels.code, cli::kUsage);
}

TEST(Cli, SweepWritesTraceFiles) {
  const auto dir = temp_dir("sweep");
  ASSERT_EQ(run({"synth", "--out-dir", (dir / "s").string(), "--classes", "2", "--atoms", "4",
                 "--sparsity", "2", "--separation", "2", "--snr", "20", "--samples", "60"})
                .code,
            0);
  const auto r = run({"train", "--features", (dir / "s/synth.mvf").string(), "--labels",
                      (dir / "s/labels.tsv").string(), "--out", (dir / "m.mvm").string(),
                      "--atoms", "4", "--sweep-lambda", "0.001,0.01,0.1,1", "--sweep-gamma",
                      "0.001,0.01,0.1,1", "--sweep-dir", (dir / "sweep").string(),
                      "--outer-max", "10", "--classifier", "ls"});
  ASSERT_EQ(r.code, 0) << r.err;
  int traces = 0;
  for (const auto& f : fs::directory_iterator(dir / "sweep")) {
    traces += f.path().filename().string().rfind("trace_", 0) == 0;
  }
  EXPECT_EQ(traces, 16);
  const auto summary = read_bytes(dir / "sweep" / "summary.csv");
  EXPECT_EQ(std::count(summary.begin(), summary.end(), '\n'), 17);
}
