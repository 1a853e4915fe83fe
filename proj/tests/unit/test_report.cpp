#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "catprobe/errors.hpp"
#include "catprobe/report.hpp"
#include "support/snippets.hpp"
#include "support/synth.hpp"

namespace catprobe {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Minimal RFC 4180 reader; '#' lines are comments.
std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(slurp(p));
  std::string line;
  while (std::getline(in, line)) {
    if (line.starts_with("#")) continue;
    std::vector<std::string> row(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      const char c = line[i];
      if (quoted) {
        if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') row.back() += '"', ++i;
        else if (c == '"') quoted = false;
        else row.back() += c;
      } else if (c == '"') {
        quoted = true;
      } else if (c == ',') {
        row.emplace_back();
      } else {
        row.back() += c;
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

double mixed_weight(const CorpusSample& cs, std::size_t layer, std::size_t i, std::size_t j) {
  return 1.0 + static_cast<double>((cs.tokens[i].span.start * 13 + cs.tokens[j].span.end * 5 + layer) % 7);
}

class ReportTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    root_ = fs::temp_directory_path() / ("catprobe_report_" + std::string(info->name()) + "_" + std::to_string(::getpid()));
    fs::remove_all(root_);
    fs::create_directories(root_ / "corpus");
    cfg_.corpus = root_ / "corpus";
    cfg_.out_dir = root_ / "out";
    ::unsetenv(kOutDirEnv);
  }
  void TearDown() override { fs::remove_all(root_); }

  void add_file(const std::string& rel, const std::string& text) { std::ofstream(cfg_.corpus / rel) << text; }

  void add_python_corpus() {
    add_file("collect.py", testing::kBufferSnippet);
    int k = 0;
    for (const auto& s : testing::small_snippets())
      if (s.language == Language::python && k < 4) add_file("s" + std::to_string(k++) + ".py", s.code);
  }

  // One synthetic bundle per model over the current corpus.
  void add_bundles(std::size_t models, std::size_t layers = 2) {
    const auto corpus = load_corpus(cfg_.corpus, {});
    testing::SynthOptions opt;
    opt.layers = layers;
    opt.heads = 2;
    opt.split = true;
    opt.specials = true;
    for (std::size_t m = 0; m < models; ++m) {
      const auto weight = [m](const CorpusSample& cs, std::size_t l, std::size_t i, std::size_t j) {
        return mixed_weight(cs, l + m, i, j);
      };
      const auto path = root_ / ("m" + std::to_string(m) + ".json");
      save_bundle(testing::synth_bundle(corpus, "model" + std::to_string(m), Language::python, weight, opt), path);
      cfg_.bundles.push_back(path);
    }
  }

  std::string heatmap_stem(const std::string& id) const {
    const auto corpus = load_corpus(cfg_.corpus, {});
    return "heatmap_" + corpus.find_id(id)->unit.hash_hex().substr(0, 16);
  }

  fs::path root_;
  RunConfig cfg_;
};

TEST_F(ReportTest, ParseSingleFile) {
  add_file("one.py", "x = 1\n");
  const auto out = cmd_parse(cfg_);
  EXPECT_EQ(out.scored, 1u);
  const auto hash = to_hex(sha256("x = 1\n"));
  EXPECT_TRUE(fs::exists(cfg_.out_dir / (hash + ".tokens.json")));
  EXPECT_TRUE(fs::exists(cfg_.out_dir / (hash + ".dist.csv")));
  const auto tokens = json::parse(slurp(cfg_.out_dir / (hash + ".tokens.json")));
  EXPECT_EQ(tokens["tokens"].size(), 3u);
  const auto rows = read_csv(cfg_.out_dir / (hash + ".dist.csv"));
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"token", "x", "=", "1"}));
  EXPECT_EQ(rows[1], (std::vector<std::string>{"x", "0", "1", "2"}));
}

TEST_F(ReportTest, ParseRejectsBrokenFileAndIsDeterministic) {
  add_file("a.py", "def f(a):\n    return a\n");
  add_file("b.java", "class B { void g() {} }\n");
  add_file("c.py", "def broken(:\n");
  const auto out = cmd_parse(cfg_);
  EXPECT_EQ(out.scored, 2u);
  ASSERT_EQ(out.warnings.size(), 1u);
  const auto manifest = json::parse(slurp(cfg_.out_dir / "parse_manifest.json"));
  EXPECT_EQ(manifest["accepted"].size(), 2u);
  ASSERT_EQ(manifest["rejected"].size(), 1u);
  EXPECT_EQ(manifest["rejected"][0]["id"], "c.py");
  EXPECT_EQ(out.written.size(), 5u);

  std::map<fs::path, std::string> first;
  for (const auto& p : out.written) first[p] = slurp(p);
  const auto again = cmd_parse(cfg_);
  ASSERT_EQ(again.written.size(), first.size());
  for (const auto& p : again.written) EXPECT_EQ(slurp(p), first.at(p)) << p;
}

TEST_F(ReportTest, OutDirEnvironmentOverride) {
  add_file("one.py", "x = 1\n");
  const auto alt = root_ / "env_out";
  ::setenv(kOutDirEnv, alt.c_str(), 1);
  cmd_parse(cfg_);
  ::unsetenv(kOutDirEnv);
  EXPECT_TRUE(fs::exists(alt / "parse_manifest.json"));
  EXPECT_FALSE(fs::exists(cfg_.out_dir));
}

TEST_F(ReportTest, HeatmapShapesAndFiltering) {
  add_python_corpus();
  add_bundles(1);
  const auto corpus = load_corpus(cfg_.corpus, {});
  const auto* cs = corpus.find_id("collect.py");
  ASSERT_NE(cs, nullptr);
  std::set<std::string> types;
  for (const auto& t : cs->tokens) types.insert(t.type_label);
  ASSERT_TRUE(types.contains("."));
  types.erase(".");

  cfg_.sample = "collect.py";
  cfg_.keep_types.assign(types.begin(), types.end());
  const auto out = cmd_heatmap(cfg_);
  EXPECT_EQ(out.written.size(), 5u);
  const auto stem = cfg_.out_dir / heatmap_stem("collect.py");
  const auto full = read_csv(stem.string() + "_attention_full.csv");
  const auto dist = read_csv(stem.string() + "_distance_full.csv");
  const auto filt = read_csv(stem.string() + "_attention_filtered.csv");
  const auto filt_d = read_csv(stem.string() + "_distance_filtered.csv");
  const auto n = cs->tokens.size();
  ASSERT_EQ(full.size(), n + 1);
  for (const auto& row : full) EXPECT_EQ(row.size(), n + 1);
  EXPECT_EQ(dist.size(), n + 1);
  ASSERT_EQ(filt.size(), n);  // exactly one "." token dropped
  ASSERT_EQ(filt_d.size(), n);
  for (const auto& row : filt) {
    EXPECT_EQ(row.size(), n);
    EXPECT_NE(row[0], ".");
  }
  EXPECT_EQ(std::count(filt[0].begin(), filt[0].end(), "."), 0);
  EXPECT_EQ(std::count(full[0].begin(), full[0].end(), "."), 1);

  const auto tokens = read_csv(stem.string() + "_tokens.csv");
  ASSERT_EQ(tokens.size(), n + 1);
  std::size_t dropped = 0;
  for (std::size_t i = 1; i < tokens.size(); ++i)
    if (tokens[i][3] == "0") {
      ++dropped;
      EXPECT_EQ(tokens[i][1], ".");
    }
  EXPECT_EQ(dropped, 1u);
}

TEST_F(ReportTest, HeatmapIdentityFrequentSetLeavesMatricesUnchanged) {
  add_python_corpus();
  add_bundles(1);
  const auto corpus = load_corpus(cfg_.corpus, {});
  std::set<std::string> types;
  for (const auto& t : corpus.find_id("s0.py")->tokens) types.insert(t.type_label);
  cfg_.sample = "s0.py";
  cfg_.keep_types.assign(types.begin(), types.end());
  cmd_heatmap(cfg_);
  const auto stem = (cfg_.out_dir / heatmap_stem("s0.py")).string();
  EXPECT_EQ(slurp(stem + "_attention_full.csv"), slurp(stem + "_attention_filtered.csv"));
  EXPECT_EQ(slurp(stem + "_distance_full.csv"), slurp(stem + "_distance_filtered.csv"));

  cfg_.sample = "nope.py";
  EXPECT_THROW(cmd_heatmap(cfg_), UnknownSample);
}

TEST_F(ReportTest, FreqTypesThenCatScore) {
  add_python_corpus();
  add_bundles(2, 3);
  cfg_.probe.per_model_cutoff = 5;
  const auto ft = cmd_freq_types(cfg_);
  EXPECT_GT(ft.scored, 0u);
  const auto report = json::parse(slurp(cfg_.out_dir / "freq_types.json"));
  const auto& py = report["languages"]["python"];
  EXPECT_EQ(py["models"], (json{"model0", "model1"}));
  EXPECT_EQ(py["cutoff"], 10);
  EXPECT_FALSE(py["frequent_set"].empty());
  for (const auto& [t, s] : py["rank_sums"].items())
    EXPECT_EQ(py["frequent_set"].get<std::set<std::string>>().contains(t), s.get<int>() < 10) << t;

  const auto computed = cmd_cat_score(cfg_);
  const auto scores = json::parse(slurp(cfg_.out_dir / "cat_scores.json"));
  ASSERT_EQ(scores["results"].size(), 2u);
  EXPECT_EQ(scores["results"][0]["per_layer"].size(), 3u);
  EXPECT_EQ(scores["results"][0]["frequent_set"], py["frequent_set"]);
  const auto rows = read_csv(cfg_.out_dir / "cat_scores.csv");
  EXPECT_EQ(rows.size(), 1u + 2u * 3u);

  // Taking the frequent set from the report gives the same numbers.
  const auto report_path = root_ / "freq_types.json";
  fs::copy_file(cfg_.out_dir / "freq_types.json", report_path);
  cfg_.types_report = report_path;
  cmd_cat_score(cfg_);
  const auto from_report = json::parse(slurp(cfg_.out_dir / "cat_scores.json"));
  EXPECT_EQ(from_report["results"][0]["per_layer"], scores["results"][0]["per_layer"]);
  EXPECT_EQ(from_report["results"][1]["per_layer"], scores["results"][1]["per_layer"]);
  EXPECT_EQ(computed.scored, 2 * scores["results"][0]["C"].get<std::size_t>());
}

TEST_F(ReportTest, TypeBarsSingleType) {
  const json report = {
      {"languages",
       {{"go",
         {{"frequent_set", {"identifier"}},
          {"ordered_types", {"identifier"}},
          {"rank_sums", {{"identifier", 1}}},
          {"confidences", {{"m", {{"identifier", {{"confidence", 1.0}, {"sample_count", 3}}}}}}}}}}}};
  const auto path = root_ / "report.json";
  std::ofstream(path) << report.dump();
  cfg_.types_report = path;
  const auto out = cmd_type_bars(cfg_);
  EXPECT_EQ(out.scored, 1u);
  const auto rows = read_csv(cfg_.out_dir / "type_bars.csv");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"language", "position", "type", "confidence", "rank_sum", "frequent"}));
  EXPECT_EQ(rows[1], (std::vector<std::string>{"go", "1", "identifier", "1", "1", "1"}));
}

TEST_F(ReportTest, ValidationFailures) {
  cfg_.max_samples = 0;
  EXPECT_THROW(cmd_parse(cfg_), Error);
  cfg_.max_samples = 10;
  EXPECT_THROW(cmd_freq_types(cfg_), Error);  // no bundles
  cfg_.bundles = {root_ / "missing.json"};
  EXPECT_THROW(cmd_cat_score(cfg_), Error);
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(CATPROBE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST_F(ReportTest, CliExitCodes) {
  add_python_corpus();
  add_bundles(1);
  const std::string corpus = "--corpus " + cfg_.corpus.string();
  const std::string out = "--out " + cfg_.out_dir.string() + " ";
  EXPECT_EQ(run_cli(out + "parse " + corpus), 0);
  EXPECT_EQ(run_cli(out + "cat-score " + corpus + " -b " + cfg_.bundles[0].string()), 0);
  EXPECT_EQ(run_cli(out + "cat-score " + corpus + " -b " + (root_ / "missing.json").string()), 2);

  // A bundle none of whose samples are in the corpus scores nothing.
  fs::create_directories(root_ / "other");
  std::ofstream(root_ / "other" / "z.py") << "z = 2\n";
  EXPECT_EQ(run_cli(out + "cat-score --corpus " + (root_ / "other").string() + " -b " + cfg_.bundles[0].string()), 1);
  EXPECT_NE(run_cli(out + "parse"), 0);
}

}  // namespace
}  // namespace catprobe
