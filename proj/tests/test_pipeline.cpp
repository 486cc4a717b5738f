#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fixture.hpp"
#include "oracle.hpp"
#include "test_util.hpp"

namespace nd = neuron_dissect;
namespace fs = std::filesystem;
using testutil::TempDir;

namespace {

struct CliResult {
  int exit_code;
  std::string err;
};

CliResult run_cli(const std::string& args, const fs::path& scratch) {
  const fs::path err = scratch / "stderr.txt";
  const std::string cmd = std::string("\"") + ND_CLI_PATH + "\" " + args + " >" +
                          (scratch / "stdout.txt").string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  CliResult r{WIFEXITED(status) ? WEXITSTATUS(status) : -1, {}};
  if (fs::exists(err)) r.err = nd::read_file(err);
  return r;
}

std::string dissect_args(const nd::DissectConfig& c, const fs::path& out) {
  std::string s = "dissect --image-embeddings " + c.image_embeddings.string() +
                  " --text-embeddings " + c.text_embeddings.string() +
                  " --concepts " + c.concepts.string() + " --manifest " +
                  c.manifest.string() + " --top-k " + std::to_string(c.params.top_k);
  for (const auto& a : c.activations) s += " --activations " + a.string();
  return s + " --out " + out.string();
}

oracle::Grid to_grid(const nd::Matrix<float>& m) {
  oracle::Grid g(m.rows(), std::vector<oracle::Real>(m.cols()));
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) g[r][c] = m(r, c);
  return g;
}

std::size_t count_rows(const std::string& csv_text) {
  std::size_t n = 0;
  for (const auto& row : nd::csv::parse(csv_text)) n += nd::csv::is_blank(row) ? 0 : 1;
  return n - 1;
}

}  // namespace

TEST(Pipeline, FixtureLabelsMatchOracle) {
  TempDir dir;
  const auto cfg = fixture::write(dir / "in");
  const auto result = nd::cmd_dissect(cfg, dir / "out", 1);
  EXPECT_EQ(result.layers, 2u);
  const auto layers = nd::read_label_dir(dir / "out");
  ASSERT_EQ(layers.size(), 2u);

  const auto p = oracle::activation_matrix(to_grid(fixture::image_embeddings()),
                                           to_grid(fixture::text_embeddings()));
  const auto prm = fixture::params();
  const oracle::Params op{prm.top_k, prm.lambda, prm.membership_hi, prm.membership_lo,
                          prm.temperature};
  const auto acts = fixture::layers();
  for (std::size_t l = 0; l < 2; ++l) {
    EXPECT_EQ(count_rows(nd::read_file(dir / "out" / "labels" /
                                       ("layer_0" + std::to_string(l) + ".csv"))),
              3u);
    ASSERT_EQ(layers[l].size(), 3u);
    const auto g = to_grid(acts[l]);
    for (std::size_t k = 0; k < 3; ++k) {
      const auto best = oracle::best_concept(g[k], p, op);
      EXPECT_EQ(layers[l][k].word, fixture::kConcepts[best.concept_id]);
      EXPECT_NEAR(layers[l][k].score, static_cast<double>(best.score), 1e-9);
      EXPECT_EQ(layers[l][k].top_images.size(), 2u);
    }
  }
  EXPECT_EQ(layers[0][0].word, "green");
  EXPECT_EQ(layers[0][1].word, "red");
  EXPECT_EQ(layers[1][1].word, "car");
}

TEST(Pipeline, BundledFixtureIsCurrent) {
  TempDir dir;
  fixture::write(dir.path());
  const fs::path bundled = fs::path(ND_DATA_DIR) / "fixture";
  ASSERT_TRUE(fs::exists(bundled));
  EXPECT_EQ(testutil::snapshot(bundled), testutil::snapshot(dir.path()));
}

TEST(Pipeline, ReportMatchesCountingOracle) {
  TempDir dir;
  const auto cfg = fixture::write(dir / "in");
  nd::run_dissect(cfg, dir / "out", 1);
  nd::ReportConfig rc;
  rc.labels_dir = dir / "out";
  rc.categories = dir / "in" / "categories.csv";
  const auto rr = nd::cmd_report(rc, dir / "out");
  const auto layers = nd::read_label_dir(dir / "out");
  const auto map = nd::read_category_map(rc.categories);
  ASSERT_EQ(rr.reports.size(), 2u);
  for (std::size_t l = 0; l < 2; ++l) {
    long double tau = 0;
    for (const auto& x : layers[l]) tau += x.score;
    tau /= layers[l].size();
    nd::PerCategory<std::size_t> counts{};
    std::size_t kept = 0;
    for (const auto& x : layers[l]) {
      if (x.score < static_cast<double>(tau) - 1e-12) continue;
      ++kept;
      ++counts[nd::index_of(map.lookup(x.word))];
    }
    EXPECT_EQ(rr.reports[l].retained, kept);
    for (std::size_t c = 0; c < nd::kCategoryCount; ++c) {
      EXPECT_NEAR(rr.reports[l].category_pct[c], 100.0 * counts[c] / kept, 1e-9);
    }
  }
  EXPECT_FALSE(fs::exists(dir / "out" / "complexity.csv"));
  const auto csv_text = nd::read_file(dir / "out" / "reports.csv");
  EXPECT_EQ(csv_text.find("complexity"), std::string::npos);
  EXPECT_EQ(count_rows(csv_text), 2u);
  EXPECT_TRUE(fs::exists(dir / "out" / "run_config.json"));
}

TEST(Pipeline, AllWritesComplexity) {
  TempDir dir;
  const auto cfg = fixture::write(dir / "in");
  nd::ReportConfig rc;
  rc.categories = dir / "in" / "categories.csv";
  const auto rr = nd::run_all(cfg, rc, dir / "out", 1);
  ASSERT_TRUE(rr.reports[0].mean_complexity.has_value());
  // Layer 0 neurons see color images (0.2-0.3), layer 1 dog/car (0.6-0.8).
  EXPECT_LT(*rr.reports[0].mean_complexity, *rr.reports[1].mean_complexity);
  EXPECT_TRUE(fs::exists(dir / "out" / "complexity.csv"));
  const auto rc_json = nlohmann::json::parse(nd::read_file(dir / "out" / "run_config.json"));
  EXPECT_EQ(rc_json.at("command"), "all");
  EXPECT_TRUE(rc_json.contains("dissect"));
  EXPECT_TRUE(rc_json.contains("report"));
}

TEST(Pipeline, CompareSelfIsZero) {
  TempDir dir;
  const auto cfg = fixture::write(dir / "in");
  nd::ReportConfig rc;
  rc.categories = dir / "in" / "categories.csv";
  nd::run_all(cfg, rc, dir / "out", 1);
  nd::CompareConfig cc;
  cc.reports_a = {dir / "out" / "reports.json"};
  cc.reports_b = {dir / "out" / "reports.json"};
  const auto cmp = nd::run_compare(cc, dir / "cmp");
  ASSERT_EQ(cmp.layers.size(), 2u);
  for (const auto& d : cmp.layers) {
    EXPECT_EQ(d.unique_concepts, 0.0);
    for (const double v : d.category_pct) EXPECT_EQ(v, 0.0);
  }
  EXPECT_TRUE(fs::exists(dir / "cmp" / "comparison.csv"));
  EXPECT_TRUE(fs::exists(dir / "cmp" / "comparison_long.csv"));
}

TEST(Pipeline, CompareDifferentDepthsWithMapping) {
  TempDir dir;
  // Five-stage model against a twelve-layer model.
  const std::vector<std::size_t> widths = {64, 156, 512, 1024, 2048};
  std::vector<nd::LayerSummary> deep(12), shallow;
  for (std::size_t l = 0; l < 12; ++l) deep[l].layer = l;
  for (std::size_t l = 0; l < widths.size(); ++l) {
    nd::LayerSummary s;
    s.layer = l;
    s.retained = static_cast<double>(widths[l] / 2);
    shallow.push_back(s);
  }
  nd::write_file_atomic(dir / "deep.json",
                        nd::report_json(std::span<const nd::LayerSummary>(deep)).dump());
  nd::write_file_atomic(dir / "shallow.json",
                        nd::report_json(std::span<const nd::LayerSummary>(shallow)).dump());

  const auto r = run_cli("compare --a " + (dir / "deep.json").string() + " --b " +
                             (dir / "shallow.json").string() + " --out " +
                             (dir / "cmp").string(),
                         dir.path());
  EXPECT_EQ(r.exit_code, 3);
  EXPECT_NE(r.err.find("LayerCountMismatch"), std::string::npos) << r.err;

  nd::write_file_atomic(dir / "map.csv", "layer_a,layer_b\n0,0\n3,1\n6,2\n9,3\n11,4\n");
  const auto ok = run_cli("compare --a " + (dir / "deep.json").string() + " --b " +
                              (dir / "shallow.json").string() + " --layer-map " +
                              (dir / "map.csv").string() + " --out " +
                              (dir / "cmp").string(),
                          dir.path());
  EXPECT_EQ(ok.exit_code, 0) << ok.err;
  EXPECT_EQ(count_rows(nd::read_file(dir / "cmp" / "comparison.csv")), 5u);
}

TEST(Cli, MissingActivationFile) {
  TempDir dir;
  auto cfg = fixture::write(dir / "in");
  cfg.activations.push_back(dir / "in" / "layer_9.ndt");
  const auto r = run_cli(dissect_args(cfg, dir / "out"), dir.path());
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_NE(r.err.find("layer_9.ndt"), std::string::npos) << r.err;
  const auto j = nlohmann::json::parse(r.err);
  EXPECT_EQ(j.at("exit"), 2);
}

TEST(Cli, ZeroEmbeddingRow) {
  TempDir dir;
  const auto cfg = fixture::write(dir / "in");
  auto img = fixture::image_embeddings();
  for (std::size_t d = 0; d < img.cols(); ++d) img(3, d) = 0.0f;
  nd::write_tensor(cfg.image_embeddings, img);
  const auto r = run_cli(dissect_args(cfg, dir / "out"), dir.path());
  EXPECT_EQ(r.exit_code, 4);
  const auto j = nlohmann::json::parse(r.err);
  EXPECT_EQ(j.at("error"), "ZeroRow");
  EXPECT_EQ(j.at("index"), 3);
  EXPECT_EQ(j.at("path"), cfg.image_embeddings.string());
}

TEST(Cli, ShapeMismatch) {
  TempDir dir;
  const auto cfg = fixture::write(dir / "in");
  nd::write_tensor(cfg.activations[1], nd::ActivationTable(3, 5));
  const auto r = run_cli(dissect_args(cfg, dir / "out"), dir.path());
  EXPECT_EQ(r.exit_code, 3);
  EXPECT_NE(r.err.find("layer_1.ndt"), std::string::npos) << r.err;
}

TEST(Cli, RerunsAreByteIdentical) {
  TempDir dir;
  const auto cfg = fixture::write(dir / "in");
  for (const char* out : {"a", "b"}) {
    const auto r = run_cli(dissect_args(cfg, dir / out), dir.path());
    ASSERT_EQ(r.exit_code, 0) << r.err;
    const auto rep = run_cli("report --labels " + (dir / out).string() + " --categories " +
                                 (dir / "in" / "categories.csv").string() + " --manifest " +
                                 cfg.manifest.string() + " --out " + (dir / out).string(),
                             dir.path());
    ASSERT_EQ(rep.exit_code, 0) << rep.err;
  }
  const auto a = testutil::snapshot(dir / "a");
  EXPECT_EQ(a, testutil::snapshot(dir / "b"));
  EXPECT_TRUE(a.count("complexity.csv"));
  EXPECT_TRUE(a.count("labels/layer_00_top_images.csv"));
}

TEST(Cli, UsageErrorExitsTwo) {
  TempDir dir;
  EXPECT_EQ(run_cli("dissect --top-k nope", dir.path()).exit_code, 2);
  EXPECT_EQ(run_cli("", dir.path()).exit_code, 2);
}
