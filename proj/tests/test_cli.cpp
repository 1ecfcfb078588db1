#include "cli_app.hpp"
#include "proxsplit/pgm.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace proxsplit;
using namespace proxsplit::cli;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("proxsplit_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::string write_json(const std::string& name, const json& j) const {
    std::ofstream(path(name)) << j.dump(2);
    return path(name);
  }

  int invoke(std::vector<std::string> args) {
    args.insert(args.begin(), "proxsplit");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    out_.str("");
    err_.str("");
    return main_with_args(static_cast<int>(argv.size()), argv.data(), out_, err_);
  }

  fs::path dir_;
  std::ostringstream out_, err_;
};

std::string slurp(const std::string& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

std::vector<std::vector<std::string>> read_csv(const std::string& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(slurp(p));
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string c;
    while (std::getline(ls, c, ',')) cells.push_back(c);
    rows.push_back(cells);
  }
  return rows;
}

}  // namespace

TEST_F(CliTest, RunHeron1Dr1Default) {
  ASSERT_EQ(invoke({"run", "heron1", "dr1", "--csv", path("h.csv")}), 0) << err_.str();
  const auto rows = read_csv(path("h.csv"));
  EXPECT_EQ(rows[0], (std::vector<std::string>{"iter", "objective", "residual", "primal_0", "primal_1"}));
  EXPECT_EQ(rows.size(), 52u);
  EXPECT_EQ(rows.back()[0], "50");
  EXPECT_NEAR(std::stod(rows.back()[1]), 53.043627, 1e-5);
  EXPECT_NEAR(std::stod(rows.back()[3]), 3.392688, 1e-5);
  EXPECT_NEAR(std::stod(rows.back()[4]), -1.190188, 1e-5);
}

TEST_F(CliTest, RunHeron3Dr2Default) {
  ASSERT_EQ(invoke({"run", "heron3", "dr2", "--csv", path("h.csv")}), 0) << err_.str();
  const auto rows = read_csv(path("h.csv"));
  EXPECT_NEAR(std::stod(rows.back()[3]), -1.094773, 1e-5);
  EXPECT_NEAR(std::stod(rows.back()[4]), 6.0, 1e-5);
}

TEST_F(CliTest, ItersZeroGivesOnlyInitialRow) {
  ASSERT_EQ(invoke({"run", "heron1", "dr1", "--iters", "0", "--csv", path("h.csv")}), 0);
  const auto rows = read_csv(path("h.csv"));
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[1][0], "0");
}

TEST_F(CliTest, ObjectiveColumnRecomputesFromPrimal) {
  for (const char* e : {"heron1", "heron2", "heron3"}) {
    ASSERT_EQ(invoke({"run", e, "dr2", "--csv", path("h.csv")}), 0);
    const HeronSpec h = heron_example(e[5] - '0');
    for (const auto& r : read_csv(path("h.csv"))) {
      if (r[0] == "iter") continue;
      Vector x(static_cast<Eigen::Index>(r.size() - 3));
      for (std::size_t k = 3; k < r.size(); ++k) x[static_cast<Eigen::Index>(k - 3)] = std::stod(r[k]);
      EXPECT_NEAR(std::stod(r[1]), heron_objective(h, x), 1e-9);
    }
  }
}

TEST_F(CliTest, OutputsAreByteIdenticalAcrossRuns) {
  const json cfg{{"experiment", "deblur"},
                 {"algorithm", "dr1"},
                 {"iters", 20},
                 {"deblur", {{"size", 32}}},
                 {"output", {{"csv", path("a.csv")}, {"pgm", path("a.pgm")}}}};
  ASSERT_EQ(invoke({"run", write_json("a.json", cfg)}), 0) << err_.str();
  json cfg2 = cfg;
  cfg2["output"] = {{"csv", path("b.csv")}, {"pgm", path("b.pgm")}};
  ASSERT_EQ(invoke({"run", write_json("b.json", cfg2)}), 0);
  EXPECT_EQ(slurp(path("a.csv")), slurp(path("b.csv")));
  EXPECT_EQ(slurp(path("a.pgm")), slurp(path("b.pgm")));
  const auto rows = read_csv(path("a.csv"));
  EXPECT_EQ(rows[0], (std::vector<std::string>{"iter", "objective", "residual", "isnr"}));
  const ImageGrid img = pgm_read(path("a.pgm"));
  EXPECT_EQ(img.rows, 32u);
  ASSERT_EQ(invoke({"run", "heron2", "dr1", "--csv", path("c.csv")}), 0);
  ASSERT_EQ(invoke({"run", "heron2", "dr1", "--csv", path("d.csv")}), 0);
  EXPECT_EQ(slurp(path("c.csv")), slurp(path("d.csv")));
}

TEST_F(CliTest, DeblurExternalImageIsPaddedAndCropped) {
  ImageGrid img = synthetic_image(20, 24);
  pgm_write(img, path("in.pgm"));
  const json cfg{{"experiment", "deblur"},
                 {"algorithm", "dr2"},
                 {"iters", 5},
                 {"deblur", {{"image", path("in.pgm")}}},
                 {"output", {{"csv", path("o.csv")}, {"pgm", path("o.pgm")}, {"metadata", path("m.json")}}}};
  ASSERT_EQ(invoke({"run", write_json("c.json", cfg)}), 0) << err_.str();
  const ImageGrid out = pgm_read(path("o.pgm"));
  EXPECT_EQ(out.rows, 20u);
  EXPECT_EQ(out.cols, 24u);
  const json meta = json::parse(slurp(path("m.json")));
  EXPECT_EQ(meta["pad_rows"], 12);
  EXPECT_EQ(meta["pad_cols"], 8);
  EXPECT_EQ(meta["scheme"], "dr2-reduced");
}

TEST_F(CliTest, InvalidStepsExitTwo) {
  const json cfg{{"experiment", "heron1"}, {"algorithm", "dr1"}, {"tau", 1.0}, {"sigmas", 0.5}};
  EXPECT_EQ(invoke({"run", write_json("c.json", cfg)}), 2);
  EXPECT_NE(err_.str().find("budget"), std::string::npos);
  EXPECT_EQ(invoke({"validate", path("c.json")}), 2);
  const json ok{{"experiment", "heron1"}, {"algorithm", "dr2"}};
  EXPECT_EQ(invoke({"validate", write_json("ok.json", ok)}), 0);
  EXPECT_NE(out_.str().find("ok"), std::string::npos);
}

TEST_F(CliTest, UnknownKeysAreErrors) {
  EXPECT_EQ(invoke({"run", write_json("a.json", json{{"experiment", "heron1"}, {"iter", 3}})}), 2);
  EXPECT_NE(err_.str().find("unknown key 'iter'"), std::string::npos);
  EXPECT_EQ(invoke({"run", write_json("b.json", json{{"errors", {{"c", 0.1}, {"q", 2}}}})}), 2);
  EXPECT_EQ(invoke({"run", write_json("c.json", json{{"deblur", {{"alpha", 1}}}})}), 2);
  EXPECT_EQ(invoke({"run", write_json("d.json", json{{"output", {{"png", "x"}}}})}), 2);
  EXPECT_EQ(invoke({"run", write_json("e.json", json{{"experiment", "heron9"}})}), 2);
  EXPECT_EQ(invoke({"run", write_json("f.json", json{{"algorithm", "dr3"}})}), 2);
  EXPECT_THROW(parse_proxfn(json{{"kind", "ball"}, {"center", {0, 0}}, {"radius", 1}, {"extra", 1}}), ConfigError);
  EXPECT_THROW(parse_proxfn(json{{"kind", "sphere"}}), ConfigError);
  EXPECT_THROW(parse_proxfn(json{{"kind", "ball"}, {"center", {0, 0}}, {"radius", -1}}), ConfigError);
}

TEST_F(CliTest, MalformedJsonAndMissingFileExitTwo) {
  std::ofstream(path("bad.json")) << "{ \"experiment\": ";
  EXPECT_EQ(invoke({"run", path("bad.json")}), 2);
  EXPECT_EQ(invoke({"run", path("missing.json")}), 2);
  EXPECT_EQ(invoke({"run", "heron1", "dr1", "--bogus"}), 2);
}

TEST_F(CliTest, ParseDefaultsAndOverrides) {
  const RunConfig d = parse_run_config(json::object());
  EXPECT_EQ(d.experiment, "heron1");
  EXPECT_EQ(d.algorithm, Scheme::dr1);
  EXPECT_EQ(d.log_stride, 1u);
  EXPECT_EQ(d.deblur.params.alpha1, 3e-3);
  EXPECT_EQ(d.deblur.params.alpha2, 2e-5);
  const RunConfig c = parse_run_config(json{{"algorithm", "dr2-reduced"},
                                            {"sigmas", {0.1, 0.2}},
                                            {"errors", {{"c", 0.1}, {"p", 2}, {"seed", 5}}},
                                            {"x0", {1, 2}}});
  EXPECT_EQ(c.algorithm, Scheme::dr2_reduced);
  EXPECT_EQ(c.sigmas->size(), 2u);
  EXPECT_EQ(c.errors.seed, 5u);
  EXPECT_THROW(parse_run_config(json{{"log_stride", 0}}), ConfigError);
}

TEST_F(CliTest, EveryProxFnKindParses) {
  const std::vector<json> fs{
      {{"kind", "box"}, {"lo", {0, 0}}, {"hi", {1, 1}}},
      {{"kind", "cube"}, {"center", {0, 0}}, {"side", 2}},
      {{"kind", "ball"}, {"center", {0, 0}}, {"radius", 1}},
      {{"kind", "line"}, {"base", {1, 6}}, {"dir", {1, 0}}},
      {{"kind", "zero-point"}},
      {{"kind", "weighted-l1"}, {"alpha", 2}, {"shift", {1, 2}}},
      {{"kind", "eucl-norm"}},
      {{"kind", "iso-norm"}, {"alpha", 0.1}, {"rows", 2}, {"cols", 3}},
      {{"kind", "tilted"}, {"base", {{"kind", "eucl-norm"}}}, {"tilt", {1, 0}}},
  };
  for (const auto& j : fs) {
    const std::string kind = j["kind"].get<std::string>();
    EXPECT_EQ(parse_proxfn(j).name().substr(0, 3), (kind == "cube" ? std::string("box") : kind).substr(0, 3));
  }
}

TEST_F(CliTest, CustomProblemRunsAndSolvesKkt) {
  // |x - 1| + 2|x - 3| - 0.5 x, minimized at x = 3.
  const json cfg{{"experiment", "custom"},
                 {"algorithm", "dr1"},
                 {"tau", 1.0},
                 {"sigmas", {1.0}},
                 {"iters", 400},
                 {"x0", {-4}},
                 {"custom",
                  {{"dim", 1},
                   {"f", {{"kind", "weighted-l1"}, {"alpha", 1}, {"shift", {1}}}},
                   {"z", {0.5}},
                   {"terms", {{{"L", {{1.0}}}, {"g", {{"kind", "weighted-l1"}, {"alpha", 2}, {"shift", {3}}}}}}}}},
                 {"output", {{"csv", path("k.csv")}}}};
  ASSERT_EQ(invoke({"run", write_json("k.json", cfg)}), 0) << err_.str();
  const auto rows = read_csv(path("k.csv"));
  EXPECT_NEAR(std::stod(rows.back()[3]), 3.0, 1e-9);
  EXPECT_NEAR(std::stod(rows.back()[1]), 2.0 - 1.5, 1e-9);
  json bad = cfg;
  bad["custom"]["terms"][0]["L"] = {{1.0, 2.0}};
  EXPECT_EQ(invoke({"run", write_json("bad.json", bad)}), 2);
  bad = cfg;
  bad.erase("tau");
  EXPECT_EQ(invoke({"run", write_json("bad2.json", bad)}), 2);
}

TEST_F(CliTest, NonFiniteIterateExitsThree) {
  const json cfg{{"experiment", "custom"},
                 {"algorithm", "dr1"},
                 {"tau", 1.0},
                 {"sigmas", {1.0}},
                 {"x0", {1.7e308}},
                 {"custom",
                  {{"dim", 1},
                   {"f", {{"kind", "weighted-l1"}, {"alpha", 1}}},
                   {"terms", {{{"g", {{"kind", "eucl-norm"}}}}}}}},
                 {"output", {{"csv", path("n.csv")}}}};
  EXPECT_EQ(invoke({"run", write_json("n.json", cfg)}), 3);
  EXPECT_NE(err_.str().find("iteration"), std::string::npos);
}

TEST_F(CliTest, NormsCommand) {
  const json cfg{{"experiment", "deblur"}, {"deblur", {{"size", 32}}}};
  ASSERT_EQ(invoke({"norms", write_json("n.json", cfg)}), 0);
  const std::string s = out_.str();
  EXPECT_NE(s.find("term,operator,declared,estimate"), std::string::npos);
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 4);
}

TEST_F(CliTest, ValidateWarnsOnUnderstatedWaveletBound) {
  const json cfg{{"experiment", "deblur"}, {"deblur", {{"size", 32}, {"wavelet_norm", 0.00390625}}}};
  ASSERT_EQ(invoke({"validate", write_json("v.json", cfg)}), 0);
  EXPECT_NE(err_.str().find("warning"), std::string::npos);
}

TEST_F(CliTest, InexactRunUsesErrorSchedule) {
  const json exact{{"experiment", "heron1"}, {"output", {{"csv", path("a.csv")}}}};
  const json noisy{{"experiment", "heron1"}, {"errors", {{"c", 0.1}, {"p", 2}}}, {"output", {{"csv", path("b.csv")}}}};
  ASSERT_EQ(invoke({"run", write_json("a.json", exact)}), 0);
  ASSERT_EQ(invoke({"run", write_json("b.json", noisy)}), 0);
  EXPECT_NE(slurp(path("a.csv")), slurp(path("b.csv")));
  EXPECT_EQ(invoke({"run", write_json("c.json", json{{"errors", {{"c", 0.1}, {"p", 1}}}})}), 2);
}

TEST_F(CliTest, ResidualToleranceStopsEarly) {
  const json cfg{{"experiment", "heron3"}, {"iters", 100000}, {"residual_tol", 1e-10}, {"output", {{"csv", path("r.csv")}}}};
  ASSERT_EQ(invoke({"run", write_json("r.json", cfg)}), 0);
  EXPECT_LT(read_csv(path("r.csv")).size(), 5000u);
}

// ---------------------------------------------------------------------------
// PGM
// ---------------------------------------------------------------------------

TEST(Pgm, AsciiExample) {
  const ImageGrid g = pgm_parse("P2\n# comment\n2 2\n255\n0 255\n128 64\n");
  EXPECT_EQ(g.rows, 2u);
  EXPECT_EQ(g.pixels[0], 0.0);
  EXPECT_EQ(g.pixels[1], 1.0);
  EXPECT_EQ(g.pixels[2], 128.0 / 255.0);
  EXPECT_EQ(g.pixels[3], 64.0 / 255.0);
}

TEST(Pgm, BinaryAndAsciiAgree) {
  std::string p5 = "P5\n2 2\n255\n";
  for (unsigned char c : {0, 255, 128, 64}) p5.push_back(static_cast<char>(c));
  EXPECT_EQ(pgm_parse(p5).pixels, pgm_parse("P2 2 2 255 0 255 128 64").pixels);
  std::string p5w = "P5 1 2 65535\n";
  for (unsigned char c : {0x01, 0x00, 0xFF, 0xFF}) p5w.push_back(static_cast<char>(c));
  const ImageGrid w = pgm_parse(p5w);
  EXPECT_EQ(w.pixels[0], 256.0 / 65535.0);
  EXPECT_EQ(w.pixels[1], 1.0);
}

TEST(Pgm, QuantizedRoundTrip) {
  std::mt19937_64 g(3);
  std::uniform_int_distribution<int> d(0, 255);
  Vector px(35);
  for (auto& v : px) v = d(g) / 255.0;
  const ImageGrid img(5, 7, px);
  for (auto enc : {PgmEncoding::ascii, PgmEncoding::binary}) {
    const ImageGrid back = pgm_parse(pgm_format(img, 255, enc));
    EXPECT_EQ(back.pixels, img.pixels);
    EXPECT_EQ(pgm_format(back, 255, enc), pgm_format(img, 255, enc));
  }
  const ImageGrid wide = pgm_parse(pgm_format(img, 65535));
  EXPECT_LT((wide.pixels - img.pixels).cwiseAbs().maxCoeff(), 1.0 / 65535);
}

TEST(Pgm, WriteClampsAndRounds) {
  const ImageGrid img(1, 3, (Vector(3) << -0.5, 1.7, 0.5).finished());
  const ImageGrid back = pgm_parse(pgm_format(img));
  EXPECT_EQ(back.pixels[0], 0.0);
  EXPECT_EQ(back.pixels[1], 1.0);
  EXPECT_EQ(back.pixels[2], 128.0 / 255.0);
}

TEST(Pgm, MalformedInputsReportOffsets) {
  auto offset_of = [](const std::string& s) -> long {
    try {
      pgm_parse(s);
    } catch (const PgmError& e) {
      return static_cast<long>(e.offset());
    }
    return -1;
  };
  EXPECT_EQ(offset_of("P3\n1 1\n255\n0"), 0);
  EXPECT_EQ(offset_of("P2\n1 x\n255\n0"), 5);
  EXPECT_EQ(offset_of("P2\n1 1\n0\n0"), 7);
  EXPECT_EQ(offset_of("P2\n1 1\n70000\n0"), 7);
  EXPECT_EQ(offset_of("P2\n1 1\n255\n300"), 11);
  EXPECT_GE(offset_of("P5\n2 2\n255\n\x01"), 0);
  EXPECT_EQ(offset_of("P2\n0 1\n255\n"), 3);
}

TEST_F(CliTest, MalformedPgmExitsTwo) {
  std::ofstream(path("bad.pgm")) << "P2\n2 2\n255\n0 1";
  const json cfg{{"experiment", "deblur"}, {"deblur", {{"image", path("bad.pgm")}}}};
  EXPECT_EQ(invoke({"run", write_json("c.json", cfg)}), 2);
  EXPECT_NE(err_.str().find("byte"), std::string::npos);
}
