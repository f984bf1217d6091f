#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <unistd.h>

#include "cli.hpp"
#include "fixtures.hpp"
#include "stochsym/io.hpp"

namespace stochsym {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using namespace testing;

const std::string kModels = STOCHSYM_MODEL_DIR;
const std::string kEx51 = kModels + "/ex51.json";
const std::string kBm2d = kModels + "/bm2d.json";

struct Outcome {
  int code = 0;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

json run_json(std::vector<std::string> args, int expected_code) {
  args.push_back("--format");
  args.push_back("json");
  const Outcome r = run(args);
  EXPECT_EQ(r.code, expected_code) << r.err;
  const json doc = json::parse(r.out);
  EXPECT_EQ(doc.at("exit_code").get<int>(), expected_code);
  return doc;
}

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() / ("stochsym_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }
  std::string str() const { return path_.string(); }

 private:
  fs::path path_;
};

std::string slurp(const std::string& file) {
  std::ifstream in(file);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

void write(const std::string& file, const json& doc) { std::ofstream(file) << doc.dump(2); }

json fixture(const std::string& file) { return json::parse(slurp(file)); }

TEST(Cli, CheckExitCodes) {
  EXPECT_EQ(run({"check", "--sde", kEx51, "--sym", "V1", "V2"}).code, cli::kSuccess);
  const Outcome no_c = run({"check", "--sde", kBm2d, "--sym", "V4_noC"});
  EXPECT_EQ(no_c.code, cli::kCheckFailed);
  EXPECT_NE(no_c.out.find("not a symmetry"), std::string::npos);
  EXPECT_EQ(run({"check", "--sde", kBm2d, "--sym", "V1", "V2", "V3", "V4"}).code, cli::kSuccess);
  EXPECT_EQ(run({"check", "--sde", kBm2d, "--sym", "V9"}).code, cli::kUsage);
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run({}).code, cli::kUsage);
  EXPECT_EQ(run({"frobnicate"}).code, cli::kUsage);
  EXPECT_EQ(run({"check", "--sym", "V1"}).code, cli::kUsage);
  EXPECT_EQ(run({"check", "--sde", kEx51}).code, cli::kUsage);
  EXPECT_EQ(run({"check", "--sde", kEx51, "--sym", "V1", "--format", "xml"}).code, cli::kUsage);
  EXPECT_EQ(run({"check", "--sde", "/nonexistent/model.json", "--sym", "V1"}).code, cli::kUsage);
  EXPECT_EQ(run({"transform", "--sde", kEx51, "--transform", "nope"}).code, cli::kUsage);
  EXPECT_EQ(run({"bracket", "--sde", kEx51, "--sym", "V1"}).code, cli::kUsage);
  EXPECT_EQ(run({"--help"}).code, cli::kSuccess);
}

TEST(Cli, ValidationErrors) {
  TempDir dir;
  json bad = fixture(kEx51);
  bad["transforms"]["T"]["B"] = json::array({json::array({"2", "0"}), json::array({"0", "1"})});
  write(dir.file("bad.json"), bad);
  EXPECT_EQ(run({"check", "--sde", dir.file("bad.json"), "--sym", "V1"}).code, cli::kInvalid);
  const json report = run_json({"validate", "--sde", dir.file("bad.json")}, cli::kInvalid);
  EXPECT_FALSE(report["passed"].get<bool>());

  json negative = fixture(kBm2d);
  negative["transforms"]["time_change_4"]["eta"] = "-1";
  write(dir.file("negative.json"), negative);
  EXPECT_EQ(run({"validate", "--sde", dir.file("negative.json")}).code, cli::kInvalid);

  std::ofstream(dir.file("broken.json")) << "{ \"n\": 2, ";
  EXPECT_EQ(run({"validate", "--sde", dir.file("broken.json")}).code, cli::kInvalid);
  const json broken = run_json({"validate", "--sde", dir.file("broken.json")}, cli::kInvalid);
  EXPECT_TRUE(broken.contains("error"));
  json garbled = fixture(kBm2d);
  garbled["mu"] = {"x+", "0"};
  write(dir.file("garbled.json"), garbled);
  EXPECT_EQ(run({"validate", "--sde", dir.file("garbled.json")}).code, cli::kInvalid);
  json shape = fixture(kBm2d);
  shape["mu"] = {"0"};
  write(dir.file("shape.json"), shape);
  EXPECT_EQ(run({"validate", "--sde", dir.file("shape.json")}).code, cli::kInvalid);

  EXPECT_EQ(run({"validate", "--sde", kEx51}).code, cli::kSuccess);
  EXPECT_EQ(run({"validate", "--sde", kBm2d}).code, cli::kSuccess);
}

TEST(Cli, ModelRoundTrip) {
  const ModelFile a = load_model(kEx51);
  const ModelFile b = model_from_json(to_json(a));
  EXPECT_EQ(to_json(a), to_json(b));
  EXPECT_EQ(b.symmetries.size(), 2u);
  EXPECT_EQ(b.transforms.size(), 2u);
  ASSERT_TRUE(b.pipeline);
  EXPECT_EQ(b.pipeline->transform, "T");
  EXPECT_EQ(b.x0, (std::vector<double>{1, 0}));
  EXPECT_DOUBLE_EQ(b.sde.domain.margin(), 0.005);
}

TEST(Cli, TransformWritesModel) {
  TempDir dir;
  const Outcome r = run({"transform", "--sde", kEx51, "--transform", "T_displayed", "--out", dir.str()});
  ASSERT_EQ(r.code, cli::kSuccess) << r.err;
  const ModelFile out = load_model(dir.file("ex51_T_displayed.json"));
  EXPECT_TRUE(zero_test(ExprMatrix::column(out.sde.mu) - ExprMatrix::column(vec2({"x", "y"})), punctured_box()).zero) << slurp(dir.file("ex51_T_displayed.json"));
  const ExprMatrix expected = mat2({{"x", "y"}, {"-y", "x"}});
  EXPECT_TRUE(zero_test(out.sde.sigma - expected, punctured_box()).zero);
  EXPECT_TRUE(fs::exists(dir.file("report.json")));
}

TEST(Cli, IdentityTransformFromFile) {
  TempDir dir;
  write(dir.file("id.json"), json{{"phi", {"x", "y"}}, {"phi_inverse", {"x", "y"}}, {"B", json::array({json::array({"1", "0"}), json::array({"0", "1"})})},
                                  {"eta", "1"}});
  const Outcome r = run({"transform", "--sde", kEx51, "--transform", dir.file("id.json"), "--out", dir.str()});
  ASSERT_EQ(r.code, cli::kSuccess) << r.err;
  const ModelFile in = load_model(kEx51);
  const ModelFile out = load_model(dir.file("ex51_id.json"));
  EXPECT_TRUE(zero_test(ExprMatrix::column(out.sde.mu) - ExprMatrix::column(in.sde.mu), in.sde.domain).zero);
  EXPECT_TRUE(zero_test(out.sde.sigma - in.sde.sigma, in.sde.domain).zero);
  EXPECT_EQ(out.x0, in.x0);
}

TEST(Cli, ConstantTimeChange) {
  const json doc = run_json({"transform", "--sde", kBm2d, "--transform", "time_change_4"}, cli::kSuccess);
  const ModelFile out = model_from_json(doc["model"]);
  const ExprMatrix half = mat2({{"1/2", "0"}, {"0", "1/2"}});
  EXPECT_TRUE(zero_test(out.sde.sigma - half, brownian_box()).zero);
}

TEST(Cli, BracketReportsClosure) {
  const json doc = run_json({"bracket", "--sde", kBm2d, "--sym", "V1", "V2", "V3", "V4"}, cli::kSuccess);
  EXPECT_TRUE(doc["closure"]["closed"].get<bool>());
  EXPECT_EQ(doc["brackets"].size(), 6u);
  EXPECT_EQ(run({"bracket", "--sde", kBm2d, "--sym", "V1", "V4_noC"}).code, cli::kCheckFailed);
}

TEST(Cli, PushforwardStrength) {
  const json good = run_json({"pushforward", "--sde", kEx51, "--transform", "T", "--sym", "V1", "V2"}, cli::kSuccess);
  EXPECT_TRUE(good["pushforwards"]["V1"]["strong_symmetry"].get<bool>());
  EXPECT_TRUE(good["pushforwards"]["V2"]["strong_symmetry"].get<bool>());
  const json displayed =
      run_json({"pushforward", "--sde", kEx51, "--transform", "T_displayed", "--sym", "V2"}, cli::kSuccess);
  EXPECT_TRUE(displayed["pushforwards"]["V2"]["weak_symmetry"].get<bool>());
  EXPECT_FALSE(displayed["pushforwards"]["V2"]["strong_symmetry"].get<bool>());
}

TEST(Cli, Reduce) {
  TempDir dir;
  EXPECT_EQ(run({"reduce", "--sde", kEx51, "--sym", "V1", "V2", "--transform", "T", "--out", dir.str()}).code,
            cli::kSuccess);
  EXPECT_EQ(slurp(dir.file("reduction.csv")).substr(0, 27), "s1,s2,p1,p2,B11,B12,B21,B22");
  EXPECT_EQ(run({"reduce", "--sde", kEx51, "--sym", "V1", "V2", "--transform", "T_displayed"}).code, cli::kCheckFailed);
  EXPECT_EQ(run({"reduce", "--sde", kBm2d, "--sym", "V3", "V4"}).code, cli::kSuccess);
  const json doc = run_json({"reduce", "--sde", kBm2d, "--sym", "V1", "V3"}, cli::kCheckFailed);
  EXPECT_TRUE(doc["reduction"].contains("error"));
}

TEST(Cli, SimulateIsReproducible) {
  TempDir a, b, c;
  const std::vector<std::string> base{"simulate", "--sde", kBm2d, "--paths", "150", "--dt", "0.01", "--horizon", "0.3"};
  auto with = [&](std::vector<std::string> extra) {
    std::vector<std::string> args = base;
    args.insert(args.end(), extra.begin(), extra.end());
    return run(args);
  };
  ASSERT_EQ(with({"--seed", "7", "--out", a.str()}).code, cli::kSuccess);
  ASSERT_EQ(with({"--seed", "7", "--out", b.str()}).code, cli::kSuccess);
  ASSERT_EQ(with({"--seed", "8", "--out", c.str()}).code, cli::kSuccess);
  const std::string ea = slurp(a.file("ensemble.csv"));
  EXPECT_EQ(ea.substr(0, ea.find('\n')), "path,k,t,X1,X2,W1,W2");
  EXPECT_EQ(ea, slurp(b.file("ensemble.csv")));
  EXPECT_NE(ea, slurp(c.file("ensemble.csv")));
  EXPECT_EQ(with({"--paths", "0"}).code, cli::kUsage);
}

TEST(Cli, SimulateTransformed) {
  const json doc = run_json({"simulate", "--sde", kBm2d, "--transform", "time_change_4", "--paths", "1000", "--dt",
                             "0.01", "--horizon", "0.4"},
                            cli::kSuccess);
  EXPECT_EQ(doc["simulation"]["short_paths"].get<int>(), 0);
  EXPECT_TRUE(doc["simulation"]["noise"]["passed"].get<bool>());
}

TEST(Cli, Flow) {
  TempDir dir;
  EXPECT_EQ(run({"flow", "--sde", kBm2d, "--sym", "V1", "V2", "V3", "V4", "--a", "0.2", "--out", dir.str()}).code,
            cli::kSuccess);
  EXPECT_TRUE(fs::exists(dir.file("flow_V4.csv")));
  EXPECT_EQ(run({"flow", "--sde", kBm2d, "--sym", "V4_noC"}).code, cli::kCheckFailed);
  EXPECT_EQ(run({"flow", "--sde", kEx51, "--sym", "V1", "V2", "--a", "0.1"}).code, cli::kSuccess);
}

TEST(Cli, Examples) {
  const json bm = run_json({"example", "bm2d"}, cli::kSuccess);
  EXPECT_EQ(bm["stages"].size(), 4u);
  EXPECT_EQ(bm["stages"][3]["skipped"], json({"V1", "V2"}));
  EXPECT_EQ(bm["stages"][3]["basis"], json({"V3", "V4"}));
  const json ex = run_json({"example", "ex51", "--paths", "2000", "--dt", "0.002"}, cli::kSuccess);
  EXPECT_EQ(ex["stages"].size(), 7u);
  EXPECT_TRUE(ex["failed_stages"].empty());
  EXPECT_EQ(run({"example", "unknown"}).code, cli::kUsage);
}

TEST(Cli, ExampleReportsFailingStage) {
  TempDir dir;
  json doc = fixture(kEx51);
  doc["pipeline"]["transform"] = "T_displayed";
  write(dir.file("displayed.json"), doc);
  const json r = run_json({"example", "displayed", "--models", dir.str(), "--paths", "1000", "--dt", "0.004"},
                          cli::kCheckFailed);
  const auto failed = r["failed_stages"].get<std::vector<std::string>>();
  EXPECT_NE(std::find(failed.begin(), failed.end(), "reduction"), failed.end());
  EXPECT_NE(std::find(failed.begin(), failed.end(), "strong symmetries"), failed.end());
}

}  // namespace
}  // namespace stochsym
