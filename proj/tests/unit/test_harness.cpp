// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "support.hpp"
#include "urae/harness.hpp"

using namespace urae;
using namespace urae::harness;
namespace fs = std::filesystem;

namespace {

const std::vector<Column> kSchema = {
    {"step", ColumnType::Integer}, {"loss", ColumnType::Real}, {"label", ColumnType::Text}};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "urae_test_harness" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<std::string> violations_of(Kind kind, const Json& user) {
  try {
    (void)resolve_config(kind, user);
  } catch (const ConfigError& e) {
    return e.violations();
  }
  return {};
}

bool mentions(const std::vector<std::string>& v, const std::string& key) {
  for (const auto& s : v) {
    if (s.find(key) != std::string::npos) return true;
  }
  return false;
}

}  // namespace

TEST(Csv, ExactBytes) {
  const std::vector<Row> rows = {
      {std::uint64_t{0}, 0.5, std::string("a")},
      {std::uint64_t{12}, 0.1, std::string("x,\"y\"")},
      {std::uint64_t{3}, -1e-300, std::string("")},
  };
  EXPECT_EQ(format_csv(kSchema, rows),
            "step,loss,label\n"
            "0,0.5,a\n"
            "12,0.10000000000000001,\"x,\"\"y\"\"\"\n"
            "3,-1e-300,\n");
  EXPECT_EQ(format_csv(kSchema, {}), "step,loss,label\n");
  EXPECT_EQ(format_real(2.0), "2");
  EXPECT_EQ(format_real(1.0 / 3.0), "0.33333333333333331");
}

TEST(Csv, RoundTrip) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> d(0.0, 1e3);
  std::vector<Row> rows;
  for (std::uint64_t i = 0; i < 200; ++i) {
    rows.push_back({i * 977, d(rng) * std::exp(d(rng) / 100), std::string(i % 3 == 0 ? "q\"uote" : "plain,comma")});
  }
  rows.push_back({std::uint64_t{18446744073709551615ull}, 4.9e-324, std::string("line\nbreak")});
  const auto text = format_csv(kSchema, rows);
  EXPECT_EQ(parse_csv(text, kSchema), rows);
  EXPECT_EQ(format_csv(kSchema, parse_csv(text, kSchema)), text);
}

TEST(Csv, ErrorsNameTheRow) {
  const std::vector<Row> wrong_type = {{std::uint64_t{0}, 1.0, std::string("a")},
                                       {1.0, 1.0, std::string("b")}};
  try {
    (void)format_csv(kSchema, wrong_type);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("row 1"), std::string::npos) << e.what();
  }
  const std::vector<Row> short_row = {{std::uint64_t{0}, 1.0}};
  EXPECT_THROW((void)format_csv(kSchema, short_row), ValidationError);
  EXPECT_THROW((void)parse_csv("step,loss\n", kSchema), ValidationError);
  EXPECT_THROW((void)parse_csv("step,loss,label\n-1,0,a\n", kSchema), ValidationError);
  EXPECT_THROW((void)parse_csv("step,loss,label\n1,abc,a\n", kSchema), ValidationError);
}

TEST(Csv, EmitWritesFile) {
  const auto dir = scratch("emit");
  emit_report({{std::uint64_t{1}, 2.5, std::string("z")}}, kSchema, dir / "t.csv");
  EXPECT_EQ(slurp(dir / "t.csv"), "step,loss,label\n1,2.5,z\n");
  EXPECT_THROW(emit_report({}, kSchema, dir / "missing_dir" / "t.csv"), IoError);
}

TEST(Config, KindsRoundTrip) {
  for (Kind k : {Kind::Theorem1, Kind::Fig2Sweep, Kind::ToyTrain, Kind::ToyDistill, Kind::CfgAdapt,
                 Kind::AdapterOp, Kind::ArchiveInspect}) {
    EXPECT_EQ(parse_kind(to_string(k)), k);
  }
  EXPECT_EQ(to_string(Kind::Fig2Sweep), "fig2-sweep");
  EXPECT_EQ(to_string(Kind::CfgAdapt), "cfg-adapt");
  EXPECT_FALSE(parse_kind("nope"));
}

TEST(Config, Flatten) {
  const Json nested = {{"gd", {{"eta", 0.1}, {"steps", 3}}}, {"trials", 5}};
  const Json flat = {{"gd.eta", 0.1}, {"gd.steps", 3}, {"trials", 5}};
  EXPECT_EQ(flatten(nested), flat);
  EXPECT_EQ(flatten(flat), flat);
}

TEST(Config, DefaultsAreEchoed) {
  const Json c = resolve_config(Kind::Theorem1, Json::object());
  EXPECT_EQ(c.at("experiment"), "theorem1");
  EXPECT_EQ(c.at("seed").get<std::uint64_t>(), 1u);
  EXPECT_EQ(c.at("problem.n").get<std::uint64_t>(), 32u);
  EXPECT_EQ(c.at("problem.d").get<std::uint64_t>(), 64u);
  EXPECT_DOUBLE_EQ(c.at("gd.eta").get<double>(), 0.01);
  EXPECT_EQ(c.at("p_grid").size(), 5u);
  EXPECT_EQ(resolve_config(Kind::Fig2Sweep, Json::object()).at("p_grid").size(), 11u);
  EXPECT_EQ(resolve_config(Kind::CfgAdapt, Json::object()).at("adapt.g_train"), Json::array({1.0, 3.0}));
  EXPECT_EQ(resolve_config(Kind::Theorem1, {{"gd", {{"eta", 0.02}}}}).at("gd.eta"), 0.02);
}

TEST(Config, OverridesWin) {
  const Json c = resolve_config(Kind::Theorem1, {{"seed", 5}}, {{"seed", 9}});
  EXPECT_EQ(c.at("seed").get<std::uint64_t>(), 9u);
}

TEST(Config, ViolationsListed) {
  const auto v = violations_of(Kind::Theorem1, {{"problem", {{"n", 80}, {"d", 10}}},
                                                 {"gd", {{"eta", -1.0}}},
                                                 {"bogus", 1},
                                                 {"trials", "many"}});
  EXPECT_GE(v.size(), 4u);
  EXPECT_TRUE(mentions(v, "gd.eta"));
  EXPECT_TRUE(mentions(v, "bogus"));
  EXPECT_TRUE(mentions(v, "trials"));
  EXPECT_TRUE(mentions(v, "problem.n"));
  EXPECT_TRUE(mentions(violations_of(Kind::ToyDistill, {{"distill", {{"g_min", 3.0}, {"g_max", 2.0}}}}), "g_min"));
  EXPECT_TRUE(mentions(violations_of(Kind::Theorem1, {{"experiment", "toy-train"}}), "experiment"));
  EXPECT_TRUE(mentions(violations_of(Kind::Theorem1, {{"p_grid", {0.5, 1.5}}}), "p_grid"));
  EXPECT_TRUE(mentions(violations_of(Kind::AdapterOp, Json::object()), "input"));
  EXPECT_TRUE(mentions(violations_of(Kind::Theorem1, {{"seed", -3}}), "seed"));
}

TEST(Config, LoadConfig) {
  const auto dir = scratch("load");
  std::ofstream(dir / "ok.json") << R"({"gd": {"eta": 0.05}})";
  std::ofstream(dir / "bad.json") << "{oops";
  std::ofstream(dir / "arr.json") << "[1,2]";
  EXPECT_EQ(load_config(dir / "ok.json"), Json({{"gd.eta", 0.05}}));
  EXPECT_THROW((void)load_config(dir / "bad.json"), ConfigError);
  EXPECT_THROW((void)load_config(dir / "arr.json"), ConfigError);
  EXPECT_THROW((void)load_config(dir / "absent.json"), IoError);
}

TEST(Config, ThreadsEnvironment) {
  ::setenv("URAE_THREADS", "3", 1);
  EXPECT_EQ(worker_threads(), 3u);
  ::setenv("URAE_THREADS", "0", 1);
  EXPECT_THROW((void)worker_threads(), ValidationError);
  ::setenv("URAE_THREADS", "two", 1);
  EXPECT_THROW((void)worker_threads(), ValidationError);
  ::unsetenv("URAE_THREADS");
  EXPECT_GE(worker_threads(), 1u);
}

TEST(Errors, ExitCodes) {
  EXPECT_EQ(exit_code(ErrorKind::Validation), 2);
  EXPECT_EQ(exit_code(ErrorKind::Shape), 2);
  EXPECT_EQ(exit_code(ErrorKind::Domain), 2);
  EXPECT_EQ(exit_code(ErrorKind::Numerical), 3);
  EXPECT_EQ(exit_code(ErrorKind::Divergence), 3);
  EXPECT_EQ(exit_code(ErrorKind::Io), 4);
  EXPECT_EQ(exit_code(ErrorKind::Format), 4);
  EXPECT_EQ(exit_code(ErrorKind::Corruption), 4);
  const Json r = failure_report(DivergenceError("blew up", 17));
  EXPECT_EQ(r.at("error").at("kind"), "divergence");
  EXPECT_EQ(r.at("error").at("exit_code"), 3);
  EXPECT_EQ(r.at("error").at("step"), 17);
  const Json c = failure_report(ConfigError({"a: bad", "b: bad"}));
  EXPECT_EQ(c.at("error").at("violations").size(), 2u);
  EXPECT_EQ(c.at("error").at("exit_code"), 2);
}

TEST(ModelArchive, RoundTrip) {
  flow::FlowModelConfig cfg;
  cfg.guided = true;
  cfg.width = 16;
  const auto m = flow::ToyFlowModel::init(cfg, 3);
  const auto ar = model_to_archive(m);
  EXPECT_EQ(model_from_archive(ar), m);
  EXPECT_EQ(model_from_archive(io::decode_archive(io::encode_archive(ar))), m);
  auto broken = ar;
  broken.metadata.erase("guided");
  EXPECT_THROW((void)model_from_archive(broken), ValidationError);
}

TEST(Run, SmallTheoremWritesSchema) {
  const auto dir = scratch("theorem");
  const Json cfg = resolve_config(Kind::Theorem1, {{"problem", {{"n", 4}, {"d", 6}}},
                                                   {"gd", {{"steps", 50}}},
                                                   {"trials", 20},
                                                   {"output_dir", dir.string()}});
  const auto a = run_experiment(Kind::Theorem1, cfg, 2);
  const auto csv = slurp(dir / "theorem1.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "p,emp_mean,emp_stderr,decay,noise,refgap,bound_total");
  EXPECT_EQ(parse_csv(csv, {{"p", ColumnType::Real},
                            {"emp_mean", ColumnType::Real},
                            {"emp_stderr", ColumnType::Real},
                            {"decay", ColumnType::Real},
                            {"noise", ColumnType::Real},
                            {"refgap", ColumnType::Real},
                            {"bound_total", ColumnType::Real}})
                .size(),
            5u);
  const Json report = Json::parse(slurp(dir / "report.json"));
  EXPECT_EQ(report.at("config"), cfg);
  EXPECT_TRUE(report.contains("environment"));
  EXPECT_TRUE(report.contains("summary"));
  const auto first = slurp(dir / "report.json");
  // Thread count does not leak into results.
  (void)run_experiment(Kind::Theorem1, cfg, 1);
  EXPECT_EQ(slurp(dir / "theorem1.csv"), csv);
  EXPECT_EQ(slurp(dir / "report.json"), first);
  EXPECT_EQ(a.report, report);
}

TEST(Run, AdapterSplitMergeInspect) {
  const auto dir = scratch("adapter");
  io::TensorArchive in;
  in.entries.push_back({"w", urae::testing::random_matrix(6, 4, 8)});
  in.entries.push_back({"other", urae::testing::random_matrix(2, 2, 9)});
  io::write_archive(in, dir / "in.urae");

  const auto split_dir = dir / "split";
  (void)run_experiment(Kind::AdapterOp,
                       resolve_config(Kind::AdapterOp, {{"input", (dir / "in.urae").string()},
                                                        {"entry", "w"},
                                                        {"rank", 2},
                                                        {"output_dir", split_dir.string()}},
                                      {{"op", "split"}}),
                       1);
  const auto residual = io::read_archive(split_dir / "residual.urae");
  const auto adapter = io::read_archive(split_dir / "adapter.urae");
  EXPECT_EQ(residual.get("other"), in.get("other"));
  EXPECT_EQ(adapter.metadata.at("rank"), "2");
  EXPECT_EQ(adapter.metadata.at("mode"), "minor-svd");

  const auto merge_dir = dir / "merge";
  (void)run_experiment(Kind::AdapterOp,
                       resolve_config(Kind::AdapterOp, {{"base", (split_dir / "residual.urae").string()},
                                                        {"adapter", (split_dir / "adapter.urae").string()},
                                                        {"output_dir", merge_dir.string()}},
                                      {{"op", "merge"}}),
                       1);
  const auto merged = io::read_archive(merge_dir / "merged.urae");
  EXPECT_LT(urae::testing::rel_frob_diff(merged.get("w"), in.get("w")), 1e-12);
  EXPECT_EQ(merged.get("other"), in.get("other"));

  const auto inspect_dir = dir / "inspect";
  const auto r = run_experiment(
      Kind::ArchiveInspect,
      resolve_config(Kind::ArchiveInspect, {{"input", (dir / "in.urae").string()}, {"output_dir", inspect_dir.string()}}),
      1);
  const auto rows = parse_csv(slurp(inspect_dir / "inspect.csv"), {{"name", ColumnType::Text},
                                                                    {"rows", ColumnType::Integer},
                                                                    {"cols", ColumnType::Integer},
                                                                    {"frob_norm", ColumnType::Real}});
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(std::get<std::string>(rows[0][0]), "w");
  EXPECT_EQ(std::get<std::uint64_t>(rows[0][1]), 6u);
  EXPECT_NEAR(std::get<double>(rows[0][3]), urae::testing::naive_frob(in.get("w")), 1e-12);
}

TEST(Run, MissingInputIsIo) {
  const auto dir = scratch("missing");
  const Json cfg = resolve_config(Kind::ArchiveInspect, {{"input", (dir / "nothing.urae").string()},
                                                         {"output_dir", dir.string()}});
  EXPECT_THROW((void)run_experiment(Kind::ArchiveInspect, cfg, 1), IoError);
}

TEST(Run, DistillationDefaults) {
  const auto dir = scratch("distill");
  const auto r = run_experiment(Kind::ToyDistill,
                                resolve_config(Kind::ToyDistill, {{"output_dir", dir.string()}}), 2);
  const auto& s = r.report.at("summary");
  EXPECT_GE(s.at("gap_improvement").get<double>(), 10.0);

  const auto rows = parse_csv(slurp(dir / "distill_loss.csv"),
                              {{"step", ColumnType::Integer}, {"loss", ColumnType::Real}});
  ASSERT_EQ(rows.size(), 3000u);
  std::vector<double> windows;
  for (std::size_t w = 0; w < rows.size() / 100; ++w) {
    double sum = 0.0;
    for (std::size_t i = 0; i < 100; ++i) sum += std::get<double>(rows[100 * w + i][1]);
    windows.push_back(sum / 100);
  }
  // Least-squares slope of the window means, plus a majority of window-to-window drops.
  const double n = static_cast<double>(windows.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t drops = 0;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const double x = static_cast<double>(i);
    sx += x;
    sy += windows[i];
    sxx += x * x;
    sxy += x * windows[i];
    if (i > 0 && windows[i] < windows[i - 1]) ++drops;
  }
  EXPECT_LT((n * sxy - sx * sy) / (n * sxx - sx * sx), 0.0);
  EXPECT_GE(2 * drops, windows.size() - 1);
}
