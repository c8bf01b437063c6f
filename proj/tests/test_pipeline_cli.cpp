#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include "caseflow/pipeline.hpp"
#include "caseflow/synthgen.hpp"

namespace fs = std::filesystem;
using namespace caseflow;
using nlohmann::json;

namespace {

struct Run {
  int code = -1;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void dump(const fs::path& p, const json& j) { std::ofstream(p) << j.dump(2); }

// Scratch directory per process, removed at exit.
struct Scratch {
  fs::path path = fs::temp_directory_path() / ("caseflow_cli_test_" + std::to_string(::getpid()));
  Scratch() {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~Scratch() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

const fs::path& work() {
  static const Scratch s;
  return s.path;
}

Run cli(const std::string& args) {
  static std::atomic<int> counter{0};
  const auto id = std::to_string(counter++);
  const auto o = work() / ("stdout" + id), e = work() / ("stderr" + id);
  const std::string cmd = std::string(CASEFLOW_CLI_PATH) + " " + args + " >" + o.string() + " 2>" + e.string();
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(o);
  r.err = slurp(e);
  return r;
}

// Independent digest via coreutils.
std::string sha256sum(const fs::path& p) {
  const auto tmp = work() / "digest";
  std::system(("sha256sum " + p.string() + " >" + tmp.string()).c_str());
  return slurp(tmp).substr(0, 64);
}

json bench_gen(std::size_t n) {
  auto j = json::parse(slurp(fs::path(CASEFLOW_SOURCE_DIR) / "configs/bench_gen.json"));
  j["n"] = n;
  return j;
}

json small_run(const fs::path& data_dir) {
  auto j = json::parse(slurp(fs::path(CASEFLOW_SOURCE_DIR) / "configs/bench_run.json"));
  j["data"] = (data_dir / "households.csv").string();
  j["ground_truth"] = (data_dir / "ground_truth.csv").string();
  j["replicates"] = 3;
  j["boosting"]["estimators"] = {10, 20};
  j["boosting"]["depths"] = {2};
  j["discretion"]["n_resamples"] = 100;
  return j;
}

// Data generated once for the tests that need it.
const fs::path& bench_data() {
  static const fs::path dir = [] {
    dump(work() / "gen.json", bench_gen(1500));
    const auto r = cli("gen --config " + (work() / "gen.json").string() + " --out " + (work() / "data").string());
    EXPECT_EQ(r.code, 0) << r.err;
    return work() / "data";
  }();
  return dir;
}

void expect_manifest_complete(const fs::path& out) {
  const auto m = json::parse(slurp(out / "manifest.json"));
  std::set<std::string> listed;
  for (const auto& f : m.at("files")) {
    const auto rel = f.at("path").get<std::string>();
    listed.insert(rel);
    EXPECT_EQ(f.at("sha256").get<std::string>(), sha256sum(out / rel)) << rel;
    EXPECT_EQ(f.at("bytes").get<std::size_t>(), fs::file_size(out / rel)) << rel;
  }
  for (const auto& e : fs::recursive_directory_iterator(out)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), out).generic_string();
    if (rel != "manifest.json") EXPECT_TRUE(listed.count(rel)) << rel << " not in manifest";
  }
}

std::size_t count(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + 1)) ++n;
  return n;
}

}  // namespace

TEST(Cli, GenWritesDataAndManifest) {
  const auto& d = bench_data();
  EXPECT_TRUE(fs::exists(d / "households.csv"));
  EXPECT_TRUE(fs::exists(d / "ground_truth.csv"));
  expect_manifest_complete(d);
  const auto m = json::parse(slurp(d / "manifest.json"));
  EXPECT_EQ(m["command"], "gen");
  EXPECT_EQ(m["seed"], bench_gen(1).at("seed"));
  EXPECT_EQ(m["files"].size(), 3u);

  const auto again = work() / "gen_again";
  ASSERT_EQ(cli("gen --config " + (work() / "gen.json").string() + " --out " + again.string()).code, 0);
  EXPECT_EQ(slurp(again / "manifest.json"), slurp(d / "manifest.json"));

  const auto reseeded = work() / "gen_seed";
  ASSERT_EQ(cli("gen --config " + (work() / "gen.json").string() + " --seed 7 --out " + reseeded.string()).code, 0);
  EXPECT_EQ(json::parse(slurp(reseeded / "manifest.json"))["seed"], 7);
  EXPECT_NE(slurp(reseeded / "households.csv"), slurp(d / "households.csv"));
}

TEST(Cli, ConfigErrorsExitTwo) {
  const auto r = cli("gen --config /no/such/gen.json --out " + (work() / "x").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("/no/such/gen.json"), std::string::npos);

  std::ofstream(work() / "broken.json") << "{ not json";
  EXPECT_EQ(cli("train --config " + (work() / "broken.json").string()).code, 2);

  auto g = bench_gen(100);
  g["discretion"]["rate"] = 2.0;
  dump(work() / "bad_rate.json", g);
  EXPECT_EQ(cli("gen --config " + (work() / "bad_rate.json").string() + " --out " + (work() / "x").string()).code, 2);

  auto run = small_run(bench_data());
  run["train_ratio"] = 1.5;
  dump(work() / "bad_ratio.json", run);
  EXPECT_EQ(cli("train --config " + (work() / "bad_ratio.json").string()).code, 2);

  EXPECT_EQ(cli("").code, 2);
  EXPECT_EQ(cli("train").code, 2);
  EXPECT_EQ(cli("gen --config " + (work() / "gen.json").string() + " --threads 0").code, 2);
  EXPECT_EQ(cli("discretion --config x.json --full-data --test-split").code, 2);
}

TEST(Cli, DataErrorsExitThree) {
  const auto csv = slurp(bench_data() / "households.csv");
  auto bad = csv;
  const auto pos = bad.find("Emergency shelter", bad.find('\n'));
  ASSERT_NE(pos, std::string::npos);
  bad.replace(pos, std::string("Emergency shelter").size(), "Mars");
  std::ofstream(work() / "bad.csv") << bad;
  auto run = small_run(bench_data());
  run["data"] = (work() / "bad.csv").string();
  dump(work() / "bad_data.json", run);
  const auto r = cli("train --config " + (work() / "bad_data.json").string() + " --out " + (work() / "y").string());
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("Mars"), std::string::npos);

  std::ofstream(work() / "header_only.csv") << csv.substr(0, csv.find('\n') + 1);
  run["data"] = (work() / "header_only.csv").string();
  dump(work() / "empty_data.json", run);
  EXPECT_EQ(cli("consistency --config " + (work() / "empty_data.json").string()).code, 3);
}

TEST(Cli, TrainOutputs) {
  dump(work() / "run.json", small_run(bench_data()));
  const auto out = work() / "train";
  const auto r = cli("train --config " + (work() / "run.json").string() + " --out " + out.string() + " --threads 3");
  ASSERT_EQ(r.code, 0) << r.err;
  expect_manifest_complete(out);

  // Four interventions times three model families.
  std::istringstream table(slurp(out / "auc_table.csv"));
  std::string line;
  std::getline(table, line);
  std::size_t rows = 0;
  while (std::getline(table, line)) rows += !line.empty();
  EXPECT_EQ(rows, 12u);

  std::size_t shorts = 0;
  for (const auto& e : fs::directory_iterator(out / "models")) {
    const auto name = e.path().filename().string();
    if (name.rfind("short_", 0) != 0) continue;
    ++shorts;
    EXPECT_LE(tree_from_json(json::parse(slurp(e.path()))).depth(), 4) << name;
  }
  EXPECT_EQ(shorts, 12u);

  for (const char* fam : {"short", "cart", "boosted"}) {
    const auto svg = slurp(out / (std::string("roc_") + fam + ".svg"));
    EXPECT_EQ(svg.rfind("<?xml", 0), 0u);
    EXPECT_EQ(count(svg, "<svg "), 1u) << fam;
    EXPECT_EQ(count(svg, "<polyline class=\"roc\""), 4u) << fam;
    EXPECT_NE(svg.find("</svg>"), std::string::npos);
  }
  const auto rc = json::parse(slurp(out / "run_config.json"));
  EXPECT_FALSE(rc.contains("threads"));
  EXPECT_EQ(rc["replicates"], 3);
}

TEST(Cli, ConsistencyMatrices) {
  auto run = small_run(bench_data());
  dump(work() / "run3.json", run);
  const auto out = work() / "cons3";
  const auto r = cli("consistency --config " + (work() / "run3.json").string() + " --out " + out.string());
  ASSERT_EQ(r.code, 0) << r.err;
  expect_manifest_complete(out);
  for (const char* t : {"Prev", "ES", "RRH", "TH"}) {
    std::istringstream in(slurp(out / (std::string("spearman_") + t + ".csv")));
    std::string line;
    std::getline(in, line);
    std::vector<std::vector<double>> m;
    while (std::getline(in, line)) {
      std::istringstream cells(line);
      std::string cell;
      std::getline(cells, cell, ',');
      m.emplace_back();
      while (std::getline(cells, cell, ',')) m.back().push_back(std::stod(cell));
    }
    ASSERT_EQ(m.size(), 3u) << t;
    for (std::size_t i = 0; i < 3; ++i) {
      ASSERT_EQ(m[i].size(), 3u);
      EXPECT_DOUBLE_EQ(m[i][i], 1.0);
      for (std::size_t k = 0; k < 3; ++k) EXPECT_DOUBLE_EQ(m[i][k], m[k][i]);
    }
  }

  run["replicates"] = 1;
  dump(work() / "run1.json", run);
  const auto one = cli("consistency --config " + (work() / "run1.json").string() + " --out " + (work() / "cons1").string());
  ASSERT_EQ(one.code, 0) << one.err;
  EXPECT_NE(one.err.find("warning"), std::string::npos);
  EXPECT_EQ(slurp(work() / "cons1" / "spearman_ES.csv"), ",r1\nr1,1\n");
}

TEST(Cli, DiscretionReportAndSvg) {
  dump(work() / "run.json", small_run(bench_data()));
  const auto out = work() / "disc";
  const auto r = cli("discretion --config " + (work() / "run.json").string() + " --out " + out.string());
  ASSERT_EQ(r.code, 0) << r.err;
  expect_manifest_complete(out);
  const auto rep = json::parse(slurp(out / "discretion.json"));
  EXPECT_EQ(rep["population"], "full");
  EXPECT_EQ(rep["crosstab"]["total"], 1500);
  EXPECT_EQ(rep["tests"].size(), 4u);
  for (const auto& t : rep["tests"]) {
    ASSERT_TRUE(t.contains("result"));
    const auto svg = slurp(out / ("null_" + t["subgroup"].get<std::string>() + "_" + t["measure"].get<std::string>() + ".svg"));
    EXPECT_EQ(svg.rfind("<?xml", 0), 0u);
    EXPECT_EQ(count(svg, "<svg "), 1u);
    EXPECT_GT(count(svg, "class=\"null-bar\""), 0u);
    EXPECT_EQ(count(svg, "id=\"observed-mean\""), 1u);
    EXPECT_EQ(count(svg, "<svg"), count(svg, "</svg>"));
  }
  EXPECT_NE(slurp(out / "discretion.txt").find("EStoTH"), std::string::npos);

  const auto split = work() / "disc_test";
  ASSERT_EQ(cli("discretion --config " + (work() / "run.json").string() + " --test-split --out " + split.string()).code, 0);
  const auto st = json::parse(slurp(split / "discretion.json"));
  EXPECT_EQ(st["population"], "test");
  EXPECT_EQ(st["crosstab"]["total"], 450);
}

// Labels are a function of two always-present features and no flips are
// planted, so the trees match every assignment and the subgroups are empty.
TEST(Cli, ZeroRateDiscretionHasNoDiscretionaryRecords) {
  auto g = bench_gen(1500);
  g["calibrate"] = false;
  g["discretion"] = {{"rate", 0.0}};
  g["marginals"]["Gender"] = {{"kind", "bernoulli"}, {"p", 0.5}};
  g["marginals"]["VeteranStatus"] = {{"kind", "categorical"}, {"weights", {{"Yes", 0.4}, {"No", 0.6}}}};
  const json male = {{"feature", "Gender"}, {"op", "eq"}, {"value", "Male"}};
  const json vet = {{"feature", "VeteranStatus"}, {"op", "eq"}, {"value", "Yes"}};
  g["planted_rules"] = {{{"id", "th"}, {"intervention", "TH"}, {"predicate", {{"all", {male, vet}}}}},
                        {{"id", "prev"}, {"intervention", "Prev"}, {"predicate", male}},
                        {{"id", "rrh"}, {"intervention", "RRH"}, {"predicate", vet}},
                        {{"id", "es"}, {"intervention", "ES"}, {"predicate", {{"not", male}}}}};
  dump(work() / "gen0.json", g);
  ASSERT_EQ(cli("gen --config " + (work() / "gen0.json").string() + " --out " + (work() / "data0").string()).code, 0);
  auto run = small_run(work() / "data0");
  run["ground_truth"] = "";
  dump(work() / "run0.json", run);
  const auto r = cli("discretion --config " + (work() / "run0.json").string() + " --out " + (work() / "disc0").string());
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rep = json::parse(slurp(work() / "disc0" / "discretion.json"));
  EXPECT_TRUE(rep["es_to_th"].empty());
  EXPECT_TRUE(rep["th_to_es"].empty());
  EXPECT_EQ(rep["crosstab"]["mismatched"], 0);
  for (const auto& t : rep["tests"]) EXPECT_EQ(t["note"], "no discretionary records");
  EXPECT_NE(slurp(work() / "disc0" / "discretion.txt").find("no discretionary records"), std::string::npos);
  for (const auto& e : fs::directory_iterator(work() / "disc0")) EXPECT_NE(e.path().extension(), ".svg");
}

TEST(RunConfig, ParsingAndErrors) {
  auto base = small_run("/tmp");
  const auto c = run_config_from_json(base);
  EXPECT_EQ(c.replicates, 3u);
  EXPECT_EQ(c.grid.estimator_values, (std::vector<int>{10, 20}));
  EXPECT_EQ(c.cart[index_of(Intervention::ES)].max_depth, 9);
  EXPECT_EQ(c.short_tree.max_depth, 4);
  EXPECT_TRUE(c.discretion_full_data);

  auto kind = [](const json& j) {
    try {
      run_config_from_json(j);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::InvalidArgument;
  };
  auto j = base;
  j.erase("data");
  EXPECT_EQ(kind(j), ErrorKind::InvalidConfig);
  j = base;
  j["replicates"] = 0;
  EXPECT_EQ(kind(j), ErrorKind::InvalidConfig);
  j = base;
  j["cart"]["XX"] = json::object();
  EXPECT_EQ(kind(j), ErrorKind::InvalidConfig);
  j = base;
  j["discretion"]["population"] = "half";
  EXPECT_EQ(kind(j), ErrorKind::InvalidConfig);
  j = base;
  j["boosting"]["selection_metric"] = "f1";
  EXPECT_EQ(kind(j), ErrorKind::InvalidConfig);
  j = base;
  j["replicates"] = "three";
  EXPECT_EQ(kind(j), ErrorKind::InvalidConfig);
  EXPECT_EQ(kind(json::array()), ErrorKind::InvalidConfig);
}

TEST(ParallelFor, CoversEveryIndexAndRethrowsLowest) {
  for (std::size_t threads : {1, 2, 8}) {
    std::vector<int> hit(100, 0);
    parallel_for(100, threads, [&](std::size_t i) { hit[i] += 1; });
    EXPECT_EQ(std::count(hit.begin(), hit.end(), 1), 100);
    try {
      parallel_for(50, threads, [](std::size_t i) {
        if (i == 7 || i == 30) throw std::runtime_error(std::to_string(i));
      });
      FAIL();
    } catch (const std::runtime_error& e) {
      EXPECT_STREQ(e.what(), "7");
    }
  }
  parallel_for(0, 4, [](std::size_t) { FAIL(); });
}
