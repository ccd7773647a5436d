#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

struct Run {
  int status = -1;
  std::string out;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(SKELDP_CLI) + " " + args + " 2>&1";
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  Run r;
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof buf, p)) r.out.append(buf, n);
  const int st = pclose(p);
  r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

/// Non-comment lines of a CSV document.
std::vector<std::vector<std::string>> rows(const std::string& text) {
  std::vector<std::vector<std::string>> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    out.push_back(cells);
  }
  return out;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("skeldp_cli_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

const std::string kFixture = std::string(" --chi-fixture ") + SKELDP_FIXTURE;

}  // namespace

TEST_CASE("estimate-chi agrees with the fixture") {
  const Run r = run("estimate-chi --d 2 --n 200000 --seed 3" + kFixture);
  REQUIRE(r.status == 0);
  const auto t = rows(r.out);
  REQUIRE(t.size() == 2);
  CHECK(t[0][0] == "d");
  CHECK(t[0][6] == "z_score");
  CHECK(std::abs(std::stod(t[1][6])) <= 4.0);
}

TEST_CASE("hedge prints one table row per level") {
  const Run r = run("hedge --k 2 --n-mc 2000 --seed 1" + kFixture);
  REQUIRE(r.status == 0);
  const auto t = rows(r.out);
  REQUIRE(t.size() >= 2);
  CHECK(t[0] == std::vector<std::string>{"k", "result", "mse", "true_value", "difference", "pct_error"});
  CHECK(t[1][0] == "2");
  CHECK(std::stod(t[1][3]) == doctest::Approx(5.821608).epsilon(2e-6));
}

TEST_CASE("solve from a configuration file with a flag override") {
  const fs::path dir = scratch("solve");
  const std::string cfg = std::string(SKELDP_DATA) + "/sign_tree.json";
  const Run r = run("solve --config " + cfg + " --n-paths 3000 --out " + (dir / "solve.csv").string());
  REQUIRE(r.status == 0);
  std::ifstream in(dir / "solve.csv");
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  CHECK(text.find("# n_paths = 3000") != std::string::npos);
  const auto t = rows(text);
  REQUIRE(t.size() == 2);
  CHECK(t[0][4] == "v0");
  CHECK(t[1][9] == "3000");
  const double v0 = std::stod(t[1][4]), se = std::stod(t[1][5]);
  CHECK(std::abs(v0 + 0.17) < 3 * se);

  std::ifstream meta(dir / "solve.csv.meta.json");
  const nlohmann::json j = nlohmann::json::parse(meta);
  CHECK(j["command"] == "solve");
  CHECK(j["config"]["n_paths"] == 3000);
  CHECK(j["results"].contains("v0"));
}

TEST_CASE("dry run reports the problem size without solving") {
  const std::string cfg = std::string(SKELDP_DATA) + "/sign_tree.json";
  const Run r = run("solve --config " + cfg + " --dry-run");
  REQUIRE(r.status == 0);
  CHECK(r.out.find("e(k,T): 2") != std::string::npos);
  CHECK(r.out.find("grid size: 2") != std::string::npos);
  CHECK(r.out.find("estimated work") != std::string::npos);
}

TEST_CASE("invalid values exit with status 2 and name the field") {
  Run r = run("sample-skeleton --k -1" + kFixture);
  CHECK(r.status == 2);
  CHECK(r.out.find("field 'k'") != std::string::npos);
  r = run("hedge --denominator other" + kFixture);
  CHECK(r.status == 2);
  CHECK(r.out.find("denominator") != std::string::npos);
  r = run("rates --kind fbm --H 0.5");
  CHECK(r.status == 2);
  CHECK(r.out.find("field 'H'") != std::string::npos);
}
