#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "cli.hpp"
#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() / ("fiberdiff_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str(const std::string& sub) const { return (path / sub).string(); }
};

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = fiberdiff::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json load(const fs::path& p) { return json::parse(slurp(p)); }

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> row;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) row.push_back(cell);
    rows.push_back(row);
  }
  return rows;
}

// RAII override of FIBERDIFF_OUT.
struct EnvOut {
  explicit EnvOut(const std::string& v) { ::setenv("FIBERDIFF_OUT", v.c_str(), 1); }
  ~EnvOut() { ::unsetenv("FIBERDIFF_OUT"); }
};

}  // namespace

TEST_CASE("tensor: sphere columns are 48/49") {
  TempDir d;
  const auto r = run({"tensor", "--family", "sphere", "--r", "1", "--w", "0.5", "--out", d.str("o")});
  REQUIRE(r.code == 0);
  const auto rows = read_csv(d.path / "o" / "field.csv");
  REQUIRE(rows.size() == 64 * 64 + 1);
  CHECK(rows[0] == std::vector<std::string>{"theta", "phi", "sigma", "D1", "D2"});
  const std::regex sci(R"(-?\d\.\d{16}e[+-]\d{2,3})");
  for (std::size_t k = 1; k < rows.size(); ++k) {
    REQUIRE(std::regex_match(rows[k][3], sci));
    REQUIRE(std::abs(std::stod(rows[k][3]) - 48.0 / 49.0) < 1e-15);
    REQUIRE(rows[k][3] == rows[k][4]);
  }
  const auto s = load(d.path / "o" / "summary.json");
  CHECK(s["base_dim"] == 2);
  CHECK(s["parameters"]["family"] == "sphere");
}

TEST_CASE("tensor: flat channel") {
  TempDir d;
  REQUIRE(run({"tensor", "--family", "channel", "--kappa", "0", "--w", "0.3", "--out", d.str("o")}).code == 0);
  const auto rows = read_csv(d.path / "o" / "field.csv");
  CHECK(rows[0] == std::vector<std::string>{"u", "sigma", "D1"});
  for (std::size_t k = 1; k < rows.size(); ++k) {
    REQUIRE(std::stod(rows[k][1]) == 0.3);
    REQUIRE(std::stod(rows[k][2]) == 1.0);
  }
}

TEST_CASE("tensor: torus with quadrature check and gnuplot script") {
  TempDir d;
  const auto r = run({"tensor", "--family", "torus", "--r", "1", "--R", "2", "--w", "0.25", "--n-theta", "32",
                      "--n-phi", "8", "--check-quadrature", "--gnuplot", "--out", d.str("o")});
  REQUIRE(r.code == 0);
  const auto rows = read_csv(d.path / "o" / "field.csv");
  REQUIRE(rows[0].back() == "quad_max_rel_err");
  for (std::size_t k = 1; k < rows.size(); ++k) REQUIRE(std::stod(rows[k].back()) < 1e-9);
  CHECK(load(d.path / "o" / "summary.json")["quad_max_rel_err"].get<double>() < 1e-9);
  CHECK(slurp(d.path / "o" / "field.gp").find("field.csv") != std::string::npos);
}

TEST_CASE("tensor: outputs are byte-identical across runs") {
  TempDir d;
  for (const char* o : {"a", "b"})
    REQUIRE(run({"tensor", "--family", "torus", "--n-theta", "16", "--n-phi", "16", "--out", d.str(o)}).code == 0);
  CHECK(slurp(d.path / "a" / "field.csv") == slurp(d.path / "b" / "field.csv"));
  CHECK(slurp(d.path / "a" / "summary.json") == slurp(d.path / "b" / "summary.json"));
}

TEST_CASE("tensor: sampled curve input") {
  TempDir d;
  {
    std::ofstream csv(d.path / "circle.csv");
    csv.precision(17);
    csv << "x,y\n";
    for (int k = 0; k < 200; ++k) {
      const double t = 2.0 * 3.141592653589793 * k / 200;
      csv << 2.0 * std::cos(t) << ',' << 2.0 * std::sin(t) << '\n';
    }
  }
  REQUIRE(run({"tensor", "--family", "channel", "--curve-csv", d.str("circle.csv"), "--w", "0.2", "--out", d.str("o")})
              .code == 0);
  const auto rows = read_csv(d.path / "o" / "field.csv");
  // kappa = 1/2, a = 0.05
  for (std::size_t k = 1; k < rows.size(); ++k) REQUIRE(std::abs(std::stod(rows[k][2]) - 20.0 * std::atanh(0.05)) < 1e-6);
}

TEST_CASE("exit codes") {
  TempDir d;
  SUBCASE("invariant violation names the point and writes nothing") {
    const auto r = run({"tensor", "--family", "channel", "--kappa", "3", "--w", "1", "--out", d.str("o")});
    CHECK(r.code == 2);
    CHECK(r.err.find("u=") != std::string::npos);
    CHECK_FALSE(fs::exists(d.path / "o"));
  }
  SUBCASE("torus with R <= r") {
    CHECK(run({"tensor", "--family", "torus", "--r", "2", "--R", "1", "--out", d.str("o")}).code == 2);
  }
  SUBCASE("unknown family and bad flags") {
    CHECK(run({"tensor", "--family", "klein", "--out", d.str("o")}).code == 2);
    CHECK(run({"tensor", "--bogus"}).code == 2);
    CHECK(run({}).code == 2);
  }
  SUBCASE("missing input file is an I/O error") {
    CHECK(run({"tensor", "--curve-csv", d.str("none.csv"), "--out", d.str("o")}).code == 1);
    CHECK(run({"tensor", "--config", d.str("none.json")}).code == 1);
  }
  SUBCASE("unwritable output") {
    std::ofstream(d.path / "file") << "x";
    CHECK(run({"tensor", "--out", d.str("file/sub")}).code == 1);
  }
  SUBCASE("help") { CHECK(run({"--help"}).code == 0); }
  SUBCASE("mass tolerance failure") {
    CHECK(run({"solve", "--family", "circle", "--mass-tol", "1e-300", "--init", "random", "--out", d.str("o")}).code ==
          3);
  }
  SUBCASE("explicit step beyond the stability limit") {
    CHECK(run({"solve", "--scheme", "explicit", "--dt", "0.1", "--out", d.str("o")}).code == 2);
  }
}

TEST_CASE("config file under flags, FIBERDIFF_OUT") {
  TempDir d;
  std::ofstream(d.path / "cfg.json") << R"({"family": "sphere", "r": 2.0, "w": 0.5, "n_theta": 8, "n-phi": 8, "out": ")"
                                     << d.str("from_config") << "\"}";
  SUBCASE("config values apply") {
    REQUIRE(run({"tensor", "--config", d.str("cfg.json")}).code == 0);
    const auto s = load(d.path / "from_config" / "summary.json");
    CHECK(s["parameters"]["r"] == 2.0);
    CHECK(s["points"] == 64);
  }
  SUBCASE("flags win over the config") {
    REQUIRE(run({"tensor", "--config", d.str("cfg.json"), "--r", "3", "--out", d.str("flag")}).code == 0);
    CHECK(load(d.path / "flag" / "summary.json")["parameters"]["r"] == 3.0);
  }
  SUBCASE("environment overrides the config directory but not the flag") {
    EnvOut env(d.str("env"));
    REQUIRE(run({"tensor", "--config", d.str("cfg.json")}).code == 0);
    CHECK(fs::exists(d.path / "env" / "field.csv"));
    CHECK_FALSE(fs::exists(d.path / "from_config"));
    REQUIRE(run({"tensor", "--config", d.str("cfg.json"), "--out", d.str("flag")}).code == 0);
    CHECK(fs::exists(d.path / "flag" / "field.csv"));
  }
  SUBCASE("bad config contents") {
    std::ofstream(d.path / "bad.json") << R"({"radius": 1})";
    CHECK(run({"tensor", "--config", d.str("bad.json")}).code == 2);
    std::ofstream(d.path / "broken.json") << "{not json";
    CHECK(run({"tensor", "--config", d.str("broken.json")}).code == 1);
    std::ofstream(d.path / "typed.json") << R"({"w": "wide"})";
    CHECK(run({"tensor", "--config", d.str("typed.json")}).code == 2);
  }
}

TEST_CASE("solve: circle channel decay rate") {
  TempDir d;
  REQUIRE(run({"solve", "--family", "circle", "--R", "1", "--w", "0.1", "--n", "128", "--out", d.str("o")}).code == 0);
  const auto s = load(d.path / "o" / "summary.json");
  // Reduced prediction D_eff / R^2 with D_eff = 20 arctanh(0.05).
  CHECK(s["decay_rate"].get<double>() == doctest::Approx(20.0 * std::atanh(0.05)).epsilon(1e-3));
  CHECK(s["mass"]["max_rel_drift"].get<double>() < 1e-12);
  CHECK(fs::exists(d.path / "o" / "snapshot_0000.csv"));
  CHECK(fs::exists(d.path / "o" / "mass.csv"));
}

TEST_CASE("solve: rho = sigma is stationary") {
  TempDir d;
  REQUIRE(run({"solve", "--family", "channel", "--kappa", "1.5", "--w", "0.4", "--init", "sigma", "--snapshots", "5",
               "--gnuplot", "--out", d.str("o")})
              .code == 0);
  const auto first = read_csv(d.path / "o" / "snapshot_0000.csv");
  int count = 0;
  for (const auto& e : fs::directory_iterator(d.path / "o")) {
    if (e.path().filename().string().rfind("snapshot_", 0) != 0) continue;
    ++count;
    const auto rows = read_csv(e.path());
    REQUIRE(rows.size() == first.size());
    for (std::size_t k = 1; k < rows.size(); ++k)
      REQUIRE(std::abs(std::stod(rows[k][1]) - std::stod(first[k][1])) <= 1e-13 * std::abs(std::stod(first[k][1])));
  }
  CHECK(count == 6);
  CHECK(fs::exists(d.path / "o" / "solve.gp"));
}

TEST_CASE("solve: torus reaches stationarity at default settings") {
  TempDir d;
  REQUIRE(run({"solve", "--family", "torus", "--r", "1", "--R", "2", "--w", "0.25", "--out", d.str("o")}).code == 0);
  const auto s = load(d.path / "o" / "summary.json");
  REQUIRE(s["stationary"]["reached_at"].is_number());
  CHECK(s["stationary"]["reached_at"].get<double>() < s["solver"]["t_end"].get<double>());
  CHECK(s["flux_norm"]["final"].get<double>() < 1e-8);
  const auto rows = read_csv(d.path / "o" / "snapshot_0000.csv");
  CHECK(rows[0] == std::vector<std::string>{"theta", "phi", "rho"});
}

TEST_CASE("validate without the oracle experiment") {
  TempDir d;
  const auto r = run({"validate", "--skip-annulus", "--draws", "50", "--out", d.str("o")});
  CHECK(r.code == 0);
  const auto v = load(d.path / "o" / "validation.json");
  CHECK(v["passed"] == true);
  CHECK(v["informational"]["sign_typo"]["printed_is_negative"] == true);
  CHECK(v["informational"]["sign_typo"]["corrected_D1"].get<double>() > 0.0);
  CHECK(v["informational"]["ogawa_truncation"]["stated_bound_holds"] == false);
}
