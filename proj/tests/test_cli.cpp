#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "strand/io.hpp"
#include "strand/scenario.hpp"

using namespace strand;
namespace fs = std::filesystem;

namespace {

struct CmdResult {
  int code;
  std::string out;
};

CmdResult run_cmd(const std::string& args) {
  std::string cmd = std::string(STRAND_CLI_PATH) + " " + args + " 2>&1";
  std::array<char, 4096> buf{};
  std::string out;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  while (fgets(buf.data(), int(buf.size()), pipe)) out += buf.data();
  int status = pclose(pipe);
  int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return {code, out};
}

std::string write_config(const std::string& dir, const std::string& fixture, const std::string& kind,
                         double dt, double t_end, int seed, const std::string& extra_grid = "",
                         double amplitude = 1e-2) {
  fs::create_directories(dir);
  std::string path = dir + "/config.json";
  std::ofstream os(path);
  os << R"({
  "version": 1,
  "scenario": "cli-test",
  "grid": {"n": 1, "sizes": [16, 16])" << extra_grid << R"(},
  "algebra": {"name": "u1", "params": [-1.0]},
  "initial_data": {"fixture": ")" << fixture << R"(", "amplitude": )" << amplitude
     << R"(, "seed": )" << seed << R"(},
  "flow": {"kind": ")" << kind << R"(", "dt": )" << dt << R"(, "t_end": )" << t_end
     << R"(, "cfl_safety": 0.9, "monitor_stride": 2},
  "output": {"directory": ")" << dir << R"(/out", "snapshot_stride": 0, "plots": true}
})";
  return path;
}

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("list-fixtures prints the shipped fixtures") {
  auto r = run_cmd("list-fixtures");
  CHECK(r.code == 0);
  CHECK(r.out.find("flat_convergence") != std::string::npos);
  CHECK(r.out.find("null_flow") != std::string::npos);
}

TEST_CASE("null flow: exit 0, constant CSV, deterministic rerun") {
  std::string dir = "cli_null";
  fs::remove_all(dir);
  auto cfg = write_config(dir, "null_flow", "grf", 1e-3, 5e-3, 7);
  auto r = run_cmd("run " + cfg);
  CHECK(r.code == 0);
  CHECK(fs::exists(dir + "/out/trajectory.csv"));
  CHECK(fs::exists(dir + "/out/columns.json"));
  auto [header, rows] = read_csv(dir + "/out/trajectory.csv");
  CHECK(header.size() >= 6);
  REQUIRE(rows.size() >= 2);
  for (auto& row : rows) {
    CHECK(row[1] == 0.0);  // bianchi residual
    CHECK(row[2] == doctest::Approx(1.0));
    CHECK(row[5] == 0.0);  // sup F
  }
  std::string first = slurp(dir + "/out/trajectory.csv");
  fs::remove_all(dir + "/out");
  auto r2 = run_cmd("run " + cfg);
  CHECK(r2.code == 0);
  CHECK(slurp(dir + "/out/trajectory.csv") == first);  // bit-identical
  // plots were emitted
  CHECK(fs::exists(dir + "/out/sup_F.svg"));
  fs::remove_all(dir);
}

TEST_CASE("manufactured indefinite metric exits with code 2") {
  std::string dir = "cli_indef";
  fs::remove_all(dir);
  auto cfg = write_config(dir, "indefinite_g", "grf", 1e-4, 1e-3, 3);
  auto r = run_cmd("run " + cfg);
  CHECK(r.code == 2);
  fs::remove_all(dir);
}

TEST_CASE("verify: shipped fixture passes, broken Bianchi fails, read-only") {
  std::string dir = "cli_verify";
  fs::remove_all(dir);
  auto cfg = write_config(dir, "grf_band", "grf", 1e-3, 1e-2, 5);
  auto r = run_cmd("verify " + cfg);
  CHECK(r.code == 0);
  CHECK(r.out.find("status:            ok") != std::string::npos);
  CHECK(!fs::exists(dir + "/out"));  // verify writes nothing

  // broken Bianchi (needs a T^4 grid)
  std::string dir4 = "cli_verify4";
  fs::remove_all(dir4);
  fs::create_directories(dir4);
  std::string path = dir4 + "/config.json";
  {
    std::ofstream os(path);
    os << R"({
  "version": 1,
  "scenario": "broken",
  "grid": {"n": 2, "sizes": [8, 8, 8, 8]},
  "algebra": {"name": "u1", "params": [-1.0]},
  "initial_data": {"fixture": "broken_bianchi", "amplitude": 0.0, "seed": 1},
  "flow": {"kind": "grf", "dt": 1e-4, "t_end": 1e-3, "cfl_safety": 0.9, "monitor_stride": 1},
  "output": {"directory": ")" << dir4 << R"(/out", "snapshot_stride": 0, "plots": false}
})";
  }
  auto r4 = run_cmd("verify " + path);
  CHECK(r4.code == 4);
  CHECK(r4.out.find("FAIL") != std::string::npos);
  fs::remove_all(dir);
  fs::remove_all(dir4);
}

TEST_CASE("unknown config keys are rejected") {
  std::string dir = "cli_badkey";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::string path = dir + "/config.json";
  {
    std::ofstream os(path);
    os << R"({
  "version": 1,
  "scenario": "bad",
  "grid": {"n": 1, "sizes": [16, 16]},
  "algebra": {"name": "u1", "params": [-1.0]},
  "initial_data": {"fixture": "null_flow", "amplitude": 0.0, "seed": 1},
  "flow": {"kind": "grf", "dt": 1e-4, "t_end": 1e-3, "cfl_safety": 0.9, "monitor_stride": 1,
           "tolernce": 1e-3},
  "output": {"directory": ")" << dir << R"(/out", "snapshot_stride": 0, "plots": false}
})";
  }
  auto r = run_cmd("run " + path);
  CHECK(r.code == 4);
  CHECK(r.out.find("unknown key") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("replay emits plots from an existing CSV") {
  std::string dir = "cli_replay";
  fs::remove_all(dir);
  auto cfg = write_config(dir, "grf_band", "grf", 1e-3, 5e-3, 11, "", 5e-3);
  auto r = run_cmd("run " + cfg);
  CHECK(r.code == 0);
  fs::remove(dir + "/out/sup_F.svg");
  auto r2 = run_cmd("replay " + dir + "/out/trajectory.csv");
  CHECK(r2.code == 0);
  CHECK(fs::exists(dir + "/out/sup_F.svg"));
  fs::remove_all(dir);
}

TEST_CASE("snapshot round trip") {
  PeriodicGrid g(1, {16, 16, 1, 1});
  Rng rng(3);
  RForm f = random_band_form(g, 2, 1, {2, 1}, 1.0, rng);
  fs::create_directories("cli_snap");
  snapshot::write_field("cli_snap/f.bin", f);
  RForm back = snapshot::read_real_field("cli_snap/f.bin", g);
  CHECK(back.degree == 2);
  CHECK((back - f).sup_norm() == 0.0);
  fs::remove_all("cli_snap");
}
