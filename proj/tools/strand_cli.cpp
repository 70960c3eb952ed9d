// Scenario runner: parse a config, construct the fixture, run the flow, and
// emit CSV / plots / snapshots with stable exit codes (0 finished, 2 lost
// positivity, 3 NaN, 4 config error).
#include <cstdio>
#include <iostream>

#include "CLI11.hpp"
#include "strand/scenario.hpp"

using namespace strand;

int main(int argc, char** argv) {
  CLI::App app{"strand: geometric flows on string algebroids over flat tori"};
  app.require_subcommand(1);

  std::string config_path;
  auto* run = app.add_subcommand("run", "run a scenario from a config file");
  run->add_option("config", config_path, "JSON scenario config")->required();

  std::string verify_path;
  auto* ver = app.add_subcommand("verify", "check the initial data of a scenario (read-only)");
  ver->add_option("config", verify_path, "JSON scenario config")->required();

  auto* list = app.add_subcommand("list-fixtures", "list the named initial-data fixtures");

  std::string replay_csv, replay_dir;
  auto* rep = app.add_subcommand("replay", "re-emit SVG plots from a trajectory CSV");
  rep->add_option("csv", replay_csv, "trajectory CSV path")->required();
  rep->add_option("--out", replay_dir, "output directory (default: directory of the CSV)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 4;
  }

  try {
    if (run->parsed()) {
      ScenarioConfig cfg = load_config(config_path);
      std::string err;
      int code = run_scenario(cfg, &err);
      if (code == 0) {
        std::printf("scenario '%s' finished: t_end = %g, output in %s\n", cfg.scenario.c_str(),
                    cfg.flow.t_end, cfg.output_dir.c_str());
      } else {
        std::fprintf(stderr, "scenario '%s' stopped (%s), exit %d\n", cfg.scenario.c_str(),
                     err.c_str(), code);
      }
      return code;
    }
    if (ver->parsed()) {
      ScenarioConfig cfg = load_config(verify_path);
      VerifyReport rep2 = verify_fixture(cfg);
      std::printf("fixture:           %s\n", cfg.fixture.c_str());
      std::printf("bianchi residual:  %.6e\n", rep2.bianchi_residual);
      std::printf("min eigenvalue:    %.6e\n", rep2.min_eig);
      std::printf("pairing signature: (%d,%d)\n", rep2.signature.first, rep2.signature.second);
      std::printf("status:            %s%s%s\n", rep2.ok ? "ok" : "FAIL", rep2.ok ? "" : " - ",
                  rep2.detail.c_str());
      return rep2.ok ? 0 : 4;
    }
    if (list->parsed()) {
      for (const auto& name : fixture_names()) std::printf("%s\n", name.c_str());
      return 0;
    }
    if (rep->parsed()) {
      auto [header, rows] = read_csv(replay_csv);
      std::string dir = replay_dir;
      if (dir.empty()) {
        auto pos = replay_csv.find_last_of('/');
        dir = pos == std::string::npos ? "." : replay_csv.substr(0, pos);
      }
      std::filesystem::create_directories(dir);
      std::vector<double> ts;
      for (auto& row : rows) ts.push_back(row.empty() ? 0.0 : row[0]);
      int written = 0;
      for (std::size_t col = 1; col < header.size(); ++col) {
        std::vector<double> ys;
        for (auto& row : rows) ys.push_back(col < row.size() ? row[col] : std::nan(""));
        bool any = false;
        for (double y : ys) any |= std::isfinite(y);
        if (!any) continue;
        write_svg_line_plot(dir + "/" + header[col] + ".svg", header[col], ts, ys);
        ++written;
      }
      std::printf("wrote %d plots to %s\n", written, dir.c_str());
      return 0;
    }
  } catch (const config_error& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  }
  return 0;
}
