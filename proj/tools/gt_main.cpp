// gt: command-line front end for the group testing engine.
//
//   gt select  --config cfg.json [--history hist.json] [--workers K]
//   gt analyze --config cfg.json --out dir [--workers K]
//   gt bench   --config cfg.json --algos bha,opbha --trials T --out out.csv
//
// Exit codes: 0 success, 1 usage or config error, 2 scale-guard refusal.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "gtlattice.h"

namespace {

int exit_code_of(gt_status status) {
  if (status == GT_OK) return 0;
  return status == GT_ERROR_SCALE_GUARD ? 2 : 1;
}

bool read_file(const std::string& path, std::string& out) {
  std::ifstream in(path);
  if (!in) return false;
  std::ostringstream text;
  text << in.rdbuf();
  out = text.str();
  return true;
}

bool write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) return false;
  out << text;
  return out.good();
}

int fail(gt_status status) {
  std::cerr << "gt: " << gt_status_name(status) << ": " << gt_last_error()
            << "\n";
  return exit_code_of(status);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian group testing engine"};
  app.require_subcommand(1);

  std::string config_path;
  std::string history_path;
  std::string out_path;
  std::string algos = "bha,opbha,opbha_par";
  int workers = -1;  // keep the config's worker_count
  int trials = 5;

  CLI::App* select = app.add_subcommand("select", "pick the next pool to test");
  select->add_option("--config", config_path, "config JSON file")->required();
  select->add_option("--history", history_path, "history JSON file");
  select->add_option("--workers", workers, "override worker count");

  CLI::App* analyze =
      app.add_subcommand("analyze", "evaluate the configured pooling strategy");
  analyze->add_option("--config", config_path, "config JSON file")->required();
  analyze->add_option("--out", out_path, "output directory")->required();
  analyze->add_option("--workers", workers, "override worker count");

  CLI::App* bench =
      app.add_subcommand("bench", "time the selection algorithms");
  bench->add_option("--config", config_path, "config JSON file")->required();
  bench->add_option("--algos", algos, "comma-separated algorithms");
  bench->add_option("--trials", trials, "timing repetitions");
  bench->add_option("--out", out_path, "output CSV file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;  // usage problems exit 1; --help stays 0
  }

  std::string config_text;
  if (!read_file(config_path, config_text)) {
    std::cerr << "gt: cannot read config file '" << config_path << "'\n";
    return 1;
  }

  if (select->parsed()) {
    std::string history_text;
    const char* history = nullptr;
    if (!history_path.empty()) {
      if (!read_file(history_path, history_text)) {
        std::cerr << "gt: cannot read history file '" << history_path << "'\n";
        return 1;
      }
      history = history_text.c_str();
    }
    char* result = nullptr;
    const gt_status status =
        gt_run_select(config_text.c_str(), history, workers, &result);
    if (status != GT_OK) return fail(status);
    std::cout << result << "\n";
    gt_string_free(result);
    return 0;
  }

  if (analyze->parsed()) {
    char* report = nullptr;
    char* csv = nullptr;
    const gt_status status =
        gt_run_analyze(config_text.c_str(), workers, &report, &csv);
    if (status != GT_OK) return fail(status);
    std::error_code ec;
    std::filesystem::create_directories(out_path, ec);
    const std::string report_path = out_path + "/report.json";
    const std::string csv_path = out_path + "/per_subject.csv";
    const bool ok = write_file(report_path, std::string(report) + "\n") &&
                    write_file(csv_path, csv);
    gt_string_free(report);
    gt_string_free(csv);
    if (!ok) {
      std::cerr << "gt: cannot write outputs under '" << out_path << "'\n";
      return 1;
    }
    std::cout << "wrote " << report_path << " and " << csv_path << "\n";
    return 0;
  }

  char* table = nullptr;
  const gt_status status =
      gt_run_bench(config_text.c_str(), algos.c_str(), trials, &table);
  if (status != GT_OK) return fail(status);
  const bool ok = write_file(out_path, table);
  gt_string_free(table);
  if (!ok) {
    std::cerr << "gt: cannot write '" << out_path << "'\n";
    return 1;
  }
  std::cout << "wrote " << out_path << "\n";
  return 0;
}
