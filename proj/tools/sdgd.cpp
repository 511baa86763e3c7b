#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sdgd/analysis.hpp"
#include "sdgd/config.hpp"
#include "sdgd/errors.hpp"
#include "sdgd/trainer.hpp"
#include "sdgd/verify.hpp"

namespace fs = std::filesystem;
using namespace sdgd;

namespace {

struct Common {
  std::string config;
  std::vector<std::string> overrides;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config, "JSON config file");
  cmd->add_option("-s,--set", c.overrides, "override, e.g. --set batch_points=50 --set adversarial.steps=2");
  cmd->add_option("-o,--out", c.out, "output directory (overrides config and $SDGD_OUTPUT_DIR)");
}

TrainConfig load(const Common& c) {
  TrainConfig cfg = parse_config(c.config, c.overrides);
  if (const char* env = std::getenv(kOutputDirEnv); env && *env) cfg.output_dir = env;
  if (!c.out.empty()) cfg.output_dir = c.out;
  return cfg;
}

std::vector<std::pair<std::size_t, std::size_t>> parse_grid(const std::string& text) {
  std::vector<std::pair<std::size_t, std::size_t>> grid;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    const auto colon = cell.find(':');
    if (colon == std::string::npos) throw ArgumentError("grid cell '" + cell + "' must look like I:B");
    grid.emplace_back(std::stoul(cell.substr(0, colon)), std::stoul(cell.substr(colon + 1)));
  }
  if (grid.empty()) throw ArgumentError("empty grid");
  return grid;
}

int cmd_train(const Common& common) {
  const TrainConfig cfg = load(common);
  validate(cfg);
  const fs::path dir = cfg.output_dir;
  write_file_atomic(dir / "config.json", config_to_json(cfg).dump(2) + "\n");
  const RunReport report = train(cfg, [](const EvalRecord& r) {
    std::printf("epoch %6zu  loss %.4e  rel_l2 %.4e  wall %.1fs\n", r.epoch, r.loss, r.rel_l2, r.wall_s);
    std::fflush(stdout);
  });
  emit_metrics(report, dir / cfg.metrics_file);
  save_checkpoint(report.params, report.adam, dir / cfg.checkpoint_file);
  if (report.diverged) {
    std::fprintf(stderr, "training diverged: %s\n", report.diagnostic.c_str());
    return 3;
  }
  std::printf("final rel_l2 %.6e\n", report.final_record().rel_l2);
  return 0;
}

int cmd_eval(const Common& common, const std::string& checkpoint) {
  const TrainConfig cfg = load(common);
  validate(cfg);
  const fs::path path = checkpoint.empty() ? fs::path(cfg.output_dir) / cfg.checkpoint_file : fs::path(checkpoint);
  const auto [params, state] = load_checkpoint(path);
  const PdeProblem problem = make_problem(cfg);
  if (params.input_dim() != problem.input_dim()) throw ConfigError("checkpoint does not match the configured problem");
  const double err = evaluate(params, problem, make_test_set(cfg, problem), cfg.workers);
  std::printf("rel_l2 %.6e\n", err);
  return 0;
}

int cmd_verify(const Common& common) {
  const auto results = run_verification();
  const std::string text = format_results(results);
  std::fputs(text.c_str(), stdout);
  if (!common.out.empty() || std::getenv(kOutputDirEnv)) {
    write_file_atomic(fs::path(load(common).output_dir) / "verify.txt", text);
  }
  for (const auto& r : results) {
    if (!r.passed) return 1;
  }
  return 0;
}

int cmd_sweep(const Common& common, const std::string& grid) {
  const TrainConfig cfg = load(common);
  const auto rows = batch_sweep(cfg, parse_grid(grid));
  const std::string table = sweep_table(rows);
  std::fputs(table.c_str(), stdout);
  write_file_atomic(fs::path(cfg.output_dir) / "sweep.csv", table);
  return 0;
}

int cmd_hjb_ref(const Common& common) {
  const TrainConfig cfg = load(common);
  validate(cfg);
  const PdeProblem problem = make_problem(cfg);
  if (!problem.is_hjb()) throw ConfigError("hjb-ref needs an HJB problem");
  const TestSet set = make_test_set(cfg, problem);
  std::string text;
  for (std::size_t i = 0; i < problem.d; ++i) text += "x" + std::to_string(i) + ",";
  text += "t,reference\n";
  char buf[64];
  for (std::size_t k = 0; k < set.points.size(); ++k) {
    for (Eigen::Index i = 0; i < set.points[k].x.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g,", set.points[k].x[i]);
      text += buf;
    }
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", set.points[k].t, set.truth[k]);
    text += buf;
  }
  const fs::path path = fs::path(cfg.output_dir) / "hjb_reference.csv";
  write_file_atomic(path, text);
  std::printf("wrote %zu reference values to %s\n", set.points.size(), path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic dimension gradient descent for high-dimensional PINNs"};
  app.require_subcommand(1);

  Common train_opts, eval_opts, verify_opts, sweep_opts, ref_opts;
  std::string checkpoint;
  std::string grid = "1:100,5:20,10:10,20:5,100:1";

  auto* train_cmd = app.add_subcommand("train", "train a model and write metrics and a checkpoint");
  add_common(train_cmd, train_opts);
  auto* eval_cmd = app.add_subcommand("eval", "report the relative L2 error of a checkpoint");
  add_common(eval_cmd, eval_opts);
  eval_cmd->add_option("--checkpoint", checkpoint, "checkpoint path (default: <out>/<checkpoint_file>)");
  auto* verify_cmd = app.add_subcommand("verify", "run the theory and engine checks; nonzero exit on failure");
  add_common(verify_cmd, verify_opts);
  auto* sweep_cmd = app.add_subcommand("sweep", "train one run per (|I|, |B|) cell");
  add_common(sweep_cmd, sweep_opts);
  sweep_cmd->add_option("--grid", grid, "cells as I:B,I:B,...")->capture_default_str();
  auto* ref_cmd = app.add_subcommand("hjb-ref", "write Monte Carlo reference values for the HJB test set");
  add_common(ref_cmd, ref_opts);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) return cmd_train(train_opts);
    if (*eval_cmd) return cmd_eval(eval_opts, checkpoint);
    if (*verify_cmd) return cmd_verify(verify_opts);
    if (*sweep_cmd) return cmd_sweep(sweep_opts, grid);
    if (*ref_cmd) return cmd_hjb_ref(ref_opts);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
