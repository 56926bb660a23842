// Copyright (c) 2026, The lcsc Authors
// SPDX-License-Identifier: Apache-2.0
//
// lcsc: merge, average and search over saved training checkpoints.
//
// Exit codes: 0 success, 2 configuration error, 3 evaluator error,
// 4 I/O error, 1 anything else. Failures print one line to stderr:
//   error: <config|evaluator|io|internal>: <message>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <lcsc/error.hpp>

#include "commands.hpp"

namespace {

int fail(std::string_view kind, std::string_view message, int code) {
  std::string line(message);
  for (auto& c : line)
    if (c == '\n' || c == '\r') c = ' ';
  fmt::print(stderr, "error: {}: {}\n", kind, line);
  return code;
}

int exit_code(lcsc::ErrorKind kind) {
  switch (kind) {
    case lcsc::ErrorKind::kConfig: return 2;
    case lcsc::ErrorKind::kEvaluator: return 3;
    case lcsc::ErrorKind::kIo: return 4;
  }
  return 1;
}

std::string_view kind_name(lcsc::ErrorKind kind) {
  switch (kind) {
    case lcsc::ErrorKind::kConfig: return "config";
    case lcsc::ErrorKind::kEvaluator: return "evaluator";
    case lcsc::ErrorKind::kIo: return "io";
  }
  return "internal";
}

}  // namespace

int main(int argc, char** argv) {
  using lcsc::cli::GlobalOptions;
  CLI::App app{"Linear combinations of saved checkpoints", "lcsc"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions global;
  std::uint64_t seed = 0;
  std::uint32_t parallelism = 1;
  app.add_option("--config", global.config, "JSON config for the subcommand");
  auto* seed_opt = app.add_option("--seed", seed, "Overrides the config seed");
  auto* par_opt = app.add_option("--parallelism", parallelism, "Concurrent evaluations")->check(CLI::PositiveNumber);

  // Flag values override the matching config keys.
  nlohmann::json flags = nlohmann::json::object();
  auto string_flag = [&flags](CLI::App* sub, const std::string& name, const std::string& key, const std::string& help) {
    sub->add_option_function<std::string>(name, [&flags, key](const std::string& v) { flags[key] = v; }, help);
  };
  auto number_flag = [&flags](CLI::App* sub, const std::string& name, const std::string& key, const std::string& help) {
    sub->add_option_function<double>(name, [&flags, key](double v) { flags[key] = v; }, help);
  };

  auto* merge = app.add_subcommand("merge", "Combine checkpoints with a coefficients file");
  string_flag(merge, "--manifest", "manifest", "Checkpoint manifest");
  string_flag(merge, "--coefficients", "coefficients", "Coefficients JSON");
  string_flag(merge, "--out", "out", "Output container");

  auto* ema = app.add_subcommand("ema", "Exponential moving average of a checkpoint set");
  string_flag(ema, "--manifest", "manifest", "Checkpoint manifest");
  number_flag(ema, "--rate", "rate", "EMA rate in (0, 1)");
  string_flag(ema, "--form", "form", "practice or theory");
  string_flag(ema, "--out", "out", "Output container");

  auto* grid = app.add_subcommand("ema-grid", "Evaluate the EMA at several rates");
  string_flag(grid, "--manifest", "manifest", "Checkpoint manifest");
  string_flag(grid, "--report", "report", "Report JSON path");
  grid->add_option_function<std::vector<double>>(
      "--rates", [&flags](const std::vector<double>& v) { flags["rates"] = v; }, "EMA rates")->delimiter(',');

  auto* search = app.add_subcommand("search", "Evolutionary search for merge coefficients");
  auto* landscape = app.add_subcommand("landscape", "Metric over the plane through three checkpoints");
  auto* simulate = app.add_subcommand("simulate-theory", "Noisy SGD simulation and convergence bounds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("config", e.what(), 2);
  }
  if (*seed_opt) global.seed = seed;
  if (*par_opt) global.parallelism = parallelism;

  try {
    nlohmann::json cfg = lcsc::cli::base_config(global);
    cfg.update(flags);
    if (*merge) lcsc::cli::cmd_merge(global, std::move(cfg), std::cout);
    else if (*ema) lcsc::cli::cmd_ema(global, std::move(cfg), std::cout);
    else if (*grid) lcsc::cli::cmd_ema_grid(global, std::move(cfg), std::cout);
    else if (*search) lcsc::cli::cmd_search(global, std::move(cfg), std::cout);
    else if (*landscape) lcsc::cli::cmd_landscape(global, std::move(cfg), std::cout);
    else if (*simulate) lcsc::cli::cmd_simulate(global, std::move(cfg), std::cout);
  } catch (const lcsc::Error& e) {
    return fail(kind_name(e.kind()), e.what(), exit_code(e.kind()));
  } catch (const nlohmann::json::exception& e) {
    return fail("config", e.what(), 2);
  } catch (const std::filesystem::filesystem_error& e) {
    return fail("io", e.what(), 4);
  } catch (const std::exception& e) {
    return fail("internal", e.what(), 1);
  }
  return 0;
}
