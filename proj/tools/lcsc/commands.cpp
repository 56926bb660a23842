// Copyright (c) 2026, The lcsc Authors
// SPDX-License-Identifier: Apache-2.0

#include "commands.hpp"

#include <chrono>
#include <sstream>
#include <vector>

#include <fmt/format.h>

#include <lcsc/checkpoint_store.hpp>
#include <lcsc/error.hpp>
#include <lcsc/evaluator.hpp>
#include <lcsc/evo_search.hpp>
#include <lcsc/landscape.hpp>
#include <lcsc/merge.hpp>
#include <lcsc/sgd_sim.hpp>

#include "run_config.hpp"

namespace lcsc::cli {

using nlohmann::json;

namespace {

ContainerMetadata echo_metadata(std::string_view command, const json& cfg) {
  return {{"format_version", std::to_string(kFormatVersion)}, {"command", std::string(command)}, {"config", cfg.dump()}};
}

json envelope(std::string_view command, const json& cfg) {
  return {{"format_version", kFormatVersion}, {"command", command}, {"config", cfg}};
}

CheckpointSet load_windowed(const json& cfg, std::string_view where) {
  CheckpointSet set = load_set(require_path(cfg, "manifest", where));
  if (!cfg.contains("window")) return set;
  const json& w = cfg["window"];
  reject_unknown_keys(w, {"end_iter", "size", "interval"}, "window");
  return select_window(set, require<std::uint64_t>(w, "end_iter", "window"), require<std::uint64_t>(w, "size", "window"),
                       require<std::uint64_t>(w, "interval", "window"));
}

void apply_parallelism(const GlobalOptions& global, json& cfg, std::string_view key = "parallelism") {
  if (global.parallelism) cfg[std::string(key)] = *global.parallelism;
}

std::size_t parallelism_of(const json& cfg, std::string_view where) {
  const auto p = value_or<std::uint64_t>(cfg, "parallelism", 1, where);
  if (p < 1) throw ConfigError(fmt::format("{}: parallelism must be at least 1", where));
  return static_cast<std::size_t>(p);
}

}  // namespace

json base_config(const GlobalOptions& global) {
  if (global.config.empty()) return json::object();
  json cfg = read_json_file(global.config);
  if (!cfg.is_object()) throw ConfigError(fmt::format("{}: config must be a JSON object", global.config));
  return cfg;
}

void cmd_merge(const GlobalOptions&, json cfg, std::ostream& out) {
  constexpr std::string_view where = "merge config";
  reject_unknown_keys(cfg, {"manifest", "coefficients", "out"}, where);
  const auto manifest_path = require_path(cfg, "manifest", where);
  const CoefficientVector coeffs = coefficients_from_json(read_json_file(require_path(cfg, "coefficients", where)));
  const auto out_path = require_path(cfg, "out", where);

  TensorMap merged;
  if (read_manifest(manifest_path).kind == ManifestKind::kLora) {
    merged = combine_lora(load_lora_set(manifest_path), coeffs);
  } else {
    merged = combine(load_set(manifest_path), coeffs);
  }
  save_checkpoint(out_path, merged, echo_metadata("merge", cfg));
  json summary = envelope("merge", cfg);
  summary["coefficients"] = coeffs.expanded();
  out << summary.dump() << "\n";
}

void cmd_ema(const GlobalOptions&, json cfg, std::ostream& out) {
  constexpr std::string_view where = "ema config";
  reject_unknown_keys(cfg, {"manifest", "rate", "form", "out", "window"}, where);
  EmaConfig ema;
  ema.rate = value_or<double>(cfg, "rate", ema.rate, where);
  ema.form = parse_ema_form(value_or<std::string>(cfg, "form", std::string(ema_form_name(ema.form)), where));
  validate(ema);
  cfg["rate"] = ema.rate;
  cfg["form"] = ema_form_name(ema.form);
  const CheckpointSet set = load_windowed(cfg, where);
  const auto out_path = require_path(cfg, "out", where);
  save_checkpoint(out_path, ema_recurrence(set, ema), echo_metadata("ema", cfg));
  json summary = envelope("ema", cfg);
  summary["iterations"] = set.iterations();
  summary["coefficients"] = ema_coefficients(set.size(), ema).values;
  out << summary.dump() << "\n";
}

void cmd_ema_grid(const GlobalOptions&, json cfg, std::ostream& out) {
  constexpr std::string_view where = "ema-grid config";
  reject_unknown_keys(cfg, {"manifest", "rates", "form", "evaluator", "report", "window"}, where);
  const auto rates = value_or<std::vector<double>>(cfg, "rates", SearchConfig{}.init_rates, where);
  const EmaForm form = parse_ema_form(value_or<std::string>(cfg, "form", "practice", where));
  cfg["rates"] = rates;
  cfg["form"] = ema_form_name(form);
  const CheckpointSet set = load_windowed(cfg, where);
  const auto evaluator = make_evaluator(require<json>(cfg, "evaluator", where), set.schema());
  const EmaGridResult r = ema_grid(set, rates, *evaluator, form);

  json report = envelope("ema-grid", cfg);
  report["iterations"] = set.iterations();
  report["best_rate"] = r.best_rate;
  report["best_fitness"] = r.best_fitness;
  report["points"] = json::array();
  for (const auto& p : r.points) report["points"].push_back({{"rate", p.rate}, {"fitness", p.fitness}});
  if (cfg.contains("report")) write_json_file(require_path(cfg, "report", where), report);
  out << report.dump() << "\n";
}

void cmd_search(const GlobalOptions& global, json cfg, std::ostream& out) {
  constexpr std::string_view where = "search config";
  reject_unknown_keys(cfg, {"manifest", "window", "evaluator", "search", "outputs"}, where);
  json search_json = cfg.contains("search") ? cfg["search"] : json::object();
  if (global.seed) search_json["seed"] = *global.seed;
  apply_parallelism(global, search_json);
  const SearchConfig search = search_config_from_json(search_json);
  cfg["search"] = to_json(search);

  const json& outputs = require<json>(cfg, "outputs", where);
  reject_unknown_keys(outputs, {"checkpoint", "coefficients", "report"}, "outputs");
  const auto checkpoint_path = require_path(outputs, "checkpoint", "outputs");
  const auto coefficients_path = require_path(outputs, "coefficients", "outputs");
  const auto report_path = require_path(outputs, "report", "outputs");

  const CheckpointSet set = load_windowed(cfg, where);
  const auto evaluator = make_evaluator(require<json>(cfg, "evaluator", where), set.schema());
  const SearchResult result = run_search(set, search, *evaluator);

  save_checkpoint(checkpoint_path, combine(set, result.best.coeffs), echo_metadata("search", cfg));
  json coefficients = coefficients_to_json(result, set, search);
  coefficients["config"] = cfg;
  write_json_file(coefficients_path, coefficients);
  json report = report_to_json(result, set, search);
  report["command"] = "search";
  report["config"] = cfg;
  write_json_file(report_path, report);

  out << json{{"format_version", kFormatVersion},
              {"best_fitness", result.best.fitness},
              {"evaluations", result.evaluations},
              {"cache_hits", result.cache_hits}}
             .dump()
      << "\n";
}

void cmd_landscape(const GlobalOptions& global, json cfg, std::ostream& out) {
  constexpr std::string_view where = "landscape config";
  reject_unknown_keys(cfg, {"checkpoints", "grid", "evaluator", "out", "report", "parallelism"}, where);
  apply_parallelism(global, cfg);
  const auto paths = require<std::vector<std::string>>(cfg, "checkpoints", where);
  if (paths.size() != 3) throw ConfigError(fmt::format("{}: 'checkpoints' needs exactly 3 paths, got {}", where, paths.size()));

  const json& g = require<json>(cfg, "grid", where);
  reject_unknown_keys(g, {"x", "y"}, "grid");
  auto axis = [](const json& a, std::string_view name) {
    reject_unknown_keys(a, {"min", "max", "steps"}, name);
    return GridAxis{require<double>(a, "min", name), require<double>(a, "max", name),
                    static_cast<std::size_t>(require<std::uint64_t>(a, "steps", name))};
  };
  const GridSpec grid{axis(require<json>(g, "x", "grid"), "grid.x"), axis(require<json>(g, "y", "grid"), "grid.y")};
  validate(grid);
  const auto csv_path = require_path(cfg, "out", where);
  const auto report_path = require_path(cfg, "report", where);

  std::vector<Checkpoint> cps;
  for (const auto& p : paths) cps.push_back(load_checkpoint(p));
  const auto evaluator = make_evaluator(require<json>(cfg, "evaluator", where), cps[0].weights.schema());
  const auto rows = sweep(cps[0], cps[1], cps[2], grid, *evaluator, parallelism_of(cfg, where));

  std::ostringstream csv;
  write_csv(csv, rows);
  write_text_file(csv_path, csv.str());
  json report = envelope("landscape", cfg);
  report["rows"] = rows.size();
  report["csv"] = csv_path.string();
  write_json_file(report_path, report);
  out << report.dump() << "\n";
}

void cmd_simulate(const GlobalOptions& global, json cfg, std::ostream& out) {
  constexpr std::string_view where = "simulate-theory config";
  reject_unknown_keys(cfg, {"sim", "ema_rates", "mixture", "out"}, where);
  json sim_json = cfg.contains("sim") ? cfg["sim"] : json::object();
  json mix_json = cfg.contains("mixture") ? cfg["mixture"] : json::object();
  if (global.seed) sim_json["seed"] = mix_json["seed"] = *global.seed;
  apply_parallelism(global, sim_json);
  const SimConfig sim = sim_config_from_json(sim_json);
  const Theorem3Config mixture = theorem3_config_from_json(mix_json);
  validate(mixture);
  const auto rates = value_or<std::vector<double>>(cfg, "ema_rates", {0.9, 0.99, 0.999}, where);
  for (double r : rates) validate(EmaConfig{r, EmaForm::kTheory});
  cfg["sim"] = to_json(sim);
  cfg["mixture"] = to_json(mixture);
  cfg["ema_rates"] = rates;
  const auto out_path = require_path(cfg, "out", where);

  const TrajectoryStats stats = trajectory_stats(sim, rates);
  json report = envelope("simulate-theory", cfg);
  report["last_iterate"] = {{"gap", stats.last_iter_gap},
                            {"bound", stats.bound_last},
                            {"holds", stats.last_iter_gap <= stats.bound_last}};
  report["ema"] = json::array();
  for (double r : rates) {
    json e{{"rate", r}, {"gap", stats.ema_gaps.at(r)}, {"horizon", ema_horizon(r)}};
    if (const auto it = stats.bound_ema.find(r); it != stats.bound_ema.end()) {
      e["bound"] = it->second;
      e["holds"] = stats.ema_gaps.at(r) <= it->second;
    } else {
      e["bound"] = nullptr;  // N is not above the horizon
      e["holds"] = nullptr;
    }
    e["below_last_iterate"] = stats.ema_gaps.at(r) < stats.last_iter_gap;
    report["ema"].push_back(std::move(e));
  }
  const Theorem3Result m = theorem3_check(mixture);
  report["mixture"] = {{"min_distance", m.min_distance}, {"trial_distances", m.trial_distances}, {"redraws", m.redraws}};
  write_json_file(out_path, report);
  out << report.dump() << "\n";
}

}  // namespace lcsc::cli
