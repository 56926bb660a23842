// Copyright (c) 2026, The lcsc Authors
// SPDX-License-Identifier: Apache-2.0

#include "run_config.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <vector>

#include <fmt/format.h>

#include <lcsc/checkpoint_store.hpp>
#include <lcsc/error.hpp>

namespace lcsc::cli {

using nlohmann::json;

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
  std::ostringstream text;
  text << in.rdbuf();
  try {
    return json::parse(text.str());
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("{}: invalid JSON: {}", path.string(), e.what()));
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
  out << text;
  if (!out.flush()) throw IoError(fmt::format("write to '{}' failed", path.string()));
}

void write_json_file(const std::filesystem::path& path, const json& j) { write_text_file(path, j.dump(2) + "\n"); }

void reject_unknown_keys(const json& j, std::initializer_list<std::string_view> allowed, std::string_view where) {
  if (!j.is_object()) throw ConfigError(fmt::format("{} must be a JSON object", where));
  for (const auto& [key, _] : j.items())
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError(fmt::format("{}: unknown key '{}'", where, key));
}

template <typename T>
T require(const json& j, std::string_view key, std::string_view where) {
  const auto it = j.find(key);
  if (it == j.end()) throw ConfigError(fmt::format("{}: missing required key '{}'", where, key));
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(fmt::format("{}: key '{}' has the wrong type", where, key));
  }
}

template <typename T>
T value_or(const json& j, std::string_view key, T fallback, std::string_view where) {
  return j.contains(key) ? require<T>(j, key, where) : fallback;
}

template double require<double>(const json&, std::string_view, std::string_view);
template std::string require<std::string>(const json&, std::string_view, std::string_view);
template json require<json>(const json&, std::string_view, std::string_view);
template std::uint64_t require<std::uint64_t>(const json&, std::string_view, std::string_view);
template std::vector<double> require<std::vector<double>>(const json&, std::string_view, std::string_view);
template std::vector<std::string> require<std::vector<std::string>>(const json&, std::string_view, std::string_view);
template double value_or<double>(const json&, std::string_view, double, std::string_view);
template std::string value_or<std::string>(const json&, std::string_view, std::string, std::string_view);
template std::uint64_t value_or<std::uint64_t>(const json&, std::string_view, std::uint64_t, std::string_view);
template std::vector<double> value_or<std::vector<double>>(const json&, std::string_view, std::vector<double>, std::string_view);

std::filesystem::path require_path(const json& j, std::string_view key, std::string_view where) {
  auto p = require<std::string>(j, key, where);
  if (p.empty()) throw ConfigError(fmt::format("{}: '{}' must be a non-empty path", where, key));
  return p;
}

std::unique_ptr<Evaluator> make_evaluator(const json& spec, const Schema& schema) {
  constexpr std::string_view where = "evaluator";
  const auto kind = require<std::string>(spec, "kind", where);
  if (kind == "quadratic" || kind == "trajectory_replay") {
    if (kind == "quadratic") reject_unknown_keys(spec, {"kind", "beta", "target"}, where);
    else reject_unknown_keys(spec, {"kind", "beta"}, where);
    const double beta = value_or<double>(spec, "beta", 1.0, where);
    if (!spec.contains("target")) return std::make_unique<QuadraticEvaluator>(QuadraticEvaluator::centered(schema, beta));
    auto target = load_checkpoint(require_path(spec, "target", where)).weights;
    if (auto diff = first_schema_difference(target.schema(), schema))
      throw ConfigError(fmt::format("evaluator target does not match the checkpoint schema at tensor '{}'", *diff));
    return std::make_unique<QuadraticEvaluator>(std::move(target), beta);
  }
  if (kind == "external") {
    reject_unknown_keys(spec, {"kind", "command", "workdir", "timeout_secs"}, where);
    ExternalCommand cmd;
    const auto& c = spec.contains("command") ? spec["command"] : json();
    if (c.is_string()) cmd.argv = {c.get<std::string>()};
    else if (c.is_array()) cmd.argv = require<std::vector<std::string>>(spec, "command", where);
    else throw ConfigError("evaluator: 'command' must be a string or an array of strings");
    if (spec.contains("workdir")) cmd.workdir = require_path(spec, "workdir", where);
    const double secs = value_or<double>(spec, "timeout_secs", 3600.0, where);
    if (!(secs > 0.0) || !std::isfinite(secs)) throw ConfigError("evaluator: timeout_secs must be positive");
    cmd.timeout = std::chrono::milliseconds(static_cast<std::int64_t>(std::ceil(secs * 1000.0)));
    return std::make_unique<ExternalEvaluator>(std::move(cmd));
  }
  throw ConfigError(fmt::format("evaluator: unknown kind '{}' (expected quadratic, trajectory_replay or external)", kind));
}

}  // namespace lcsc::cli
