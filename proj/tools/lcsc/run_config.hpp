// Copyright (c) 2026, The lcsc Authors
// SPDX-License-Identifier: Apache-2.0
//
// JSON config plumbing shared by the lcsc subcommands.

#pragma once

#include <filesystem>
#include <initializer_list>
#include <memory>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include <lcsc/evaluator.hpp>
#include <lcsc/tensor_map.hpp>

namespace lcsc::cli {

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);
void write_text_file(const std::filesystem::path& path, const std::string& text);

/// Throws ConfigError naming `where` for keys outside `allowed`.
void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<std::string_view> allowed, std::string_view where);

/// j[key] as T, or ConfigError mentioning `where` if absent or mistyped.
template <typename T>
T require(const nlohmann::json& j, std::string_view key, std::string_view where);

template <typename T>
T value_or(const nlohmann::json& j, std::string_view key, T fallback, std::string_view where);

std::filesystem::path require_path(const nlohmann::json& j, std::string_view key, std::string_view where);

/// Evaluator config:
///   {"kind": "quadratic", "beta": b, "target": "<container>"}   target defaults to zeros
///   {"kind": "trajectory_replay", "beta": b}                      the simulation objective
///   {"kind": "external", "command": "<shell line>" | ["argv", ...],
///    "workdir": "<dir>", "timeout_secs": s}
std::unique_ptr<Evaluator> make_evaluator(const nlohmann::json& spec, const Schema& schema);

}  // namespace lcsc::cli
