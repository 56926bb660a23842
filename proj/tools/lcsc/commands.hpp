// Copyright (c) 2026, The lcsc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>

#include <nlohmann/json.hpp>

namespace lcsc::cli {

struct GlobalOptions {
  std::string config;  // empty when not given
  std::optional<std::uint64_t> seed;
  std::optional<std::uint32_t> parallelism;
};

/// Config document for a subcommand: the --config file (or {}) with any
/// flag values layered on top.
nlohmann::json base_config(const GlobalOptions& global);

// Each command reads its keys from `cfg`, writes its outputs and prints a
// one-document JSON summary to `out`.
void cmd_merge(const GlobalOptions& global, nlohmann::json cfg, std::ostream& out);
void cmd_ema(const GlobalOptions& global, nlohmann::json cfg, std::ostream& out);
void cmd_ema_grid(const GlobalOptions& global, nlohmann::json cfg, std::ostream& out);
void cmd_search(const GlobalOptions& global, nlohmann::json cfg, std::ostream& out);
void cmd_landscape(const GlobalOptions& global, nlohmann::json cfg, std::ostream& out);
void cmd_simulate(const GlobalOptions& global, nlohmann::json cfg, std::ostream& out);

}  // namespace lcsc::cli
