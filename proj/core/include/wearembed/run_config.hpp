// Copyright 2026 The wearembed Authors.
// SPDX-License-Identifier: Apache-2.0

// Run configuration: `key = value` text in [data], [model], [train] and
// [eval] sections. Every key is unique across sections, so the same name
// doubles as a command-line flag.

#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "wearembed/autoencoder.hpp"
#include "wearembed/datapipe.hpp"
#include "wearembed/evalsuite.hpp"
#include "wearembed/trainer.hpp"

namespace wearembed {

struct RunConfig {
  SynthSpec data;
  ArchConfig model;
  TrainConfig train;
  EvalConfig eval;
};

struct ConfigKey {
  std::string section;
  std::string key;
  std::string help;
};

/// Every recognised key in a fixed order.
const std::vector<ConfigKey>& config_keys();

/// Throws std::invalid_argument for an unknown key or an unparsable value.
void set_config_value(RunConfig& config, std::string_view key, std::string_view value);
std::string get_config_value(const RunConfig& config, std::string_view key);

/// Keys must sit in their own section. Throws std::invalid_argument naming
/// the offending line.
RunConfig parse_run_config(std::string_view text, RunConfig base = {});
/// Throws std::runtime_error when the file cannot be read.
RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = {});

/// `[section]` followed by `key = value` lines.
std::string format_config_section(const RunConfig& config, std::string_view section);
std::string format_run_config(const RunConfig& config);

}  // namespace wearembed
