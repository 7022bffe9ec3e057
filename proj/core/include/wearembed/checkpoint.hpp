// Copyright 2026 The wearembed Authors.
// SPDX-License-Identifier: Apache-2.0

// Binary trainer checkpoint.
//
//   "PSPC" | u32 version | u32 entry count
//   entries: u32 name length | name | u32 rank | u64 dims[rank] | f64 data
//   u64 text length | key = value text (configs, rng and loop state)
//   u32 CRC-32 of every preceding byte
//
// All integers and floats are little-endian.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "wearembed/trainer.hpp"

namespace wearembed {

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string serialize_checkpoint(const TrainerState& state,
                                 std::uint32_t version = kCheckpointVersion);
/// Throws VersionError for another format version and IntegrityError for a
/// damaged or truncated payload.
TrainerState deserialize_checkpoint(std::string_view bytes);

/// Writes to a temporary sibling and renames it into place, so an existing
/// checkpoint survives a failed write. Throws std::runtime_error when the
/// location is not writable.
void save_checkpoint(const std::filesystem::path& path, const TrainerState& state);
TrainerState load_checkpoint(const std::filesystem::path& path);

}  // namespace wearembed
