// Copyright 2026 The wearembed Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "wearembed/datapipe.hpp"

namespace wearembed {

/// Archive cache: one line per day, `user_id,YYYY-MM-DD,v0,...,v1439`, with
/// masked slots written as `0`. User labels go to a sidecar file
/// `<path>.labels` holding `user_id,attribute,value` lines; values that
/// parse as numbers are numeric labels.
void write_archive(const std::filesystem::path& path, const std::vector<UserArchive>& archives);
std::vector<UserArchive> read_archive(const std::filesystem::path& path);

std::string archive_to_text(const std::vector<UserArchive>& archives);
std::string labels_to_text(const std::vector<UserArchive>& archives);
std::vector<UserArchive> archive_from_text(const std::string& text);
void apply_labels_text(std::vector<UserArchive>& archives, const std::string& text);

std::filesystem::path labels_path(const std::filesystem::path& archive_path);

}  // namespace wearembed
