// Copyright 2026 The wearembed Authors.
// SPDX-License-Identifier: Apache-2.0

#include "wearembed/archive_io.hpp"

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "wearembed/errors.hpp"
#include "wearembed/text_format.hpp"

namespace wearembed {
namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace

std::filesystem::path labels_path(const std::filesystem::path& archive_path) {
  return std::filesystem::path(archive_path.string() + ".labels");
}

std::string archive_to_text(const std::vector<UserArchive>& archives) {
  std::string out;
  for (const auto& archive : archives) {
    for (const auto& day : archive.days) {
      out += archive.user_id;
      out += ',';
      out += format_date(day.date);
      for (std::size_t k = 0; k < kMinutesPerDay; ++k) {
        out += ',';
        out += day.mask[k] ? format_exact(day.values[k]) : std::string("0");
      }
      out += '\n';
    }
  }
  return out;
}

std::string labels_to_text(const std::vector<UserArchive>& archives) {
  std::string out;
  for (const auto& archive : archives) {
    for (const auto& [name, label] : archive.labels) {
      out += archive.user_id + ',' + name + ',';
      if (const auto* s = std::get_if<std::string>(&label)) {
        out += *s;
      } else {
        out += format_exact(std::get<double>(label));
      }
      out += '\n';
    }
  }
  return out;
}

std::vector<UserArchive> archive_from_text(const std::string& text) {
  std::vector<UserArchive> archives;
  std::map<std::string, std::size_t> index;
  std::size_t line_no = 0;
  for (std::string_view line : split_view(text, '\n')) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    const auto fields = split_view(line, ',');
    if (fields.size() != kMinutesPerDay + 2) {
      throw std::runtime_error("archive line " + std::to_string(line_no) + ": expected " +
                               std::to_string(kMinutesPerDay + 2) + " fields, got " +
                               std::to_string(fields.size()));
    }
    DayLongSeries day;
    day.user_id = std::string(fields[0]);
    day.date = parse_date(fields[1]);
    for (std::size_t k = 0; k < kMinutesPerDay; ++k) {
      const auto v = parse_double(fields[k + 2]);
      if (!v || *v < 0.0) {
        throw std::runtime_error("archive line " + std::to_string(line_no) + ": bad value '" +
                                 std::string(fields[k + 2]) + "'");
      }
      day.values[k] = *v;
      day.mask[k] = *v != 0.0 ? 1 : 0;
    }
    auto [it, inserted] = index.try_emplace(day.user_id, archives.size());
    if (inserted) archives.push_back(UserArchive{day.user_id, {}, {}});
    auto& days = archives[it->second].days;
    if (!days.empty() && !(days.back().date < day.date)) {
      throw std::runtime_error("archive line " + std::to_string(line_no) +
                               ": days of a user must be strictly increasing");
    }
    days.push_back(std::move(day));
  }
  return archives;
}

void apply_labels_text(std::vector<UserArchive>& archives, const std::string& text) {
  std::size_t line_no = 0;
  for (std::string_view line : split_view(text, '\n')) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    const auto fields = split_view(line, ',');
    if (fields.size() != 3) {
      throw std::runtime_error("labels line " + std::to_string(line_no) +
                               ": expected user_id,attribute,value");
    }
    for (auto& archive : archives) {
      if (archive.user_id != fields[0]) continue;
      Label label;
      if (auto v = parse_double(fields[2])) {
        label = *v;
      } else {
        label = std::string(fields[2]);
      }
      archive.labels[std::string(fields[1])] = std::move(label);
    }
  }
}

void write_archive(const std::filesystem::path& path, const std::vector<UserArchive>& archives) {
  write_file(path, archive_to_text(archives));
  const std::string labels = labels_to_text(archives);
  if (!labels.empty()) {
    write_file(labels_path(path), labels);
  } else {
    std::error_code ec;
    std::filesystem::remove(labels_path(path), ec);
  }
}

std::vector<UserArchive> read_archive(const std::filesystem::path& path) {
  auto archives = archive_from_text(read_file(path));
  const auto sidecar = labels_path(path);
  if (std::filesystem::exists(sidecar)) apply_labels_text(archives, read_file(sidecar));
  return archives;
}

}  // namespace wearembed
