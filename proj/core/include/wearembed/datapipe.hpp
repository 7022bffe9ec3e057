// Copyright 2026 The wearembed Authors.
// SPDX-License-Identifier: Apache-2.0

// Raw measurements -> masked day-long series, synthetic populations, and
// user-level / chronological splits.

#pragma once

#include <array>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numbers>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace wearembed {

inline constexpr std::size_t kMinutesPerDay = 1440;

using Date = std::chrono::sys_days;

std::string format_date(Date date);
/// Parses YYYY-MM-DD; throws std::invalid_argument on malformed input.
Date parse_date(std::string_view text);
Date date_of_epoch_minute(std::int64_t epoch_minute);

struct MeasurementRecord {
  std::string user_id;
  std::int64_t epoch_minute = 0;
  double value = 0.0;  // beats per minute, > 0

  friend bool operator==(const MeasurementRecord&, const MeasurementRecord&) = default;
};

/// One user-day: 1440 minute slots. A zero value marks a missing slot and
/// mask[k] == 0 exactly when values[k] == 0.
struct DayLongSeries {
  std::string user_id;
  Date date{};
  std::vector<double> values = std::vector<double>(kMinutesPerDay, 0.0);
  std::vector<std::uint8_t> mask = std::vector<std::uint8_t>(kMinutesPerDay, 0);

  /// Fraction of measured slots.
  double completeness() const;

  friend bool operator==(const DayLongSeries&, const DayLongSeries&) = default;
};

/// Categorical (string) or numeric label.
using Label = std::variant<std::string, double>;

struct UserArchive {
  std::string user_id;
  std::vector<DayLongSeries> days;  // strictly increasing dates
  std::map<std::string, Label> labels;

  friend bool operator==(const UserArchive&, const UserArchive&) = default;
};

std::size_t total_days(const std::vector<UserArchive>& archives);

struct IngestResult {
  std::vector<MeasurementRecord> records;  // sorted by (user_id, epoch_minute)
  std::size_t malformed_lines = 0;
};

/// Reads header-free `user_id,value,epoch_minute` lines. Lines that do not
/// parse, or carry a value <= 0, are skipped and counted. Throws
/// std::runtime_error if the file cannot be opened.
IngestResult ingest_csv(const std::filesystem::path& path);
IngestResult ingest_csv_text(std::string_view text);

/// One DayLongSeries per (user, UTC day) with at least one record.
/// Same-minute records are averaged. Input must be sorted as ingest_csv
/// returns it.
std::vector<UserArchive> segment_days(const std::vector<MeasurementRecord>& records);

/// Inverse of segment_days: one record per measured slot.
std::vector<MeasurementRecord> to_records(const std::vector<UserArchive>& archives);

struct SynthSpec {
  std::size_t n_users = 16;
  std::size_t days_per_user = 30;
  double baseline_mean = 70.0;
  double baseline_std = 6.0;
  double amplitude_min = 5.0;
  double amplitude_max = 15.0;
  double phase_min = 0.0;
  double phase_max = 2.0 * std::numbers::pi;
  double noise_std = 3.0;
  /// Probability of (another) gap event in a day; the gap count per day is
  /// geometric with this continuation probability.
  double gap_rate = 0.3;
  /// Mean length in minutes of one gap (geometric distribution).
  double gap_mean_length = 120.0;
  std::uint64_t seed = 7;
  Date start_date = parse_date("2018-01-01");
};

/// Throws std::invalid_argument if counts are zero or rates leave [0, 1].
void validate(const SynthSpec& spec);

/// Users u000, u001, ... with days starting at spec.start_date. Each user
/// carries labels `baseline_level` (high/low), `chronotype`
/// (early/intermediate/late) and `sleep_hours` (numeric).
std::vector<UserArchive> generate_synthetic(const SynthSpec& spec);

struct UserSplit {
  std::vector<std::size_t> train;  // archive indices, ascending
  std::vector<std::size_t> valid;
  std::vector<std::size_t> test;
};

/// User-level partition. Valid and test sizes are rounded to nearest and
/// train takes the remainder. Throws for fewer than 3 users or fractions
/// that do not sum to 1.
UserSplit split_labels(const std::vector<UserArchive>& archives,
                       std::array<double, 3> fractions = {0.6, 0.1, 0.3}, std::uint64_t seed = 0);
/// The same partition over indices 0..n_users-1.
UserSplit split_labels(std::size_t n_users, std::array<double, 3> fractions, std::uint64_t seed);

struct ChronoSplit {
  std::vector<UserArchive> embed_train;  // date < train_end
  std::vector<UserArchive> valid;        // train_end <= date < valid_end
  std::vector<UserArchive> test;         // valid_end <= date < test_end
  std::size_t dropped_days = 0;          // date >= test_end
  std::vector<std::string> warnings;
};

/// Date-based split over half-open intervals. Users keep their labels and
/// appear in a bucket only if they have days there. Empty buckets produce a
/// warning. Throws unless train_end < valid_end < test_end.
ChronoSplit split_chronological(const std::vector<UserArchive>& archives, Date train_end,
                                Date valid_end, Date test_end);

}  // namespace wearembed
